//! Planar apertures, their propagating wavenumber-mode lattice and the
//! Fourier matrices mapping angular-domain modes onto array elements.
//!
//! All lengths are normalised to the wavelength. Element `(i, j)` sits at
//! `(i·spacing_x, j·spacing_y)` (corner anchored) and maps to matrix row
//! `i·N_y + j`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::scalar::{cis, Real};

/// Rectangular planar array of `L_x × L_y` wavelengths sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture<T> {
    lx: T,
    ly: T,
    spacing_x: T,
    spacing_y: T,
    nx: usize,
    ny: usize,
}

fn element_count<T: Real>(side: T, spacing: T, axis: &str) -> Result<usize> {
    if !(side.is_finite() && side > T::zero()) {
        return Err(Error::InvalidAperture(format!("side length along {axis} must be positive")));
    }
    if !(spacing.is_finite() && spacing > T::zero()) {
        return Err(Error::InvalidAperture(format!("element spacing along {axis} must be positive")));
    }
    if spacing > side {
        return Err(Error::InvalidAperture(format!(
            "element spacing along {axis} exceeds the side length"
        )));
    }
    let ratio = (side / spacing).as_f64();
    let rounded = ratio.round();
    // 1e-9 absolute, widened to a few ulps of the ratio for single precision.
    let tol = 1e-9f64.max(4.0 * T::default_epsilon().as_f64() * ratio);
    if (ratio - rounded).abs() > tol {
        return Err(Error::InvalidAperture(format!(
            "side/spacing along {axis} is {ratio}, not an integer"
        )));
    }
    Ok(rounded as usize)
}

impl<T: Real> Aperture<T> {
    pub fn new(lx: T, ly: T, spacing_x: T, spacing_y: T) -> Result<Self> {
        let nx = element_count(lx, spacing_x, "x")?;
        let ny = element_count(ly, spacing_y, "y")?;
        Ok(Self {
            lx,
            ly,
            spacing_x,
            spacing_y,
            nx,
            ny,
        })
    }

    /// Square aperture with equal spacing along both axes.
    pub fn square(side: T, spacing: T) -> Result<Self> {
        Self::new(side, side, spacing, spacing)
    }

    pub fn lx(&self) -> T {
        self.lx
    }

    pub fn ly(&self) -> T {
        self.ly
    }

    pub fn spacing_x(&self) -> T {
        self.spacing_x
    }

    pub fn spacing_y(&self) -> T {
        self.spacing_y
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total number of elements `N = N_x·N_y`.
    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Physical position of element `(i, j)` in wavelengths.
    pub fn element_position(&self, i: usize, j: usize) -> (T, T) {
        (T::count(i) * self.spacing_x, T::count(j) * self.spacing_y)
    }

    /// The same aperture with x and y exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            lx: self.ly,
            ly: self.lx,
            spacing_x: self.spacing_y,
            spacing_y: self.spacing_x,
            nx: self.ny,
            ny: self.nx,
        }
    }
}

/// Integer wavenumber-mode index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub l: i64,
    pub m: i64,
}

impl ModeIndex {
    pub const fn new(l: i64, m: i64) -> Self {
        Self { l, m }
    }
}

/// All propagating modes of an aperture, in lexicographic `(l, m)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet<T> {
    aperture: Aperture<T>,
    modes: Vec<ModeIndex>,
}

impl<T: Real> ModeSet<T> {
    /// Caller guarantees `modes` is sorted and duplicate free.
    pub(crate) fn from_raw(aperture: Aperture<T>, modes: Vec<ModeIndex>) -> Self {
        debug_assert!(modes.windows(2).all(|w| w[0] < w[1]));
        Self { aperture, modes }
    }

    pub fn aperture(&self) -> &Aperture<T> {
        &self.aperture
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn position(&self, mode: ModeIndex) -> Option<usize> {
        self.modes.binary_search(&mode).ok()
    }

    /// Residue of a mode on the element grid. Two modes with the same key
    /// produce identical Fourier columns.
    pub fn alias_key(&self, mode: ModeIndex) -> (usize, usize) {
        let nx = self.aperture.nx as i64;
        let ny = self.aperture.ny as i64;
        (mode.l.rem_euclid(nx) as usize, mode.m.rem_euclid(ny) as usize)
    }

    /// Groups of mode positions sharing one Fourier column, in order of the
    /// first member. Singletons for every spacing below half a wavelength.
    pub fn alias_classes(&self) -> Vec<Vec<usize>> {
        let mut first: std::collections::HashMap<(usize, usize), usize> = Default::default();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (pos, &mode) in self.modes.iter().enumerate() {
            let key = self.alias_key(mode);
            match first.get(&key) {
                Some(&c) => classes[c].push(pos),
                None => {
                    first.insert(key, classes.len());
                    classes.push(vec![pos]);
                }
            }
        }
        classes
    }

    pub fn is_alias_free(&self) -> bool {
        self.alias_classes().len() == self.modes.len()
    }
}

/// Enumerates every integer `(l, m)` with `(l/L_x)² + (m/L_y)² ≤ 1`.
///
/// The comparison is done as `l²L_y² + m²L_x² ≤ L_x²L_y²` with a relative
/// slack of a few ulps so lattice points exactly on the ellipse are admitted.
pub fn enumerate_modes<T: Real>(aperture: &Aperture<T>) -> ModeSet<T> {
    let lx = aperture.lx.as_f64();
    let ly = aperture.ly.as_f64();
    let (lx2, ly2) = (lx * lx, ly * ly);
    let bound = lx2 * ly2 * (1.0 + 1e-12);
    let lmax = lx.floor() as i64;
    let mmax = ly.floor() as i64;
    let mut modes = Vec::new();
    for l in -lmax..=lmax {
        for m in -mmax..=mmax {
            let (lf, mf) = (l as f64, m as f64);
            if lf * lf * ly2 + mf * mf * lx2 <= bound {
                modes.push(ModeIndex::new(l, m));
            }
        }
    }
    ModeSet {
        aperture: *aperture,
        modes,
    }
}

/// `⌈π·L_x·L_y⌉`, the asymptotic count of propagating modes.
pub fn formula_mode_count<T: Real>(aperture: &Aperture<T>) -> u64 {
    (std::f64::consts::PI * aperture.lx.as_f64() * aperture.ly.as_f64()).ceil() as u64
}

/// Semi-unitary `N × n` Fourier matrix of a mode set.
///
/// Entry `(i·N_y + j, k)` is `exp(+i2π(l·i/N_x + m·j/N_y)) / √N` for mode
/// `k = (l, m)`. The phase `l·i·spacing_x/L_x` is reduced to the exact
/// residue `(l·i mod N_x)/N_x`, so every column is a column of the
/// `N_x·N_y` two-dimensional DFT.
pub fn fourier_matrix<T: Real>(
    aperture: &Aperture<T>,
    modes: &ModeSet<T>,
) -> Result<DMatrix<Complex<T>>> {
    if modes.aperture() != aperture {
        return Err(Error::ApertureMismatch);
    }
    let (nx, ny) = (aperture.nx, aperture.ny);
    let twiddles = |n: usize| -> Vec<Complex<T>> {
        (0..n)
            .map(|k| cis(T::two_pi() * T::count(k) / T::count(n)))
            .collect()
    };
    let wx = twiddles(nx);
    let wy = twiddles(ny);
    let scale = T::one() / T::count(nx * ny).sqrt();
    let mut phi = DMatrix::zeros(nx * ny, modes.len());
    for (k, mode) in modes.modes().iter().enumerate() {
        let lr = mode.l.rem_euclid(nx as i64) as usize;
        let mr = mode.m.rem_euclid(ny as i64) as usize;
        for i in 0..nx {
            let ex = wx[(lr * i) % nx];
            for j in 0..ny {
                phi[(i * ny + j, k)] = ex * wy[(mr * j) % ny] * scale;
            }
        }
    }
    Ok(phi)
}

/// `‖ΦᴴΦ − I‖_F`.
pub fn semi_unitarity_defect<T: Real>(phi: &DMatrix<Complex<T>>) -> T {
    let gram = phi.adjoint() * phi;
    let eye = DMatrix::<Complex<T>>::identity(gram.nrows(), gram.ncols());
    (gram - eye).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(lx: f64, ly: f64) -> usize {
        // Scans a generous window with plain floating-point tests.
        let mut n = 0;
        for l in -50i64..=50 {
            for m in -50i64..=50 {
                let v = (l as f64 / lx).powi(2) + (m as f64 / ly).powi(2);
                if v <= 1.0 + 1e-12 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn lattice_count_l10() {
        let ap = Aperture::square(10.0, 0.5).unwrap();
        let set = enumerate_modes(&ap);
        assert_eq!(set.len(), 317);
        assert_eq!(set.len(), brute_force_count(10.0, 10.0));
        assert_eq!(formula_mode_count(&ap), 315);
    }

    #[test]
    fn unit_aperture_modes() {
        let ap = Aperture::square(1.0, 0.25).unwrap();
        let set = enumerate_modes(&ap);
        let expect = [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)].map(|(l, m)| ModeIndex::new(l, m));
        assert_eq!(set.modes(), &expect);
        assert_eq!(formula_mode_count(&ap), 4);
    }

    #[test]
    fn formula_count_rectangular() {
        let ap = Aperture::new(2.0, 5.0, 0.5, 0.5).unwrap();
        assert_eq!(formula_mode_count(&ap), 32);
    }

    #[test]
    fn axis_swap_relabels_modes() {
        let ap = Aperture::new(6.0, 3.0, 0.5, 0.25).unwrap();
        let a = enumerate_modes(&ap);
        let b = enumerate_modes(&ap.transposed());
        let mut swapped: Vec<_> = b.modes().iter().map(|k| ModeIndex::new(k.m, k.l)).collect();
        swapped.sort();
        assert_eq!(a.modes(), swapped.as_slice());
    }

    #[test]
    fn sign_flip_symmetry() {
        let ap = Aperture::new(7.5, 4.0, 0.25, 0.5).unwrap();
        let set = enumerate_modes(&ap);
        for k in set.modes() {
            assert!(set.position(ModeIndex::new(-k.l, -k.m)).is_some());
        }
        assert_eq!(set.len(), brute_force_count(7.5, 4.0));
    }

    #[test]
    fn rejects_non_integer_ratio() {
        assert!(matches!(
            Aperture::square(10.0, 0.3),
            Err(Error::InvalidAperture(_))
        ));
        assert!(Aperture::square(10.0, 0.0).is_err());
        assert!(Aperture::square(-1.0, 0.5).is_err());
        assert!(Aperture::square(1.0, 2.0).is_err());
        assert!(Aperture::new(4.0, 4.0, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn zero_mode_column_is_flat() {
        let ap = Aperture::square(4.0, 0.25).unwrap();
        let set = enumerate_modes(&ap);
        let phi = fourier_matrix(&ap, &set).unwrap();
        let k = set.position(ModeIndex::new(0, 0)).unwrap();
        let v = 1.0 / (ap.element_count() as f64).sqrt();
        for r in 0..phi.nrows() {
            assert!((phi[(r, k)] - Complex::new(v, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn direct_and_dft_constructions_agree() {
        let ap = Aperture::square(4.0, 0.25).unwrap();
        let set = enumerate_modes(&ap);
        let phi = fourier_matrix(&ap, &set).unwrap();
        let n = ap.element_count() as f64;
        let mut worst = 0.0f64;
        for (k, mode) in set.modes().iter().enumerate() {
            for i in 0..ap.nx() {
                for j in 0..ap.ny() {
                    let (x, y) = (i as f64 * 0.25, j as f64 * 0.25);
                    let phase = 2.0 * std::f64::consts::PI * (mode.l as f64 * x / 4.0 + mode.m as f64 * y / 4.0);
                    let direct = Complex::new(phase.cos(), phase.sin()) / n.sqrt();
                    worst = worst.max((phi[(i * ap.ny() + j, k)] - direct).norm());
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn semi_unitary_below_half_wavelength() {
        for (side, spacing) in [(10.0, 0.25), (6.0, 0.4), (3.0, 0.375)] {
            let ap = Aperture::square(side, spacing).unwrap();
            let set = enumerate_modes(&ap);
            assert!(set.is_alias_free());
            let phi = fourier_matrix(&ap, &set).unwrap();
            assert!(semi_unitarity_defect(&phi) < 1e-10);
        }
    }

    #[test]
    fn half_wavelength_aliases_only_the_axis_tips() {
        // At exactly λ/2 the modes (±L, 0) and (0, ±L) fold onto one column each.
        let ap = Aperture::square(10.0, 0.5).unwrap();
        let set = enumerate_modes(&ap);
        let merged: Vec<Vec<ModeIndex>> = set
            .alias_classes()
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| c.into_iter().map(|p| set.modes()[p]).collect())
            .collect();
        assert_eq!(
            merged,
            vec![
                vec![ModeIndex::new(-10, 0), ModeIndex::new(10, 0)],
                vec![ModeIndex::new(0, -10), ModeIndex::new(0, 10)],
            ]
        );
        assert_eq!(set.alias_classes().len(), 315);

        let phi = fourier_matrix(&ap, &set).unwrap();
        let keep: Vec<usize> = set.alias_classes().iter().map(|c| c[0]).collect();
        let sub = phi.select_columns(&keep);
        assert!(semi_unitarity_defect(&sub) < 1e-10);
    }

    #[test]
    fn mismatched_aperture_is_rejected() {
        let a = Aperture::square(2.0, 0.5).unwrap();
        let b = Aperture::square(2.0, 0.25).unwrap();
        assert_eq!(fourier_matrix(&b, &enumerate_modes(&a)), Err(Error::ApertureMismatch));
    }

    #[test]
    fn single_precision_aperture() {
        let ap = Aperture::<f32>::square(4.0, 0.25).unwrap();
        let set = enumerate_modes(&ap);
        assert_eq!(set.len(), 49);
        let phi = fourier_matrix(&ap, &set).unwrap();
        assert!(semi_unitarity_defect(&phi) < 1e-4);
    }
}
