//! Table serialisation and atomic file output.

use std::io::Write;
use std::path::Path;

use hmimo_core::harness::{Cell, Table};
use serde_json::{Map, Number, Value};

use crate::config::Format;

/// 17 significant digits, positional where that stays readable, no locale.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    if (-5..17).contains(&exponent) {
        // log10 can land one off near powers of ten; formatting with one
        // digit too many is harmless, one too few is not.
        let decimals = (16 - exponent).max(0) as usize;
        let text = format!("{v:.decimals$}");
        let digits = text.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        let significant = digits.trim_start_matches('0').len();
        if significant >= 17 {
            return text;
        }
        let decimals = decimals + (17 - significant);
        return format!("{v:.decimals$}");
    }
    format!("{v:.16e}")
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format_f64(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

fn cell_json(cell: &Cell) -> Value {
    match cell {
        Cell::Num(v) => Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
        Cell::Int(v) => Value::Number((*v).into()),
        Cell::Text(s) => Value::String(s.clone()),
    }
}

/// CSV with one header per table; several tables are separated by a blank
/// line.
pub fn to_csv(tables: &[Table]) -> Vec<u8> {
    let mut out = Vec::new();
    for (k, table) in tables.iter().enumerate() {
        if k > 0 {
            out.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&table.columns).expect("in-memory write");
        for row in &table.rows {
            w.write_record(row.iter().map(cell_text)).expect("in-memory write");
        }
        out.extend(w.into_inner().expect("in-memory flush"));
    }
    out
}

/// One JSON array of row objects per table, keyed by table name.
pub fn to_json(tables: &[Table]) -> Vec<u8> {
    let mut root = Map::new();
    for table in tables {
        let rows = table
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), cell_json(v)))
                        .collect(),
                )
            })
            .collect();
        root.insert(table.name.clone(), Value::Array(rows));
    }
    let mut out = serde_json::to_vec_pretty(&Value::Object(root)).expect("json serialises");
    out.push(b'\n');
    out
}

pub fn render(tables: &[Table], format: Format) -> Vec<u8> {
    match format {
        Format::Csv => to_csv(tables),
        Format::Json => to_json(tables),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
