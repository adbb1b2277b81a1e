fn main() {
    std::process::exit(hmimo_cli::run(std::env::args_os()));
}
