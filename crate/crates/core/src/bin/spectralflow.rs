fn main() {
    std::process::exit(spectralflow::harness::cli::run_cli(std::env::args_os()));
}
