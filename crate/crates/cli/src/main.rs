fn main() {
    std::process::exit(landis_cli::run(std::env::args_os()));
}
