fn main() {
    std::process::exit(abundancy_cli::run(std::env::args_os()));
}
