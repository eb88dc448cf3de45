fn main() {
    std::process::exit(odia_cli::run(std::env::args_os()));
}
