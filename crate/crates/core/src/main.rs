fn main() {
    std::process::exit(disvae::cli::run(std::env::args_os()));
}
