fn main() {
    std::process::exit(varlin::cli::run(std::env::args_os()));
}
