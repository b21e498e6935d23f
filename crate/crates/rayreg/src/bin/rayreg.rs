fn main() {
    std::process::exit(rayreg::cli::run(std::env::args_os()));
}
