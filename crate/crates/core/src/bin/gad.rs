fn main() {
    std::process::exit(gad::cli::run(std::env::args_os()));
}
