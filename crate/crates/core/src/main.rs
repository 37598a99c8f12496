fn main() {
    std::process::exit(isoquad::cli::run(std::env::args_os()));
}
