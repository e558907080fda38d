fn main() {
    std::process::exit(tagunify::cli::run(std::env::args_os()));
}
