fn main() {
    std::process::exit(nvmsim::cli::run(std::env::args_os()));
}
