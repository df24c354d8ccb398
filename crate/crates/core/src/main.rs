fn main() {
    std::process::exit(simpo::cli::run(std::env::args_os()));
}
