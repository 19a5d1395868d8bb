fn main() {
    std::process::exit(decohist::cli::run(std::env::args_os()));
}
