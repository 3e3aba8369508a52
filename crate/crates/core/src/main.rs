fn main() {
    std::process::exit(memrl::cli::run(std::env::args().collect()));
}
