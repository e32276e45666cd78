fn main() {
    env_logger::init();
    std::process::exit(gnneval::cli::run(std::env::args()));
}
