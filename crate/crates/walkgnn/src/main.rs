fn main() {
    env_logger::init();
    std::process::exit(walkgnn::cli::run());
}
