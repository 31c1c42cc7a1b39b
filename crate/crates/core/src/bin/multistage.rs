fn main() {
    std::process::exit(multistage::cli::run(std::env::args_os()));
}
