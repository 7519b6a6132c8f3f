fn main() {
    std::process::exit(lcc_refute::cli::run(std::env::args_os()));
}
