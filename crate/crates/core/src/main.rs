fn main() {
    std::process::exit(coded_caching::cli::run(std::env::args_os()));
}
