fn main() {
    std::process::exit(ndr::cli::run(std::env::args_os()));
}
