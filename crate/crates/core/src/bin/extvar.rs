fn main() {
    std::process::exit(extvar::cli::run(std::env::args_os()));
}
