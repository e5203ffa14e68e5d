fn main() {
    std::process::exit(kmsforge::cli::run(std::env::args_os()));
}
