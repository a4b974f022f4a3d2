fn main() {
    std::process::exit(srgeo::cli::run(std::env::args_os()));
}
