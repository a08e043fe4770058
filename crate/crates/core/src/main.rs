fn main() {
    std::process::exit(blowup::cli::run(std::env::args_os()));
}
