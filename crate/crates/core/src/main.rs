fn main() {
    std::process::exit(hopkit::cli::run(std::env::args_os()));
}
