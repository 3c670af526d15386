fn main() {
    std::process::exit(mhrcal::cli::run(std::env::args_os()));
}
