fn main() {
    std::process::exit(nbesov::cli::run(std::env::args_os()));
}
