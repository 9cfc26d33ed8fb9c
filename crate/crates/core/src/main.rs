fn main() {
    std::process::exit(freqflow::cli::run(std::env::args_os()));
}
