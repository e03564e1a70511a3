fn main() {
    std::process::exit(mmner::cli::run(std::env::args_os()));
}
