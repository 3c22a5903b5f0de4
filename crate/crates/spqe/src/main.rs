fn main() {
    std::process::exit(spqe::cli::run(std::env::args_os()));
}
