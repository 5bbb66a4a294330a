fn main() {
    std::process::exit(bcslab::cli::run(std::env::args_os()));
}
