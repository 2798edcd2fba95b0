fn main() {
    std::process::exit(qssl::cli::main_with_args(std::env::args_os()));
}
