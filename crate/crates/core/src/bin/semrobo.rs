fn main() {
    std::process::exit(semrobo::cli::main_with_args(std::env::args_os()));
}
