fn main() {
    std::process::exit(hybrid_qkd::cli::main_with_args(std::env::args_os()));
}
