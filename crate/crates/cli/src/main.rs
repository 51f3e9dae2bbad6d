fn main() {
    std::process::exit(ltvdiss_cli::main_with_args(std::env::args_os()));
}
