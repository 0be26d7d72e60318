fn main() {
    std::process::exit(polartomo::cli::main_with_args(std::env::args_os()));
}
