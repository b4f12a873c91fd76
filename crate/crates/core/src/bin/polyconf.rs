fn main() {
    std::process::exit(polyconf::cli::main_with_args(std::env::args_os()));
}
