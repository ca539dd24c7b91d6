fn main() {
    std::process::exit(evosir::cli::main_with_args(std::env::args_os()));
}
