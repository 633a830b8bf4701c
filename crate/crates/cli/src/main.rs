fn main() {
    std::process::exit(fraxolve_cli::main_with_args(std::env::args_os()));
}
