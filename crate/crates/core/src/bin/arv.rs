fn main() {
    std::process::exit(approx_rv::cli::main_with_args(std::env::args_os()));
}
