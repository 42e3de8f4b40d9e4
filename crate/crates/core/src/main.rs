fn main() {
    std::process::exit(ppsde::cli::main_with_args(std::env::args_os()));
}
