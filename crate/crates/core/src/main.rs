fn main() {
    std::process::exit(portopt::cli::main_with_args(std::env::args_os()));
}
