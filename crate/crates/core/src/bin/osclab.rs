fn main() {
    std::process::exit(osclab::cli::main_with_args(std::env::args_os()));
}
