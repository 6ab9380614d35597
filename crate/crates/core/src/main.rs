fn main() {
    let code = gatekeep::cli::main_with_args(std::env::args_os());
    std::process::exit(code);
}
