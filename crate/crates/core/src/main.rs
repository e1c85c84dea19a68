fn main() {
    std::process::exit(multipair::cli::main_with_args(std::env::args_os()));
}
