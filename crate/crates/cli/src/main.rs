fn main() {
    std::process::exit(eulerexit_cli::main_with_args(std::env::args_os()));
}
