fn main() {
    std::process::exit(dreammap_cli::main_with_args(std::env::args_os()));
}
