fn main() {
    std::process::exit(mixlab_cli::main_with(std::env::args_os()));
}
