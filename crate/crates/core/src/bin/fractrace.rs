fn main() {
    std::process::exit(fractrace::cli::main_with_args(std::env::args_os()));
}
