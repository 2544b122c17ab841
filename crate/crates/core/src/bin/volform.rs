fn main() {
    std::process::exit(volform::cli::main_with(std::env::args_os()));
}
