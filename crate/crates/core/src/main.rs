fn main() {
    std::process::exit(reid_lab::cli::main_with_args(std::env::args_os()));
}
