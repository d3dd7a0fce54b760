fn main() {
    std::process::exit(billiards::cli::main_with_args(std::env::args_os()));
}
