fn main() {
    std::process::exit(percoflow::cli::main_with_args(std::env::args_os()));
}
