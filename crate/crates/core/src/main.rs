fn main() {
    std::process::exit(fasbeam::cli::main_with_args(std::env::args_os()));
}
