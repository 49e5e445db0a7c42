fn main() {
    std::process::exit(deep_stdp::cli::main_with_args(std::env::args_os()));
}
