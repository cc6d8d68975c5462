fn main() {
    std::process::exit(blendscope::cli::main_with_args(std::env::args_os()));
}
