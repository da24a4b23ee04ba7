fn main() {
    std::process::exit(coopverify::cli::main_with_args(std::env::args_os()));
}
