fn main() {
    std::process::exit(scd_core::cli::main_with_args(std::env::args_os()));
}
