fn main() {
    std::process::exit(cpscan::cli::main_with(std::env::args_os()));
}
