fn main() {
    std::process::exit(epifuse::cli::main_with_args(std::env::args_os()));
}
