fn main() {
    std::process::exit(replink::cli::main_with_args(std::env::args_os()));
}
