fn main() {
    std::process::exit(hte_cli::app::main_with_args(std::env::args_os()));
}
