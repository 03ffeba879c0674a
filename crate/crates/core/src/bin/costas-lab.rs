fn main() {
    std::process::exit(costas_lab::cli::main_with_args(std::env::args_os()));
}
