fn main() {
    std::process::exit(pnpf::cli::main_with_args(std::env::args_os()));
}
