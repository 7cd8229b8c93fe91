fn main() {
    std::process::exit(fock_sobolev::cli::main_with_args(std::env::args_os()));
}
