fn main() {
    std::process::exit(kolmo::cli::main_with_args(std::env::args()));
}
