fn main() {
    std::process::exit(acidp::harness::cli::main());
}
