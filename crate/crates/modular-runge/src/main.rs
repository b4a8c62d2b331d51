fn main() {
    std::process::exit(modular_runge::cli::run());
}
