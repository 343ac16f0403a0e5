fn main() {
    std::process::exit(quantkit::cli::main());
}
