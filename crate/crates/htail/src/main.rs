fn main() {
    std::process::exit(htail::cli::main());
}
