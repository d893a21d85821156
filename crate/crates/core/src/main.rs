fn main() {
    std::process::exit(innkeeper::cli::main());
}
