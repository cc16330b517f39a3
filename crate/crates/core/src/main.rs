fn main() {
    std::process::exit(maskspectra::cli::main());
}
