fn main() {
    std::process::exit(infospec::cli::run());
}
