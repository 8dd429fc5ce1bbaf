fn main() {
    std::process::exit(sasgld::cli::run());
}
