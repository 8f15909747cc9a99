fn main() {
    std::process::exit(roacert_cli::run());
}
