fn main() {
    std::process::exit(sp2_tools::cli::run());
}
