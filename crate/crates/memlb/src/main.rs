fn main() {
    std::process::exit(memlb::cli::run());
}
