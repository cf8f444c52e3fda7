fn main() {
    std::process::exit(crsf::cli::run());
}
