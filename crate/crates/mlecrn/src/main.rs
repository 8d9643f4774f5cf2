fn main() {
    std::process::exit(mlecrn::cli::run_from_args());
}
