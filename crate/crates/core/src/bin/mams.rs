fn main() {
    std::process::exit(mams::cli::run(std::env::args_os()));
}
