fn main() {
    std::process::exit(sepval::cli::run_from_args(std::env::args_os()));
}
