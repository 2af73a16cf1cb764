fn main() {
    std::process::exit(msinv::cli::main_with_args(std::env::args_os().collect()));
}
