fn main() {
    std::process::exit(netrecon::cli::run_from(std::env::args_os()));
}
