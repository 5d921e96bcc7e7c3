fn main() {
    std::process::exit(cvswap_cli::run(std::env::args_os()));
}
