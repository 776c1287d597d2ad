fn main() {
    std::process::exit(playbench::cli::run_cli(std::env::args_os()));
}
