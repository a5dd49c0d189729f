fn main() {
    std::process::exit(poroplate::cli::run_cli(std::env::args_os()));
}
