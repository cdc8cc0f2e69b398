fn main() {
    std::process::exit(onco_cli::run(std::env::args_os()));
}
