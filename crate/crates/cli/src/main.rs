fn main() {
    std::process::exit(barker_cli::run(std::env::args_os()));
}
