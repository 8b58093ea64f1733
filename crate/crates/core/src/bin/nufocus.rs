fn main() {
    std::process::exit(nufocus::cli::run(std::env::args_os()));
}
