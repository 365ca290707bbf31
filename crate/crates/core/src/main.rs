fn main() {
    std::process::exit(dualbatch::cli::run(std::env::args_os()));
}
