fn main() {
    std::process::exit(attnmem_cli::run(std::env::args_os()));
}
