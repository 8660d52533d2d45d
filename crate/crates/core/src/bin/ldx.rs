fn main() {
    std::process::exit(ldx::cli::run(std::env::args_os()));
}
