fn main() {
    std::process::exit(dampqfi::cli::run(std::env::args_os()));
}
