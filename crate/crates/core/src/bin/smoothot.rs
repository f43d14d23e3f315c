fn main() {
    std::process::exit(smoothot::cli::run(std::env::args_os()));
}
