fn main() {
    std::process::exit(roughheat::cli::run(std::env::args_os()));
}
