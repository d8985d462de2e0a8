fn main() {
    std::process::exit(dmps::cli::run(std::env::args_os()));
}
