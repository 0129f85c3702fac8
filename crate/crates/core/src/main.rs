fn main() {
    std::process::exit(holosim::cli::run(std::env::args_os()));
}
