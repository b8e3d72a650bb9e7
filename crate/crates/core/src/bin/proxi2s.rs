fn main() {
    std::process::exit(proxi2s::cli::run(std::env::args_os()));
}
