fn main() {
    std::process::exit(ris_rate_region::cli::run(std::env::args_os()));
}
