fn main() {
    std::process::exit(hpi_core::cli::run(std::env::args_os()));
}
