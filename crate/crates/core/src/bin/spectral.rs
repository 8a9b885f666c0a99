fn main() {
    std::process::exit(spectral_landscape::cli::run(std::env::args_os()));
}
