fn main() {
    std::process::exit(gbc_mass::cli::run(std::env::args_os()));
}
