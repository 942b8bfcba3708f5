//! Thin wrapper around the library's CLI module.

fn main() {
    std::process::exit(tegke::cli::run(std::env::args_os()));
}
