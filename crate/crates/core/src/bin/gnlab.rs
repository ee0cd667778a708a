fn main() {
    std::process::exit(gnlab_core::cli::run(std::env::args_os()));
}
