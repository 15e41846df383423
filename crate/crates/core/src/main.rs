fn main() {
    std::process::exit(vidmem::cli::run(std::env::args_os()));
}
