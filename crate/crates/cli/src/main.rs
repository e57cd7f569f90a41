fn main() {
    std::process::exit(voxshape_cli::run(std::env::args_os()));
}
