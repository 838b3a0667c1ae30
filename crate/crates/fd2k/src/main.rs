fn main() {
    std::process::exit(fd2k::cli::run(std::env::args_os()));
}
