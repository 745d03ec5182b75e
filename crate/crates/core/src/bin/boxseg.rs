fn main() {
    std::process::exit(boxvote::cli::run(std::env::args_os()));
}
