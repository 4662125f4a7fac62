fn main() {
    std::process::exit(dualfano::cli::run(std::env::args_os()));
}
