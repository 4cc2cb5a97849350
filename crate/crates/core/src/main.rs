fn main() {
    std::process::exit(switchcos::cli::run(std::env::args_os()));
}
