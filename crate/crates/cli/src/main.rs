fn main() {
    std::process::exit(lstnet_cli::run(std::env::args_os()));
}
