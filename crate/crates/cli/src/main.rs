fn main() {
    std::process::exit(binorbit::run_cli(std::env::args_os()));
}
