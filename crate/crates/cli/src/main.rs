fn main() {
    std::process::exit(hapnav_cli::dispatch(std::env::args_os()));
}
