fn main() {
    std::process::exit(zeroleaf::cli::dispatch(std::env::args_os()));
}
