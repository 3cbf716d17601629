fn main() {
    std::process::exit(anecdote_core::cli::run_cli(std::env::args_os()));
}
