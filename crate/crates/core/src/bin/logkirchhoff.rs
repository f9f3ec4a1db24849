fn main() {
    std::process::exit(logkirchhoff::cli::run_command(std::env::args_os()));
}
