fn main() {
    let code = collapse_lab::cli::cli_run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
