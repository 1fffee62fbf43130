use clap::Parser;

fn main() {
    let cli = koopinv_cli::Cli::parse();
    if let Err(e) = koopinv_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
