use clap::Parser;

fn main() {
    let cli = ibpqam_cli::Cli::parse();
    if let Err(e) = ibpqam_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
