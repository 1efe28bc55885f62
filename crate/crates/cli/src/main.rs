use clap::Parser;
use markmle_cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| run(cli)) {
        eprintln!("markmle: {e}");
        std::process::exit(e.exit_code());
    }
}
