use std::process::ExitCode;

use clap::Parser;
use scusum_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let invocation: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli, invocation)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scusum: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
