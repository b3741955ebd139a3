use std::process::ExitCode;

use clap::Parser;
use eddy_mlmc_cli::{execute, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", CliError::Config(format!("--threads: {e}")));
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eddy-mlmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
