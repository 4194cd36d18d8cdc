use std::process::ExitCode;

use clap::Parser;
use maxconv::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
