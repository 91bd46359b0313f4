use std::process::ExitCode;

use clap::Parser;
use qrp_cli::{run, Args, RunConfig, RunError};

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::from_args(&args).map_err(RunError::from).and_then(|cfg| {
        let out = cfg.out.clone();
        run(&cfg).map(|o| (o, out))
    });
    match result {
        Ok((outcome, out)) => {
            println!("wrote {} files and manifest.json to {}", outcome.artifacts.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
