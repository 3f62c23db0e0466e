use std::process::ExitCode;

use clap::Parser;
use plapflow_cli::args::Cli;
use plapflow_cli::commands;

/// Exit codes: 0 success, 1 solver failure, 2 invalid arguments or
/// configuration, 3 completed with failed levels or checks.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.into_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cfg) {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out.summary).unwrap_or_default()
            );
            for f in &out.failures {
                eprintln!("failed: {f}");
            }
            eprintln!(
                "wrote {} files to {}",
                out.outputs.len(),
                cfg.output_dir.display()
            );
            if out.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
