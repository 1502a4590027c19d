use std::process::ExitCode;

use taylor_audit::report::{self, Experiment, RunError};

const USAGE: &str = "usage: taylor-audit <experiment> [--config <file>] [--key value ...] [--out <dir>] [--seed <n>]";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}\n\nexperiments:");
        for e in Experiment::ALL {
            println!("  {e}");
        }
        return if args.is_empty() { ExitCode::from(2) } else { ExitCode::SUCCESS };
    }
    match report::parse_cli_args(&args).and_then(|cfg| report::run(&cfg)) {
        Ok(manifest) => {
            for (k, v) in &manifest.summary {
                println!("{k}={v}");
            }
            println!("manifest={}", manifest.path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            if matches!(e, RunError::Config(_)) {
                eprintln!("{USAGE}");
            }
            ExitCode::FAILURE
        }
    }
}
