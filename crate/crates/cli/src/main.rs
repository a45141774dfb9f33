use clap::Parser;
use spdelab_cli::{run, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.report.summary {
                println!("{line}");
            }
            let failed: Vec<_> = outcome.report.gates.iter().filter(|g| !g.pass).collect();
            for g in &outcome.report.gates {
                println!("gate {}: {} ({})", g.name, if g.pass { "pass" } else { "FAIL" }, g.detail);
            }
            if cli.gated && !failed.is_empty() {
                eprintln!("{} acceptance gate(s) failed", failed.len());
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spdelab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
