use std::process::ExitCode;

use clap::Parser;
use lerw_cli::{prepare, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let prepared = match prepare(&cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if prepared.randomized() {
        let note = if prepared.seed_was_drawn { " (drawn)" } else { "" };
        println!("seed: {}{note}", prepared.context.seed);
    }
    let report = match run(&prepared) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write_to(&prepared.out_dir) {
        eprintln!("error: cannot write {}: {e}", prepared.out_dir.display());
        return ExitCode::from(2);
    }
    for (name, ok) in &report.checks {
        println!("{name}: {}", if *ok { "pass" } else { "FAIL" });
    }
    println!("config hash: {}", report.config_hash());
    println!("wrote {}", prepared.out_dir.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
