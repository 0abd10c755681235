use std::process::ExitCode;

use clap::Parser;
use wcurvlab_cli::error::exit;
use wcurvlab_cli::{run, Cli};

const THREADS_VAR: &str = "WCURVLAB_THREADS";

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_VAR} must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("wcurvlab: {e}");
        return ExitCode::from(exit::CONFIG as u8);
    }
    let r = run(&cli.command);
    for line in &r.report.summary {
        println!("{line}");
    }
    if let Some(e) = &r.report.error {
        eprintln!("wcurvlab {}: {e}", r.report.command);
    }
    match &r.report_path {
        Some(p) => println!("report: {}", p.display()),
        None => eprintln!("wcurvlab: no report written"),
    }
    ExitCode::from(r.exit_code as u8)
}
