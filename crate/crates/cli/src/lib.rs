//! Batch front end: config in, JSON report and CSV dumps out.

// negated comparisons reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod fields;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::commands::{Ctx, Outcome};
use crate::config::Config;
use crate::error::{exit, CliError};
use crate::report::Report;

#[derive(Debug, Parser)]
#[command(
    name = "wcurvlab",
    version,
    about = "Weighted curvature laboratory for smooth metric measure spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Config file (TOML, version = 1).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory for report.json and CSV dumps.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Seed for random fields; overrides the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Central-difference order (2, 4, 6 or 8); overrides the config.
    #[arg(long, value_name = "p")]
    pub order: Option<usize>,
    /// Number of refinement levels in convergence ladders.
    #[arg(long, value_name = "k")]
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Weighted curvature quantities and their norms.
    Curvature(CommonArgs),
    /// Identity suite with refinement orders.
    Verify(CommonArgs),
    /// Residuals of the weighted static system.
    StaticCheck(CommonArgs),
    /// Kernel of DR∘DR* and the spectral static test.
    Kernel(CommonArgs),
    /// Fiber and Lorentzian warped-product checks.
    WarpCheck(CommonArgs),
    /// Newton solve for a prescribed weighted scalar curvature.
    Prescribe(CommonArgs),
    /// Profile ODE integration.
    Ode(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Curvature(_) => "curvature",
            Command::Verify(_) => "verify",
            Command::StaticCheck(_) => "static-check",
            Command::Kernel(_) => "kernel",
            Command::WarpCheck(_) => "warp-check",
            Command::Prescribe(_) => "prescribe",
            Command::Ode(_) => "ode",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Curvature(a)
            | Command::Verify(a)
            | Command::StaticCheck(a)
            | Command::Kernel(a)
            | Command::WarpCheck(a)
            | Command::Prescribe(a)
            | Command::Ode(a) => a,
        }
    }
}

/// Result of one invocation.
pub struct Run {
    pub report: Report,
    /// Where the report was written, if the output directory was usable.
    pub report_path: Option<PathBuf>,
    pub exit_code: i32,
}

fn apply_overrides(cfg: &mut Config, a: &CommonArgs) -> Result<(), CliError> {
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = a.order {
        cfg.order = Some(p);
    }
    if let Some(k) = a.refine {
        if k == 0 {
            return Err(CliError::config("--refine", "needs at least one level"));
        }
        cfg.verify.levels = Some(k);
        cfg.warp_check.levels = Some(k);
    }
    cfg.seed.get_or_insert(config::DEFAULT_SEED);
    cfg.order.get_or_insert(config::DEFAULT_ORDER);
    Ok(())
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<Outcome, CliError> {
    match cmd {
        Command::Curvature(_) => commands::curvature::run(ctx),
        Command::Verify(_) => commands::verify::run(ctx),
        Command::StaticCheck(_) => commands::static_check::run(ctx),
        Command::Kernel(_) => commands::kernel::run(ctx),
        Command::WarpCheck(_) => commands::warp::run(ctx),
        Command::Prescribe(_) => commands::prescribe::run(ctx),
        Command::Ode(_) => commands::ode::run(ctx),
    }
}

fn exit_code_of(o: &Outcome) -> i32 {
    if o.solver_failure.is_some() {
        exit::NOT_CONVERGED
    } else if o.verdicts.iter().any(|v| !v.pass) {
        exit::VERIFICATION_FAILED
    } else {
        exit::OK
    }
}

fn error_report(command: &str, config: Value, err: &CliError) -> Report {
    let code = err.exit_code();
    Report {
        schema: report::SCHEMA,
        command: command.to_string(),
        config,
        status: Report::status_for(code),
        exit_code: code,
        results: Value::Object(Default::default()),
        verdicts: Vec::new(),
        traces: Default::default(),
        dumps: Vec::new(),
        summary: Vec::new(),
        error: Some(err.to_string()),
    }
}

/// Runs one command end to end: config, computation, dumps, report.
pub fn run(cmd: &Command) -> Run {
    let args = cmd.args();
    let name = cmd.name();
    let out_ok = std::fs::create_dir_all(&args.out).is_ok();
    let mut run = execute(cmd, &args.config, &args.out, out_ok);
    if out_ok {
        match run.report.write_atomic(&args.out) {
            Ok(()) => run.report_path = Some(args.out.join(report::REPORT_FILE)),
            Err(e) => {
                let err = CliError::Io(format!("writing report: {e}"));
                run.report = error_report(name, run.report.config.clone(), &err);
                run.exit_code = err.exit_code();
            }
        }
    }
    run
}

fn execute(cmd: &Command, config_path: &Path, out: &Path, out_ok: bool) -> Run {
    let name = cmd.name();
    let fail = |config: Value, e: CliError| {
        let report = error_report(name, config, &e);
        let exit_code = report.exit_code;
        Run {
            report,
            report_path: None,
            exit_code,
        }
    };
    if !out_ok {
        return fail(
            Value::Null,
            CliError::Io(format!("cannot create output directory {}", out.display())),
        );
    }
    let mut cfg = match Config::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(Value::Null, e),
    };
    if let Err(e) = apply_overrides(&mut cfg, cmd.args()) {
        return fail(Value::Null, e);
    }
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let ctx = Ctx::new(cfg, config_path, out);
    let outcome = match dispatch(cmd, &ctx) {
        Ok(o) => o,
        Err(e) => return fail(echo, e),
    };
    let mut code = exit_code_of(&outcome);
    let Outcome {
        results,
        verdicts,
        traces,
        summary,
        dumps,
        solver_failure,
    } = outcome;
    let mut dump_entries = Vec::new();
    let mut error = solver_failure;
    if let Some(d) = dumps {
        if code == exit::OK || code == exit::VERIFICATION_FAILED {
            match d.commit(out) {
                Ok(e) => dump_entries = e,
                Err(e) => {
                    error = Some(format!("writing dumps: {e}"));
                    code = exit::CONFIG;
                }
            }
        }
    }
    let report = Report {
        schema: report::SCHEMA,
        command: name.to_string(),
        config: echo,
        status: Report::status_for(code),
        exit_code: code,
        results: Value::Object(results),
        verdicts,
        traces,
        dumps: dump_entries,
        summary,
        error,
    };
    Run {
        report,
        report_path: None,
        exit_code: code,
    }
}
