use serde_json::{json, Value};
use wcurvlab_core::grid::{l2_phi, GridField};
use wcurvlab_core::prescribe::{
    newton_prescribe, prescribe_with_scaling, reach_interval, JacobianMode, PrescribeOptions,
    PrescribeResult, DEFAULT_C_GRID,
};
use wcurvlab_core::weighted::weighted_scalar;
use wcurvlab_core::Error as CoreError;

use super::{check_dump_names, Ctx, Outcome};
use crate::error::{is_solver_failure, CliError, Result};
use crate::report::{num, nums, Verdict};

const DUMPABLE: &[&str] = &["u", "residual", "target"];

/// Recomputed and reported residual norms must agree to this relative level.
const SELF_CONSISTENCY: f64 = 1e-10;

fn options(ctx: &Ctx) -> Result<PrescribeOptions> {
    let o = &ctx.cfg.prescribe;
    let mut opts = PrescribeOptions::default();
    if let Some(t) = o.tol {
        if !(t > 0.0) {
            return Err(CliError::config("prescribe.tol", "must be positive"));
        }
        opts.tol = t;
    }
    if let Some(k) = o.max_iter {
        opts.max_iter = k;
    }
    if let Some(c) = o.cap {
        opts.cap = c;
    }
    opts.mode = match o.mode.as_deref() {
        None | Some("frozen") => JacobianMode::Frozen,
        Some("relinearized") => JacobianMode::Relinearized,
        Some(other) => {
            return Err(CliError::config(
                "prescribe.mode",
                format!("unknown mode '{other}' (frozen or relinearized)"),
            ))
        }
    };
    Ok(opts)
}

fn trace_json(r: &PrescribeResult) -> Value {
    Value::Array(
        r.trace
            .iter()
            .map(|t| json!({ "iteration": t.iteration, "residual": num(t.residual), "step": num(t.step), "halvings": t.halvings }))
            .collect(),
    )
}

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let o = &ctx.cfg.prescribe;
    check_dump_names("prescribe.dump", &o.dump, DUMPABLE)?;
    let opts = options(ctx)?;
    let chart = ctx.chart(0)?;
    let space = ctx.space(&chart)?;
    let r0 = weighted_scalar(&space)?;
    let field = ctx.require("target", &chart, "prescribe needs a target")?;
    let mut target = if o.target_relative.unwrap_or(false) {
        r0.axpy(1.0, &field)?
    } else {
        field
    };
    if let Some(s) = o.target_scale {
        target = target.scaled(s);
    }
    let mut out = Outcome::default();
    out.put(
        "target",
        json!({ "relative": o.target_relative.unwrap_or(false), "scale": o.target_scale.unwrap_or(1.0), "sup": num(target.sup()) }),
    );
    out.put(
        "reach_interval",
        match reach_interval(&r0, &target) {
            Some((a, b)) => json!([num(a), num(b)]),
            None => Value::Null,
        },
    );

    let scaling = o.scaling.unwrap_or(false) || o.c_grid.is_some();
    let grid = o.c_grid.clone().unwrap_or_else(|| DEFAULT_C_GRID.to_vec());
    if scaling && (grid.is_empty() || grid.iter().any(|c| !(*c > 0.0))) {
        return Err(CliError::config(
            "prescribe.c_grid",
            "needs positive scales",
        ));
    }
    let solved = if scaling {
        prescribe_with_scaling(&space, &target, &grid, &opts)
    } else {
        newton_prescribe(&space, &target, &opts)
    };
    let r = match solved {
        Ok(r) => r,
        Err(e) if is_solver_failure(&e) => {
            let detail = match &e {
                CoreError::NotConverged {
                    iterations,
                    residual,
                } => json!({ "iterations": iterations, "residual": num(*residual) }),
                CoreError::StepRejected { halvings } => json!({ "halvings": halvings }),
                CoreError::KernelNonempty { dim } => json!({ "kernel_dim": dim }),
                CoreError::AllScalesFailed { attempts } => Value::Array(
                    attempts
                        .iter()
                        .map(|(c, why)| json!({ "c": num(*c), "outcome": why }))
                        .collect(),
                ),
                _ => Value::Null,
            };
            out.put("converged", json!(false));
            out.put("failure", detail);
            out.summary.push(format!("prescribe: FAILED: {e}"));
            out.solver_failure = Some(e.to_string());
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };

    // self-consistency: recompute the residual from the returned space
    let recomputed = l2_phi(&r.space, &weighted_scalar(&r.space)?.sub(&target)?)?;
    let rel = (recomputed - r.residual_norm).abs() / r.residual_norm.max(f64::MIN_POSITIVE);
    let (ulo, uhi) = r.u.range();
    out.put("converged", json!(true));
    out.put("iterations", json!(r.iterations));
    out.put("residual_l2_phi", num(r.residual_norm));
    out.put("residual_recomputed", num(recomputed));
    out.put("scale", num(r.scale));
    out.put(
        "u",
        json!({ "sup": num(r.u.sup()), "min": num(ulo), "max": num(uhi) }),
    );
    out.traces.insert("newton".into(), trace_json(&r));
    if !r.attempts.is_empty() {
        out.traces.insert(
            "scales".into(),
            Value::Array(
                r.attempts.iter().map(|a| json!({ "c": num(a.c), "outcome": a.outcome, "residuals": nums(&a.trace) })).collect(),
            ),
        );
    }
    out.verdicts
        .push(Verdict::at_most("residual", r.residual_norm, opts.tol));
    let consistent = if r.residual_norm == 0.0 {
        recomputed
    } else {
        rel
    };
    out.verdicts.push(Verdict::at_most(
        "self_consistency",
        consistent,
        SELF_CONSISTENCY,
    ));
    out.summary.push(format!(
        "prescribe: converged in {} iterations at c = {}, L²_φ residual {:.3e}",
        r.iterations, r.scale, r.residual_norm
    ));

    if !o.dump.is_empty() {
        let mut d = ctx.dumps()?;
        for name in &o.dump {
            match name.as_str() {
                "u" => d.scalar("u", &r.u)?,
                "residual" => d.scalar("residual", &r.residual)?,
                "target" => d.scalar("target", &target)?,
                _ => unreachable!("names checked above"),
            }
        }
        out.dumps = Some(d);
    }
    Ok(out)
}
