use serde_json::{json, Value};
use wcurvlab_core::expr::{Bindings, Expr};
use wcurvlab_core::grid::{Chart, GridField, ScalarField, MIN_NODES};
use wcurvlab_core::profile::{
    integrate_profile_reporting, rnode_residual, ProfileState, Trajectory, DEFAULT_F_FLOOR,
};

use super::{Ctx, Outcome};
use crate::error::{CliError, Result};
use crate::report::{num, Verdict};

fn need(v: Option<f64>, key: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::config(&format!("ode.{key}"), "missing"))
}

fn state_json(s: &ProfileState) -> Value {
    json!({ "x": num(s.x), "f": num(s.f), "df": num(s.df), "phi": num(s.phi), "dphi": num(s.dphi) })
}

/// Largest deviation of `f` and `φ` from closed forms in `x0`.
fn reference_error(t: &Trajectory, rf: Option<&Expr>, rp: Option<&Expr>, m: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in &t.states {
        let b = Bindings {
            x: &[s.x],
            t: None,
            m: Some(m),
        };
        if let Some(e) = rf {
            let v = e
                .eval_with(&b)
                .map_err(|e| CliError::config("ode.reference_f", e))?;
            worst = worst.max((s.f - v).abs());
        }
        if let Some(e) = rp {
            let v = e
                .eval_with(&b)
                .map_err(|e| CliError::config("ode.reference_phi", e))?;
            worst = worst.max((s.phi - v).abs());
        }
    }
    Ok(worst)
}

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let o = &ctx.cfg.ode;
    let m = ctx.m();
    let init = ProfileState {
        x: o.x0.unwrap_or(0.0),
        f: need(o.f0, "f0")?,
        df: need(o.df0, "df0")?,
        phi: need(o.phi0, "phi0")?,
        dphi: need(o.dphi0, "dphi0")?,
    };
    let x_end = need(o.x_end, "x_end")?;
    let step = need(o.step, "step")?;
    let floor = o.f_floor.unwrap_or(DEFAULT_F_FLOOR);
    let rf = o
        .reference_f
        .as_deref()
        .map(|s| ctx.res.compile(s, "ode.reference_f", 1))
        .transpose()?;
    let rp = o
        .reference_phi
        .as_deref()
        .map(|s| ctx.res.compile(s, "ode.reference_phi", 1))
        .transpose()?;

    let traj = integrate_profile_reporting(init, m, x_end, step, floor).map_err(|e| match e {
        wcurvlab_core::Error::Invalid(msg) => CliError::config("ode", msg),
        other => other.into(),
    })?;
    let mut out = Outcome::default();
    out.put("steps", json!(traj.states.len() - 1));
    out.put("initial", state_json(&init));
    out.put("final", state_json(traj.last()));

    if let Some(hit) = &traj.floor_hit {
        out.put(
            "floor_hit",
            json!({ "x": num(hit.x), "f": num(hit.f), "floor": num(floor) }),
        );
        let msg = format!(
            "|f| fell below {floor:e} at x = {} (f = {:e}): candidate static horizon",
            hit.x, hit.f
        );
        out.summary.push(format!("ode: stopped: {msg}"));
        out.solver_failure = Some(msg);
        return Ok(out);
    }
    out.summary.push(format!(
        "ode: integrated to x = {} in {} steps; f = {:.12e}, φ = {:.12e}",
        traj.last().x,
        traj.states.len() - 1,
        traj.last().f,
        traj.last().phi
    ));

    // the trajectory is sampled on a uniform line, so the profile residual
    // can be evaluated by differencing it
    if traj.states.len() >= MIN_NODES {
        let x0 = traj.states[0].x;
        let len = traj.last().x - x0;
        let chart = Chart::open_box(&[x0], &[traj.states.len()], &[len])
            .and_then(|c| c.with_order(ctx.order()))
            .map_err(|e| CliError::config("ode", e))?
            .into_shared();
        let f =
            ScalarField::from_values(chart.clone(), traj.states.iter().map(|s| s.f).collect(), 0);
        let phi = ScalarField::from_values(
            chart.clone(),
            traj.states.iter().map(|s| s.phi).collect(),
            0,
        );
        match rnode_residual(&f, &phi, m) {
            Ok((r1, r2)) => out.put(
                "profile_residual",
                json!({ "first_sup": num(r1.sup()), "second_sup": num(r2.sup()) }),
            ),
            Err(e) => out.put("profile_residual", json!({ "note": e.to_string() })),
        }
    }

    if rf.is_some() || rp.is_some() {
        let err = reference_error(&traj, rf.as_ref(), rp.as_ref(), m)?;
        let coarse = integrate_profile_reporting(init, m, x_end, 2.0 * step, floor)?;
        let err2 = reference_error(&coarse, rf.as_ref(), rp.as_ref(), m)?;
        let order = (err2 / err).log2();
        let tol = ctx.cfg.tolerance("ode_reference");
        let v = Verdict::at_most("reference", err, tol);
        out.summary.push(format!(
            "  closed form: sup error {err:.3e} ({}), step-doubling order {order:.2}",
            super::pass_word(v.pass)
        ));
        out.verdicts.push(v);
        out.put("reference", json!({ "sup_error": num(err), "sup_error_double_step": num(err2), "order": num(order) }));
    }

    if o.dump.unwrap_or(false) {
        let mut d = ctx.dumps()?;
        let cols: Vec<String> = ProfileState::CSV_HEADER
            .iter()
            .map(|s| s.to_string())
            .collect();
        d.table(
            "trajectory",
            &cols,
            traj.states.iter().map(|s| s.row().to_vec()),
        )?;
        out.dumps = Some(d);
    }
    Ok(out)
}
