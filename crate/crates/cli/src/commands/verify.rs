//! Identity suite. Each identity is evaluated on a refinement ladder built
//! from the configured chart; the defect at the finest level is compared with
//! its threshold and the observed order is reported alongside.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use wcurvlab_core::convergence::observed_order;
use wcurvlab_core::grid::{
    commutator_defect, differential, div_phi, inner_phi, integrate_phi, lower, CovectorField,
    GridError, GridField, MetricMeasureSpace, ScalarField, Variance,
};
use wcurvlab_core::linearization::{adjoint_defect, dr, Deformation};
use wcurvlab_core::weighted::{
    bianchi_defect, trace_identity_defect, weighted_divergence_identities, weighted_scalar,
};
use wcurvlab_core::Error as CoreError;

use super::{Ctx, Outcome};
use crate::error::{CliError, Result};
use crate::report::{num, Verdict};

pub const IDENTITIES: [&str; 9] = [
    "integration_by_parts",
    "weighted_bianchi",
    "trace_identity",
    "linearization",
    "adjointness",
    "divergence_laplacian_metric",
    "divergence_hessian",
    "divergence_ricci",
    "commutator_anchor",
];

const NEEDS_CLOSED: [&str; 2] = ["integration_by_parts", "adjointness"];

/// Deformation parameters of the finite-difference check of DR.
const FD_T_COARSE: f64 = 1e-2;
const FD_T: f64 = 1e-3;
/// Two Romberg stages over `D(t), D(t/2), D(t/4)`; the truncation error is
/// O(t⁶) so a large `t` keeps rounding small.
const RICHARDSON_T: f64 = 4e-2;
const MIN_T_SLOPE: f64 = 1.8;

struct Level {
    sizes: Vec<usize>,
    spacing: f64,
    defect: f64,
}

#[derive(Default)]
struct Row {
    levels: Vec<Level>,
    extra: Option<Value>,
}

fn symmetric_difference(
    space: &MetricMeasureSpace,
    d: &Deformation,
    t: f64,
) -> Result<ScalarField> {
    let shifted = |s: f64| -> Result<ScalarField> {
        let sp =
            MetricMeasureSpace::new(space.g.axpy(s, &d.h)?, space.phi.axpy(s, &d.psi)?, space.m)?;
        Ok(weighted_scalar(&sp)?)
    };
    Ok(shifted(t)?.sub(&shifted(-t)?)?.scaled(0.5 / t))
}

/// Relative defects of symmetric differences against DR, and of their
/// Richardson combination.
fn linearization_check(space: &MetricMeasureSpace, d: &Deformation) -> Result<(f64, Value)> {
    let lin = dr(space, d)?;
    let scale = lin.sup().max(f64::MIN_POSITIVE);
    let rel = |fd: &ScalarField| -> Result<f64> { Ok(fd.sub(&lin)?.sup() / scale) };
    let coarse = rel(&symmetric_difference(space, d, FD_T_COARSE)?)?;
    let fine = rel(&symmetric_difference(space, d, FD_T)?)?;
    let a = symmetric_difference(space, d, RICHARDSON_T)?;
    let b = symmetric_difference(space, d, 0.5 * RICHARDSON_T)?;
    let c = symmetric_difference(space, d, 0.25 * RICHARDSON_T)?;
    // (64 D(t/4) − 20 D(t/2) + D(t)) / 45
    let rich = c
        .scaled(64.0 / 45.0)
        .axpy(-20.0 / 45.0, &b)?
        .axpy(1.0 / 45.0, &a)?;
    let rich_defect = rel(&rich)?;
    let slope = (coarse / fine).log10() / (FD_T_COARSE / FD_T).log10();
    Ok((
        rich_defect,
        json!({
            "dr_sup": num(lin.sup()),
            "fd_defect_t_1e-2": num(coarse),
            "fd_defect_t_1e-3": num(fine),
            "t_slope": num(slope),
            "richardson_defect": num(rich_defect),
        }),
    ))
}

fn push(rows: &mut BTreeMap<&str, Row>, name: &str, level: Level) {
    if let Some(r) = rows.get_mut(name) {
        r.levels.push(level);
    }
}

fn closed_only(r: std::result::Result<f64, CoreError>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::Grid(GridError::ClosedChartRequired(_))) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let selected: Vec<&str> = if ctx.cfg.verify.identities.is_empty() {
        IDENTITIES.to_vec()
    } else {
        let mut v = Vec::new();
        for name in &ctx.cfg.verify.identities {
            let id = IDENTITIES.iter().find(|&&i| i == name).ok_or_else(|| {
                CliError::config(
                    "verify.identities",
                    format!(
                        "unknown identity '{name}' (known: {})",
                        IDENTITIES.join(", ")
                    ),
                )
            })?;
            v.push(*id);
        }
        v
    };
    let want = |name: &str| selected.contains(&name);
    let levels = ctx.levels(ctx.cfg.verify.levels);
    let base = ctx.chart(0)?;
    let closed = base.is_closed();
    let mut rows: BTreeMap<&str, Row> = selected.iter().map(|&n| (n, Row::default())).collect();

    for j in 0..levels {
        let chart = ctx.chart(j)?;
        let space = ctx.space(&chart)?;
        let f = ctx.field_or_random("f", &chart)?;
        let sizes = chart.sizes();
        let spacing = chart.axis(0).spacing();
        let mut record = |name: &'static str, defect: f64| {
            push(
                &mut rows,
                name,
                Level {
                    sizes: sizes.clone(),
                    spacing,
                    defect,
                },
            )
        };
        if closed && want("integration_by_parts") {
            let x = CovectorField::from_components(
                chart.clone(),
                ctx.res.random_vector(&chart),
                Variance::Contravariant,
                0,
            );
            let xl = lower(&space, &x)?;
            let lhs = inner_phi(&space, &differential(&f)?, &xl)?;
            let rhs = integrate_phi(&space, &f.mul(&div_phi(&space, &xl)?)?)?;
            record("integration_by_parts", (lhs + rhs).abs());
        }
        if want("weighted_bianchi") {
            record("weighted_bianchi", bianchi_defect(&space)?.sup());
        }
        if want("trace_identity") {
            record("trace_identity", trace_identity_defect(&space)?.sup());
        }
        let needs_def =
            (closed && want("adjointness")) || (want("linearization") && j + 1 == levels);
        let def = if needs_def {
            let h = ctx.deformation_or_random(&chart)?;
            let psi = ctx.field_or_random("psi", &chart)?;
            Some(Deformation::new(h, psi)?)
        } else {
            None
        };
        if closed && want("adjointness") {
            if let Some(a) = closed_only(adjoint_defect(
                &space,
                def.as_ref().expect("built above"),
                &f,
            ))? {
                record("adjointness", a);
            }
        }
        if want("divergence_laplacian_metric")
            || want("divergence_hessian")
            || want("divergence_ricci")
        {
            let d = weighted_divergence_identities(&space, &f)?.sups();
            record("divergence_laplacian_metric", d[0]);
            record("divergence_hessian", d[1]);
            record("divergence_ricci", d[2]);
        }
        if want("commutator_anchor") {
            record("commutator_anchor", commutator_defect(&space, &f)?.sup());
        }
        // exact at the jet level, so only the finest grid is checked
        if want("linearization") && j + 1 == levels {
            let (d, extra) = linearization_check(&space, def.as_ref().expect("built above"))?;
            record("linearization", d);
            if let Some(r) = rows.get_mut("linearization") {
                r.extra = Some(extra);
            }
        }
    }

    let mut out = Outcome::default();
    let mut table = Vec::new();
    for &name in &selected {
        let row = &rows[name];
        let threshold = ctx.cfg.tolerance(name);
        if row.levels.is_empty() {
            let note = if NEEDS_CLOSED.contains(&name) && !closed {
                "skipped: requires closed chart"
            } else {
                "skipped"
            };
            table.push(
                json!({ "name": name, "status": "skipped", "note": note, "threshold": threshold }),
            );
            out.summary.push(format!("{name:<28} {note}"));
            continue;
        }
        let defect = row.levels.last().expect("nonempty").defect;
        let h: Vec<f64> = row.levels.iter().map(|l| l.spacing).collect();
        let e: Vec<f64> = row.levels.iter().map(|l| l.defect).collect();
        let order = if row.levels.len() >= 2 {
            observed_order(&h, &e)
        } else {
            f64::NAN
        };
        let mut pass = defect <= threshold;
        out.verdicts.push(Verdict::at_most(name, defect, threshold));
        if let Some(extra) = &row.extra {
            let fd = extra["fd_defect_t_1e-3"].as_f64().unwrap_or(f64::NAN);
            let fd_coarse = extra["fd_defect_t_1e-2"].as_f64().unwrap_or(f64::NAN);
            let fd_tol = ctx.cfg.tolerance("linearization_fd");
            let v = Verdict::at_most("linearization_fd", fd, fd_tol);
            pass &= v.pass;
            out.verdicts.push(v);
            // a slope only means something above round-off
            if fd_coarse > 1e-12 {
                let slope = extra["t_slope"].as_f64().unwrap_or(f64::NAN);
                let v = Verdict::at_least("linearization_t_slope", slope, MIN_T_SLOPE);
                pass &= v.pass;
                out.verdicts.push(v);
            }
        }
        let status = if pass { "pass" } else { "fail" };
        let lv: Vec<Value> = row
            .levels
            .iter()
            .map(
                |l| json!({ "sizes": l.sizes, "spacing": num(l.spacing), "defect": num(l.defect) }),
            )
            .collect();
        let mut entry = json!({
            "name": name,
            "status": status,
            "defect": num(defect),
            "threshold": threshold,
            "order": num(order),
            "levels": lv,
        });
        if let Some(extra) = &row.extra {
            entry["finite_difference"] = extra.clone();
        }
        table.push(entry);
        let order_txt = if order.is_nan() {
            "-".to_string()
        } else if order.is_infinite() {
            "exact".to_string()
        } else {
            format!("{order:.2}")
        };
        out.summary.push(format!(
            "{name:<28} {} defect {defect:.3e} (threshold {threshold:.0e}) order {order_txt}",
            status.to_uppercase()
        ));
    }
    out.put("levels", json!(levels));
    out.put("identities", Value::Array(table));
    if !ctx.refinable() {
        out.summary
            .push("note: CSV-sourced fields cannot be resampled; orders are not measured".into());
    }
    Ok(out)
}
