use serde_json::{json, Value};
use wcurvlab_core::convergence::observed_order;
use wcurvlab_core::grid::GridField;
use wcurvlab_core::warped::{
    default_fiber_periods, lorentzian_static_warp, riemannian_fiber_warp, FIBER_DIM_CAP,
};

use super::{pass_word, pretty, Ctx, Outcome};
use crate::error::{CliError, Result};
use crate::fields::eval_scalar;
use crate::report::{num, nums, Verdict};

fn ladder_json(sizes: &[Vec<usize>], h: &[f64], e: &[f64]) -> (f64, Value) {
    let order = if e.len() >= 2 {
        observed_order(h, e)
    } else {
        f64::NAN
    };
    let levels: Vec<Value> = sizes
        .iter()
        .zip(h)
        .zip(e)
        .map(|((s, h), e)| json!({ "sizes": s, "spacing": num(*h), "defect": num(*e) }))
        .collect();
    (order, Value::Array(levels))
}

fn order_text(o: f64) -> String {
    if o.is_nan() {
        "-".into()
    } else if o.is_infinite() {
        "exact".into()
    } else {
        format!("{o:.2}")
    }
}

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let opts = &ctx.cfg.warp_check;
    let has_f = ctx.cfg.fields.f.is_some();
    let (fiber, lorentz) = match opts.mode.as_deref() {
        None => (true, has_f),
        Some("fiber") => (true, false),
        Some("lorentzian") => (false, true),
        Some("both") => (true, true),
        Some(other) => {
            return Err(CliError::config(
                "warp-check.mode",
                format!("unknown mode '{other}' (fiber, lorentzian or both)"),
            ))
        }
    };
    let levels = ctx.levels(opts.levels);
    let m = ctx.m();
    let mut out = Outcome::default();

    if fiber {
        let mi = m.round() as usize;
        if (m - m.round()).abs() > 1e-12 || mi == 0 || mi > FIBER_DIM_CAP {
            if opts.mode.is_some() {
                return Err(CliError::config(
                    "m",
                    format!("the fiber warp needs an integer m in 1..={FIBER_DIM_CAP}"),
                ));
            }
            out.put("fiber", json!({ "status": "skipped", "note": format!("requires integer m in 1..={FIBER_DIM_CAP}") }));
            out.summary.push(format!(
                "fiber warp: skipped (requires integer m in 1..={FIBER_DIM_CAP})"
            ));
        } else {
            let periods = default_fiber_periods(mi);
            let (mut sizes, mut h, mut e) = (Vec::new(), Vec::new(), Vec::new());
            let mut variation = 0.0;
            for j in 0..levels {
                let chart = ctx.chart(j)?;
                let space = ctx.space(&chart)?;
                let w = riemannian_fiber_warp(&space, &periods)?;
                sizes.push(chart.sizes());
                h.push(chart.axis(0).spacing());
                e.push(w.defect.sup());
                variation = w.fiber_variation;
            }
            let defect = *e.last().expect("at least one level");
            let (order, lv) = ladder_json(&sizes, &h, &e);
            let tol = ctx.cfg.tolerance("fiber_warp");
            let v = Verdict::at_most("fiber_warp", defect, tol);
            out.summary.push(format!(
                "fiber warp (flat T^{mi} fiber): {} sup|R(product) − R_φ^m| {defect:.3e}, order {}",
                pass_word(v.pass),
                order_text(order)
            ));
            out.verdicts.push(v);
            out.put(
                "fiber",
                json!({
                    "fiber_dim": mi,
                    "fiber_periods": nums(&periods),
                    "defect": num(defect),
                    "order": num(order),
                    "fiber_variation": num(variation),
                    "levels": lv,
                }),
            );
        }
    }

    if lorentz {
        let (mut sizes, mut h, mut e) = (Vec::new(), Vec::new(), Vec::new());
        let mut last = None;
        for j in 0..levels {
            let chart = ctx.chart(j)?;
            let space = ctx.space(&chart)?;
            let f = ctx.require("f", &chart, "the Lorentzian warp needs f")?;
            let w = lorentzian_static_warp(&space, &f)?;
            sizes.push(chart.sizes());
            h.push(chart.axis(0).spacing());
            e.push(w.einstein_defect);
            last = Some(w);
        }
        let w = last.expect("at least one level");
        let (order, lv) = ladder_json(&sizes, &h, &e);
        let tol = ctx.cfg.tolerance("lorentzian");
        let v = Verdict::at_most("lorentzian_einstein", w.einstein_defect, tol);
        out.summary.push(format!(
            "static warp: {} sup|Rc_φ̄^m − k ḡ| {:.3e}, k = {} (R_φ^m/(n+m−1) = {})",
            pass_word(v.pass),
            w.einstein_defect,
            pretty(w.k),
            pretty(w.k_expected)
        ));
        out.verdicts.push(v);
        let mut entry = json!({
            "defect": num(w.einstein_defect),
            "k": num(w.k),
            "k_expected": num(w.k_expected),
            "time_variation": num(w.time_variation),
            "min_abs_f": num(w.min_abs_f),
            "order": num(order),
            "levels": lv,
        });
        if let Some(k) = &opts.expect_k {
            let want = eval_scalar(k, "warp-check.expect_k", m)?;
            let err = (w.k - want).abs();
            let v = Verdict::at_most("k_fit", err, ctx.cfg.tolerance("k_fit"));
            out.summary.push(format!(
                "  fitted k vs expected {}: error {err:.3e} {}",
                pretty(want),
                pass_word(v.pass)
            ));
            out.verdicts.push(v);
            entry["k_error"] = num(err);
        }
        out.put("lorentzian", entry);
    }
    if !fiber && !lorentz {
        out.summary
            .push("nothing to check: give f for the Lorentzian warp".into());
    }
    Ok(out)
}
