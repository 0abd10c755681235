use serde_json::{json, Value};
use wcurvlab_core::grid::GridField;
use wcurvlab_core::linearization::{classical_static_residual, static_residuals};

use super::{check_dump_names, pass_word, pretty, Ctx, Outcome};
use crate::error::Result;
use crate::report::{num, Verdict};

const DUMPABLE: &[&str] = &["eq1", "eq2", "trace_form", "hess_form", "r_phi"];

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let opts = &ctx.cfg.static_check;
    check_dump_names("static-check.dump", &opts.dump, DUMPABLE)?;
    let chart = ctx.chart(0)?;
    let space = ctx.space(&chart)?;
    let f = ctx.require("f", &chart, "static-check needs the potential f")?;
    let res = static_residuals(&space, &f)?;
    let mut out = Outcome::default();

    let system = res.system_sup();
    let (lo, hi) = res.r_phi.range();
    let mean = res.r_phi.mean();
    out.put(
        "residuals",
        json!({
            "eq1_sup": num(res.eq1.sup()),
            "eq2_sup": num(res.eq2.sup()),
            "system_sup": num(system),
            "trace_form_sup": num(res.trace_form.sup()),
            "hess_form_sup": num(res.hess_form.sup()),
            "derived_sup": num(res.derived_sup()),
        }),
    );
    out.put(
        "r_phi",
        json!({ "mean": num(mean), "min": num(lo), "max": num(hi), "variation": num(hi - lo) }),
    );
    // the unweighted system is only comparable when φ is constant
    let classical = if chart.dim() >= 2 {
        num(classical_static_residual(&space.g, &f)?.sup())
    } else {
        Value::Null
    };
    out.put("classical_residual_sup", classical);
    out.put("warnings", json!(res.warnings));

    let tol = ctx.cfg.tolerance("static");
    let v = Verdict::at_most("static_system", system, tol);
    out.summary.push(format!(
        "weighted static: {} (sup residual {system:.1e}), R_φ^m = {}",
        pass_word(v.pass),
        pretty(mean)
    ));
    if !v.pass {
        out.summary.push(format!(
            "  eq1 sup {:.3e}, eq2 sup {:.3e}, tolerance {tol:.1e}",
            res.eq1.sup(),
            res.eq2.sup()
        ));
    }
    for w in &res.warnings {
        out.summary.push(format!("  warning: {w}"));
    }
    out.verdicts.push(v);

    if !opts.dump.is_empty() {
        let mut d = ctx.dumps()?;
        for name in &opts.dump {
            match name.as_str() {
                "eq1" => d.sym2("eq1", &res.eq1)?,
                "eq2" => d.scalar("eq2", &res.eq2)?,
                "trace_form" => d.scalar("trace_form", &res.trace_form)?,
                "hess_form" => d.sym2("hess_form", &res.hess_form)?,
                "r_phi" => d.scalar("r_phi", &res.r_phi)?,
                _ => unreachable!("names checked above"),
            }
        }
        out.dumps = Some(d);
    }
    Ok(out)
}
