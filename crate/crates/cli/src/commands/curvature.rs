use serde_json::{json, Value};
use wcurvlab_core::grid::GridField;
use wcurvlab_core::weighted::weighted_package;

use super::{check_dump_names, pretty, scalar_norms, sym2_norms, Ctx, Outcome};
use crate::config::FieldSource;
use crate::error::Result;
use crate::report::{num, Verdict};

const DUMPABLE: &[&str] = &["r_phi", "rc_phi", "p_phi", "a_phi"];

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let opts = &ctx.cfg.curvature;
    check_dump_names("curvature.dump", &opts.dump, DUMPABLE)?;
    let chart = ctx.chart(0)?;
    let space = ctx.space(&chart)?;
    let pkg = weighted_package(&space)?;
    let mut out = Outcome::default();

    out.put("chart", json!({ "dim": chart.dim(), "sizes": chart.sizes(), "closed": chart.is_closed(), "order": chart.order() }));
    out.put("r_phi", scalar_norms(&space, &pkg.r_phi)?);
    out.put("rc_phi", sym2_norms(&space, &pkg.rc_phi)?);
    out.put("p_phi", sym2_norms(&space, &pkg.p_phi)?);
    out.put(
        "a_phi",
        match &pkg.a_phi {
            Some(a) => json!({ "sup": num(a.sup()) }),
            None => Value::Null,
        },
    );
    out.put("hypothesis_flags", json!(pkg.flags));

    let (lo, hi) = pkg.r_phi.range();
    out.summary.push(format!(
        "R_φ^m: mean {}, range [{}, {}], sup|Rc_φ^m| {:.3e}",
        pretty(pkg.r_phi.mean()),
        pretty(lo),
        pretty(hi),
        pkg.rc_phi.sup()
    ));
    if pkg.a_phi.is_none() {
        out.summary
            .push("A_φ^m not computed: undefined for m + n in {2, 3}".into());
    }

    if let Some(src) = &opts.expect_r_phi {
        let expected = ctx.res.scalar(
            &FieldSource::Text(src.clone()),
            "curvature.expect_r_phi",
            "expect",
            &chart,
        )?;
        let err = pkg.r_phi.sub(&expected)?.sup();
        let tol = ctx.cfg.tolerance("r_phi");
        let v = Verdict::at_most("r_phi_closed_form", err, tol);
        out.summary.push(format!(
            "sup|R_φ^m − expected| = {err:.3e} (tolerance {tol:.1e}): {}",
            super::pass_word(v.pass)
        ));
        out.put("r_phi_closed_form_error", num(err));
        out.verdicts.push(v);
    }

    if !opts.dump.is_empty() {
        let mut d = ctx.dumps()?;
        for name in &opts.dump {
            match name.as_str() {
                "r_phi" => d.scalar("r_phi", &pkg.r_phi)?,
                "rc_phi" => d.sym2("rc_phi", &pkg.rc_phi)?,
                "p_phi" => d.sym2("p_phi", &pkg.p_phi)?,
                "a_phi" => match &pkg.a_phi {
                    Some(a) => d.riemann("a_phi", a)?,
                    None => out
                        .summary
                        .push("a_phi dump skipped: tensor undefined here".into()),
                },
                _ => unreachable!("names checked above"),
            }
        }
        out.dumps = Some(d);
    }
    Ok(out)
}
