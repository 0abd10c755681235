use serde_json::json;
use wcurvlab_core::linearization::{
    assemble_with, kernel_detect, static_spectrum_margin, AssemblyOptions, OperatorKind,
    StaticSpectrumOptions, KERNEL_TOL,
};

use super::{Ctx, Outcome};
use crate::error::Result;
use crate::report::{num, nums, Verdict};

pub fn run(ctx: &Ctx) -> Result<Outcome> {
    let opts = &ctx.cfg.kernel;
    let chart = ctx.chart(0)?;
    let space = ctx.space(&chart)?;
    let cap = opts.cap.unwrap_or(AssemblyOptions::default().cap);
    let tol = opts.tol.unwrap_or(KERNEL_TOL);
    let head = opts.spectrum_head.unwrap_or(8);

    let op = assemble_with(&space, OperatorKind::DrDrStar, AssemblyOptions { cap })?;
    let k = kernel_detect(&op, tol)?;
    // W-orthonormal basis: ‖proj 1‖² = Σ_i ⟨1, v_i⟩_W²
    let total: f64 = op.weights.iter().sum();
    let proj: f64 = k
        .basis
        .iter()
        .map(|v| {
            op.weights
                .iter()
                .zip(v.values())
                .map(|(w, x)| w * x)
                .sum::<f64>()
                .powi(2)
        })
        .sum();
    let cosine = if k.dim > 0 {
        (proj / total).sqrt()
    } else {
        0.0
    };

    let spectral = static_spectrum_margin(
        &space,
        StaticSpectrumOptions {
            head,
            cap,
            ..Default::default()
        },
    )?;

    let mut out = Outcome::default();
    out.put(
        "drdr_star",
        json!({
            "unknowns": op.dim(),
            "kernel_dim": k.dim,
            "threshold": num(k.threshold),
            "lambda_max": num(k.lambda_max),
            "gap": k.gap.map(num),
            "spectrum_head": nums(&k.eigenvalues[..k.eigenvalues.len().min(head)]),
            "constant_cosine": num(cosine),
            "symmetry_defect": num(op.symmetry_defect),
        }),
    );
    out.put(
        "weighted_laplacian",
        json!({
            "spectrum_head": nums(&spectral.spectrum_head),
            "r_phi_mean": num(spectral.r_phi_mean),
            "r_phi_variation": num(spectral.r_phi_variation),
            "margin": spectral.margin.map(num),
            "verdict": spectral.verdict,
            "verdict_text": spectral.verdict.to_string(),
        }),
    );
    out.summary
        .push(format!("kernel dim {}; {}", k.dim, spectral.verdict));
    if k.dim > 0 {
        out.summary.push(format!(
            "  cosine of kernel span to constants: {cosine:.12}"
        ));
    }
    if let Some(want) = opts.expect_dim {
        let v = Verdict::at_most("kernel_dim", (k.dim as f64 - want as f64).abs(), 0.0);
        out.verdicts.push(v);
    }
    Ok(out)
}
