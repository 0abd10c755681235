//! Linearization of the weighted scalar curvature, its weighted adjoint, the
//! static equations, and dense operator assembly with spectral diagnostics.

mod assemble;
mod spectral;

pub use assemble::{
    assemble, assemble_with, composed_jacobian, AssembledOperator, AssemblyOptions, OperatorKind,
};
pub use spectral::{
    general_eigen, generalized_eigen, kernel_detect, kernel_of, max_imaginary_part, spectrum,
    static_spectrum_margin, symbol_check, Kernel, StaticSpectrum, StaticSpectrumOptions,
    StaticSpectrumVerdict, SymbolReport, KERNEL_TOL,
};

use crate::error::Result;
use crate::grid::local::{eval_nodes, pack_sym, Jet, LocalMetric, NodePos, Sampler};
use crate::grid::small::{Matn, ZM};
use crate::grid::{
    inner_phi_pair, integrate_phi, jet_margin, same_chart, sym_index, sym_len, Chart, GridError,
    GridField, MetricMeasureSpace, ScalarField, Sym2Field, MAX_DIM,
};
use crate::weighted::WeightedLocal;

/// A direction `(h, ψ)` of metric and potential.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub h: Sym2Field,
    pub psi: ScalarField,
}

impl Deformation {
    pub fn new(h: Sym2Field, psi: ScalarField) -> Result<Self> {
        same_chart(h.chart(), psi.chart())?;
        Ok(Deformation { h, psi })
    }

    pub fn margin(&self) -> usize {
        self.h.margin().max(self.psi.margin())
    }
}

/// The pair `(T, s)` produced by the adjoint.
#[derive(Debug, Clone)]
pub struct AdjointImage {
    pub t: Sym2Field,
    pub s: ScalarField,
}

/// Everything about the base space that the linear kernels need at a node.
pub(crate) struct BaseLocal {
    pub lm: Box<LocalMetric>,
    pub dgam: Box<[[Matn; MAX_DIM]; MAX_DIM]>,
    pub w: WeightedLocal,
    /// `∇φ` raised
    pub up_phi: [f64; MAX_DIM],
}

impl BaseLocal {
    pub fn at(
        s: &Sampler,
        space: &MetricMeasureSpace,
        p: &NodePos,
    ) -> std::result::Result<Self, GridError> {
        let lm = LocalMetric::from_field(s, &space.g, p)?;
        let pj = s.jet(space.phi.values(), p);
        let w = WeightedLocal::new(&lm, &pj, space.m);
        let dgam = lm.dgamma();
        let up_phi = lm.raise(&pj.d);
        Ok(BaseLocal {
            lm,
            dgam,
            w,
            up_phi,
        })
    }
}

/// Jets of a symmetric 2-tensor given as raw component slices.
pub(crate) fn sym2_jets_raw(
    s: &Sampler,
    n: usize,
    comps: &[Vec<f64>],
    p: &NodePos,
) -> Box<[[Jet; MAX_DIM]; MAX_DIM]> {
    let mut out = Box::new([[Jet::ZERO; MAX_DIM]; MAX_DIM]);
    for a in 0..n {
        for b in a..n {
            let j = s.jet(&comps[sym_index(n, a, b)], p);
            out[a][b] = j;
            out[b][a] = j;
        }
    }
    out
}

/// Pointwise `DR(h, ψ)`.
pub(crate) fn dr_local(b: &BaseLocal, h: &[[Jet; MAX_DIM]; MAX_DIM], psi: &Jet, m: f64) -> f64 {
    let lm = &b.lm;
    let n = lm.n;
    let gi = &lm.ginv;
    let nh = lm.nabla_sym2(h);
    let nnh = lm.nabla2_sym2(h, &b.dgam, &nh);
    let up = &b.up_phi;

    let mut hv = ZM;
    for a in 0..n {
        for c in 0..n {
            hv[a][c] = h[a][c].v;
        }
    }
    let mut divdiv = 0.0;
    let mut lap_tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    divdiv += gi[i][l] * gi[j][k] * nnh[i][j][k][l];
                    lap_tr += gi[i][j] * gi[k][l] * nnh[i][j][k][l];
                }
            }
        }
    }
    // (div h)_l = g^{jk} ∇_j h_kl and d(tr h)_a = g^{kl} ∇_a h_kl
    let mut div_h_phi = 0.0;
    let mut dtr_phi = 0.0;
    for l in 0..n {
        let mut dv = 0.0;
        let mut dt = 0.0;
        for j in 0..n {
            for k in 0..n {
                dv += gi[j][k] * nh[j][k][l];
                dt += gi[j][k] * nh[l][j][k];
            }
        }
        div_h_phi += dv * up[l];
        dtr_phi += dt * up[l];
    }
    let mut h_phi_phi = 0.0;
    for k in 0..n {
        for l in 0..n {
            h_phi_phi += hv[k][l] * up[k] * up[l];
        }
    }
    let divphi_divphi = divdiv - 2.0 * div_h_phi - lm.inner2(&hv, &b.w.hess_phi) + h_phi_phi;
    let lap_phi_tr = lap_tr - dtr_phi;
    let dphi_dpsi: f64 = (0..n).map(|a| up[a] * psi.d[a]).sum();
    let lap_phi_psi = lm.laplacian(psi) - dphi_dpsi;
    divphi_divphi - lm.inner2(&hv, &b.w.rc_phi) - lap_phi_tr + 2.0 * (lap_phi_psi - dphi_dpsi / m)
}

/// Pointwise adjoint `(−(Δ_φf)g + Hess f − f Rc_φ, 2Δ_φf + (2/m)(⟨df,dφ⟩ + fΔ_φφ))`.
pub(crate) fn dr_star_local(b: &BaseLocal, f: &Jet, m: f64) -> (Matn, f64) {
    let lm = &b.lm;
    let n = lm.n;
    let hf = lm.hess(f);
    let df_dphi: f64 = (0..n).map(|a| b.up_phi[a] * f.d[a]).sum();
    let lapf = lm.trace(&hf) - df_dphi;
    let mut t = ZM;
    for a in 0..n {
        for c in 0..n {
            t[a][c] = -lapf * lm.g[a][c] + hf[a][c] - f.v * b.w.rc_phi[a][c];
        }
    }
    let s = 2.0 * lapf + 2.0 / m * (df_dphi + f.v * b.w.lap_phi_phi());
    (t, s)
}

/// Linearization `DR(h, ψ)` of the weighted scalar curvature.
pub fn dr(space: &MetricMeasureSpace, d: &Deformation) -> Result<ScalarField> {
    same_chart(space.chart(), d.h.chart())?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = jet_margin(&chart, space.margin().max(d.margin()));
    let m = space.m;
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let b = BaseLocal::at(s, space, p)?;
        let hj = s.sym2_jets(&d.h, p);
        let pj = s.jet(d.psi.values(), p);
        debug_assert_eq!(n, b.lm.n);
        out[0] = dr_local(&b, &hj, &pj, m);
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Weighted adjoint `DR*(f)`.
pub fn dr_star(space: &MetricMeasureSpace, f: &ScalarField) -> Result<AdjointImage> {
    same_chart(space.chart(), f.chart())?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let ns = sym_len(n);
    let margin = jet_margin(&chart, space.margin().max(f.margin()));
    let m = space.m;
    let mut comps = eval_nodes(&chart, margin, ns + 1, |s, p, out| {
        let b = BaseLocal::at(s, space, p)?;
        let (t, sv) = dr_star_local(&b, &s.jet(f.values(), p), m);
        pack_sym(n, &t, &mut out[..ns]);
        out[ns] = sv;
        Ok(())
    })?;
    let s = ScalarField::from_values(chart.clone(), comps.pop().unwrap(), margin);
    Ok(AdjointImage {
        t: Sym2Field::from_components(chart, comps, margin),
        s,
    })
}

/// Relative defect of `∫ f DR(h,ψ) e^{-φ} = ∫ ⟨DR*(f), (h,ψ)⟩ e^{-φ}`.
pub fn adjoint_defect(space: &MetricMeasureSpace, d: &Deformation, f: &ScalarField) -> Result<f64> {
    if !space.chart().is_closed() {
        return Err(GridError::ClosedChartRequired("adjoint_defect").into());
    }
    let lhs = integrate_phi(space, &f.mul(&dr(space, d)?)?)?;
    let img = dr_star(space, f)?;
    let rhs = inner_phi_pair(space, (&img.t, &img.s), (&d.h, &d.psi))?;
    Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
}

/// Residuals of the weighted static system and its derived forms.
#[derive(Debug, Clone)]
pub struct StaticResiduals {
    /// `−(Δ_φf)g + Hess f − f Rc_φ`
    pub eq1: Sym2Field,
    /// `Δ_φf + (1/m)(⟨df,dφ⟩ + fΔ_φφ)`
    pub eq2: ScalarField,
    /// `Δ_φf + f R_φ/(n+m−1)`
    pub trace_form: ScalarField,
    /// `Hess f − f(Rc_φ − R_φ g/(n+m−1))`
    pub hess_form: Sym2Field,
    pub r_phi: ScalarField,
    pub warnings: Vec<String>,
}

impl StaticResiduals {
    /// `sup|eq1| + sup|eq2|`
    pub fn system_sup(&self) -> f64 {
        self.eq1.sup() + self.eq2.sup()
    }

    /// `sup|trace_form| + sup|hess_form|`
    pub fn derived_sup(&self) -> f64 {
        self.trace_form.sup() + self.hess_form.sup()
    }
}

/// Relative level below which `f` counts as vanishing.
const NEAR_ZERO: f64 = 1e-8;

fn zero_warnings(chart: &Chart, margin: usize, f: &ScalarField) -> Vec<String> {
    let valid = chart.valid_nodes(margin);
    let scale = valid.iter().fold(0.0f64, |a, &k| a.max(f.at(k).abs()));
    if scale == 0.0 {
        return vec!["f vanishes identically; the static system is trivially satisfied".into()];
    }
    let (node, v) =
        valid
            .iter()
            .map(|&k| (k, f.at(k).abs()))
            .fold(
                (usize::MAX, f64::INFINITY),
                |a, b| if b.1 < a.1 { b } else { a },
            );
    if v <= NEAR_ZERO * scale {
        vec![format!("f nearly vanishes at node {node} (|f| = {v:e}); residuals there are evaluated through the zero set")]
    } else {
        Vec::new()
    }
}

pub fn static_residuals(space: &MetricMeasureSpace, f: &ScalarField) -> Result<StaticResiduals> {
    same_chart(space.chart(), f.chart())?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let ns = sym_len(n);
    let m = space.m;
    let nm1 = n as f64 + m - 1.0;
    let margin = jet_margin(&chart, space.margin().max(f.margin()));
    let comps = eval_nodes(&chart, margin, 2 * ns + 3, |s, p, out| {
        let b = BaseLocal::at(s, space, p)?;
        let fj = s.jet(f.values(), p);
        let (t, sv) = dr_star_local(&b, &fj, m);
        let lm = &b.lm;
        let hf = lm.hess(&fj);
        let lapf = lm.trace(&hf) - (0..n).map(|a| b.up_phi[a] * fj.d[a]).sum::<f64>();
        let r = b.w.r_phi;
        let mut hform = ZM;
        for a in 0..n {
            for c in 0..n {
                hform[a][c] = hf[a][c] - fj.v * (b.w.rc_phi[a][c] - r * lm.g[a][c] / nm1);
            }
        }
        pack_sym(n, &t, &mut out[..ns]);
        pack_sym(n, &hform, &mut out[ns..2 * ns]);
        out[2 * ns] = 0.5 * sv;
        out[2 * ns + 1] = lapf + fj.v * r / nm1;
        out[2 * ns + 2] = r;
        Ok(())
    })?;
    let mut it = comps.into_iter();
    let eq1 = Sym2Field::from_components(chart.clone(), it.by_ref().take(ns).collect(), margin);
    let hess_form =
        Sym2Field::from_components(chart.clone(), it.by_ref().take(ns).collect(), margin);
    let eq2 = ScalarField::from_values(chart.clone(), it.next().unwrap(), margin);
    let trace_form = ScalarField::from_values(chart.clone(), it.next().unwrap(), margin);
    let r_phi = ScalarField::from_values(chart.clone(), it.next().unwrap(), margin);
    let warnings = zero_warnings(&chart, margin, f);
    Ok(StaticResiduals {
        eq1,
        eq2,
        trace_form,
        hess_form,
        r_phi,
        warnings,
    })
}

/// Classical vacuum static residual `Hess f − f(Rc − R g/(n−1))`. Needs `n ≥ 2`.
pub fn classical_static_residual(g: &Sym2Field, f: &ScalarField) -> Result<Sym2Field> {
    same_chart(g.chart(), f.chart())?;
    let chart = g.chart().clone();
    let n = chart.dim();
    if n < 2 {
        return Err(GridError::InvalidParameter(
            "classical static equation needs dimension at least 2".into(),
        )
        .into());
    }
    let margin = jet_margin(&chart, g.margin().max(f.margin()));
    let comps = eval_nodes(&chart, margin, sym_len(n), |s, p, out| {
        let lm = LocalMetric::from_field(s, g, p)?;
        let fj = s.jet(f.values(), p);
        let hf = lm.hess(&fj);
        let rc = lm.ricci();
        let r = lm.trace(&rc);
        let mut res = ZM;
        for a in 0..n {
            for c in 0..n {
                res[a][c] = hf[a][c] - fj.v * (rc[a][c] - r * lm.g[a][c] / (n as f64 - 1.0));
            }
        }
        pack_sym(n, &res, out);
        Ok(())
    })?;
    Ok(Sym2Field::from_components(chart, comps, margin))
}

/// Consistency scalar `Δ_φφ − ((m−1)/(m+n−1)) R_φ − R/(n−1)`, which vanishes
/// when a space is static in both the weighted and the classical sense.
pub fn weighted_classical_consistency(space: &MetricMeasureSpace) -> Result<ScalarField> {
    let chart = space.chart().clone();
    let n = chart.dim();
    if n < 2 {
        return Err(GridError::InvalidParameter(
            "consistency scalar needs dimension at least 2".into(),
        )
        .into());
    }
    let m = space.m;
    let margin = jet_margin(&chart, space.margin());
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let lm = LocalMetric::from_field(s, &space.g, p)?;
        let w = WeightedLocal::new(&lm, &s.jet(space.phi.values(), p), m);
        out[0] =
            w.lap_phi_phi() - (m - 1.0) / (m + n as f64 - 1.0) * w.r_phi - w.r / (n as f64 - 1.0);
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}
