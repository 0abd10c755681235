//! Weighted curvature of a smooth metric measure space: Bakry-Emery Ricci,
//! weighted scalar curvature, weighted Schouten and Weyl tensors, and the
//! defect fields of the identities relating them.

use std::sync::Arc;

use crate::grid::local::{
    eval_nodes, metric_values, pack_sym, unpack_sym, Jet, LocalMetric, Sampler,
};
use crate::grid::small::{Matn, ZM};
use crate::grid::{
    codazzi_defect, differential, div_phi, jet_margin, pack_riemann, sym_len, Chart, CovectorField,
    GridError, GridField, MetricMeasureSpace, Riemann4Field, ScalarField, Sym2Field, MAX_DIM,
};

/// Pointwise weighted quantities at one node.
pub(crate) struct WeightedLocal {
    pub r: f64,
    pub hess_phi: Matn,
    /// `Δφ` (unweighted)
    pub lap_phi: f64,
    pub grad_phi_sq: f64,
    pub rc_phi: Matn,
    pub r_phi: f64,
}

impl WeightedLocal {
    pub fn new(lm: &LocalMetric, phi: &Jet, m: f64) -> Self {
        let n = lm.n;
        let rc = lm.ricci();
        let r = lm.trace(&rc);
        let hess_phi = lm.hess(phi);
        let lap_phi = lm.trace(&hess_phi);
        let grad_phi_sq = lm.inner1(&phi.d, &phi.d);
        let mut rc_phi = ZM;
        for a in 0..n {
            for b in 0..n {
                rc_phi[a][b] = rc[a][b] + hess_phi[a][b] - phi.d[a] * phi.d[b] / m;
            }
        }
        let r_phi = r + 2.0 * lap_phi - (m + 1.0) / m * grad_phi_sq;
        WeightedLocal {
            r,
            hess_phi,
            lap_phi,
            grad_phi_sq,
            rc_phi,
            r_phi,
        }
    }

    /// `Δ_φ φ = Δφ - |∇φ|²`
    pub fn lap_phi_phi(&self) -> f64 {
        self.lap_phi - self.grad_phi_sq
    }
}

pub(crate) fn local_at(
    s: &Sampler,
    space: &MetricMeasureSpace,
    p: &crate::grid::local::NodePos,
) -> Result<(Box<LocalMetric>, Jet), GridError> {
    let lm = LocalMetric::from_field(s, &space.g, p)?;
    let pj = s.jet(space.phi.values(), p);
    Ok((lm, pj))
}

fn space_margin(space: &MetricMeasureSpace) -> usize {
    jet_margin(space.chart(), space.margin())
}

/// `Rc_φ^m = Rc + Hess φ - (1/m) dφ⊗dφ`
pub fn bakry_emery_ricci(space: &MetricMeasureSpace) -> Result<Sym2Field, GridError> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = space_margin(space);
    let comps = eval_nodes(&chart, margin, sym_len(n), |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        pack_sym(n, &WeightedLocal::new(&lm, &pj, space.m).rc_phi, out);
        Ok(())
    })?;
    Ok(Sym2Field::from_components(chart, comps, margin))
}

/// `R_φ^m = R + 2Δφ - ((m+1)/m)|∇φ|²`
pub fn weighted_scalar(space: &MetricMeasureSpace) -> Result<ScalarField, GridError> {
    let chart = space.chart().clone();
    let margin = space_margin(space);
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        let lap = lm.laplacian(&pj);
        let gsq = lm.inner1(&pj.d, &pj.d);
        let rc = lm.ricci();
        out[0] = lm.trace(&rc) + 2.0 * lap - (space.m + 1.0) / space.m * gsq;
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// `Δ_φ φ`
pub fn weighted_laplacian_of_potential(
    space: &MetricMeasureSpace,
) -> Result<ScalarField, GridError> {
    let chart = space.chart().clone();
    let margin = space_margin(space);
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        out[0] = lm.laplacian(&pj) - lm.inner1(&pj.d, &pj.d);
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Kulkarni-Nomizu product
/// `(A⩒B)_ijkl = A_ik B_jl + A_jl B_ik - A_il B_jk - A_jk B_il`.
pub fn kulkarni_nomizu_local(n: usize, a: &Matn, b: &Matn) -> Box<[[Matn; MAX_DIM]; MAX_DIM]> {
    let mut out = Box::new([[ZM; MAX_DIM]; MAX_DIM]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[i][j][k][l] = a[i][k] * b[j][l] + a[j][l] * b[i][k]
                        - a[i][l] * b[j][k]
                        - a[j][k] * b[i][l];
                }
            }
        }
    }
    out
}

/// Field version of the Kulkarni-Nomizu product.
pub fn kulkarni_nomizu(a: &Sym2Field, b: &Sym2Field) -> Result<Riemann4Field, GridError> {
    crate::grid::same_chart(a.chart(), b.chart())?;
    let chart = a.chart().clone();
    let n = chart.dim();
    let margin = a.margin().max(b.margin());
    let comps = eval_nodes(&chart, margin, Riemann4Field::stored_len(n), |_, p, out| {
        let kn = kulkarni_nomizu_local(n, &unpack_sym(a, p.node), &unpack_sym(b, p.node));
        pack_riemann(n, &kn, out);
        Ok(())
    })?;
    Ok(Riemann4Field::from_components(chart, comps, margin))
}

/// Weighted Schouten tensor `P_φ^m` and weighted Weyl tensor `A_φ^m`.
#[derive(Debug, Clone)]
pub struct SchoutenWeyl {
    pub p_phi: Sym2Field,
    pub a_phi: Riemann4Field,
}

fn check_weyl_range(n: usize, m: f64) -> Result<(), GridError> {
    let s = m + n as f64;
    if (s - 3.0).abs() < 1e-12 || (s - 2.0).abs() < 1e-12 {
        return Err(GridError::InvalidParameter(format!(
            "weighted Weyl tensor undefined for m + n = {s}"
        )));
    }
    Ok(())
}

fn schouten_local(lm: &LocalMetric, w: &WeightedLocal, m: f64) -> Matn {
    let n = lm.n;
    let c = w.r_phi / (2.0 * (m + n as f64 - 1.0));
    let mut p = ZM;
    for a in 0..n {
        for b in 0..n {
            p[a][b] = w.rc_phi[a][b] - c * lm.g[a][b];
        }
    }
    p
}

/// `P = Rc_φ^m - R_φ^m g / (2(m+n-1))`
pub fn weighted_schouten(space: &MetricMeasureSpace) -> Result<Sym2Field, GridError> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = space_margin(space);
    let comps = eval_nodes(&chart, margin, sym_len(n), |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        let w = WeightedLocal::new(&lm, &pj, space.m);
        pack_sym(n, &schouten_local(&lm, &w, space.m), out);
        Ok(())
    })?;
    Ok(Sym2Field::from_components(chart, comps, margin))
}

/// `P_φ^m` and `A_φ^m = Rm - P_φ^m ⩒ g / (m+n-2)`. Rejects `m + n ∈ {2, 3}`.
pub fn schouten_weyl(space: &MetricMeasureSpace) -> Result<SchoutenWeyl, GridError> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let m = space.m;
    check_weyl_range(n, m)?;
    let margin = space_margin(space);
    let ns = sym_len(n);
    let nr = Riemann4Field::stored_len(n);
    let comps = eval_nodes(&chart, margin, ns + nr, |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        let w = WeightedLocal::new(&lm, &pj, m);
        let pp = schouten_local(&lm, &w, m);
        let kn = kulkarni_nomizu_local(n, &pp, &lm.g);
        let mut rm = lm.riemann_all();
        let c = 1.0 / (m + n as f64 - 2.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[i][j][k][l] -= c * kn[i][j][k][l];
                    }
                }
            }
        }
        pack_sym(n, &pp, &mut out[..ns]);
        pack_riemann(n, &rm, &mut out[ns..]);
        Ok(())
    })?;
    let mut comps = comps;
    let a = comps.split_off(ns);
    Ok(SchoutenWeyl {
        p_phi: Sym2Field::from_components(chart.clone(), comps, margin),
        a_phi: Riemann4Field::from_components(chart, a, margin),
    })
}

/// Everything the weighted-curvature report needs, from one space.
#[derive(Debug, Clone)]
pub struct WeightedCurvaturePackage {
    pub rc_phi: Sym2Field,
    pub r_phi: ScalarField,
    pub p_phi: Sym2Field,
    /// Absent when `m + n ∈ {2, 3}`.
    pub a_phi: Option<Riemann4Field>,
    /// Hypotheses of the conformal-flatness characterization that the input violates.
    pub flags: Vec<String>,
}

pub fn weighted_package(space: &MetricMeasureSpace) -> Result<WeightedCurvaturePackage, GridError> {
    let rc_phi = bakry_emery_ricci(space)?;
    let r_phi = weighted_scalar(space)?;
    let (p_phi, a_phi) = match schouten_weyl(space) {
        Ok(sw) => (sw.p_phi, Some(sw.a_phi)),
        Err(GridError::InvalidParameter(_)) => (weighted_schouten(space)?, None),
        Err(e) => return Err(e),
    };
    Ok(WeightedCurvaturePackage {
        rc_phi,
        r_phi,
        p_phi,
        a_phi,
        flags: hypothesis_flags(space.dim(), space.m),
    })
}

/// Notes on where `(n, m)` falls outside the range of the characterization
/// theorems (`n ≥ 3`, `m + n ≠ 3`).
pub fn hypothesis_flags(n: usize, m: f64) -> Vec<String> {
    let mut f = Vec::new();
    if n < 3 {
        f.push(format!(
            "n = {n} is below the n >= 3 range of the conformal-flatness characterization"
        ));
    }
    if (m + n as f64 - 3.0).abs() < 1e-12 {
        f.push("m + n = 3: weighted Weyl tensor undefined".into());
    }
    if (m + n as f64 - 2.0).abs() < 1e-12 {
        f.push("m + n = 2: weighted Weyl tensor undefined".into());
    }
    f
}

fn covector_diff_norm(
    chart: &Arc<Chart>,
    margin: usize,
    n: usize,
    f: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<ScalarField, GridError> {
    let mut comps = eval_nodes(chart, margin, 1, |_, p, out| {
        out[0] = (0..n).fold(0.0f64, |acc, i| acc.max(f(p.node, i).abs()));
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart.clone(),
        comps.pop().unwrap(),
        margin,
    ))
}

/// Pointwise max-norm of `div_φ Rc_φ^m - ½ dR_φ^m + (1/m) Δ_φφ dφ`. The
/// divergence and `dR_φ^m` are taken by differentiating the computed fields.
pub fn bianchi_defect(space: &MetricMeasureSpace) -> Result<ScalarField, GridError> {
    let rc = bakry_emery_ricci(space)?;
    let div = div_phi(space, &rc)?;
    let dr = differential(&weighted_scalar(space)?)?;
    let lpp = weighted_laplacian_of_potential(space)?;
    let dphi = differential(&space.phi)?;
    let m = space.m;
    let chart = space.chart().clone();
    let margin = div.margin().max(dr.margin());
    covector_diff_norm(&chart, margin, chart.dim(), |k, i| {
        div.at(k, i) - 0.5 * dr.at(k, i) + lpp.at(k) * dphi.at(k, i) / m
    })
}

/// Pointwise `|R_φ^m - tr_g Rc_φ^m - Δ_φφ|`, with `Δ_φφ` computed
/// independently as `div_φ(dφ)`.
pub fn trace_identity_defect(space: &MetricMeasureSpace) -> Result<ScalarField, GridError> {
    let rc = bakry_emery_ricci(space)?;
    let r = weighted_scalar(space)?;
    let lpp = div_phi(space, &differential(&space.phi)?)?;
    let chart = space.chart().clone();
    let margin = lpp.margin();
    let n = chart.dim();
    let mut comps = eval_nodes(&chart, margin, 1, |_, p, out| {
        let (_, ginv, _) = metric_values(&space.g, p.node)?;
        let t = unpack_sym(&rc, p.node);
        let mut tr = 0.0;
        for a in 0..n {
            for b in 0..n {
                tr += ginv[a][b] * t[a][b];
            }
        }
        out[0] = (r.at(p.node) - tr - lpp.at(p.node)).abs();
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Pointwise defects of the three divergence identities used to show that
/// the weighted scalar curvature of a static space is constant.
#[derive(Debug, Clone)]
pub struct DivergenceIdentityDefects {
    /// `div_φ((Δ_φf) g) = d(Δ_φf) - (Δ_φf) dφ`
    pub laplacian_metric: ScalarField,
    /// `div_φ(Hess f) = d(Δ_φf) + Rc_φ^m(∇f) + (1/m)⟨∇φ,∇f⟩ dφ`
    pub hessian: ScalarField,
    /// `div_φ(f Rc_φ^m) = Rc_φ^m(∇f) + ½ f dR_φ^m - (1/m) f (Δ_φφ) dφ`
    pub ricci: ScalarField,
}

impl DivergenceIdentityDefects {
    pub fn sups(&self) -> [f64; 3] {
        [
            self.laplacian_metric.sup(),
            self.hessian.sup(),
            self.ricci.sup(),
        ]
    }
}

pub fn weighted_divergence_identities(
    space: &MetricMeasureSpace,
    f: &ScalarField,
) -> Result<DivergenceIdentityDefects, GridError> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let m = space.m;
    let base = jet_margin(&chart, space.margin().max(f.margin()));
    // pointwise fields: Δ_φf, Hess f, Rc_φ, R_φ, Δ_φφ, ∇f (raised), Rc_φ(∇f)
    let ns = sym_len(n);
    let comps = eval_nodes(&chart, base, 2 * ns + 3 + n, |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        let w = WeightedLocal::new(&lm, &pj, m);
        let fj = s.jet(f.values(), p);
        let hf = lm.hess(&fj);
        let lapf = lm.trace(&hf) - lm.inner1(&pj.d, &fj.d);
        pack_sym(n, &hf, &mut out[..ns]);
        pack_sym(n, &w.rc_phi, &mut out[ns..2 * ns]);
        out[2 * ns] = lapf;
        out[2 * ns + 1] = w.r_phi;
        out[2 * ns + 2] = w.lap_phi_phi();
        let up = lm.raise(&fj.d);
        for i in 0..n {
            out[2 * ns + 3 + i] = (0..n).map(|l| w.rc_phi[i][l] * up[l]).sum();
        }
        Ok(())
    })?;
    let mut it = comps.into_iter();
    let hess = Sym2Field::from_components(chart.clone(), it.by_ref().take(ns).collect(), base);
    let rcphi = Sym2Field::from_components(chart.clone(), it.by_ref().take(ns).collect(), base);
    let lapf = ScalarField::from_values(chart.clone(), it.next().unwrap(), base);
    let rphi = ScalarField::from_values(chart.clone(), it.next().unwrap(), base);
    let lpp = ScalarField::from_values(chart.clone(), it.next().unwrap(), base);
    let rc_df: Vec<Vec<f64>> = it.collect();

    let lap_g = space.g.scale_by(&lapf)?;
    let f_rc = rcphi.scale_by(f)?;
    let div1 = div_phi(space, &lap_g)?;
    let div2 = div_phi(space, &hess)?;
    let div3 = div_phi(space, &f_rc)?;
    let dlapf = differential(&lapf)?;
    let drphi = differential(&rphi)?;
    let dphi = differential(&space.phi)?;
    let df = differential(f)?;
    let margin = div1.margin().max(dlapf.margin());

    let gdot = |k: usize| -> Result<f64, GridError> {
        let (_, ginv, _) = metric_values(&space.g, k)?;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += ginv[a][b] * dphi.at(k, a) * df.at(k, b);
            }
        }
        Ok(s)
    };
    let first = covector_diff_norm(&chart, margin, n, |k, i| {
        div1.at(k, i) - (dlapf.at(k, i) - lapf.at(k) * dphi.at(k, i))
    })?;
    let second = covector_diff_norm(&chart, margin, n, |k, i| {
        let pd = gdot(k).unwrap_or(f64::NAN);
        div2.at(k, i) - (dlapf.at(k, i) + rc_df[i][k] + pd * dphi.at(k, i) / m)
    })?;
    let third = covector_diff_norm(&chart, margin, n, |k, i| {
        div3.at(k, i)
            - (rc_df[i][k] + 0.5 * f.at(k) * drphi.at(k, i)
                - f.at(k) * lpp.at(k) * dphi.at(k, i) / m)
    })?;
    Ok(DivergenceIdentityDefects {
        laplacian_metric: first,
        hessian: second,
        ricci: third,
    })
}

/// The weighted locally conformally flat pair `(e^{-2u} δ, m u)`.
pub fn lcf_construct(u: &ScalarField, m: f64) -> Result<MetricMeasureSpace, GridError> {
    let factor = u.map(|v| (-2.0 * v).exp());
    let g = Sym2Field::conformal(&factor);
    MetricMeasureSpace::new(g, u.scaled(m), m)
}

/// Codazzi defect of the weighted Schouten tensor.
pub fn schouten_codazzi_defect(space: &MetricMeasureSpace) -> Result<ScalarField, GridError> {
    codazzi_defect(&space.g, &weighted_schouten(space)?)
}

/// Pointwise max over `(i,j,k)` of the defect of
/// `R_ijkl ∇^l f = -(1/(m+n-2))(Rc_il g_jk ∇^l f + Rc_jk ∇_i f - Rc_ik ∇_j f - Rc_jl g_ik ∇^l f)
///   + R_φ/((n+m-1)(n+m-2)) (g_jk ∇_i f - g_ik ∇_j f)`
/// with `Rc = Rc_φ^m`, which holds wherever `A_φ^m` vanishes.
pub fn lcf_contracted_defect(
    space: &MetricMeasureSpace,
    f: &ScalarField,
) -> Result<ScalarField, GridError> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let m = space.m;
    check_weyl_range(n, m)?;
    let margin = jet_margin(&chart, space.margin().max(f.margin()));
    let s1 = m + n as f64 - 1.0;
    let s2 = m + n as f64 - 2.0;
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let (lm, pj) = local_at(s, space, p)?;
        let w = WeightedLocal::new(&lm, &pj, m);
        let rm = lm.riemann_all();
        let df = s.grad(f.values(), p);
        let up = lm.raise(&df);
        let g = &lm.g;
        let rc = &w.rc_phi;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs: f64 = (0..n).map(|l| rm[i][j][k][l] * up[l]).sum();
                    let rc_i_up: f64 = (0..n).map(|l| rc[i][l] * up[l]).sum();
                    let rc_j_up: f64 = (0..n).map(|l| rc[j][l] * up[l]).sum();
                    let rhs = -(rc_i_up * g[j][k] + rc[j][k] * df[i]
                        - rc[i][k] * df[j]
                        - rc_j_up * g[i][k])
                        / s2
                        + w.r_phi / (s1 * s2) * (g[j][k] * df[i] - g[i][k] * df[j]);
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        out[0] = worst;
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Convenience: `dφ` of a space as a covariant field.
pub fn potential_differential(space: &MetricMeasureSpace) -> Result<CovectorField, GridError> {
    differential(&space.phi)
}
