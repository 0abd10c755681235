use std::sync::Arc;

use rayon::prelude::*;

use super::chart::{Chart, MAX_DIM};
use super::field::{
    pair_index, pair_len, same_chart, sym_index, sym_len, CovectorField, GridField, Riemann4Field,
    ScalarField, Sym2Field, Variance, VectorField,
};
use super::local::{eval_nodes, metric_values, pack_sym, unpack_sym, LocalMetric};
use super::small::{Matn, Vecn, ZV};
use super::space::MetricMeasureSpace;
use super::stencil::diff1;
use super::GridError;

/// Margin of anything computed from the 2-jets of fields valid at `base`.
#[inline]
pub fn jet_margin(chart: &Chart, base: usize) -> usize {
    base + chart.half_width()
}

/// Central difference of every component along `axis`.
pub fn partial<F: GridField>(field: &F, axis: usize) -> Result<F, GridError> {
    let chart = field.chart().clone();
    if axis >= chart.dim() {
        return Err(GridError::AxisOutOfRange {
            axis,
            dim: chart.dim(),
        });
    }
    let margin = jet_margin(&chart, field.margin());
    chart.check_margin(margin)?;
    let comps = field
        .components()
        .par_iter()
        .map(|c| diff1(&chart, c, axis))
        .collect();
    Ok(field.with_components(comps, margin))
}

/// The Christoffel symbols `Γ^k_ij` of a metric, stored per node.
#[derive(Debug, Clone)]
pub struct Christoffel {
    chart: Arc<Chart>,
    comps: Vec<Vec<f64>>,
    margin: usize,
}

impl Christoffel {
    pub fn at(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.chart.dim();
        self.comps[(k * n + i) * n + j][node]
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// Largest `|Γ^k_ij - oracle(x, k, i, j)|` over valid nodes.
    pub fn max_error(&self, oracle: impl Fn(&[f64], usize, usize, usize) -> f64) -> f64 {
        let n = self.chart.dim();
        let mut err = 0.0f64;
        for node in self.chart.valid_nodes(self.margin) {
            let x = self.chart.coords(node);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        err = err.max((self.at(node, k, i, j) - oracle(&x, k, i, j)).abs());
                    }
                }
            }
        }
        err
    }
}

pub fn christoffel(g: &Sym2Field) -> Result<Christoffel, GridError> {
    let chart = g.chart().clone();
    let n = chart.dim();
    let margin = jet_margin(&chart, g.margin());
    let comps = eval_nodes(&chart, margin, n * n * n, |s, p, out| {
        let lm = LocalMetric::from_field(s, g, p)?;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out[(k * n + i) * n + j] = lm.gu[k][i][j];
                }
            }
        }
        Ok(())
    })?;
    Ok(Christoffel {
        chart,
        comps,
        margin,
    })
}

/// Riemann, Ricci and scalar curvature of a metric.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub rm: Riemann4Field,
    pub rc: Sym2Field,
    pub r: ScalarField,
}

pub(crate) fn pack_riemann(n: usize, rm: &[[Matn; MAX_DIM]; MAX_DIM], out: &mut [f64]) {
    let pl = pair_len(n);
    for i in 0..n {
        for j in i + 1..n {
            let a = pair_index(n, i, j);
            for k in 0..n {
                for l in k + 1..n {
                    let b = pair_index(n, k, l);
                    if b < a {
                        continue;
                    }
                    out[sym_index(pl, a, b)] = rm[i][j][k][l];
                }
            }
        }
    }
}

pub fn curvature(g: &Sym2Field) -> Result<Curvature, GridError> {
    let chart = g.chart().clone();
    let n = chart.dim();
    let margin = jet_margin(&chart, g.margin());
    let nr = Riemann4Field::stored_len(n);
    let ns = sym_len(n);
    let comps = eval_nodes(&chart, margin, nr + ns + 1, |s, p, out| {
        let lm = LocalMetric::from_field(s, g, p)?;
        let rm = lm.riemann_all();
        let rc = lm.ricci_from(&rm);
        pack_riemann(n, &rm, &mut out[..nr]);
        pack_sym(n, &rc, &mut out[nr..nr + ns]);
        out[nr + ns] = lm.trace(&rc);
        Ok(())
    })?;
    let mut it = comps.into_iter();
    let rm: Vec<Vec<f64>> = it.by_ref().take(nr).collect();
    let rc: Vec<Vec<f64>> = it.by_ref().take(ns).collect();
    let r = it.next().unwrap();
    Ok(Curvature {
        rm: Riemann4Field::from_components(chart.clone(), rm, margin),
        rc: Sym2Field::from_components(chart.clone(), rc, margin),
        r: ScalarField::from_values(chart, r, margin),
    })
}

fn combined_margin(space: &MetricMeasureSpace, extra: usize) -> Result<usize, GridError> {
    Ok(jet_margin(space.chart(), space.margin().max(extra)))
}

/// Covariant Hessian `∇df`.
pub fn hessian(space: &MetricMeasureSpace, f: &ScalarField) -> Result<Sym2Field, GridError> {
    same_chart(space.chart(), f.chart())?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = combined_margin(space, f.margin())?;
    let comps = eval_nodes(&chart, margin, sym_len(n), |s, p, out| {
        let lm = LocalMetric::from_field(s, &space.g, p)?;
        let h = lm.hess(&s.jet(f.values(), p));
        pack_sym(n, &h, out);
        Ok(())
    })?;
    Ok(Sym2Field::from_components(chart, comps, margin))
}

/// Unweighted Laplace-Beltrami operator of `g`.
pub fn laplacian(g: &Sym2Field, w: &ScalarField) -> Result<ScalarField, GridError> {
    same_chart(g.chart(), w.chart())?;
    let chart = g.chart().clone();
    let margin = jet_margin(&chart, g.margin().max(w.margin()));
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let lm = LocalMetric::from_field(s, g, p)?;
        out[0] = lm.laplacian(&s.jet(w.values(), p));
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Weighted Laplacian `Δ_φ w = Δw - ⟨∇φ, ∇w⟩`.
pub fn laplacian_phi(
    space: &MetricMeasureSpace,
    w: &ScalarField,
) -> Result<ScalarField, GridError> {
    same_chart(space.chart(), w.chart())?;
    let chart = space.chart().clone();
    let margin = combined_margin(space, w.margin())?;
    let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
        let lm = LocalMetric::from_field(s, &space.g, p)?;
        let wj = s.jet(w.values(), p);
        let dphi = s.grad(space.phi.values(), p);
        out[0] = lm.laplacian(&wj) - lm.inner1(&dphi, &wj.d);
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

/// Differential `dw` as a covariant field.
pub fn differential(w: &ScalarField) -> Result<CovectorField, GridError> {
    let chart = w.chart().clone();
    let margin = jet_margin(&chart, w.margin());
    chart.check_margin(margin)?;
    let comps = (0..chart.dim())
        .into_par_iter()
        .map(|a| diff1(&chart, w.values(), a))
        .collect();
    Ok(CovectorField::from_components(
        chart,
        comps,
        Variance::Covariant,
        margin,
    ))
}

/// Gradient `∇w = g^{-1} dw`.
pub fn grad(space: &MetricMeasureSpace, w: &ScalarField) -> Result<VectorField, GridError> {
    raise(space, &differential(w)?)
}

pub fn raise(space: &MetricMeasureSpace, w: &CovectorField) -> Result<VectorField, GridError> {
    if w.variance() != Variance::Covariant {
        return Err(GridError::InvalidParameter(
            "raise expects a covariant field".into(),
        ));
    }
    index_map(space, w, Variance::Contravariant, |_, ginv| *ginv)
}

pub fn lower(space: &MetricMeasureSpace, v: &VectorField) -> Result<CovectorField, GridError> {
    if v.variance() != Variance::Contravariant {
        return Err(GridError::InvalidParameter(
            "lower expects a contravariant field".into(),
        ));
    }
    index_map(space, v, Variance::Covariant, |g, _| *g)
}

fn index_map(
    space: &MetricMeasureSpace,
    w: &CovectorField,
    variance: Variance,
    pick: impl Fn(&Matn, &Matn) -> Matn + Sync,
) -> Result<CovectorField, GridError> {
    same_chart(space.chart(), w.chart())?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = space.margin().max(w.margin());
    let comps = eval_nodes(&chart, margin, n, |_, p, out| {
        let (g, ginv, _) = metric_values(&space.g, p.node)?;
        let m = pick(&g, &ginv);
        for a in 0..n {
            out[a] = (0..n).map(|b| m[a][b] * w.at(p.node, b)).sum();
        }
        Ok(())
    })?;
    Ok(CovectorField::from_components(
        chart, comps, variance, margin,
    ))
}

/// Fields that admit a weighted divergence `div_φ T = div T - ι_{∇φ} T`.
pub trait WeightedDivergence: GridField {
    type Output;
    fn weighted_divergence(&self, space: &MetricMeasureSpace) -> Result<Self::Output, GridError>;
}

pub fn div_phi<T: WeightedDivergence>(
    space: &MetricMeasureSpace,
    t: &T,
) -> Result<T::Output, GridError> {
    t.weighted_divergence(space)
}

impl WeightedDivergence for CovectorField {
    type Output = ScalarField;

    fn weighted_divergence(&self, space: &MetricMeasureSpace) -> Result<ScalarField, GridError> {
        if self.variance() != Variance::Covariant {
            return Err(GridError::InvalidParameter(
                "div_phi expects a covariant field".into(),
            ));
        }
        same_chart(space.chart(), self.chart())?;
        let chart = space.chart().clone();
        let n = chart.dim();
        let margin = combined_margin(space, self.margin())?;
        let mut comps = eval_nodes(&chart, margin, 1, |s, p, out| {
            let lm = LocalMetric::from_field(s, &space.g, p)?;
            let dphi = s.grad(space.phi.values(), p);
            let mut w = ZV;
            let mut dw = [ZV; MAX_DIM];
            for k in 0..n {
                w[k] = self.at(p.node, k);
                dw[k] = s.grad(self.component(k), p);
            }
            let mut acc = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let mut nab = dw[k][i];
                    for q in 0..n {
                        nab -= lm.gu[q][i][k] * w[q];
                    }
                    acc += lm.ginv[i][k] * (nab - dphi[i] * w[k]);
                }
            }
            out[0] = acc;
            Ok(())
        })?;
        Ok(ScalarField::from_values(
            chart,
            comps.pop().unwrap(),
            margin,
        ))
    }
}

impl WeightedDivergence for Sym2Field {
    type Output = CovectorField;

    fn weighted_divergence(&self, space: &MetricMeasureSpace) -> Result<CovectorField, GridError> {
        same_chart(space.chart(), self.chart())?;
        let chart = space.chart().clone();
        let n = chart.dim();
        let margin = combined_margin(space, self.margin())?;
        let comps = eval_nodes(&chart, margin, n, |s, p, out| {
            let lm = LocalMetric::from_field(s, &space.g, p)?;
            let dphi = s.grad(space.phi.values(), p);
            let t = unpack_sym(self, p.node);
            let mut dt = [ZV; MAX_DIM * (MAX_DIM + 1) / 2];
            for (c, d) in dt.iter_mut().enumerate().take(sym_len(n)) {
                *d = s.grad(&self.components()[c], p);
            }
            for (l, o) in out.iter_mut().enumerate().take(n) {
                let mut acc = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        let mut nab = dt[sym_index(n, k, l)][i];
                        for q in 0..n {
                            nab -= lm.gu[q][i][k] * t[q][l] + lm.gu[q][i][l] * t[k][q];
                        }
                        acc += lm.ginv[i][k] * (nab - dphi[i] * t[k][l]);
                    }
                }
                *o = acc;
            }
            Ok(())
        })?;
        Ok(CovectorField::from_components(
            chart,
            comps,
            Variance::Covariant,
            margin,
        ))
    }
}

/// Covariant 3-tensor with no symmetry, as produced by `∇T` for a symmetric `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cov3Field {
    chart: Arc<Chart>,
    comps: Vec<Vec<f64>>,
    margin: usize,
}

impl Cov3Field {
    pub fn at(&self, node: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.chart.dim();
        self.comps[(i * n + j) * n + k][node]
    }
}

impl GridField for Cov3Field {
    fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }
    fn margin(&self) -> usize {
        self.margin
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn with_components(&self, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        Cov3Field {
            chart: self.chart.clone(),
            comps,
            margin,
        }
    }
}

/// `(∇T)_ijk = ∇_i T_jk` with the Levi-Civita connection of `g`.
pub fn nabla_sym2(g: &Sym2Field, t: &Sym2Field) -> Result<Cov3Field, GridError> {
    same_chart(g.chart(), t.chart())?;
    let chart = g.chart().clone();
    let n = chart.dim();
    let margin = jet_margin(&chart, g.margin().max(t.margin()));
    let comps = eval_nodes(&chart, margin, n * n * n, |s, p, out| {
        let lm = LocalMetric::from_field(s, g, p)?;
        let tv = unpack_sym(t, p.node);
        for j in 0..n {
            for k in j..n {
                let dt = s.grad(&t.components()[sym_index(n, j, k)], p);
                for i in 0..n {
                    let mut v = dt[i];
                    for q in 0..n {
                        v -= lm.gu[q][i][j] * tv[q][k] + lm.gu[q][i][k] * tv[j][q];
                    }
                    out[(i * n + j) * n + k] = v;
                    out[(i * n + k) * n + j] = v;
                }
            }
        }
        Ok(())
    })?;
    Ok(Cov3Field {
        chart,
        comps,
        margin,
    })
}

/// Pointwise `max |∇_i T_jk - ∇_j T_ik|`: vanishes for Codazzi tensors.
pub fn codazzi_defect(g: &Sym2Field, t: &Sym2Field) -> Result<ScalarField, GridError> {
    let nt = nabla_sym2(g, t)?;
    let chart = g.chart().clone();
    let n = chart.dim();
    let mut comps = eval_nodes(&chart, nt.margin, 1, |_, p, out| {
        let mut m = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    m = m.max((nt.at(p.node, i, j, k) - nt.at(p.node, j, i, k)).abs());
                }
            }
        }
        out[0] = m;
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        nt.margin,
    ))
}

/// Pointwise `max |∇_i g_jk|`.
pub fn metric_compatibility_defect(g: &Sym2Field) -> Result<ScalarField, GridError> {
    Ok(nabla_sym2(g, g)?.pointwise_norm())
}

/// Pointwise `max |R_ijkl + R_iklj + R_iljk|`.
pub fn first_bianchi_defect(rm: &Riemann4Field) -> ScalarField {
    let chart = rm.chart().clone();
    let n = chart.dim();
    let values = (0..chart.len())
        .into_par_iter()
        .map(|node| {
            let mut m = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let s = rm.at(node, i, j, k, l)
                                + rm.at(node, i, k, l, j)
                                + rm.at(node, i, l, j, k);
                            m = m.max(s.abs());
                        }
                    }
                }
            }
            m
        })
        .collect();
    ScalarField::from_values(chart, values, rm.margin())
}

/// Pointwise `max |R_ijkl ∇^l f - (∇_i∇_j∇_k f - ∇_j∇_i∇_k f)|`, with the
/// third derivatives obtained by differentiating the Hessian field.
pub fn commutator_defect(
    space: &MetricMeasureSpace,
    f: &ScalarField,
) -> Result<ScalarField, GridError> {
    let hess = hessian(space, f)?;
    let nh = nabla_sym2(&space.g, &hess)?;
    let curv = curvature(&space.g)?;
    let df = differential(f)?;
    let chart = space.chart().clone();
    let n = chart.dim();
    let margin = nh.margin;
    let mut comps = eval_nodes(&chart, margin, 1, |_, p, out| {
        let (_, ginv, _) = metric_values(&space.g, p.node)?;
        let mut up = ZV;
        for l in 0..n {
            up[l] = (0..n).map(|q| ginv[l][q] * df.at(p.node, q)).sum();
        }
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs: f64 = (0..n).map(|l| curv.rm.at(p.node, i, j, k, l) * up[l]).sum();
                    let rhs = nh.at(p.node, i, j, k) - nh.at(p.node, j, i, k);
                    m = m.max((lhs - rhs).abs());
                }
            }
        }
        out[0] = m;
        Ok(())
    })?;
    Ok(ScalarField::from_values(
        chart,
        comps.pop().unwrap(),
        margin,
    ))
}

fn require_closed(chart: &Chart, what: &'static str) -> Result<(), GridError> {
    if chart.is_closed() {
        Ok(())
    } else {
        Err(GridError::ClosedChartRequired(what))
    }
}

/// `∫ f e^{-φ} dV_g` by the uniform Riemann sum (closed charts only).
pub fn integrate_phi(space: &MetricMeasureSpace, f: &ScalarField) -> Result<f64, GridError> {
    same_chart(space.chart(), f.chart())?;
    require_closed(space.chart(), "integrate_phi")?;
    let w = space.measure_weights()?;
    Ok(w.iter().zip(f.values()).map(|(a, b)| a * b).sum())
}

/// Fields with a pointwise metric contraction.
pub trait Contract: GridField {
    fn contract_at(&self, other: &Self, ginv: &Matn, node: usize) -> f64;
}

impl Contract for ScalarField {
    fn contract_at(&self, other: &Self, _: &Matn, node: usize) -> f64 {
        self.at(node) * other.at(node)
    }
}

impl Contract for CovectorField {
    fn contract_at(&self, other: &Self, ginv: &Matn, node: usize) -> f64 {
        let n = self.chart().dim();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += ginv[a][b] * self.at(node, a) * other.at(node, b);
            }
        }
        s
    }
}

impl Contract for Sym2Field {
    fn contract_at(&self, other: &Self, ginv: &Matn, node: usize) -> f64 {
        let n = self.dim();
        let a = unpack_sym(self, node);
        let b = unpack_sym(other, node);
        contract2(n, ginv, &a, &b)
    }
}

/// `g^{ik} g^{jl} A_ij B_kl`
pub(crate) fn contract2(n: usize, ginv: &Matn, a: &Matn, b: &Matn) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut t = 0.0;
            for k in 0..n {
                for l in 0..n {
                    t += ginv[i][k] * ginv[j][l] * b[k][l];
                }
            }
            s += a[i][j] * t;
        }
    }
    s
}

fn pointwise_contraction<T: Contract>(
    space: &MetricMeasureSpace,
    a: &T,
    b: &T,
) -> Result<Vec<f64>, GridError> {
    same_chart(space.chart(), a.chart())?;
    same_chart(space.chart(), b.chart())?;
    (0..space.chart().len())
        .into_par_iter()
        .map(|k| {
            let (_, ginv, _) = metric_values(&space.g, k)?;
            Ok(a.contract_at(b, &ginv, k))
        })
        .collect()
}

/// `∫ ⟨A, B⟩_g e^{-φ} dV_g`.
pub fn inner_phi<T: Contract>(space: &MetricMeasureSpace, a: &T, b: &T) -> Result<f64, GridError> {
    require_closed(space.chart(), "inner_phi")?;
    let c = pointwise_contraction(space, a, b)?;
    let w = space.measure_weights()?;
    Ok(w.iter().zip(&c).map(|(x, y)| x * y).sum())
}

/// `∫ (⟨h₁, h₂⟩_g + ψ₁ψ₂) e^{-φ} dV_g` for pairs of a symmetric 2-tensor and a scalar.
pub fn inner_phi_pair(
    space: &MetricMeasureSpace,
    a: (&Sym2Field, &ScalarField),
    b: (&Sym2Field, &ScalarField),
) -> Result<f64, GridError> {
    Ok(inner_phi(space, a.0, b.0)? + inner_phi(space, a.1, b.1)?)
}

/// `L²(e^{-φ} dV_g)` norm of a scalar.
pub fn l2_phi(space: &MetricMeasureSpace, f: &ScalarField) -> Result<f64, GridError> {
    Ok(inner_phi(space, f, f)?.max(0.0).sqrt())
}

/// Componentwise gradient used by callers needing plain partials at one node.
pub fn gradient_at(chart: &Chart, data: &[f64], node: usize) -> Vecn {
    let s = super::local::Sampler::new(chart);
    s.grad(data, &s.pos(node))
}
