//! Warped products over a metric measure space: the fiber warp
//! `g ⊕ e^{-2φ/m} δ` over a flat `m`-torus, whose scalar curvature is `R_φ^m`,
//! and the static warp `-f² dt² + g`, which is weighted Einstein exactly when
//! `(g, φ, f)` is weighted static.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::local::metric_values;
use crate::grid::small::Matn;
use crate::grid::{
    curvature, hessian, jet_margin, laplacian, sym_index, sym_len, Axis, Chart, GridField,
    MetricMeasureSpace, ScalarField, Sym2Field,
};
use crate::weighted::{bakry_emery_ricci, weighted_scalar};

/// Default cap on `n + m` for the fiber warp.
pub const FIBER_DIM_CAP: usize = 5;
/// Nodes per fiber (or time) axis unless the stencil needs more.
pub const EXTRA_AXIS_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductKind {
    /// Base axes first, then `m` periodic fiber axes.
    Fiber { m: usize },
    /// One open time axis first, then the base axes.
    Time,
}

/// A product chart carrying a block metric and the pulled-back potential.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    pub space: MetricMeasureSpace,
    pub base: Arc<Chart>,
    pub kind: ProductKind,
}

impl ProductSpace {
    fn extra_len(&self) -> usize {
        self.space.chart().len() / self.base.len()
    }

    /// Base node under a product node.
    pub fn base_node(&self, k: usize) -> usize {
        match self.kind {
            ProductKind::Fiber { .. } => k / self.extra_len(),
            ProductKind::Time => k % self.base.len(),
        }
    }

    /// Product node above `base_node` at a fixed interior position of the extra axes.
    pub fn lift(&self, base_node: usize) -> usize {
        match self.kind {
            ProductKind::Fiber { .. } => base_node * self.extra_len(),
            ProductKind::Time => {
                (self.space.chart().axis(0).nodes / 2) * self.base.len() + base_node
            }
        }
    }

    fn base_dim(&self) -> usize {
        self.base.dim()
    }

    fn is_base_axis(&self, a: usize) -> bool {
        match self.kind {
            ProductKind::Fiber { .. } => a < self.base_dim(),
            ProductKind::Time => a > 0,
        }
    }

    /// Largest `|ḡ_ab|` over mixed base/extra index pairs; zero by construction.
    pub fn block_defect(&self) -> f64 {
        let n = self.space.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                if self.is_base_axis(a) != self.is_base_axis(b) {
                    worst = self
                        .space
                        .g
                        .component(a, b)
                        .iter()
                        .fold(worst, |w, v| w.max(v.abs()));
                }
            }
        }
        worst
    }

    /// `sup |v(k) − v(lift(base(k)))|` over valid nodes: dependence of a product
    /// field on the extra directions.
    pub fn extra_variation(&self, v: &ScalarField) -> f64 {
        let chart = self.space.chart();
        chart
            .valid_nodes(v.margin())
            .into_iter()
            .map(|k| (v.at(k) - v.at(self.lift(self.base_node(k)))).abs())
            .fold(0.0, f64::max)
    }

    /// Restriction of a product scalar to the base chart.
    pub fn restrict(&self, v: &ScalarField) -> ScalarField {
        let vals = (0..self.base.len()).map(|b| v.at(self.lift(b))).collect();
        ScalarField::from_values(self.base.clone(), vals, v.margin())
    }

    fn pullback(&self, v: &ScalarField) -> ScalarField {
        let vals = (0..self.space.chart().len())
            .map(|k| v.at(self.base_node(k)))
            .collect();
        ScalarField::from_values(self.space.chart().clone(), vals, v.margin())
    }
}

fn extra_nodes(chart: &Chart) -> usize {
    EXTRA_AXIS_NODES.max(2 * jet_margin(chart, 0) + 4)
}

fn integer_m(m: f64) -> Result<usize> {
    let r = m.round();
    if (m - r).abs() > 1e-12 || r < 1.0 {
        return Err(Error::Invalid(format!(
            "the fiber warp needs a positive integer m, got {m}"
        )));
    }
    Ok(r as usize)
}

/// Fiber periods used when none are given: `2π` on every fiber axis.
pub fn default_fiber_periods(m: usize) -> Vec<f64> {
    vec![2.0 * PI; m]
}

#[derive(Debug, Clone)]
pub struct FiberWarp {
    pub product: ProductSpace,
    /// Scalar curvature of the product metric.
    pub product_scalar: ScalarField,
    /// `|R(product) − R_φ^m(base)|` on the base chart.
    pub defect: ScalarField,
    /// Dependence of the product scalar curvature on the fiber coordinates.
    pub fiber_variation: f64,
}

fn fiber_product(space: &MetricMeasureSpace, periods: &[f64], cap: usize) -> Result<ProductSpace> {
    let m = integer_m(space.m)?;
    let base = space.chart().clone();
    let n = base.dim();
    if periods.len() != m {
        return Err(Error::Invalid(format!(
            "{} fiber periods given for m = {m}",
            periods.len()
        )));
    }
    if n + m > cap {
        return Err(Error::Invalid(format!(
            "product dimension n + m = {} exceeds the cap {cap}",
            n + m
        )));
    }
    let nf = extra_nodes(&base);
    let axes: Vec<Axis> = periods.iter().map(|&p| Axis::periodic(nf, p)).collect();
    let chart = base.extend(&axes)?.into_shared();
    let mut product = ProductSpace {
        space: MetricMeasureSpace::flat(ScalarField::zeros(&chart), space.m)?,
        base: base.clone(),
        kind: ProductKind::Fiber { m },
    };
    let phi = product.pullback(&space.phi);
    let warp = phi.map(|p| (-2.0 * p / space.m).exp());
    let d = n + m;
    let mut comps = vec![vec![0.0; chart.len()]; sym_len(d)];
    for k in 0..chart.len() {
        let b = product.base_node(k);
        for i in 0..n {
            for j in i..n {
                comps[sym_index(d, i, j)][k] = space.g.at(b, i, j);
            }
        }
        for i in n..d {
            comps[sym_index(d, i, i)][k] = warp.at(k);
        }
    }
    let g = Sym2Field::from_components(chart, comps, space.g.margin().max(phi.margin()));
    product.space = MetricMeasureSpace::new(g, phi, space.m)?;
    Ok(product)
}

/// Builds `g ⊕ e^{-2φ/m} δ_fiber` over an `m`-torus with the given periods
/// and compares its scalar curvature with `R_φ^m` of the base.
pub fn riemannian_fiber_warp(
    space: &MetricMeasureSpace,
    fiber_periods: &[f64],
) -> Result<FiberWarp> {
    riemannian_fiber_warp_capped(space, fiber_periods, FIBER_DIM_CAP)
}

pub fn riemannian_fiber_warp_capped(
    space: &MetricMeasureSpace,
    fiber_periods: &[f64],
    cap: usize,
) -> Result<FiberWarp> {
    let product = fiber_product(space, fiber_periods, cap)?;
    let r = curvature(&product.space.g)?.r;
    let fiber_variation = product.extra_variation(&r);
    let on_base = product.restrict(&r);
    let r_phi = weighted_scalar(space)?;
    let margin = on_base.margin().max(r_phi.margin());
    let vals = on_base
        .values()
        .iter()
        .zip(r_phi.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let defect = ScalarField::from_values(space.chart().clone(), vals, margin);
    Ok(FiberWarp {
        product,
        product_scalar: r,
        defect,
        fiber_variation,
    })
}

#[derive(Debug, Clone)]
pub struct StaticWarp {
    pub product: ProductSpace,
    /// Pointwise `|Rc_φ̄^m(ḡ) − (R_φ^m/(n+m−1)) ḡ|`, in the frame norm of
    /// `f² dt² + g`, restricted to the base.
    pub defect: ScalarField,
    /// `sup` of `defect`.
    pub einstein_defect: f64,
    /// Least-squares `k` in `Rc_φ̄^m(ḡ) ≈ k ḡ`: the mean of `tr_ḡ Rc_φ̄^m / (n+1)`.
    pub k: f64,
    /// `R_φ^m/(n+m−1)` averaged over the base.
    pub k_expected: f64,
    /// Dependence of `tr_ḡ Rc_φ̄^m` on `t`.
    pub time_variation: f64,
    pub min_abs_f: f64,
}

fn time_product(space: &MetricMeasureSpace, f: &ScalarField) -> Result<ProductSpace> {
    crate::grid::same_chart(space.chart(), f.chart())?;
    let base = space.chart().clone();
    let n = base.dim();
    let margin = jet_margin(&base, space.margin().max(f.margin()));
    base.check_margin(margin)?;
    let fmax = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for k in base.valid_nodes(margin) {
        let v = f.at(k);
        if !(v.abs() > 1e-14 * fmax) {
            return Err(Error::VanishingPotential { node: k, value: v });
        }
    }
    let h = (0..n)
        .map(|a| base.axis(a).spacing())
        .fold(f64::INFINITY, f64::min);
    let nt = extra_nodes(&base);
    let chart = base
        .prepend(&[Axis::open(nt, 0.0, (nt - 1) as f64 * h)])?
        .into_shared();
    let mut product = ProductSpace {
        space: MetricMeasureSpace::flat(ScalarField::zeros(&chart), space.m)?,
        base,
        kind: ProductKind::Time,
    };
    let phi = product.pullback(&space.phi);
    let fp = product.pullback(f);
    let d = n + 1;
    let mut comps = vec![vec![0.0; chart.len()]; sym_len(d)];
    for k in 0..chart.len() {
        let b = product.base_node(k);
        comps[0][k] = -fp.at(k) * fp.at(k);
        for i in 0..n {
            for j in i..n {
                comps[sym_index(d, i + 1, j + 1)][k] = space.g.at(b, i, j);
            }
        }
    }
    let g = Sym2Field::from_components(chart, comps, space.g.margin().max(f.margin()));
    product.space = MetricMeasureSpace::new(g, phi, space.m)?;
    Ok(product)
}

/// Frame norm of a product 2-tensor using the Riemannian companion `ĝ` of a
/// static warp (`ĝ_tt = −ḡ_tt`).
fn companion_norm(n: usize, ghat_inv: &Matn, e: &Matn) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    s += ghat_inv[a][c] * ghat_inv[b][d] * e[a][b] * e[c][d];
                }
            }
        }
    }
    s.max(0.0).sqrt()
}

fn sym_at(t: &Sym2Field, k: usize) -> Matn {
    crate::grid::local::unpack_sym(t, k)
}

/// Builds `ḡ = −f² dt² + g` with `φ̄` pulled back and measures how far
/// `Rc_φ̄^m(ḡ)` is from `(R_φ^m/(n+m−1)) ḡ`.
pub fn lorentzian_static_warp(space: &MetricMeasureSpace, f: &ScalarField) -> Result<StaticWarp> {
    let product = time_product(space, f)?;
    let n = space.dim();
    let d = n + 1;
    if (n as f64) + space.m - 1.0 <= 0.0 {
        return Err(Error::Invalid("n + m − 1 must be positive".into()));
    }
    let rc = bakry_emery_ricci(&product.space)?;
    let r_phi = weighted_scalar(space)?;
    let scale = 1.0 / (n as f64 + space.m - 1.0);
    let margin = rc.margin().max(r_phi.margin());
    let pchart = product.space.chart().clone();
    let gbar = &product.space.g;
    let mut ghat = gbar.clone();
    let ghat_tt: Vec<f64> = gbar.component(0, 0).iter().map(|v| -v).collect();
    let mut comps = ghat.components().to_vec();
    comps[0] = ghat_tt;
    ghat = ghat.with_components(comps, gbar.margin());

    let mut defect = vec![0.0; space.chart().len()];
    let mut trace_sum = 0.0;
    let mut count = 0usize;
    let mut traces = vec![f64::NAN; pchart.len()];
    for k in pchart.valid_nodes(margin) {
        let b = product.base_node(k);
        let (g, ginv, _) = metric_values(gbar, k)?;
        let (_, hinv, _) = metric_values(&ghat, k)?;
        let r = sym_at(&rc, k);
        let kappa = r_phi.at(b) * scale;
        let mut e = r;
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                e[i][j] -= kappa * g[i][j];
                tr += ginv[i][j] * r[i][j];
            }
        }
        let v = companion_norm(d, &hinv, &e);
        defect[b] = f64::max(defect[b], v);
        traces[k] = tr;
        trace_sum += tr;
        count += 1;
    }
    let k_fit = trace_sum / (count as f64 * d as f64);
    let time_variation = pchart
        .valid_nodes(margin)
        .into_iter()
        .map(|k| (traces[k] - traces[product.lift(product.base_node(k))]).abs())
        .fold(0.0, f64::max);
    let defect = ScalarField::from_values(space.chart().clone(), defect, margin);
    let base_valid = space.chart().valid_nodes(margin);
    let k_expected =
        base_valid.iter().map(|&b| r_phi.at(b) * scale).sum::<f64>() / base_valid.len() as f64;
    let min_abs_f = base_valid
        .iter()
        .map(|&b| f.at(b).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(StaticWarp {
        einstein_defect: defect.sup(),
        defect,
        k: k_fit,
        k_expected,
        time_variation,
        min_abs_f,
        product,
    })
}

/// Defects of the block Ricci formulas of a static warp:
/// `Rc̄(X,Y) = Rc(X,Y) − Hess f(X,Y)/f`, `Rc̄(X,∂_t) = 0` and
/// `Rc̄(∂_t,∂_t) = f Δf` (that is, `−(Δf/f) ḡ_tt`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockRicciDefects {
    pub base_block: f64,
    pub mixed_block: f64,
    pub time_block: f64,
}

pub fn static_warp_block_defects(
    space: &MetricMeasureSpace,
    f: &ScalarField,
) -> Result<BlockRicciDefects> {
    let product = time_product(space, f)?;
    let n = space.dim();
    let rc_bar = curvature(&product.space.g)?.rc;
    let base_rc = curvature(&space.g)?.rc;
    let hf = hessian(space, f)?;
    let lf = laplacian(&space.g, f)?;
    let margin = rc_bar
        .margin()
        .max(base_rc.margin())
        .max(hf.margin())
        .max(lf.margin());
    let mut out = BlockRicciDefects {
        base_block: 0.0,
        mixed_block: 0.0,
        time_block: 0.0,
    };
    for k in product.space.chart().valid_nodes(margin) {
        let b = product.base_node(k);
        let fv = f.at(b);
        for i in 0..n {
            for j in i..n {
                let want = base_rc.at(b, i, j) - hf.at(b, i, j) / fv;
                out.base_block = out
                    .base_block
                    .max((rc_bar.at(k, i + 1, j + 1) - want).abs());
            }
            out.mixed_block = out.mixed_block.max(rc_bar.at(k, 0, i + 1).abs());
        }
        out.time_block = out
            .time_block
            .max((rc_bar.at(k, 0, 0) - fv * lf.at(b)).abs());
    }
    Ok(out)
}
