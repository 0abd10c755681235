//! Generalized symmetric eigenproblems of assembled operators: kernels,
//! spectra of `−Δ_φ`, the spectral static test and the principal symbol check.

use std::fmt;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{
    evd_real, evd_scratch, self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors,
};
use faer::{Mat, Par};
use serde::Serialize;

use super::assemble::{assemble_with, AssembledOperator, AssemblyOptions, OperatorKind};
use super::dr_star;
use crate::error::{Error, Result};
use crate::grid::{GridError, GridField, MetricMeasureSpace, ScalarField, Sym2Field};
use crate::weighted::{bakry_emery_ricci, weighted_scalar};

/// Eigenpairs of `M x = λ W x` for symmetric `M` and positive diagonal `W`,
/// ascending, with `W`-orthonormal eigenvectors as columns.
pub fn generalized_eigen(
    m: &Mat<f64>,
    w: &[f64],
    vectors: bool,
) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
    let k = m.nrows();
    if m.ncols() != k || w.len() != k {
        return Err(Error::Invalid("eigenproblem dimensions disagree".into()));
    }
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("Gram weights must be positive".into()));
    }
    let d: Vec<f64> = w.iter().map(|v| 1.0 / v.sqrt()).collect();
    let s = Mat::<f64>::from_fn(k, k, |i, j| d[i] * 0.5 * (m[(i, j)] + m[(j, i)]) * d[j]);
    if !s.as_ref().is_all_finite() {
        return Err(Error::Eigen("non-finite entries".into()));
    }
    let par = Par::Seq;
    let mode = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut vals = Diag::<f64>::zeros(k);
    let mut u = Mat::<f64>::zeros(k, k);
    let mut mem = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
        k,
        mode,
        par,
        Default::default(),
    ));
    self_adjoint_evd(
        s.as_ref(),
        vals.as_mut(),
        if vectors { Some(u.as_mut()) } else { None },
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let lam: Vec<f64> = (0..k).map(|i| vals[i]).collect();
    let vecs = vectors.then(|| Mat::<f64>::from_fn(k, k, |i, j| d[i] * u[(i, j)]));
    Ok((lam, vecs))
}

/// Eigenvalues `(re, im)` and, optionally, the real-packed right
/// eigenvectors of a general square matrix.
pub fn general_eigen(
    a: &Mat<f64>,
    vectors: bool,
) -> Result<(Vec<f64>, Vec<f64>, Option<Mat<f64>>)> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::Invalid("eigenproblem needs a square matrix".into()));
    }
    if !a.as_ref().is_all_finite() {
        return Err(Error::Eigen("non-finite entries".into()));
    }
    let par = Par::Seq;
    let right = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut re = Diag::<f64>::zeros(k);
    let mut im = Diag::<f64>::zeros(k);
    let mut u = Mat::<f64>::zeros(k, k);
    let mut mem = MemBuffer::new(evd_scratch::<f64>(
        k,
        ComputeEigenvectors::No,
        right,
        par,
        Default::default(),
    ));
    evd_real(
        a.as_ref(),
        re.as_mut(),
        im.as_mut(),
        None,
        if vectors { Some(u.as_mut()) } else { None },
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok((
        (0..k).map(|i| re[i]).collect(),
        (0..k).map(|i| im[i]).collect(),
        vectors.then_some(u),
    ))
}

/// Ascending spectrum of an assembled operator. `−Δ_φ` is not exactly
/// self-adjoint after discretization on a curved metric, so its spectrum is
/// taken from the operator itself (real parts); the DR kinds use the
/// Gram-symmetric generalized problem.
pub fn spectrum(op: &AssembledOperator) -> Result<Vec<f64>> {
    match op.kind {
        OperatorKind::MinusLaplacianPhi => {
            let mut re = general_eigen(&op.matrix, false)?.0;
            re.sort_by(f64::total_cmp);
            Ok(re)
        }
        _ => Ok(generalized_eigen(&op.gram_form, &op.weights, false)?.0),
    }
}

/// Largest `|Im λ|` of the operator as applied; zero for the Gram-symmetric kinds.
pub fn max_imaginary_part(op: &AssembledOperator) -> Result<f64> {
    match op.kind {
        OperatorKind::MinusLaplacianPhi => Ok(general_eigen(&op.matrix, false)?
            .1
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))),
        _ => Ok(0.0),
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub dim: usize,
    /// `W`-orthonormal kernel vectors.
    pub basis: Vec<ScalarField>,
    /// Full ascending spectrum.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub threshold: f64,
    /// Smallest eigenvalue above the kernel threshold.
    pub gap: Option<f64>,
}

/// Kernel of raw Gram data: eigenvalues `≤ tol · λ_max` count.
pub fn kernel_of(
    m: &Mat<f64>,
    w: &[f64],
    tol: f64,
) -> Result<(usize, Vec<Vec<f64>>, Vec<f64>, f64, f64)> {
    let (lam, vecs) = generalized_eigen(m, w, true)?;
    let vecs = vecs.expect("requested");
    let lambda_max = lam.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = tol * lambda_max;
    let dim = lam.iter().take_while(|&&v| v <= threshold).count();
    let k = lam.len();
    let basis = (0..dim)
        .map(|c| {
            let mut x: Vec<f64> = (0..k).map(|i| vecs[(i, c)]).collect();
            // fix the sign so the output is deterministic
            let s: f64 = x.iter().sum();
            if s < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            x
        })
        .collect();
    Ok((dim, basis, lam, lambda_max, threshold))
}

/// Kernel of a general operator: eigenvalues with `|λ| ≤ tol · max|λ|`.
/// The real kernel vectors are `W`-orthonormalized.
fn kernel_general(
    a: &Mat<f64>,
    w: &[f64],
    tol: f64,
) -> Result<(usize, Vec<Vec<f64>>, Vec<f64>, f64, f64)> {
    let (re, im, vecs) = general_eigen(a, true)?;
    let vecs = vecs.expect("requested");
    let k = re.len();
    let lambda_max = re
        .iter()
        .zip(&im)
        .fold(0.0f64, |acc, (r, i)| acc.max(r.hypot(*i)));
    let threshold = tol * lambda_max;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| re[i].total_cmp(&re[j]));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &c in &order {
        if re[c].hypot(im[c]) > threshold || im[c] != 0.0 {
            continue;
        }
        let mut x: Vec<f64> = (0..k).map(|i| vecs[(i, c)]).collect();
        for b in &basis {
            let p: f64 = (0..k).map(|i| w[i] * b[i] * x[i]).sum();
            for i in 0..k {
                x[i] -= p * b[i];
            }
        }
        let nrm = (0..k).map(|i| w[i] * x[i] * x[i]).sum::<f64>().sqrt();
        if nrm == 0.0 {
            continue;
        }
        let sign = if x.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        x.iter_mut().for_each(|v| *v *= sign / nrm);
        basis.push(x);
    }
    let eigenvalues: Vec<f64> = order.iter().map(|&i| re[i]).collect();
    Ok((basis.len(), basis, eigenvalues, lambda_max, threshold))
}

pub fn kernel_detect(op: &AssembledOperator, tol: f64) -> Result<Kernel> {
    let (dim, basis, eigenvalues, lambda_max, threshold) = match op.kind {
        OperatorKind::MinusLaplacianPhi => kernel_general(&op.matrix, &op.weights, tol)?,
        _ => kernel_of(&op.gram_form, &op.weights, tol)?,
    };
    let gap = eigenvalues.get(dim).copied();
    Ok(Kernel {
        dim,
        basis: basis.into_iter().map(|x| op.to_field(x)).collect(),
        eigenvalues,
        lambda_max,
        threshold,
        gap,
    })
}

/// Default relative kernel threshold.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSpectrumOptions {
    /// Relative sup-variation below which `R_φ` counts as constant.
    pub r_tol: f64,
    /// Relative distance below which `R_φ` matches some `λ(n+m−1)`.
    pub match_tol: f64,
    /// Number of leading eigenvalues to report.
    pub head: usize,
    pub cap: usize,
}

impl Default for StaticSpectrumOptions {
    fn default() -> Self {
        StaticSpectrumOptions {
            r_tol: 1e-6,
            match_tol: 1e-8,
            head: 8,
            cap: AssemblyOptions::default().cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StaticSpectrumVerdict {
    /// `R_φ` is not constant, so the space cannot be static.
    RNotConstant { variation: f64 },
    /// `R_φ ≠ λ(n+m−1)` across the spectrum: not static.
    ConditionIHolds,
    /// Condition (i) fails but `R_φ = 0` with `Rc_φ ≢ 0`: not static.
    ConditionIIApplies { lambda: f64 },
    /// Neither condition rules out a static potential.
    PossiblyStatic { lambda: f64 },
}

fn fmt_lambda(l: f64) -> String {
    if l.abs() < 1e-10 {
        "0".into()
    } else {
        format!("{l:.6e}")
    }
}

impl fmt::Display for StaticSpectrumVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaticSpectrumVerdict::RNotConstant { variation } => {
                write!(f, "R not constant (variation {variation:.3e}): not static")
            }
            StaticSpectrumVerdict::ConditionIHolds => write!(f, "condition (i) holds: not static"),
            StaticSpectrumVerdict::ConditionIIApplies { lambda } => {
                write!(
                    f,
                    "condition (i) fails at λ = {}; condition (ii) applies: not static",
                    fmt_lambda(*lambda)
                )
            }
            StaticSpectrumVerdict::PossiblyStatic { lambda } => {
                write!(
                    f,
                    "condition (i) fails at λ = {}; condition (ii) fails: possibly static",
                    fmt_lambda(*lambda)
                )
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StaticSpectrum {
    /// `min_λ |R_φ − λ(n+m−1)|`; absent when `R_φ` is not constant.
    pub margin: Option<f64>,
    pub spectrum_head: Vec<f64>,
    pub r_phi_mean: f64,
    pub r_phi_variation: f64,
    pub verdict: StaticSpectrumVerdict,
}

/// Spectral static test: a space with constant `R_φ` is not static when
/// `R_φ` avoids `λ(n+m−1)` for every eigenvalue `λ` of `−Δ_φ`, or when
/// `R_φ = 0` while `Rc_φ` does not vanish.
pub fn static_spectrum_margin(
    space: &MetricMeasureSpace,
    opts: StaticSpectrumOptions,
) -> Result<StaticSpectrum> {
    let r = weighted_scalar(space)?;
    let mean = r.mean();
    let variation = r.variation();
    let scale = mean.abs().max(1.0);
    let op = assemble_with(
        space,
        OperatorKind::MinusLaplacianPhi,
        AssemblyOptions { cap: opts.cap },
    )?;
    let spec = spectrum(&op)?;
    let spectrum_head = spec.iter().take(opts.head).copied().collect();
    if variation > opts.r_tol * scale {
        return Ok(StaticSpectrum {
            margin: None,
            spectrum_head,
            r_phi_mean: mean,
            r_phi_variation: variation,
            verdict: StaticSpectrumVerdict::RNotConstant { variation },
        });
    }
    let c = space.dim() as f64 + space.m - 1.0;
    let (margin, lambda) =
        spec.iter()
            .map(|&l| ((mean - l * c).abs(), l))
            .fold(
                (f64::INFINITY, f64::NAN),
                |a, b| if b.0 < a.0 { b } else { a },
            );
    let verdict = if margin > opts.match_tol * scale {
        StaticSpectrumVerdict::ConditionIHolds
    } else if mean.abs() <= opts.r_tol && bakry_emery_ricci(space)?.sup() > opts.r_tol {
        StaticSpectrumVerdict::ConditionIIApplies { lambda }
    } else {
        StaticSpectrumVerdict::PossiblyStatic { lambda }
    };
    Ok(StaticSpectrum {
        margin: Some(margin),
        spectrum_head,
        r_phi_mean: mean,
        r_phi_variation: variation,
        verdict,
    })
}

/// Comparison of the adjoint on a Fourier mode against its principal symbol.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolReport {
    /// `sup |T − (|ε|²g − ε⊗ε) f|`
    pub first_slot_defect: f64,
    /// `sup |s + 2|ε|² f|`
    pub second_slot_defect: f64,
    /// Least-squares ratio of the measured second slot to `−(2/m)|ε|² f`;
    /// absent for `ε = 0`.
    pub ratio_to_weighted_symbol: Option<f64>,
}

/// Flat metric and constant potential, to the given tolerance.
fn require_flat_constant(space: &MetricMeasureSpace) -> Result<()> {
    let flat = Sym2Field::euclidean(space.chart());
    if space.g.sub(&flat)?.sup() > 1e-12 || space.phi.variation() > 1e-12 {
        return Err(Error::Invalid(
            "symbol check needs a flat metric and a constant potential".into(),
        ));
    }
    if !space.chart().is_closed() {
        return Err(GridError::ClosedChartRequired("symbol_check").into());
    }
    Ok(())
}

pub fn symbol_check(
    space: &MetricMeasureSpace,
    eps: &[f64],
    f_mode: &ScalarField,
) -> Result<SymbolReport> {
    require_flat_constant(space)?;
    let chart = space.chart();
    let n = chart.dim();
    if eps.len() != n {
        return Err(Error::Invalid(format!(
            "frequency has {} entries for a {n}-dimensional chart",
            eps.len()
        )));
    }
    for (a, &e) in eps.iter().enumerate() {
        let k = e * chart.axis(a).length / (2.0 * std::f64::consts::PI);
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "frequency {e} is not on the lattice of axis {a}"
            )));
        }
    }
    let img = dr_star(space, f_mode)?;
    let e2: f64 = eps.iter().map(|e| e * e).sum();
    let margin = img.t.margin();
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in chart.valid_nodes(margin) {
        let f = f_mode.at(k);
        for a in 0..n {
            for b in a..n {
                let delta = if a == b { 1.0 } else { 0.0 };
                let sym = (e2 * delta - eps[a] * eps[b]) * f;
                first = first.max((img.t.at(k, a, b) - sym).abs());
            }
        }
        let s = img.s.at(k);
        second = second.max((s + 2.0 * e2 * f).abs());
        let p = -2.0 / space.m * e2 * f;
        num += s * p;
        den += p * p;
    }
    let ratio = (den > 0.0).then(|| num / den);
    Ok(SymbolReport {
        first_slot_defect: first,
        second_slot_defect: second,
        ratio_to_weighted_symbol: ratio,
    })
}
