//! Dense assembly of the linear operators by unit-impulse probing.
//!
//! Each probe only touches the nodes its stencils reach, so columns cost
//! `O((2r+1)^n)` local evaluations rather than a full grid sweep.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use super::{dr_local, dr_star_local, sym2_jets_raw, BaseLocal};
use crate::error::{Error, Result};
use crate::grid::local::{Jet, Sampler};
use crate::grid::small::{Matn, ZM};
use crate::grid::{sym_index, sym_len, Chart, GridError, MetricMeasureSpace, ScalarField, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `f ↦ DR*(f)`, nodes to stacked `(T, s)` components.
    DrStar,
    /// `DR ∘ DR*` in Gram-symmetric form `W⁻¹ Aᵀ G A`.
    DrDrStar,
    /// `−Δ_φ`
    MinusLaplacianPhi,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::DrStar => "DR_star",
            OperatorKind::DrDrStar => "DRDR_star",
            OperatorKind::MinusLaplacianPhi => "minus_laplacian_phi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Upper bound on the row and column counts.
    pub cap: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { cap: 4096 }
    }
}

/// A dense linear operator on node values together with the data of the
/// weighted inner product it is symmetric for.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub kind: OperatorKind,
    chart: Arc<Chart>,
    /// The operator as applied, `rows × cols`, column `j` = image of the impulse at node `j`.
    pub matrix: Mat<f64>,
    /// Diagonal of the domain Gram matrix: the `e^{-φ} dV_g` quadrature weights.
    pub weights: Vec<f64>,
    /// Symmetric form `M`. For the DR kinds `M x = λ W x` is the eigenproblem
    /// used for kernels, and for `DrStar` `M = AᵀGA` shares the kernel of `A`.
    /// For `−Δ_φ` it is the symmetric part of `W L`, kept for inspection only.
    pub gram_form: Mat<f64>,
    /// `‖WB − (WB)ᵀ‖_F / ‖WB‖_F` for the square operator `B` as applied.
    pub symmetry_defect: f64,
}

impl AssembledOperator {
    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// Number of domain unknowns.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.matrix.ncols());
        (0..self.matrix.nrows())
            .map(|i| (0..x.len()).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `⟨x, y⟩_W`
    pub fn gram_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x.iter().zip(y))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// `xᵀ M x`; for the DR kinds this is `‖DR* x‖²_φ`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let k = x.len();
        let mut s = 0.0;
        for i in 0..k {
            let mut t = 0.0;
            for j in 0..k {
                t += self.gram_form[(i, j)] * x[j];
            }
            s += x[i] * t;
        }
        s
    }

    pub fn to_field(&self, x: Vec<f64>) -> ScalarField {
        ScalarField::from_values(self.chart.clone(), x, 0)
    }
}

pub fn assemble(space: &MetricMeasureSpace, kind: OperatorKind) -> Result<AssembledOperator> {
    assemble_with(space, kind, AssemblyOptions::default())
}

fn check_assembly(space: &MetricMeasureSpace, rows: usize, cap: usize) -> Result<()> {
    if !space.chart().is_closed() {
        return Err(GridError::ClosedChartRequired("operator assembly").into());
    }
    let k = space.chart().len().max(rows);
    if k > cap {
        return Err(Error::CapExceeded { unknowns: k, cap });
    }
    Ok(())
}

pub(crate) fn bases(space: &MetricMeasureSpace) -> Result<Vec<BaseLocal>> {
    let chart = space.chart();
    let s = Sampler::new(chart);
    let out: std::result::Result<Vec<_>, GridError> = (0..chart.len())
        .into_par_iter()
        .map(|k| BaseLocal::at(&s, space, &s.pos(k)))
        .collect();
    Ok(out?)
}

/// Nodes whose per-axis periodic distance to `node` is at most `r`.
pub(crate) fn neighborhood(chart: &Chart, node: usize, r: usize) -> Vec<usize> {
    let n = chart.dim();
    let idx = chart.multi_index(node);
    let mut out = vec![0usize];
    for a in 0..n {
        let len = chart.axis(a).nodes as isize;
        let stride = chart.stride(a);
        let mut next = Vec::with_capacity(out.len() * (2 * r + 1));
        for base in &out {
            for o in -(r as isize)..=(r as isize) {
                let j = (idx[a] as isize + o).rem_euclid(len) as usize;
                next.push(base + j * stride);
            }
        }
        out = next;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Lower Cholesky-type factor `C` with `C Cᵀ = g⁻¹`, so that
/// `⟨A, B⟩_g = tr((CᵀAC)(CᵀBC))`.
fn inverse_factor(n: usize, ginv: &Matn) -> Matn {
    let mut c = ZM;
    for j in 0..n {
        let mut d = ginv[j][j];
        for k in 0..j {
            d -= c[j][k] * c[j][k];
        }
        let d = d.max(0.0).sqrt();
        c[j][j] = d;
        for i in j + 1..n {
            let mut v = ginv[i][j];
            for k in 0..j {
                v -= c[i][k] * c[j][k];
            }
            c[i][j] = if d > 0.0 { v / d } else { 0.0 };
        }
    }
    c
}

/// Local adjoint image in an orthonormal frame, scaled by `√w`, as a flat vector
/// (`n²` tensor entries then the scalar slot).
fn frame_image(n: usize, c: &Matn, t: &Matn, s: f64, sw: f64, out: &mut Vec<f64>) {
    out.clear();
    for a in 0..n {
        for b in 0..n {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += c[i][a] * t[i][j] * c[j][b];
                }
            }
            out.push(sw * v);
        }
    }
    out.push(sw * s);
}

fn frobenius_asymmetry(wb: &Mat<f64>) -> f64 {
    let k = wb.nrows();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            let d = wb[(i, j)] - wb[(j, i)];
            num += d * d;
            den += wb[(i, j)] * wb[(i, j)];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Sparse columns of the adjoint: `cols[j] = [(node, T, s)]`.
type AdjointColumns = Vec<Vec<(usize, Matn, f64)>>;

fn adjoint_columns(space: &MetricMeasureSpace, base: &[BaseLocal]) -> AdjointColumns {
    let chart = space.chart();
    let len = chart.len();
    let hw = chart.half_width();
    let s = Sampler::new(chart);
    (0..len)
        .into_par_iter()
        .map_init(
            || vec![0.0; len],
            |imp, j| {
                imp[j] = 1.0;
                let col = neighborhood(chart, j, hw)
                    .into_iter()
                    .map(|k| {
                        let fj = s.jet(imp, &s.pos(k));
                        let (t, sv) = dr_star_local(&base[k], &fj, space.m);
                        (k, t, sv)
                    })
                    .collect();
                imp[j] = 0.0;
                col
            },
        )
        .collect()
}

pub fn assemble_with(
    space: &MetricMeasureSpace,
    kind: OperatorKind,
    opts: AssemblyOptions,
) -> Result<AssembledOperator> {
    let chart = space.chart().clone();
    let n = chart.dim();
    let len = chart.len();
    let ns = sym_len(n);
    let rows = if kind == OperatorKind::DrStar {
        (ns + 1) * len
    } else {
        len
    };
    check_assembly(space, rows, opts.cap)?;
    let weights = space.measure_weights()?;
    let base = bases(space)?;

    match kind {
        OperatorKind::MinusLaplacianPhi => {
            let hw = chart.half_width();
            let s = Sampler::new(&chart);
            let cols: Vec<Vec<(usize, f64)>> = (0..len)
                .into_par_iter()
                .map_init(
                    || vec![0.0; len],
                    |imp, j| {
                        imp[j] = 1.0;
                        let col = neighborhood(&chart, j, hw)
                            .into_iter()
                            .map(|k| {
                                let b = &base[k];
                                let fj = s.jet(imp, &s.pos(k));
                                let dot: f64 = (0..n).map(|a| b.up_phi[a] * fj.d[a]).sum();
                                (k, -(b.lm.laplacian(&fj) - dot))
                            })
                            .collect();
                        imp[j] = 0.0;
                        col
                    },
                )
                .collect();
            let mut l = Mat::<f64>::zeros(len, len);
            for (j, col) in cols.iter().enumerate() {
                for &(k, v) in col {
                    l[(k, j)] = v;
                }
            }
            let wl = Mat::<f64>::from_fn(len, len, |i, j| weights[i] * l[(i, j)]);
            let symmetry_defect = frobenius_asymmetry(&wl);
            let gram_form = Mat::<f64>::from_fn(len, len, |i, j| 0.5 * (wl[(i, j)] + wl[(j, i)]));
            Ok(AssembledOperator {
                kind,
                chart,
                matrix: l,
                weights,
                gram_form,
                symmetry_defect,
            })
        }
        OperatorKind::DrStar | OperatorKind::DrDrStar => {
            let cols = adjoint_columns(space, &base);
            // per node: orthonormal-frame images of every column touching it
            let factors: Vec<Matn> = base.iter().map(|b| inverse_factor(n, &b.lm.ginv)).collect();
            let mut touching: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); len];
            let mut buf = Vec::new();
            for (j, col) in cols.iter().enumerate() {
                for (k, t, sv) in col {
                    frame_image(n, &factors[*k], t, *sv, weights[*k].sqrt(), &mut buf);
                    touching[*k].push((j, buf.clone()));
                }
            }
            let rows_m: Vec<Vec<f64>> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let mut row = vec![0.0; len];
                    for (k, _, _) in &cols[i] {
                        let vi = &touching[*k]
                            .iter()
                            .find(|(c, _)| *c == i)
                            .expect("own column")
                            .1;
                        for (j, vj) in &touching[*k] {
                            row[*j] += vi.iter().zip(vj).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    row
                })
                .collect();
            let gram_form = Mat::<f64>::from_fn(len, len, |i, j| rows_m[i][j]);
            let symmetry_defect = frobenius_asymmetry(&gram_form);
            let matrix = if kind == OperatorKind::DrDrStar {
                Mat::<f64>::from_fn(len, len, |i, j| gram_form[(i, j)] / weights[i])
            } else {
                let mut a = Mat::<f64>::zeros(rows, len);
                for (j, col) in cols.iter().enumerate() {
                    for (k, t, sv) in col {
                        for p in 0..n {
                            for q in p..n {
                                a[(sym_index(n, p, q) * len + k, j)] = t[p][q];
                            }
                        }
                        a[(ns * len + k, j)] = *sv;
                    }
                }
                a
            };
            Ok(AssembledOperator {
                kind,
                chart,
                matrix,
                weights,
                gram_form,
                symmetry_defect,
            })
        }
    }
}

/// Dense `DR_{at} ∘ DR*_{base}`: the exact derivative of
/// `u ↦ R_φ(g + u T, φ + u s)` where `(T, s) = DR*_{base}(u)` is evaluated
/// at the space `at`. With `at = base` this is the discrete composition,
/// which differs from the Gram-symmetric assembly by the discretization
/// error of adjointness.
pub fn composed_jacobian(
    base_space: &MetricMeasureSpace,
    at: &MetricMeasureSpace,
    cap: usize,
) -> Result<Mat<f64>> {
    crate::grid::same_chart(base_space.chart(), at.chart())?;
    check_assembly(base_space, 0, cap)?;
    let chart = base_space.chart().clone();
    let n = chart.dim();
    let ns = sym_len(n);
    let len = chart.len();
    let hw = chart.half_width();
    let b0 = bases(base_space)?;
    let b1 = if std::ptr::eq(base_space, at) {
        None
    } else {
        Some(bases(at)?)
    };
    let b1 = b1.as_deref().unwrap_or(&b0);
    let m0 = base_space.m;
    let m1 = at.m;
    let s = Sampler::new(&chart);
    let cols: Vec<Vec<(usize, f64)>> = (0..len)
        .into_par_iter()
        .map_init(
            || (vec![0.0; len], vec![vec![0.0; len]; ns + 1]),
            |(imp, img), j| {
                imp[j] = 1.0;
                let inner = neighborhood(&chart, j, hw);
                for &k in &inner {
                    let fj = s.jet(imp, &s.pos(k));
                    let (t, sv) = dr_star_local(&b0[k], &fj, m0);
                    for p in 0..n {
                        for q in p..n {
                            img[sym_index(n, p, q)][k] = t[p][q];
                        }
                    }
                    img[ns][k] = sv;
                }
                imp[j] = 0.0;
                let col = neighborhood(&chart, j, 2 * hw)
                    .into_iter()
                    .map(|k| {
                        let p = s.pos(k);
                        let hj: Box<[[Jet; MAX_DIM]; MAX_DIM]> =
                            sym2_jets_raw(&s, n, &img[..ns], &p);
                        let pj = s.jet(&img[ns], &p);
                        (k, dr_local(&b1[k], &hj, &pj, m1))
                    })
                    .collect();
                for &k in &inner {
                    for c in img.iter_mut() {
                        c[k] = 0.0;
                    }
                }
                col
            },
        )
        .collect();
    let mut jac = Mat::<f64>::zeros(len, len);
    for (j, col) in cols.iter().enumerate() {
        for &(k, v) in col {
            jac[(k, j)] = v;
        }
    }
    Ok(jac)
}
