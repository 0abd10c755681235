//! Prescribing weighted scalar curvature near a non-static base point: the
//! scaling law and a Newton iteration on `S(u) = R_φ^m((g₀, φ₀) + DR*(u))`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::{Mat, Par};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::local::metric_values;
use crate::grid::small::min_eigenvalue;
use crate::grid::{l2_phi, GridError, GridField, MetricMeasureSpace, ScalarField};
use crate::linearization::{
    assemble_with, composed_jacobian, dr_star, kernel_detect, AssemblyOptions, OperatorKind,
    KERNEL_TOL,
};
use crate::weighted::weighted_scalar;

/// `(c⁻¹g, φ + (m/2) ln c, m)`: the measure becomes `c^{−(n+m)/2} e^{−φ} dV_g`
/// and the weighted scalar curvature is multiplied by `c`.
pub fn scale_space(space: &MetricMeasureSpace, c: f64) -> Result<MetricMeasureSpace> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Invalid(format!("scale must be positive, got {c}")));
    }
    let shift = 0.5 * space.m * c.ln();
    Ok(MetricMeasureSpace::new(
        space.g.scaled(1.0 / c),
        space.phi.map(|v| v + shift),
        space.m,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// `S′(0) = DR ∘ DR*` at the base point, factored once.
    Frozen,
    /// `S′(u)` refactored at every iterate.
    Relinearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrescribeOptions {
    /// Stop when `‖S(u) − target‖_{L²_φ} ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub cap: usize,
    pub mode: JacobianMode,
    /// Smallest admissible metric eigenvalue at any node.
    pub eig_floor: f64,
    pub max_halvings: usize,
    pub kernel_tol: f64,
}

impl Default for PrescribeOptions {
    fn default() -> Self {
        PrescribeOptions {
            tol: 1e-6,
            max_iter: 10,
            cap: AssemblyOptions::default().cap,
            mode: JacobianMode::Frozen,
            eig_floor: 1e-6,
            max_halvings: 20,
            kernel_tol: KERNEL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Residual norm before the step of this iteration.
    pub residual: f64,
    /// Step length actually taken (`2^{-halvings}`); zero on the final entry.
    pub step: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone)]
pub struct PrescribeResult {
    pub u: ScalarField,
    pub space: MetricMeasureSpace,
    /// `R_φ^m(space) − target`
    pub residual: ScalarField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    /// Scale applied by [`prescribe_with_scaling`]; 1 for a direct solve.
    pub scale: f64,
    pub attempts: Vec<ScaleAttempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleAttempt {
    pub c: f64,
    pub outcome: String,
    pub trace: Vec<f64>,
}

/// Dense LU with partial pivoting, kept single-threaded.
struct DenseLu {
    lu: Mat<f64>,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl DenseLu {
    fn new(mut a: Mat<f64>) -> Result<Self> {
        let k = a.nrows();
        if !a.as_ref().is_all_finite() {
            return Err(Error::Solve("non-finite Jacobian".into()));
        }
        let mut fwd = vec![0usize; k];
        let mut bwd = vec![0usize; k];
        let mut mem = MemBuffer::new(factor::lu_in_place_scratch::<usize, f64>(
            k,
            k,
            Par::Seq,
            Default::default(),
        ));
        factor::lu_in_place(
            a.as_mut(),
            &mut fwd,
            &mut bwd,
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        );
        let (lo, hi) = (0..k).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            (lo.min(a[(i, i)].abs()), hi.max(a[(i, i)].abs()))
        });
        if !(lo > 1e-14 * hi) {
            return Err(Error::Solve(format!(
                "Jacobian is numerically singular (pivot ratio {:e})",
                lo / hi
            )));
        }
        Ok(DenseLu { lu: a, fwd, bwd })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut x = Mat::from_fn(k, 1, |i, _| rhs[i]);
        let perm = faer::perm::PermRef::new_checked(&self.fwd, &self.bwd, k);
        let mut mem = MemBuffer::new(solve::solve_in_place_scratch::<usize, f64>(k, 1, Par::Seq));
        solve::solve_in_place(
            self.lu.as_ref(),
            self.lu.as_ref(),
            perm,
            x.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        (0..k).map(|i| x[(i, 0)]).collect()
    }
}

/// `(g₀, φ₀) + DR*(u)`, rejected when the metric eigenvalue floor is violated.
fn deformed(
    space0: &MetricMeasureSpace,
    u: &ScalarField,
    floor: f64,
) -> Result<MetricMeasureSpace> {
    let img = dr_star(space0, u)?;
    let g = space0.g.axpy(1.0, &img.t)?;
    let n = g.dim();
    for k in g.chart().valid_nodes(g.margin()) {
        let (m, _, _) = metric_values(&g, k)?;
        let lo = min_eigenvalue(&m, n);
        if !(lo >= floor) {
            return Err(GridError::SingularMetric { node: k, det: lo }.into());
        }
    }
    Ok(MetricMeasureSpace::new(
        g,
        space0.phi.axpy(1.0, &img.s)?,
        space0.m,
    )?)
}

fn residual_of(space: &MetricMeasureSpace, target: &ScalarField) -> Result<(ScalarField, f64)> {
    let r = weighted_scalar(space)?.sub(target)?;
    let norm = l2_phi(space, &r)?;
    if !norm.is_finite() {
        return Err(Error::Invalid("non-finite residual".into()));
    }
    Ok((r, norm))
}

/// Errors unless the Gram-symmetric `DR DR*` at `space0` has an empty kernel.
pub fn require_non_static(space0: &MetricMeasureSpace, opts: &PrescribeOptions) -> Result<()> {
    let op = assemble_with(
        space0,
        OperatorKind::DrDrStar,
        AssemblyOptions { cap: opts.cap },
    )?;
    let k = kernel_detect(&op, opts.kernel_tol)?;
    if k.dim > 0 {
        return Err(Error::KernelNonempty { dim: k.dim });
    }
    Ok(())
}

/// Newton iteration for `S(u) = target` with `(g, φ) = (g₀, φ₀) + DR*_{(g₀,φ₀)}(u)`.
pub fn newton_prescribe(
    space0: &MetricMeasureSpace,
    target: &ScalarField,
    opts: &PrescribeOptions,
) -> Result<PrescribeResult> {
    let mut trace = Vec::new();
    newton_traced(space0, target, opts, &mut trace)
}

fn newton_traced(
    space0: &MetricMeasureSpace,
    target: &ScalarField,
    opts: &PrescribeOptions,
    trace: &mut Vec<TraceEntry>,
) -> Result<PrescribeResult> {
    if !space0.chart().is_closed() {
        return Err(GridError::ClosedChartRequired("newton_prescribe").into());
    }
    crate::grid::same_chart(space0.chart(), target.chart())?;
    require_non_static(space0, opts)?;
    let chart = space0.chart().clone();
    let mut u = ScalarField::zeros(&chart);
    let mut space = space0.clone();
    let (mut res, mut norm) = residual_of(&space, target)?;
    let initial = norm;
    let mut frozen: Option<DenseLu> = None;
    for it in 0..=opts.max_iter {
        if norm <= opts.tol {
            trace.push(TraceEntry {
                iteration: it,
                residual: norm,
                step: 0.0,
                halvings: 0,
            });
            return Ok(PrescribeResult {
                u,
                space,
                residual: res,
                residual_norm: norm,
                iterations: it,
                trace: trace.clone(),
                scale: 1.0,
                attempts: Vec::new(),
            });
        }
        if it == opts.max_iter || norm > 1e3 * initial {
            trace.push(TraceEntry {
                iteration: it,
                residual: norm,
                step: 0.0,
                halvings: 0,
            });
            return Err(Error::NotConverged {
                iterations: it,
                residual: norm,
            });
        }
        let rhs: Vec<f64> = res.values().iter().map(|v| -v).collect();
        let delta = match opts.mode {
            JacobianMode::Frozen => {
                if frozen.is_none() {
                    frozen = Some(DenseLu::new(composed_jacobian(space0, space0, opts.cap)?)?);
                }
                frozen.as_ref().unwrap().solve(&rhs)
            }
            JacobianMode::Relinearized => {
                DenseLu::new(composed_jacobian(space0, &space, opts.cap)?)?.solve(&rhs)
            }
        };
        let delta = ScalarField::from_values(chart.clone(), delta, 0);
        let mut alpha = 1.0;
        let mut halvings = 0;
        let next = loop {
            let cand = u.axpy(alpha, &delta)?;
            match deformed(space0, &cand, opts.eig_floor) {
                Ok(s) => break (cand, s),
                Err(Error::Grid(GridError::SingularMetric { .. }))
                    if halvings < opts.max_halvings =>
                {
                    alpha *= 0.5;
                    halvings += 1;
                }
                Err(Error::Grid(GridError::SingularMetric { .. })) => {
                    trace.push(TraceEntry {
                        iteration: it,
                        residual: norm,
                        step: 0.0,
                        halvings,
                    });
                    return Err(Error::StepRejected { halvings });
                }
                Err(e) => return Err(e),
            }
        };
        trace.push(TraceEntry {
            iteration: it,
            residual: norm,
            step: alpha,
            halvings,
        });
        u = next.0;
        space = next.1;
        (res, norm) = residual_of(&space, target)?;
    }
    unreachable!("the loop returns on its last iteration")
}

/// Default scale sweep.
pub const DEFAULT_C_GRID: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

/// Solves for `K/c` at increasing `c`, then rescales by `c` so the returned
/// space has weighted scalar curvature `K`. The inner tolerance is set so the
/// unscaled `L²_φ` residual meets `opts.tol`.
pub fn prescribe_with_scaling(
    space0: &MetricMeasureSpace,
    k: &ScalarField,
    c_grid: &[f64],
    opts: &PrescribeOptions,
) -> Result<PrescribeResult> {
    if c_grid.is_empty() {
        return Err(Error::Invalid("empty scale grid".into()));
    }
    require_non_static(space0, opts)?;
    let mut grid = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let nm = space0.dim() as f64 + space0.m;
    let mut attempts = Vec::new();
    for &c in &grid {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Invalid(format!("scale must be positive, got {c}")));
        }
        let inner = PrescribeOptions {
            tol: opts.tol * c.powf(nm / 4.0) / c,
            ..*opts
        };
        let mut trace = Vec::new();
        let outcome = newton_traced(space0, &k.scaled(1.0 / c), &inner, &mut trace);
        let residuals: Vec<f64> = trace.iter().map(|t| t.residual).collect();
        match outcome {
            Ok(r) => {
                let scaled = scale_space(&r.space, c)?;
                let (res, norm) = residual_of(&scaled, k)?;
                attempts.push(ScaleAttempt {
                    c,
                    outcome: "converged".into(),
                    trace: residuals,
                });
                return Ok(PrescribeResult {
                    u: r.u,
                    space: scaled,
                    residual: res,
                    residual_norm: norm,
                    iterations: r.iterations,
                    trace: r.trace,
                    scale: c,
                    attempts,
                });
            }
            Err(e @ Error::KernelNonempty { .. }) => return Err(e),
            Err(e) => attempts.push(ScaleAttempt {
                c,
                outcome: e.to_string(),
                trace: residuals,
            }),
        }
    }
    Err(Error::AllScalesFailed {
        attempts: attempts.into_iter().map(|a| (a.c, a.outcome)).collect(),
    })
}

/// Interval of `c₀ > 0` with `c₀ min K < R_φ₀^m < c₀ max K` at every node, if any.
/// Reported as a diagnostic only.
pub fn reach_interval(r0: &ScalarField, k: &ScalarField) -> Option<(f64, f64)> {
    let (rlo, rhi) = r0.range();
    let (klo, khi) = k.range();
    // c₀ klo < rlo and c₀ khi > rhi
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    if klo > 0.0 {
        hi = hi.min(rlo / klo);
    } else if klo < 0.0 {
        lo = lo.max(rlo / klo);
    } else if rlo <= 0.0 {
        return None;
    }
    if khi > 0.0 {
        lo = lo.max(rhi / khi);
    } else if khi < 0.0 {
        hi = hi.min(rhi / khi);
    } else if rhi >= 0.0 {
        return None;
    }
    (lo < hi).then_some((lo, hi))
}
