//! One-dimensional reductions of the weighted static equations on flat space:
//! the ODE pair for translation-invariant data `(f(x), φ(x))`, its integration,
//! and the warp-rate and level-set curvature scalars of the LCF rigidity argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::local::eval_nodes;
use crate::grid::{jet_margin, same_chart, ChartKind, GridField, ScalarField};

/// Below this `|f|` the right-hand side is treated as singular.
pub const DEFAULT_F_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileState {
    pub x: f64,
    pub f: f64,
    pub df: f64,
    pub phi: f64,
    pub dphi: f64,
}

impl ProfileState {
    pub const CSV_HEADER: [&'static str; 5] = ["x", "f", "f'", "phi", "phi'"];

    pub fn row(&self) -> [f64; 5] {
        [self.x, self.f, self.df, self.phi, self.dphi]
    }

    fn is_finite(&self) -> bool {
        self.row().iter().all(|v| v.is_finite())
    }
}

/// Pointwise residuals of the two profile equations
/// `φ′f′ − fφ″ + (1/m)fφ′² = 0` and
/// `f″ − ((m−1)/m)φ′f′ + (1/m)fφ″ − (1/m)fφ′² = 0`.
pub fn rnode_residual(
    f: &ScalarField,
    phi: &ScalarField,
    m: f64,
) -> Result<(ScalarField, ScalarField)> {
    same_chart(f.chart(), phi.chart())?;
    let chart = f.chart().clone();
    if chart.dim() != 1 || chart.kind() != ChartKind::OpenBox {
        return Err(Error::Invalid(
            "profile residuals need a 1-d box chart".into(),
        ));
    }
    check_m(m)?;
    let margin = jet_margin(&chart, f.margin().max(phi.margin()));
    let comps = eval_nodes(&chart, margin, 2, |s, p, out| {
        let fj = s.jet(f.values(), p);
        let pj = s.jet(phi.values(), p);
        let (fv, d1f, d2f) = (fj.v, fj.d[0], fj.dd[0][0]);
        let (d1p, d2p) = (pj.d[0], pj.dd[0][0]);
        out[0] = d1p * d1f - fv * d2p + fv * d1p * d1p / m;
        out[1] = d2f - (m - 1.0) / m * d1p * d1f + fv * d2p / m - fv * d1p * d1p / m;
        Ok(())
    })?;
    let mut it = comps.into_iter();
    let r1 = ScalarField::from_values(chart.clone(), it.next().unwrap(), margin);
    let r2 = ScalarField::from_values(chart, it.next().unwrap(), margin);
    Ok((r1, r2))
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Invalid(format!(
            "m must be positive and finite, got {m}"
        )));
    }
    Ok(())
}

/// `(f′, f″, φ′, φ″)` from the profile equations solved for the second derivatives:
/// `φ″ = φ′f′/f + φ′²/m`, `f″ = ((m−2)/m)φ′f′ + ((m−1)/m²) f φ′²`.
fn rhs(s: &[f64; 4], m: f64) -> [f64; 4] {
    let [f, df, _, dp] = *s;
    let ddp = dp * df / f + dp * dp / m;
    let ddf = (m - 2.0) / m * dp * df + (m - 1.0) / (m * m) * f * dp * dp;
    [df, ddf, dp, ddp]
}

/// Second derivatives `(f″, φ″)` at a state.
pub fn second_derivatives(st: &ProfileState, m: f64) -> (f64, f64) {
    let d = rhs(&[st.f, st.df, st.phi, st.dphi], m);
    (d[1], d[3])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorHit {
    pub x: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub m: f64,
    pub states: Vec<ProfileState>,
    /// Set when integration stopped early because `|f|` fell below the floor:
    /// a candidate static horizon.
    pub floor_hit: Option<FloorHit>,
}

impl Trajectory {
    pub fn last(&self) -> &ProfileState {
        self.states
            .last()
            .expect("a trajectory holds at least its initial state")
    }
}

/// Classical fourth-order Runge-Kutta from `init.x` to `x_end`. The last step
/// is shortened to land on `x_end`. Stopping at the floor is not an error
/// here; see [`integrate_profile`] for the strict form.
pub fn integrate_profile_reporting(
    init: ProfileState,
    m: f64,
    x_end: f64,
    step: f64,
    f_floor: f64,
) -> Result<Trajectory> {
    check_m(m)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    if !(x_end > init.x) {
        return Err(Error::Invalid(format!(
            "x_end = {x_end} must exceed the initial x = {}",
            init.x
        )));
    }
    if !init.is_finite() {
        return Err(Error::Invalid("non-finite initial state".into()));
    }
    let mut traj = Trajectory {
        m,
        states: vec![init],
        floor_hit: None,
    };
    if init.f.abs() < f_floor {
        traj.floor_hit = Some(FloorHit {
            x: init.x,
            f: init.f,
        });
        return Ok(traj);
    }
    let steps = ((x_end - init.x) / step - 1e-9).ceil().max(1.0) as usize;
    let mut y = [init.f, init.df, init.phi, init.dphi];
    // compensated accumulation: at small steps the round-off of a thousand
    // increments would otherwise swamp the O(h⁴) truncation error
    let mut carry = [0.0; 4];
    for i in 0..steps {
        let x0 = init.x + i as f64 * step;
        let x1 = if i + 1 == steps {
            x_end
        } else {
            init.x + (i + 1) as f64 * step
        };
        let h = x1 - x0;
        let stage = |y: &[f64; 4], k: &[f64; 4], c: f64| -> [f64; 4] {
            std::array::from_fn(|j| y[j] + c * k[j])
        };
        let k1 = rhs(&y, m);
        let y2 = stage(&y, &k1, 0.5 * h);
        let k2 = rhs(&y2, m);
        let y3 = stage(&y, &k2, 0.5 * h);
        let k3 = rhs(&y3, m);
        let y4 = stage(&y, &k3, h);
        let k4 = rhs(&y4, m);
        for (small, at) in [(&y2, x0 + 0.5 * h), (&y3, x0 + 0.5 * h), (&y4, x1)] {
            if small[0].abs() < f_floor {
                traj.floor_hit = Some(FloorHit { x: at, f: small[0] });
                return Ok(traj);
            }
        }
        for j in 0..4 {
            let inc = h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) - carry[j];
            let next = y[j] + inc;
            carry[j] = (next - y[j]) - inc;
            y[j] = next;
        }
        let st = ProfileState {
            x: x1,
            f: y[0],
            df: y[1],
            phi: y[2],
            dphi: y[3],
        };
        if !st.is_finite() {
            return Err(Error::Invalid(format!("non-finite state at x = {x1}")));
        }
        traj.states.push(st);
        if st.f.abs() < f_floor {
            traj.floor_hit = Some(FloorHit { x: x1, f: st.f });
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Like [`integrate_profile_reporting`] but a floor hit is an error.
pub fn integrate_profile(init: ProfileState, m: f64, x_end: f64, step: f64) -> Result<Trajectory> {
    let t = integrate_profile_reporting(init, m, x_end, step, DEFAULT_F_FLOOR)?;
    match &t.floor_hit {
        Some(hit) => Err(Error::FloorHit { x: hit.x, f: hit.f }),
        None => Ok(t),
    }
}

/// `w′/w = −(1/(n+m−1)) f″/f′ − (R_φ^m/(n+m−1)²) f/f′`
pub fn warp_rate(f: f64, df: f64, ddf: f64, r_phi: f64, n: usize, m: f64) -> Result<f64> {
    if df == 0.0 {
        return Err(Error::Invalid("warp rate needs f′ ≠ 0".into()));
    }
    let d = n as f64 + m - 1.0;
    Ok(-ddf / (d * df) - r_phi / (d * d) * (f / df))
}

/// Sectional curvature of a level set of `f` in the LCF rigidity argument:
/// `(R_φ^m − 2Rc_rr)/((n+m−1)(n+m−2)) + ((f/f′) Rc_rr)²/(n+m−1)²`.
pub fn levelset_sectional(
    rc_rr: f64,
    r_phi: f64,
    f_over_fprime: f64,
    n: usize,
    m: f64,
) -> Result<f64> {
    let d = n as f64 + m;
    if !(d > 2.0) {
        return Err(Error::Invalid(format!(
            "level-set curvature needs n + m > 2, got {d}"
        )));
    }
    let t = f_over_fprime * rc_rr;
    Ok((r_phi - 2.0 * rc_rr) / ((d - 1.0) * (d - 2.0)) + t * t / ((d - 1.0) * (d - 1.0)))
}
