//! Node-local jets (value, first and second partials) gathered straight from
//! the stencils, and the metric quantities built algebraically from them.
//!
//! Every pointwise geometric quantity in the crate is a rational function of
//! these jets. Linearizations built the same way are therefore exact
//! derivatives of the discrete nonlinear maps.

use rayon::prelude::*;

use super::chart::{Chart, MAX_DIM};
use super::field::{sym_index, GridField, Sym2Field};
use super::small::{inverse, Matn, Vecn, ZM, ZV};
use super::GridError;

#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub v: f64,
    pub d: Vecn,
    pub dd: Matn,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        v: 0.0,
        d: ZV,
        dd: ZM,
    };

    pub fn constant(v: f64) -> Jet {
        Jet { v, ..Jet::ZERO }
    }

    #[inline]
    pub fn axpy(&mut self, s: f64, o: &Jet) {
        self.v += s * o.v;
        for a in 0..MAX_DIM {
            self.d[a] += s * o.d[a];
            for b in 0..MAX_DIM {
                self.dd[a][b] += s * o.dd[a][b];
            }
        }
    }
}

/// Stencil gatherer bound to one chart.
pub struct Sampler<'a> {
    chart: &'a Chart,
    n: usize,
    hw: usize,
    first: Vec<f64>,
    second: Vec<f64>,
    inv_h: Vecn,
}

/// Position of a node: its flat index and per-axis indices.
#[derive(Debug, Clone, Copy)]
pub struct NodePos {
    pub node: usize,
    pub idx: [usize; MAX_DIM],
    /// Whether the stencil fits along each axis.
    pub fits: [bool; MAX_DIM],
}

impl<'a> Sampler<'a> {
    pub fn new(chart: &'a Chart) -> Self {
        let st = chart.stencil();
        let mut inv_h = ZV;
        for (a, ax) in chart.axes().iter().enumerate() {
            inv_h[a] = 1.0 / ax.spacing();
        }
        Sampler {
            chart,
            n: chart.dim(),
            hw: st.half_width(),
            first: st.first_weights().to_vec(),
            second: st.second_weights().to_vec(),
            inv_h,
        }
    }

    pub fn chart(&self) -> &Chart {
        self.chart
    }

    pub fn pos(&self, node: usize) -> NodePos {
        let mut idx = [0usize; MAX_DIM];
        let mut fits = [false; MAX_DIM];
        for a in 0..self.n {
            let j = self.chart.index_along(node, a);
            idx[a] = j;
            let ax = self.chart.axis(a);
            fits[a] = ax.periodic || (j >= self.hw && j + self.hw < ax.nodes);
        }
        NodePos { node, idx, fits }
    }

    /// Flat index of the node displaced by `off` along `axis` (wrapping on periodic axes).
    #[inline]
    fn shift(&self, node: usize, idx: usize, axis: usize, off: isize) -> usize {
        let n = self.chart.axis(axis).nodes as isize;
        let s = self.chart.stride(axis) as isize;
        let j = idx as isize + off;
        let jw = if j < 0 {
            j + n
        } else if j >= n {
            j - n
        } else {
            j
        };
        (node as isize + (jw - idx as isize) * s) as usize
    }

    /// First partial along `a`.
    #[inline]
    pub fn d1(&self, data: &[f64], p: &NodePos, a: usize) -> f64 {
        if !p.fits[a] {
            return 0.0;
        }
        let mut acc = 0.0;
        for (k, w) in self.first.iter().enumerate() {
            let o = (k + 1) as isize;
            acc += w
                * (data[self.shift(p.node, p.idx[a], a, o)]
                    - data[self.shift(p.node, p.idx[a], a, -o)]);
        }
        acc * self.inv_h[a]
    }

    /// Gradient of node data.
    pub fn grad(&self, data: &[f64], p: &NodePos) -> Vecn {
        let mut g = ZV;
        for (a, ga) in g.iter_mut().enumerate().take(self.n) {
            *ga = self.d1(data, p, a);
        }
        g
    }

    /// Full 2-jet of node data.
    pub fn jet(&self, data: &[f64], p: &NodePos) -> Jet {
        let n = self.n;
        let node = p.node;
        let mut j = Jet {
            v: data[node],
            d: ZV,
            dd: ZM,
        };
        for a in 0..n {
            if !p.fits[a] {
                continue;
            }
            j.d[a] = self.d1(data, p, a);
            // centre weight is -2 Σ w_k, so differences against the centre
            // value make constants exact
            let c = data[node];
            let mut acc = 0.0;
            for (k, w) in self.second[1..].iter().enumerate() {
                let o = (k + 1) as isize;
                acc += w
                    * ((data[self.shift(node, p.idx[a], a, o)] - c)
                        + (data[self.shift(node, p.idx[a], a, -o)] - c));
            }
            j.dd[a][a] = acc * self.inv_h[a] * self.inv_h[a];
        }
        for a in 0..n {
            if !p.fits[a] {
                continue;
            }
            for b in a + 1..n {
                if !p.fits[b] {
                    continue;
                }
                let mut acc = 0.0;
                for (k, wk) in self.first.iter().enumerate() {
                    let ok = (k + 1) as isize;
                    let ap = self.shift(node, p.idx[a], a, ok);
                    let am = self.shift(node, p.idx[a], a, -ok);
                    for (l, wl) in self.first.iter().enumerate() {
                        let ol = (l + 1) as isize;
                        let app = self.shift(ap, p.idx[b], b, ol);
                        let apm = self.shift(ap, p.idx[b], b, -ol);
                        let amp = self.shift(am, p.idx[b], b, ol);
                        let amm = self.shift(am, p.idx[b], b, -ol);
                        acc += wk * wl * (data[app] - data[apm] - data[amp] + data[amm]);
                    }
                }
                let v = acc * self.inv_h[a] * self.inv_h[b];
                j.dd[a][b] = v;
                j.dd[b][a] = v;
            }
        }
        j
    }

    /// Jets of every stored component of a symmetric 2-tensor, as a full
    /// symmetric matrix of jets.
    pub fn sym2_jets(&self, t: &Sym2Field, p: &NodePos) -> Box<[[Jet; MAX_DIM]; MAX_DIM]> {
        let n = self.n;
        let mut out = Box::new([[Jet::ZERO; MAX_DIM]; MAX_DIM]);
        for a in 0..n {
            for b in a..n {
                let j = self.jet(t.components()[sym_index(n, a, b)].as_slice(), p);
                out[a][b] = j;
                out[b][a] = j;
            }
        }
        out
    }
}

/// Metric data at a node: values, partials, inverse and Christoffel symbols.
pub struct LocalMetric {
    pub n: usize,
    pub g: Matn,
    pub ginv: Matn,
    pub det: f64,
    /// `dg[c][a][b] = ∂_c g_ab`
    pub dg: [Matn; MAX_DIM],
    /// `ddg[c][d][a][b] = ∂_c ∂_d g_ab`
    pub ddg: [[Matn; MAX_DIM]; MAX_DIM],
    /// `gl[c][a][b] = Γ_{c,ab}`
    pub gl: [Matn; MAX_DIM],
    /// `gu[k][a][b] = Γ^k_ab`
    pub gu: [Matn; MAX_DIM],
}

/// Determinant threshold relative to the entry scale.
pub const SINGULAR_RTOL: f64 = 1e-12;

impl LocalMetric {
    pub fn from_field(
        s: &Sampler,
        g: &Sym2Field,
        p: &NodePos,
    ) -> Result<Box<LocalMetric>, GridError> {
        let jets = s.sym2_jets(g, p);
        Self::from_jets(s.n, &jets, p.node)
    }

    pub fn from_jets(
        n: usize,
        jets: &[[Jet; MAX_DIM]; MAX_DIM],
        node: usize,
    ) -> Result<Box<LocalMetric>, GridError> {
        let mut lm = Box::new(LocalMetric {
            n,
            g: ZM,
            ginv: ZM,
            det: 0.0,
            dg: [ZM; MAX_DIM],
            ddg: [[ZM; MAX_DIM]; MAX_DIM],
            gl: [ZM; MAX_DIM],
            gu: [ZM; MAX_DIM],
        });
        for a in 0..n {
            for b in 0..n {
                let j = &jets[a][b];
                lm.g[a][b] = j.v;
                for c in 0..n {
                    lm.dg[c][a][b] = j.d[c];
                    for d in 0..n {
                        lm.ddg[c][d][a][b] = j.dd[c][d];
                    }
                }
            }
        }
        let scale = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .fold(0.0f64, |m, (a, b)| m.max(lm.g[a][b].abs()));
        let (ginv, det) = inverse(&lm.g, n).ok_or(GridError::SingularMetric { node, det: 0.0 })?;
        if !(det.abs() > SINGULAR_RTOL * scale.powi(n as i32)) || !det.is_finite() {
            return Err(GridError::SingularMetric { node, det });
        }
        lm.ginv = ginv;
        lm.det = det;
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    lm.gl[c][a][b] = 0.5 * (lm.dg[a][b][c] + lm.dg[b][a][c] - lm.dg[c][a][b]);
                }
            }
        }
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += lm.ginv[k][c] * lm.gl[c][a][b];
                    }
                    lm.gu[k][a][b] = acc;
                }
            }
        }
        Ok(lm)
    }

    /// `√|det g|`
    pub fn volume_factor(&self) -> f64 {
        self.det.abs().sqrt()
    }

    /// `out[e][k][a][b] = ∂_e Γ^k_ab`
    pub fn dgamma(&self) -> Box<[[Matn; MAX_DIM]; MAX_DIM]> {
        let n = self.n;
        let mut out = Box::new([[ZM; MAX_DIM]; MAX_DIM]);
        for e in 0..n {
            // ∂_e Γ_{c,ab}
            let mut dgl = [ZM; MAX_DIM];
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        dgl[c][a][b] = 0.5
                            * (self.ddg[e][a][b][c] + self.ddg[e][b][a][c] - self.ddg[e][c][a][b]);
                    }
                }
            }
            for k in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut acc = 0.0;
                        for c in 0..n {
                            acc += self.ginv[k][c] * dgl[c][a][b];
                            // ∂g^{kc} Γ_{c,ab} = -g^{kp} ∂g_pq Γ^q_ab
                            let mut t = 0.0;
                            for q in 0..n {
                                t += self.dg[e][c][q] * self.gu[q][a][b];
                            }
                            acc -= self.ginv[k][c] * t;
                        }
                        out[e][k][a][b] = acc;
                    }
                }
            }
        }
        out
    }

    /// Riemann tensor `R_ijkl` with the commutator convention
    /// `R_ijkl ∇^l f = ∇_i∇_j∇_k f - ∇_j∇_i∇_k f`.
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = &self.ddg;
        let mut r = 0.5 * (d[i][l][j][k] + d[j][k][i][l] - d[i][k][j][l] - d[j][l][i][k]);
        for p in 0..self.n {
            for q in 0..self.n {
                r += self.ginv[p][q]
                    * (self.gl[p][i][l] * self.gl[q][j][k] - self.gl[p][j][l] * self.gl[q][i][k]);
            }
        }
        r
    }

    /// All components, `rm[i][j][k][l]`.
    pub fn riemann_all(&self) -> Box<[[Matn; MAX_DIM]; MAX_DIM]> {
        let n = self.n;
        let mut rm = Box::new([[ZM; MAX_DIM]; MAX_DIM]);
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    for l in k + 1..n {
                        if (i, j) > (k, l) {
                            continue;
                        }
                        let v = self.riemann(i, j, k, l);
                        for (a, b, c, dd, s) in [
                            (i, j, k, l, 1.0),
                            (j, i, k, l, -1.0),
                            (i, j, l, k, -1.0),
                            (j, i, l, k, 1.0),
                        ] {
                            rm[a][b][c][dd] = s * v;
                            rm[c][dd][a][b] = s * v;
                        }
                    }
                }
            }
        }
        rm
    }

    /// `Rc_jk = g^{il} R_ijlk`.
    pub fn ricci_from(&self, rm: &[[Matn; MAX_DIM]; MAX_DIM]) -> Matn {
        let n = self.n;
        let mut rc = ZM;
        for j in 0..n {
            for k in j..n {
                let mut acc = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        acc += self.ginv[i][l] * rm[i][j][l][k];
                    }
                }
                rc[j][k] = acc;
                rc[k][j] = acc;
            }
        }
        rc
    }

    pub fn ricci(&self) -> Matn {
        self.ricci_from(&self.riemann_all())
    }

    /// Full trace `g^{ab} T_ab`.
    pub fn trace(&self, t: &Matn) -> f64 {
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += self.ginv[a][b] * t[a][b];
            }
        }
        s
    }

    /// `g^{ik} g^{jl} A_ij B_kl`
    pub fn inner2(&self, a: &Matn, b: &Matn) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if a[i][j] == 0.0 {
                    continue;
                }
                let mut t = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        t += self.ginv[i][k] * self.ginv[j][l] * b[k][l];
                    }
                }
                s += a[i][j] * t;
            }
        }
        s
    }

    /// `g^{ab} u_a v_b`
    pub fn inner1(&self, u: &Vecn, v: &Vecn) -> f64 {
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += self.ginv[a][b] * u[a] * v[b];
            }
        }
        s
    }

    pub fn raise(&self, u: &Vecn) -> Vecn {
        let mut out = ZV;
        for a in 0..self.n {
            for b in 0..self.n {
                out[a] += self.ginv[a][b] * u[b];
            }
        }
        out
    }

    /// Covariant Hessian of a scalar from its jet.
    pub fn hess(&self, f: &Jet) -> Matn {
        let n = self.n;
        let mut h = ZM;
        for i in 0..n {
            for j in i..n {
                let mut v = f.dd[i][j];
                for k in 0..n {
                    v -= self.gu[k][i][j] * f.d[k];
                }
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    pub fn laplacian(&self, f: &Jet) -> f64 {
        self.trace(&self.hess(f))
    }

    /// `∇_j h_kl` from the jets of `h`.
    pub fn nabla_sym2(&self, h: &[[Jet; MAX_DIM]; MAX_DIM]) -> [Matn; MAX_DIM] {
        let n = self.n;
        let mut out = [ZM; MAX_DIM];
        for j in 0..n {
            for k in 0..n {
                for l in k..n {
                    let mut v = h[k][l].d[j];
                    for p in 0..n {
                        v -= self.gu[p][j][k] * h[p][l].v + self.gu[p][j][l] * h[k][p].v;
                    }
                    out[j][k][l] = v;
                    out[j][l][k] = v;
                }
            }
        }
        out
    }

    /// `∇_i ∇_j h_kl` from the jets of `h`, given `∂Γ`.
    pub fn nabla2_sym2(
        &self,
        h: &[[Jet; MAX_DIM]; MAX_DIM],
        dgam: &[[Matn; MAX_DIM]; MAX_DIM],
        nh: &[Matn; MAX_DIM],
    ) -> Box<[[Matn; MAX_DIM]; MAX_DIM]> {
        let n = self.n;
        let mut out = Box::new([[ZM; MAX_DIM]; MAX_DIM]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in k..n {
                        // ∂_i (∇_j h_kl)
                        let mut v = h[k][l].dd[i][j];
                        for p in 0..n {
                            v -= dgam[i][p][j][k] * h[p][l].v
                                + self.gu[p][j][k] * h[p][l].d[i]
                                + dgam[i][p][j][l] * h[k][p].v
                                + self.gu[p][j][l] * h[k][p].d[i];
                        }
                        for p in 0..n {
                            v -= self.gu[p][i][j] * nh[p][k][l]
                                + self.gu[p][i][k] * nh[j][p][l]
                                + self.gu[p][i][l] * nh[j][k][p];
                        }
                        out[i][j][k][l] = v;
                        out[i][j][l][k] = v;
                    }
                }
            }
        }
        out
    }
}

/// Runs `f` at every node valid at `margin`, writing `ncomp` outputs per
/// node. Invalid nodes are left at zero. Returns component-major storage.
pub fn eval_nodes<F>(
    chart: &Chart,
    margin: usize,
    ncomp: usize,
    f: F,
) -> Result<Vec<Vec<f64>>, GridError>
where
    F: Fn(&Sampler, &NodePos, &mut [f64]) -> Result<(), GridError> + Sync,
{
    chart.check_margin(margin)?;
    let len = chart.len();
    let sampler = Sampler::new(chart);
    let mut buf = vec![0.0; len * ncomp];
    buf.par_chunks_mut(ncomp.max(1))
        .enumerate()
        .try_for_each(|(node, out)| {
            if !chart.is_valid(node, margin) {
                return Ok(());
            }
            let p = sampler.pos(node);
            f(&sampler, &p, out)
        })?;
    let mut comps = vec![vec![0.0; len]; ncomp];
    for (node, chunk) in buf.chunks(ncomp.max(1)).enumerate() {
        for (c, v) in chunk.iter().enumerate() {
            comps[c][node] = *v;
        }
    }
    Ok(comps)
}

/// Packs the upper triangle of a symmetric matrix into `out` in storage order.
#[inline]
pub fn pack_sym(n: usize, m: &Matn, out: &mut [f64]) {
    let mut c = 0;
    for a in 0..n {
        for b in a..n {
            out[c] = m[a][b];
            c += 1;
        }
    }
}

/// Metric values only (no derivatives): `(g, g^{-1}, det g)` at a node.
pub fn metric_values(g: &Sym2Field, node: usize) -> Result<(Matn, Matn, f64), GridError> {
    let n = g.dim();
    let mut m = ZM;
    for a in 0..n {
        for b in a..n {
            let v = g.components()[sym_index(n, a, b)][node];
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    let scale = m
        .iter()
        .take(n)
        .flat_map(|r| r.iter().take(n))
        .fold(0.0f64, |s, v| s.max(v.abs()));
    let (inv, det) = inverse(&m, n).ok_or(GridError::SingularMetric { node, det: 0.0 })?;
    if !(det.abs() > SINGULAR_RTOL * scale.powi(n as i32)) || !det.is_finite() {
        return Err(GridError::SingularMetric { node, det });
    }
    Ok((m, inv, det))
}

/// Unpacks stored symmetric components at a node into a full matrix.
#[inline]
pub fn unpack_sym(t: &Sym2Field, node: usize) -> Matn {
    let n = t.dim();
    let mut m = ZM;
    let mut c = 0;
    for a in 0..n {
        for b in a..n {
            let v = t.components()[c][node];
            m[a][b] = v;
            m[b][a] = v;
            c += 1;
        }
    }
    m
}
