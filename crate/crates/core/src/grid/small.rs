//! Fixed-size dense helpers for per-node algebra (dimension at most `MAX_DIM`).

use super::chart::MAX_DIM;

pub type Vecn = [f64; MAX_DIM];
pub type Matn = [[f64; MAX_DIM]; MAX_DIM];

pub const ZV: Vecn = [0.0; MAX_DIM];
pub const ZM: Matn = [[0.0; MAX_DIM]; MAX_DIM];

/// Inverse and determinant of the leading `n x n` block by Gauss-Jordan
/// elimination with partial pivoting. Returns `None` when a pivot vanishes.
pub fn inverse(a: &Matn, n: usize) -> Option<(Matn, f64)> {
    let mut m = *a;
    let mut inv = ZM;
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        if piv != col {
            m.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        let ip = 1.0 / p;
        for k in 0..n {
            m[col][k] *= ip;
            inv[col][k] *= ip;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r][k] -= f * m[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some((inv, det))
}

/// Smallest eigenvalue of a symmetric `n x n` block (cyclic Jacobi).
pub fn min_eigenvalue(a: &Matn, n: usize) -> f64 {
    let mut m = *a;
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).fold(f64::INFINITY, f64::min)
}
