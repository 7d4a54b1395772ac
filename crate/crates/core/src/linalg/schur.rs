//! Complex Schur form `T = Z S Z*` with adjacent-swap reordering.
//!
//! Householder reduction to Hessenberg form followed by single-shift
//! implicit QR (Wilkinson shift, exceptional shift every tenth sweep).

use super::{c64, norm2, CMatrix, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Schur {
    /// Unitary Schur vectors.
    pub z: CMatrix,
    /// Upper triangular factor.
    pub s: CMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<c64> {
        (0..self.s.nrows()).map(|i| self.s[(i, i)]).collect()
    }
}

/// Plane rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
#[derive(Clone, Copy)]
struct Givens {
    c: f64,
    s: c64,
}

impl Givens {
    fn new(x: c64, y: c64) -> Self {
        let ax = x.norm();
        let ay = y.norm();
        if ay == 0.0 {
            return Self { c: 1.0, s: ZERO };
        }
        if ax == 0.0 {
            return Self {
                c: 0.0,
                s: y.conj() / ay,
            };
        }
        let r = ax.hypot(ay);
        Self {
            c: ax / r,
            s: (x / ax) * y.conj() / r,
        }
    }

    /// Rows `k, k+1` of `m`, columns `cols`.
    fn rows(&self, m: &mut CMatrix, k: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let a = m[(k, j)];
            let b = m[(k + 1, j)];
            m[(k, j)] = a * self.c + self.s * b;
            m[(k + 1, j)] = -self.s.conj() * a + b * self.c;
        }
    }

    /// Columns `k, k+1` of `m` multiplied by `G*`, rows `rows`.
    fn cols(&self, m: &mut CMatrix, k: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let a = m[(i, k)];
            let b = m[(i, k + 1)];
            m[(i, k)] = a * self.c + self.s.conj() * b;
            m[(i, k + 1)] = -self.s * a + b * self.c;
        }
    }
}

fn hessenberg(t: &CMatrix, want_q: bool) -> (CMatrix, CMatrix) {
    let n = t.nrows();
    let mut h = t.clone();
    let mut q = if want_q {
        CMatrix::identity(n, n)
    } else {
        CMatrix::zeros(0, 0)
    };
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut v: Vec<c64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let alpha = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 {
            c64::new(1.0, 0.0)
        } else {
            v[0] / v[0].norm()
        };
        v[0] += phase * alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vn == 0.0 {
            continue;
        }
        // H <- (1 - 2 v v*/|v|^2) H (1 - 2 v v*/|v|^2)
        for j in 0..n {
            let mut dot = ZERO;
            for i in 0..len {
                dot += v[i].conj() * h[(k + 1 + i, j)];
            }
            let f = dot * (2.0 / vn);
            for i in 0..len {
                h[(k + 1 + i, j)] -= v[i] * f;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..m.nrows() {
                let mut dot = ZERO;
                for l in 0..len {
                    dot += m[(i, k + 1 + l)] * v[l];
                }
                let f = dot * (2.0 / vn);
                for l in 0..len {
                    m[(i, k + 1 + l)] -= f * v[l].conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Eigenvalue of the trailing 2x2 block closest to its last diagonal entry.
fn wilkinson(a: c64, b: c64, c: c64, d: c64) -> c64 {
    let tr_half = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (tr_half * tr_half - det).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition.
pub fn schur(t: &CMatrix) -> Result<Schur> {
    super::check_matrix(t)?;
    let (mut h, mut z) = hessenberg(t, true);
    qr_sweeps(&mut h, Some(&mut z))?;
    Ok(Schur { z, s: h })
}

/// Eigenvalues of `t` (diagonal of its Schur factor).
///
/// Skips the Schur vectors and only updates the active window, which is
/// several times cheaper than [`schur`] for large matrices.
pub fn eigenvalues(t: &CMatrix) -> Result<Vec<c64>> {
    super::check_matrix(t)?;
    let (mut h, _) = hessenberg(t, false);
    qr_sweeps(&mut h, None)?;
    Ok((0..h.nrows()).map(|i| h[(i, i)]).collect())
}

fn qr_sweeps(h: &mut CMatrix, mut z: Option<&mut CMatrix>) -> Result<()> {
    let n = h.nrows();
    let full = z.is_some();
    let eps = f64::EPSILON;
    let scale = norm2(h) * (n as f64).sqrt();
    let tiny = f64::MIN_POSITIVE.max(eps * eps * scale);
    let max_iter = 60 * n.max(1);
    let mut hi = n.saturating_sub(1);
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut diag = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= eps * diag || sub <= tiny {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter * 10 {
            return Err(Error::NoConvergence("Schur QR iteration".into()));
        }
        let mu = if iter.is_multiple_of(10) {
            h[(hi, hi)] + c64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        let mut x = h[(l, l)] - mu;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            let g = Givens::new(x, y);
            let c0 = if k > l { k - 1 } else { l };
            let (c1, r0) = if full { (n, 0) } else { (hi + 1, l) };
            g.rows(h, k, c0..c1);
            g.cols(h, k, r0..(k + 3).min(hi + 1));
            if let Some(z) = z.as_deref_mut() {
                g.cols(z, k, 0..n);
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(())
}

fn swap_adjacent(sch: &mut Schur, k: usize) {
    let n = sch.s.nrows();
    let a = sch.s[(k, k)];
    let b = sch.s[(k + 1, k + 1)];
    let x = sch.s[(k, k + 1)];
    let g = Givens::new(x, b - a);
    g.rows(&mut sch.s, k, k..n);
    g.cols(&mut sch.s, k, 0..k + 2);
    g.cols(&mut sch.z, k, 0..n);
    sch.s[(k + 1, k)] = ZERO;
    sch.s[(k, k)] = b;
    sch.s[(k + 1, k + 1)] = a;
}

/// Moves the eigenvalues selected by `select` to the leading block, keeping
/// relative order. Returns the reordered form and the block size `m`; the
/// first `m` Schur vectors then span the invariant subspace of the
/// selected eigenvalues.
pub fn reorder_schur(sch: &Schur, select: impl Fn(c64) -> bool) -> (Schur, usize) {
    let mut out = sch.clone();
    let n = out.s.nrows();
    let mut m = 0;
    for j in 0..n {
        if select(out.s[(j, j)]) {
            let mut k = j;
            while k > m {
                swap_adjacent(&mut out, k - 1);
                k -= 1;
            }
            m += 1;
        }
    }
    (out, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, identity, is_unitary, jordan_block};
    use crate::testutil::random_matrix;

    fn check(t: &CMatrix) -> Schur {
        let s = schur(t).unwrap();
        assert!(is_unitary(&s.z, 1e-12));
        let back = &s.z * &s.s * s.z.adjoint();
        assert!(
            norm2(&(back - t)) < 1e-12 * (1.0 + norm2(t)),
            "reconstruction"
        );
        for j in 0..t.nrows() {
            for i in j + 1..t.nrows() {
                assert_eq!(s.s[(i, j)], ZERO);
            }
        }
        s
    }

    #[test]
    fn random_matrices_reconstruct() {
        for seed in 0..20 {
            check(&random_matrix(1 + seed as usize % 9, seed));
        }
        check(&random_matrix(40, 99));
    }

    #[test]
    fn structured_inputs() {
        check(&identity(3));
        check(&jordan_block(4, ZERO));
        check(&CMatrix::zeros(3, 3));
        // companion of z^2 - 1
        let comp =
            CMatrix::from_row_slice(2, 2, &[ZERO, c64::new(1.0, 0.0), c64::new(1.0, 0.0), ZERO]);
        let mut ev = check(&comp).eigenvalues();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] + 1.0).norm() < 1e-14 && (ev[1] - 1.0).norm() < 1e-14);
        // real rotation: eigenvalues +-i
        let rot =
            CMatrix::from_row_slice(2, 2, &[ZERO, c64::new(-1.0, 0.0), c64::new(1.0, 0.0), ZERO]);
        let ev = check(&rot).eigenvalues();
        assert!(ev
            .iter()
            .all(|l| (l.norm() - 1.0).abs() < 1e-14 && l.re.abs() < 1e-14));
    }

    #[test]
    fn trace_equals_eigen_sum() {
        let t = random_matrix(7, 4);
        let sum: c64 = eigenvalues(&t).unwrap().iter().sum();
        assert!((sum - t.trace()).norm() < 1e-12);
    }

    #[test]
    fn reorder_moves_selection_forward() {
        let t = random_matrix(6, 13);
        let sch = check(&t);
        let (re, m) = reorder_schur(&sch, |l| l.re < 0.0);
        let expected = sch.eigenvalues().iter().filter(|l| l.re < 0.0).count();
        assert_eq!(m, expected);
        assert!(is_unitary(&re.z, 1e-12));
        assert!(norm2(&(&re.z * &re.s * re.z.adjoint() - &t)) < 1e-11);
        for j in 0..6 {
            assert_eq!(re.s[(j, j)].re < 0.0, j < m);
        }
        // leading Schur vectors span an invariant subspace
        let q = re.z.columns(0, m).into_owned();
        let p = &q * q.adjoint();
        assert!(norm2(&(&p * &t * &p - &t * &p)) < 1e-11);
    }

    #[test]
    fn reorder_diagonal() {
        let d = diag(&[c64::new(3.0, 0.0), c64::new(1.0, 0.0)]);
        let (re, m) = reorder_schur(&schur(&d).unwrap(), |l| l.norm() < 2.0);
        assert_eq!(m, 1);
        assert!((re.s[(0, 0)] - 1.0).norm() < 1e-15);
        assert!((re.z[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }
}
