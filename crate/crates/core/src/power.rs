//! Singular value decompositions of matrix powers in log space.
//!
//! `T^k = U diag(exp(l)) V*` is advanced one factor at a time. Each step
//! forms `T U = Q R`, factors the dominant magnitude out of every row of
//! `R diag(exp(l))` and re-diagonalizes the graded rows with one-sided
//! Jacobi rotations carried out on (log-scale, unit-direction) pairs. The
//! exponents grow linearly in `k` but never overflow, and rows whose
//! magnitude is exactly zero carry `l = -inf`.

use crate::linalg::{c64, qr, CMatrix, ONE, ZERO};

/// `T^k = U diag(exp(log_s)) V*` with `log_s` descending.
#[derive(Debug, Clone)]
pub struct LogSvd {
    pub u: CMatrix,
    pub log_s: Vec<f64>,
    pub v: CMatrix,
    pub power: usize,
}

impl LogSvd {
    fn identity(n: usize) -> Self {
        Self {
            u: CMatrix::identity(n, n),
            log_s: vec![0.0; n],
            v: CMatrix::identity(n, n),
            power: 0,
        }
    }

    /// `log sigma_i(T^k) / k`, the per-factor growth rates.
    pub fn rates(&self) -> Vec<f64> {
        let k = self.power.max(1) as f64;
        self.log_s.iter().map(|l| l / k).collect()
    }

    /// `V diag(phi(l_i)) V*`, a function of `(T^k)* T^k`.
    pub fn right_fun(&self, phi: impl Fn(f64) -> f64) -> CMatrix {
        weighted_outer(&self.v, &self.log_s, phi)
    }

    /// `U diag(phi(l_i)) U*`, a function of `T^k (T^k)*`.
    pub fn left_fun(&self, phi: impl Fn(f64) -> f64) -> CMatrix {
        weighted_outer(&self.u, &self.log_s, phi)
    }
}

fn weighted_outer(w: &CMatrix, log_s: &[f64], phi: impl Fn(f64) -> f64) -> CMatrix {
    let mut scaled = w.clone();
    for (j, &l) in log_s.iter().enumerate() {
        scaled.column_mut(j).scale_mut(phi(l));
    }
    scaled * w.adjoint()
}

/// Iterator-style accumulator for `T, T^2, T^3, ...`.
#[derive(Debug, Clone)]
pub struct PowerSvd {
    t: CMatrix,
    state: LogSvd,
}

impl PowerSvd {
    pub fn new(t: &CMatrix) -> Self {
        Self {
            t: t.clone(),
            state: LogSvd::identity(t.nrows()),
        }
    }

    pub fn state(&self) -> &LogSvd {
        &self.state
    }

    pub fn into_state(self) -> LogSvd {
        self.state
    }

    /// Multiplies the current power by one more factor of `T`.
    pub fn step(&mut self) {
        let n = self.t.nrows();
        let st = &self.state;
        let (q, r) = qr(&(&self.t * &st.u));

        // Row i of R diag(e^l) = e^{s_i} g_i with |g_i| = 1 (coordinates
        // relative to the current V basis).
        let mut g = CMatrix::zeros(n, n);
        let mut s = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            let m = (0..n)
                .map(|j| st.log_s[j] + r[(i, j)].norm().ln())
                .fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..n {
                let e = st.log_s[j] - m;
                if r[(i, j)] != ZERO && e > -745.0 {
                    g[(i, j)] = r[(i, j)] * e.exp();
                }
            }
            let nrm = g.row(i).norm();
            g.row_mut(i).scale_mut(1.0 / nrm);
            s[i] = m + nrm.ln();
        }

        let k = graded_row_jacobi(&mut g, &mut s);
        complete_rows(&mut g, &s);

        let u = q * k.adjoint();
        let v = &st.v * g.adjoint();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let mut us = CMatrix::zeros(n, n);
        let mut vs = CMatrix::zeros(n, n);
        let mut ls = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            us.set_column(dst, &u.column(src));
            vs.set_column(dst, &v.column(src));
            ls.push(s[src]);
        }
        self.state = LogSvd {
            u: us,
            log_s: ls,
            v: vs,
            power: st.power + 1,
        };
    }
}

/// Log-space SVD of `T^k`.
pub fn power_log_svd(t: &CMatrix, k: usize) -> LogSvd {
    let mut acc = PowerSvd::new(t);
    for _ in 0..k {
        acc.step();
    }
    acc.into_state()
}

/// Orthogonalizes the rows `e^{s_i} g_i` in place and returns the
/// accumulated left unitary `K` (so `K (D G)_in = (D G)_out`).
fn graded_row_jacobi(g: &mut CMatrix, s: &mut [f64]) -> CMatrix {
    let n = g.nrows();
    let mut k = CMatrix::identity(n, n);
    let thresh = 4.0 * f64::EPSILON * n as f64;
    for _sweep in 0..60 {
        let mut rotated = false;
        for a in 0..n {
            for b in a + 1..n {
                if s[a] == f64::NEG_INFINITY || s[b] == f64::NEG_INFINITY {
                    continue;
                }
                // i is the heavier row, j the lighter one.
                let (i, j) = if s[a] >= s[b] { (a, b) } else { (b, a) };
                let c: c64 = (0..n).map(|l| g[(i, l)] * g[(j, l)].conj()).sum();
                let ac = c.norm();
                if ac <= thresh {
                    continue;
                }
                rotated = true;
                let t = (s[j] - s[i]).exp();
                let z = (1.0 - t * t) / (2.0 * ac);
                let tau_t = 1.0 / (z + (t * t + z * z).sqrt());
                let tau = tau_t * t;
                let cs = 1.0 / (1.0 + tau * tau).sqrt();
                let sn = cs * tau;
                let ph = c / ac;
                // new g_i ~ C g_i + sn e^{i phi} t g_j ; new g_j ~ C g_j - C tau/t e^{-i phi} g_i
                let wi = ph * (sn * t);
                let wj = ph.conj() * (cs * tau_t);
                let mut ni2 = 0.0;
                let mut nj2 = 0.0;
                for l in 0..n {
                    let gi = g[(i, l)];
                    let gj = g[(j, l)];
                    let ui = gi * cs + wi * gj;
                    let uj = gj * cs - wj * gi;
                    g[(i, l)] = ui;
                    g[(j, l)] = uj;
                    ni2 += ui.norm_sqr();
                    nj2 += uj.norm_sqr();
                }
                let (ni, nj) = (ni2.sqrt(), nj2.sqrt());
                s[i] += ni.ln();
                g.row_mut(i).scale_mut(1.0 / ni);
                if nj > 0.0 {
                    s[j] += nj.ln();
                    g.row_mut(j).scale_mut(1.0 / nj);
                } else {
                    s[j] = f64::NEG_INFINITY;
                }
                // Left factor on the actual rows: [[C, S e^{i phi}], [-S e^{-i phi}, C]].
                let e = ph * sn;
                for l in 0..n {
                    let ki = k[(i, l)];
                    let kj = k[(j, l)];
                    k[(i, l)] = ki * cs + e * kj;
                    k[(j, l)] = kj * cs - e.conj() * ki;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    k
}

/// Fills rows with `s = -inf` by an orthonormal completion of the others.
fn complete_rows(g: &mut CMatrix, s: &[f64]) {
    let n = g.nrows();
    let missing: Vec<usize> = (0..n).filter(|&i| s[i] == f64::NEG_INFINITY).collect();
    if missing.is_empty() {
        return;
    }
    let mut basis: Vec<Vec<c64>> = (0..n)
        .filter(|&i| s[i] != f64::NEG_INFINITY)
        .map(|i| g.row(i).iter().copied().collect())
        .collect();
    let mut slot = missing.into_iter();
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![ZERO; n];
        v[e] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let p: c64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        let row = slot.next().expect("one slot per missing row");
        for (l, x) in v.iter().enumerate() {
            g[(row, l)] = *x;
        }
        basis.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        diag, diag_real, is_unitary, jordan_block, log_abs_det, matrix_power, norm2,
        singular_values,
    };
    use crate::testutil::{random_matrix, random_unitary};

    fn rebuild(st: &LogSvd) -> CMatrix {
        let s: Vec<f64> = st.log_s.iter().map(|l| l.exp()).collect();
        &st.u * diag_real(&s) * st.v.adjoint()
    }

    #[test]
    fn small_powers_match_direct_svd() {
        for seed in 0..8 {
            let t = random_matrix(5, seed);
            for k in 1..=4 {
                let st = power_log_svd(&t, k);
                let direct = singular_values(&matrix_power(&t, k as u32));
                for (l, s) in st.log_s.iter().zip(&direct) {
                    assert!((l.exp() - s).abs() < 1e-12 * (1.0 + direct[0]), "k={k}");
                }
                assert!(is_unitary(&st.u, 1e-12) && is_unitary(&st.v, 1e-12));
                let p = matrix_power(&t, k as u32);
                assert!(norm2(&(rebuild(&st) - &p)) < 1e-12 * (1.0 + norm2(&p)));
            }
        }
    }

    #[test]
    fn determinant_identity_at_high_power() {
        let t = random_matrix(6, 42);
        let st = power_log_svd(&t, 400);
        let total: f64 = st.log_s.iter().sum();
        assert!((total - 400.0 * log_abs_det(&t)).abs() < 1e-9 * 400.0);
        assert!(st.log_s.windows(2).all(|w| w[0] >= w[1]));
        assert!(is_unitary(&st.u, 1e-10) && is_unitary(&st.v, 1e-10));
    }

    #[test]
    fn leading_rate_is_spectral_radius() {
        let t = random_matrix(6, 7);
        let rho = crate::linalg::eigenvalues(&t)
            .unwrap()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
        let st = power_log_svd(&t, 2000);
        assert!((st.rates()[0] - rho.ln()).abs() < 5e-3);
    }

    #[test]
    fn normal_matrix_is_exact() {
        let w = random_unitary(4, 1);
        let d = diag(&[
            c64::new(2.0, 1.0),
            c64::new(0.5, 0.0),
            c64::new(0.0, -1.0),
            c64::new(0.1, 0.1),
        ]);
        let t = &w * d * w.adjoint();
        let st = power_log_svd(&t, 300);
        let mut expect = vec![5f64.sqrt().ln(), 0.5f64.ln(), 0.0, (0.02f64).sqrt().ln()];
        expect.sort_by(|a, b| b.total_cmp(a));
        for (r, e) in st.rates().iter().zip(&expect) {
            assert!((r - e).abs() < 1e-10);
        }
    }

    #[test]
    fn nilpotent_powers_vanish() {
        let j = jordan_block(2, ZERO);
        let st = power_log_svd(&j, 1);
        assert!((st.log_s[0]).abs() < 1e-15 && st.log_s[1] == f64::NEG_INFINITY);
        let st = power_log_svd(&j, 5);
        assert!(st.log_s.iter().all(|l| *l == f64::NEG_INFINITY));
        assert!(is_unitary(&st.u, 1e-14) && is_unitary(&st.v, 1e-14));
        let j3 = power_log_svd(&jordan_block(3, ZERO), 2);
        assert_eq!(j3.log_s.iter().filter(|l| l.is_finite()).count(), 1);
    }

    #[test]
    fn widely_spread_spectrum() {
        // eigenvalues 10 and 0.1 with a large off-diagonal: ratio 100^k overflows quickly
        let t = CMatrix::from_row_slice(
            2,
            2,
            &[
                c64::new(10.0, 0.0),
                c64::new(3.0, 1.0),
                ZERO,
                c64::new(0.1, 0.0),
            ],
        );
        let st = power_log_svd(&t, 500);
        assert!((st.rates()[0] - 10f64.ln()).abs() < 1e-2);
        assert!((st.rates()[1] - 0.1f64.ln()).abs() < 1e-2);
        let total: f64 = st.log_s.iter().sum();
        assert!((total - 500.0 * 1f64.ln()).abs() < 1e-9);
    }
}
