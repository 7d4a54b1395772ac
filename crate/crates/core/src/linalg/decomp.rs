use nalgebra::SymmetricEigen;

use super::{c64, hermitian_residual, identity, norm2, CMatrix, ZERO};
use crate::error::{Error, Result};

/// Singular value decomposition `T = U diag(s) V*`, values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

fn to_faer(t: &CMatrix) -> faer::Mat<c64> {
    faer::Mat::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, c64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Backed by faer: nalgebra's complex SVD loses accuracy on some
/// nearly rank-deficient inputs (idempotents, low-rank plus noise).
pub fn svd(t: &CMatrix) -> Svd {
    let n = t.nrows();
    if n == 0 {
        return Svd {
            u: CMatrix::zeros(0, 0),
            s: Vec::new(),
            v: CMatrix::zeros(0, 0),
        };
    }
    let dec = to_faer(t)
        .svd()
        .expect("SVD iteration converges for finite input");
    Svd {
        u: from_faer(dec.U()),
        s: (0..n).map(|k| dec.S()[k].re).collect(),
        v: from_faer(dec.V()),
    }
}

/// Singular values in descending order.
pub fn singular_values(t: &CMatrix) -> Vec<f64> {
    if t.nrows() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(t)
        .singular_values()
        .expect("SVD iteration converges for finite input");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral resolution of a Hermitian matrix: ascending values, unitary vectors.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    /// `V diag(phi(values)) V*`.
    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let f = phi(self.values[j]);
            scaled.column_mut(j).scale_mut(f);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|x| x)
    }
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let scale = norm2(h);
    let res = hermitian_residual(h);
    if res > 1e-10 * scale.max(f64::MIN_POSITIVE) && res > 0.0 {
        return Err(Error::NotHermitian { residual: res });
    }
    Ok(())
}

pub fn herm_eig(h: &CMatrix) -> Result<HermEig> {
    super::check_matrix(h)?;
    check_hermitian(h)?;
    let sym = (h + h.adjoint()).scale(0.5);
    let dec = SymmetricEigen::new(sym);
    let vals: Vec<f64> = dec.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let n = vals.len();
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        vectors.set_column(k, &dec.eigenvectors.column(j));
        values.push(vals[j]);
    }
    Ok(HermEig { values, vectors })
}

/// Borel functional calculus `phi(H)` for Hermitian `H`.
pub fn herm_fun(h: &CMatrix, phi: impl Fn(f64) -> f64) -> Result<CMatrix> {
    Ok(herm_eig(h)?.apply(phi))
}

/// Polar decomposition `T = U |T|`. For singular `T` the unitary is
/// completed by pairing the left and right singular bases on the kernel.
pub fn polar(t: &CMatrix) -> (CMatrix, CMatrix) {
    let Svd { u, s, v } = svd(t);
    let unitary = &u * v.adjoint();
    let mut vs = v.clone();
    for (j, sj) in s.iter().enumerate() {
        vs.column_mut(j).scale_mut(*sj);
    }
    let abs = vs * v.adjoint();
    (unitary, (&abs + abs.adjoint()).scale(0.5))
}

/// Householder QR `T = Q R`.
pub fn qr(t: &CMatrix) -> (CMatrix, CMatrix) {
    let dec = t.clone().qr();
    (dec.q(), dec.r())
}

pub fn inverse(t: &CMatrix) -> Result<CMatrix> {
    let n = t.nrows();
    let lu = t.clone().lu();
    lu.solve(&identity(n)).ok_or(Error::Singular)
}

pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone().lu().solve(b).ok_or(Error::Singular)
}

/// `log |det T|` via LU pivots; `-inf` for exactly singular input.
pub fn log_abs_det(t: &CMatrix) -> f64 {
    let lu = t.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == ZERO {
            return f64::NEG_INFINITY;
        }
        acc += d.norm().ln();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, op_norm};
    use crate::testutil::random_matrix;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let t = random_matrix(5, 11);
        let Svd { u, s, v } = svd(&t);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &u * diag_real(&s) * v.adjoint();
        assert!(norm2(&(rebuilt - &t)) < 1e-12);
    }

    #[test]
    fn svd_of_oblique_idempotent() {
        // Rank-one idempotent from a contour node sum; nalgebra's complex SVD
        // reconstructs it only to 1e-3.
        let e = CMatrix::from_column_slice(
            2,
            2,
            &[
                c64::new(0.41948038675302274, -0.35949648097502584),
                c64::new(0.20166254987562585, -0.651873981612286),
                c64::new(0.24249943388927034, 0.4968004041723329),
                c64::new(0.5805196132470396, 0.3594964809749408),
            ],
        );
        let Svd { u, s, v } = svd(&e);
        assert!(norm2(&(&u * diag_real(&s) * v.adjoint() - &e)) < 1e-14);
        assert!((s[0] - 1.2420412009468746).abs() < 1e-13 && s[1] < 1e-12);
        assert_eq!(singular_values(&e).len(), 2);
        assert!(svd(&CMatrix::zeros(0, 0)).s.is_empty());
    }

    #[test]
    fn herm_fun_identity_and_indicator() {
        let h = diag_real(&[0.5, 2.0]);
        let same = herm_fun(&h, |x| x).unwrap();
        assert!(norm2(&(same - &h)) < 1e-14);
        let ind = herm_fun(&h, |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        assert!(norm2(&(ind - diag_real(&[1.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn herm_fun_log_exp_round_trip() {
        let a = random_matrix(4, 3);
        let h = &a * a.adjoint() + identity(4);
        let log_h = herm_fun(&h, f64::ln).unwrap();
        let back = herm_fun(&log_h, f64::exp).unwrap();
        assert!(norm2(&(back - &h)) < 1e-11 * (1.0 + norm2(&h)));
    }

    #[test]
    fn herm_eig_contract() {
        let a = random_matrix(6, 5);
        let h = &a + a.adjoint();
        let e = herm_eig(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(norm2(&(e.reconstruct() - &h)) <= 1e-10 * (1.0 + norm2(&h)));
        assert!(norm2(&(e.vectors.adjoint() * &e.vectors - identity(6))) < 1e-12);
    }

    #[test]
    fn herm_fun_rejects_non_hermitian() {
        let t = random_matrix(3, 1);
        assert!(matches!(
            herm_fun(&t, |x| x),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn polar_cases() {
        let a = random_matrix(4, 9);
        let pd = &a * a.adjoint() + identity(4);
        let (u, abs) = polar(&pd);
        assert!(norm2(&(u - identity(4))) < 1e-10);
        assert!(norm2(&(abs - &pd)) < 1e-10);

        let minus = -identity(3);
        let (u, abs) = polar(&minus);
        assert!(norm2(&(u + identity(3))) < 1e-12);
        assert!(norm2(&(abs - identity(3))) < 1e-12);

        let t = random_matrix(4, 21);
        let (u, abs) = polar(&t);
        assert!(norm2(&(&u * &abs - &t)) < 1e-10 * (1.0 + norm2(&t)));
        assert!(crate::linalg::is_unitary(&u, 1e-12));
    }

    #[test]
    fn polar_singular_completes_unitary() {
        let j = crate::linalg::jordan_block(3, ZERO);
        let (u, abs) = polar(&j);
        assert!(crate::linalg::is_unitary(&u, 1e-12));
        assert!(norm2(&(&u * &abs - &j)) < 1e-12);
    }

    #[test]
    fn log_abs_det_matches_singular_values() {
        let t = random_matrix(5, 2);
        let via_sv: f64 = singular_values(&t).iter().map(|s| s.ln()).sum();
        assert!((log_abs_det(&t) - via_sv).abs() < 1e-10);
        assert!(op_norm(&t) > 0.0);
    }
}
