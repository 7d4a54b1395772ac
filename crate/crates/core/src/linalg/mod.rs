//! Dense complex matrix kernel.
//!
//! Matrices are `nalgebra::DMatrix<Complex<f64>>`. Throughout the crate the
//! trace is the normalized one, `tau(T) = Tr(T) / n`, and `norm2` is the
//! matching Hilbert-Schmidt norm `tau(T* T)^(1/2)`. The spectral norm is
//! `op_norm`.

mod decomp;
mod projection;
mod schur;

pub use decomp::{
    herm_eig, herm_fun, inverse, log_abs_det, polar, qr, singular_values, solve, svd, HermEig, Svd,
};
pub use projection::{proj_join, proj_meet, range_projection, Projection, DEFAULT_RANK_TOL};
pub use schur::{eigenvalues, reorder_schur, schur, Schur};

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;

/// Square complex dense matrix.
pub type CMatrix = DMatrix<c64>;

pub const ZERO: c64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: c64 = Complex { re: 1.0, im: 0.0 };
pub const I: c64 = Complex { re: 0.0, im: 1.0 };

/// Rejects non-square matrices and matrices with NaN or infinite entries.
pub fn check_matrix(t: &CMatrix) -> Result<()> {
    if t.nrows() != t.ncols() {
        return Err(Error::NotSquare {
            rows: t.nrows(),
            cols: t.ncols(),
        });
    }
    if t.nrows() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from real and imaginary row-major parts.
pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> CMatrix {
    let n = re.len();
    CMatrix::from_fn(n, re.first().map_or(0, |r| r.len()), |i, j| {
        c64::new(
            re[i][j],
            im.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0),
        )
    })
}

pub fn diag(entries: &[c64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
}

pub fn diag_real(entries: &[f64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(entries[i], 0.0)
        } else {
            ZERO
        }
    })
}

/// Upper Jordan block `J_n(lambda)`.
pub fn jordan_block(n: usize, lambda: c64) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            lambda
        } else if j == i + 1 {
            ONE
        } else {
            ZERO
        }
    })
}

/// `tau(T) = Tr(T) / n`.
pub fn normalized_trace(t: &CMatrix) -> c64 {
    let n = t.nrows().max(1) as f64;
    t.trace() / n
}

/// Normalized Hilbert-Schmidt norm `tau(T* T)^(1/2)`.
pub fn norm2(t: &CMatrix) -> f64 {
    let n = t.nrows().max(1) as f64;
    (t.iter().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt()
}

/// Spectral (operator) norm.
pub fn op_norm(t: &CMatrix) -> f64 {
    if t.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    singular_values(t).first().copied().unwrap_or(0.0)
}

/// `tau(|T|^p)`, the p-th power of the Schatten quasi-norm.
pub fn schatten_pow(t: &CMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Schatten index p = {p} must be positive"
        )));
    }
    let s = singular_values(t);
    let n = t.nrows().max(1) as f64;
    Ok(s.iter().map(|x| x.powf(p)).sum::<f64>() / n)
}

/// Schatten quasi-norm `||T||_p = tau(|T|^p)^(1/p)`.
pub fn schatten_qnorm(t: &CMatrix, p: f64) -> Result<f64> {
    Ok(schatten_pow(t, p)?.powf(1.0 / p))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `T (x) 1_m` as an `nm x nm` matrix.
pub fn kron_identity(t: &CMatrix, m: usize) -> CMatrix {
    let n = t.nrows();
    let mut out = CMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..t.ncols() {
            let v = t[(i, j)];
            if v == ZERO {
                continue;
            }
            for k in 0..m {
                out[(i * m + k, j * m + k)] = v;
            }
        }
    }
    out
}

/// Integer power by repeated squaring.
pub fn matrix_power(t: &CMatrix, mut k: u32) -> CMatrix {
    let mut base = t.clone();
    let mut acc = identity(t.nrows());
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// `||H - H*||_2` relative to `||H||_2`.
pub fn hermitian_residual(h: &CMatrix) -> f64 {
    norm2(&(h - h.adjoint()))
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    norm2(&(u.adjoint() * u - identity(u.nrows()))) <= tol
}

/// Deterministic pairwise sum of `f(lo..hi)`, split in parallel above a cutoff.
pub(crate) fn pairwise_sum<F>(lo: usize, hi: usize, dim: usize, f: &F) -> Result<CMatrix>
where
    F: Fn(usize) -> Result<CMatrix> + Sync,
{
    match hi - lo {
        0 => Ok(CMatrix::zeros(dim, dim)),
        1 => f(lo),
        len => {
            let mid = lo + len / 2;
            let (a, b) = if len > 64 {
                rayon::join(
                    || pairwise_sum(lo, mid, dim, f),
                    || pairwise_sum(mid, hi, dim, f),
                )
            } else {
                (pairwise_sum(lo, mid, dim, f), pairwise_sum(mid, hi, dim, f))
            };
            Ok(a? + b?)
        }
    }
}
