use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{oracle_generalized_eigenspace, subspace_e, subspace_f};
use crate::brown::{cluster, probe_points, UNDERFLOW};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, check_same_dim, eigenvalues, identity, norm2, op_norm, singular_values,
    CMatrix, Projection,
};

fn log_det_normalized(t: &CMatrix) -> f64 {
    if t.nrows() == 0 {
        return 0.0;
    }
    let s = singular_values(t);
    if s.iter().any(|&x| x <= UNDERFLOW) {
        return f64::NEG_INFINITY;
    }
    s.iter().map(|x| x.ln()).sum::<f64>() / s.len() as f64
}

/// Greedy matching distance between two point multisets of equal size.
pub(crate) fn matching_distance(a: &[c64], b: &[c64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub trace: f64,
    /// Max relative error of `Delta(T - l) = Delta(PTP)^tau(P) Delta(P'TP')^(1 - tau(P))`
    /// over `l = 0` and the probe points.
    pub det_rel_error: f64,
    /// Matching distance between the eigenvalues of `T` and those of the two compressions.
    pub atom_error: f64,
    pub invariance_residual: f64,
    #[serde(skip)]
    pub probes: Vec<c64>,
}

/// Checks that `P` splits the determinant and the Brown measure of `T`.
pub fn verify_splitting(t: &CMatrix, p: &Projection) -> Result<SplittingReport> {
    check_matrix(t)?;
    check_same_dim(t, &p.matrix)?;
    let n = t.nrows();
    let invariance_residual = p.invariance_residual(t);
    if invariance_residual > 1e-6 * (1.0 + norm2(t)) {
        return Err(Error::NotInvariant {
            residual: invariance_residual,
        });
    }
    let q = p.basis();
    let qc = p.complement().basis();
    let k = q.ncols();
    let w1 = k as f64 / n as f64;
    let probes = probe_points(t);
    let mut det_rel_error: f64 = 0.0;
    for &l in std::iter::once(&c64::new(0.0, 0.0)).chain(probes.iter()) {
        let s = t - identity(n) * l;
        let lhs = log_det_normalized(&s);
        let d11 = log_det_normalized(&(q.adjoint() * &s * &q));
        let d22 = log_det_normalized(&(qc.adjoint() * &s * &qc));
        let mut rhs = 0.0;
        if k > 0 {
            rhs += w1 * d11;
        }
        if k < n {
            rhs += (1.0 - w1) * d22;
        }
        let err = if lhs == f64::NEG_INFINITY && rhs == f64::NEG_INFINITY {
            0.0
        } else {
            ((lhs - rhs).exp() - 1.0).abs()
        };
        det_rel_error = det_rel_error.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    let full = eigenvalues(t)?;
    let mut parts = Vec::with_capacity(n);
    if k > 0 {
        parts.extend(eigenvalues(&(q.adjoint() * t * &q))?);
    }
    if k < n {
        parts.extend(eigenvalues(&(qc.adjoint() * t * &qc))?);
    }
    Ok(SplittingReport {
        trace: w1,
        det_rel_error,
        atom_error: matching_distance(&full, &parts),
        invariance_residual,
        probes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerpendicularityReport {
    pub r: f64,
    pub s: f64,
    /// `|P_E(T, r) P_F(T*, s)|_2`.
    pub norm: f64,
}

/// `E(T, r)` is orthogonal to `F(T*, s)` whenever `s > r`.
pub fn check_perpendicularity(
    t: &CMatrix,
    r: f64,
    s: f64,
    n: usize,
) -> Result<PerpendicularityReport> {
    if !(s > r) {
        return Err(Error::InvalidParameter(format!(
            "need s > r (r = {r}, s = {s})"
        )));
    }
    let e = subspace_e(t, r, n)?;
    let f = subspace_f(&t.adjoint(), s, n)?;
    Ok(PerpendicularityReport {
        r,
        s,
        norm: norm2(&(&e.proj.matrix * &f.proj.matrix)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperinvarianceMode {
    /// Random elements of the commutant were sampled.
    Commutant,
    /// Degenerate spectrum: compared against the generalized-eigenspace oracle.
    OracleOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperinvarianceReport {
    pub mode: HyperinvarianceMode,
    pub samples: usize,
    /// `max |P' S P|_2` over samples with `|S|_2 = 1`, or the oracle distance.
    pub max_residual: f64,
}

fn random_c64(rng: &mut ChaCha8Rng) -> c64 {
    c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Polynomials `sum_k c_k X^k` of degree `< n` with random coefficients.
fn random_polynomial(x: &CMatrix, rng: &mut ChaCha8Rng) -> CMatrix {
    let n = x.nrows();
    let scale = op_norm(x).max(f64::MIN_POSITIVE);
    let xs = x.unscale(scale);
    let mut pow = identity(n);
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..n {
        acc += &pow * random_c64(rng);
        pow = &pow * &xs;
    }
    acc
}

/// Samples `S` from the commutant of `T` and reports `max |(1 - P) S P|_2`.
pub fn check_hyperinvariance(
    t: &CMatrix,
    p: &Projection,
    trials: usize,
    seed: u64,
) -> Result<HyperinvarianceReport> {
    check_matrix(t)?;
    check_same_dim(t, &p.matrix)?;
    let n = t.nrows();
    let ev = eigenvalues(t)?;
    let scale = 1.0 + op_norm(t);
    let distinct = cluster(&ev, 1e-6 * scale).len() == n;
    let pc = p.complement().matrix;
    if !distinct {
        let q = p.basis();
        let inner = if q.ncols() > 0 {
            eigenvalues(&(q.adjoint() * t * &q))?
        } else {
            Vec::new()
        };
        let tol = 1e-6 * scale;
        let oracle =
            oracle_generalized_eigenspace(t, |z| inner.iter().any(|w| (z - w).norm() < tol))?;
        return Ok(HyperinvarianceReport {
            mode: HyperinvarianceMode::OracleOnly,
            samples: 0,
            max_residual: norm2(&(&oracle.matrix - &p.matrix)),
        });
    }
    let normal = norm2(&crate::flow::self_commutator(t)) < 1e-10 * scale * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![t.clone(), identity(n)];
    let ts = t.adjoint();
    for i in 0..trials {
        let s = if normal && i % 2 == 1 {
            random_polynomial(&ts, &mut rng)
        } else {
            random_polynomial(t, &mut rng)
        };
        samples.push(s);
    }
    let max_residual = samples
        .iter()
        .map(|s| {
            let nrm = norm2(s);
            if nrm == 0.0 {
                0.0
            } else {
                norm2(&(&pc * s * &p.matrix)) / nrm
            }
        })
        .fold(0.0, f64::max);
    Ok(HyperinvarianceReport {
        mode: HyperinvarianceMode::Commutant,
        samples: samples.len(),
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, Projection};
    use crate::subspace::{spectral_subspace, SetDescriptor};
    use crate::testutil::random_matrix;

    #[test]
    fn splitting_block_triangular() {
        let mut t = random_matrix(5, 4);
        for i in 2..5 {
            for j in 0..2 {
                t[(i, j)] = c64::new(0.0, 0.0);
            }
        }
        let mut b = CMatrix::zeros(5, 2);
        b[(0, 0)] = c64::new(1.0, 0.0);
        b[(1, 1)] = c64::new(1.0, 0.0);
        let p = Projection::from_basis(&b, 5, 1e-8);
        let r = verify_splitting(&t, &p).unwrap();
        assert!(r.det_rel_error < 1e-10 && r.atom_error < 1e-10);
        let r = verify_splitting(&t, &Projection::identity(5)).unwrap();
        assert!(r.det_rel_error < 1e-14);
    }

    #[test]
    fn splitting_rejects_non_invariant() {
        let t = random_matrix(4, 1);
        let mut b = CMatrix::zeros(4, 1);
        b[(0, 0)] = c64::new(1.0, 0.0);
        let p = Projection::from_basis(&b, 4, 1e-8);
        assert!(matches!(
            verify_splitting(&t, &p),
            Err(Error::NotInvariant { .. })
        ));
    }

    #[test]
    fn perpendicular_diagonal() {
        let t = diag_real(&[0.5, 2.0]);
        let r = check_perpendicularity(&t, 1.0, 1.5, 32).unwrap();
        assert!(r.norm < 1e-15);
        assert!(check_perpendicularity(&t, 1.5, 1.0, 32).is_err());
        assert!(check_perpendicularity(&t, 1.0, 1.0, 32).is_err());
    }

    #[test]
    fn hyperinvariance_of_half_plane() {
        let t = random_matrix(5, 12);
        let set: SetDescriptor = "pred:halfplane:re<0".parse().unwrap();
        let s = spectral_subspace(&t, &set, 64).unwrap();
        let rep = check_hyperinvariance(&t, &s.proj, 20, 3).unwrap();
        assert_eq!(rep.mode, HyperinvarianceMode::Commutant);
        assert!(rep.max_residual < 1e-7, "{}", rep.max_residual);
    }

    #[test]
    fn hyperinvariance_degenerate_spectrum() {
        let t = diag_real(&[1.0, 1.0, 2.0]);
        let mut b = CMatrix::zeros(3, 2);
        b[(0, 0)] = c64::new(1.0, 0.0);
        b[(1, 1)] = c64::new(1.0, 0.0);
        let p = Projection::from_basis(&b, 3, 1e-8);
        let rep = check_hyperinvariance(&t, &p, 5, 0).unwrap();
        assert_eq!(rep.mode, HyperinvarianceMode::OracleOnly);
        assert!(rep.max_residual < 1e-12);
    }
}
