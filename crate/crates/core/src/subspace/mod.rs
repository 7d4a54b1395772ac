//! Spectral subspaces of a matrix from power limits.
//!
//! `A = lim ((T*)^n T^n)^(1/2n)` and `B = lim (T^n (T*)^n)^(1/2n)` exist for
//! every matrix and have the moduli of the eigenvalues of `T` as spectrum.
//! Their spectral projections give the `T`-invariant subspaces
//! `E(T, r) = 1_[0,r](A)` (eigenvalues in the closed disk of radius `r`) and
//! `F(T, r) = 1_[r,inf)(B)` (eigenvalues outside the open disk). General
//! sets are assembled from these by translation and meets; Borel sets that
//! are only known through their atoms go through the ordered Schur form.

mod checks;
mod descriptor;
mod shift;

pub use checks::{
    check_hyperinvariance, check_perpendicularity, verify_splitting, HyperinvarianceReport,
    PerpendicularityReport, SplittingReport,
};
pub use descriptor::{Ball, Part, Predicate, SetDescriptor};
pub use shift::{weighted_shift_demo, WeightedShiftSeries};

use serde::Serialize;

use crate::brown::{atom_tolerance, brown_atoms, BrownMeasure};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, identity, norm2, proj_meet, reorder_schur, schur, CMatrix, Projection,
    DEFAULT_RANK_TOL,
};
use crate::power::PowerSvd;

/// Eigenvalue moduli closer than this to a radius trip the boundary guard.
pub const BOUNDARY_GUARD: f64 = 1e-6;

/// Default power used for subspace extraction.
pub const DEFAULT_POWER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `((T*)^n T^n)^(1/2n)`.
    Left,
    /// `(T^n (T*)^n)^(1/2n)`.
    Right,
}

/// Power-limit operator `A` (left) or `B` (right).
#[derive(Debug, Clone)]
pub struct HSLimitOperator {
    pub side: Side,
    /// `W diag(eigenvalues) W*`.
    pub matrix: CMatrix,
    /// Limit estimates of the eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues of the finite-`n` root `(...)^(1/2n)` itself, ascending.
    pub raw_eigenvalues: Vec<f64>,
    /// Unitary eigenvector matrix, columns matching `eigenvalues`.
    pub vectors: CMatrix,
    pub n_used: usize,
    pub converged: bool,
    /// Change of the limit estimates over the last doubling.
    pub residual: f64,
}

/// Limit estimate `2 L(n) - L(n/2)` of the growth rates `L(k) = log s(T^k)/k`;
/// the finite-`n` rates carry an `O(1/n)` bias that this removes.
fn extrapolate(fine: &[f64], coarse: Option<&[f64]>) -> Vec<f64> {
    match coarse {
        None => fine.to_vec(),
        Some(c) => fine
            .iter()
            .zip(c)
            .map(|(&f, &c)| {
                if f == f64::NEG_INFINITY || c == f64::NEG_INFINITY {
                    f
                } else {
                    2.0 * f - c
                }
            })
            .collect(),
    }
}

/// Power-limit operator from the log-space SVD of `T^n` (`n` a power of 2).
///
/// The reported eigenvalues are extrapolated from levels `n/2` and `n`;
/// `raw_eigenvalues` holds the plain `2n`-th root. The eigenvectors are
/// those of the level-`n` factor.
pub fn hs_limit(t: &CMatrix, side: Side, n: usize) -> Result<HSLimitOperator> {
    check_matrix(t)?;
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "power n = {n} must be a power of two"
        )));
    }
    let mut acc = PowerSvd::new(t);
    let mut levels: Vec<Vec<f64>> = Vec::new();
    let mut k = 0;
    let mut next = 1;
    while k < n {
        acc.step();
        k += 1;
        if k == next {
            levels.push(acc.state().rates());
            next *= 2;
        }
    }
    let st = acc.state();
    let m = levels.len();
    let est = extrapolate(
        &levels[m - 1],
        if m >= 2 { Some(&levels[m - 2]) } else { None },
    );
    let residual = if m >= 3 {
        let prev = extrapolate(&levels[m - 2], Some(&levels[m - 3]));
        est.iter()
            .zip(&prev)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max)
    } else if m == 2 {
        est.iter()
            .zip(&levels[0])
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let basis = match side {
        Side::Left => &st.v,
        Side::Right => &st.u,
    };
    // log_s is descending; store ascending.
    let dim = t.nrows();
    let mut vectors = CMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut raw_eigenvalues = Vec::with_capacity(dim);
    let raw = &levels[m - 1];
    for j in 0..dim {
        let src = dim - 1 - j;
        vectors.set_column(j, &basis.column(src));
        eigenvalues.push(est[src].exp());
        raw_eigenvalues.push(raw[src].exp());
    }
    let mut scaled = vectors.clone();
    for (j, e) in eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*e);
    }
    let matrix = scaled * vectors.adjoint();
    Ok(HSLimitOperator {
        side,
        matrix: (&matrix + matrix.adjoint()).scale(0.5),
        eigenvalues,
        raw_eigenvalues,
        vectors,
        n_used: n,
        converged: residual < 1e-6,
        residual,
    })
}

/// A spectral subspace with its projection and describing set.
#[derive(Debug, Clone)]
pub struct SpectralSubspace {
    pub proj: Projection,
    /// Orthonormal columns spanning the range.
    pub basis: CMatrix,
    pub descriptor: SetDescriptor,
    /// `|P T P - T P|_2`.
    pub invariance_residual: f64,
}

impl SpectralSubspace {
    fn new(t: &CMatrix, basis: CMatrix, descriptor: SetDescriptor) -> Self {
        let n = t.nrows();
        let proj = Projection::from_basis(&basis, n, DEFAULT_RANK_TOL);
        let invariance_residual = proj.invariance_residual(t);
        Self {
            proj,
            basis,
            descriptor,
            invariance_residual,
        }
    }

    fn from_projection(t: &CMatrix, proj: Projection, descriptor: SetDescriptor) -> Self {
        let basis = proj.basis();
        let invariance_residual = proj.invariance_residual(t);
        Self {
            proj,
            basis,
            descriptor,
            invariance_residual,
        }
    }

    pub fn rank(&self) -> usize {
        self.proj.rank
    }

    pub fn trace(&self) -> f64 {
        self.proj.trace()
    }

    /// JSON-ready view.
    pub fn summary(&self) -> SubspaceSummary {
        let mut basis = Vec::with_capacity(self.basis.len());
        for j in 0..self.basis.ncols() {
            for i in 0..self.basis.nrows() {
                let z = self.basis[(i, j)];
                basis.push([z.re, z.im]);
            }
        }
        SubspaceSummary {
            set_descriptor: self.descriptor.to_string(),
            rank: self.rank(),
            trace: self.trace(),
            basis,
            invariance_residual: self.invariance_residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceSummary {
    pub set_descriptor: String,
    pub rank: usize,
    pub trace: f64,
    /// Column-major `[re, im]` pairs.
    pub basis: Vec<[f64; 2]>,
    pub invariance_residual: f64,
}

/// How eigenvalue moduli that sit on a radius are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Report a boundary collision.
    Strict,
    /// Evaluate at `r + guard` (right continuity of `r -> E(T, r)`).
    RightContinuous,
}

fn guard_radius(moduli: &[f64], r: f64, policy: Boundary) -> Result<f64> {
    if let Some(m) = moduli.iter().find(|m| (*m - r).abs() < BOUNDARY_GUARD) {
        return match policy {
            Boundary::Strict => Err(Error::BoundaryCollision {
                modulus: *m,
                radius: r,
            }),
            Boundary::RightContinuous => Ok(r + BOUNDARY_GUARD),
        };
    }
    Ok(r)
}

fn moduli(t: &CMatrix) -> Result<Vec<f64>> {
    Ok(crate::linalg::eigenvalues(t)?
        .iter()
        .map(|l| l.norm())
        .collect())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius r = {r} must be positive"
        )));
    }
    Ok(())
}

/// `E(T, r)`: the largest invariant subspace on which `T` has spectrum in
/// the closed disk of radius `r`.
pub fn subspace_e(t: &CMatrix, r: f64, n: usize) -> Result<SpectralSubspace> {
    subspace_e_with(t, r, n, Boundary::Strict)
}

pub fn subspace_e_with(
    t: &CMatrix,
    r: f64,
    n: usize,
    policy: Boundary,
) -> Result<SpectralSubspace> {
    check_matrix(t)?;
    check_radius(r)?;
    let mods = moduli(t)?;
    let r_eff = guard_radius(&mods, r, policy)?;
    let expected = mods.iter().filter(|&&m| m <= r_eff).count();
    let desc = SetDescriptor::Disk(Ball {
        center: c64::new(0.0, 0.0),
        radius: r,
    });
    let dim = t.nrows();
    if expected == dim {
        return Ok(SpectralSubspace::new(t, identity(dim), desc));
    }
    if expected == 0 {
        return Ok(SpectralSubspace::new(t, CMatrix::zeros(dim, 0), desc));
    }
    let a = hs_limit(t, Side::Left, n)?;
    let k = a.eigenvalues.iter().filter(|&&e| e <= r_eff).count();
    if k != expected {
        return Err(Error::NoConvergence(format!(
            "power limit at n = {n} puts {k} eigenvalues below r = {r_eff}, expected {expected}"
        )));
    }
    let basis = a.vectors.columns(0, k).into_owned();
    Ok(SpectralSubspace::new(t, basis, desc))
}

/// `F(T, r)`: the largest invariant subspace on which `T` has spectrum in
/// `|z| >= r`.
pub fn subspace_f(t: &CMatrix, r: f64, n: usize) -> Result<SpectralSubspace> {
    subspace_f_with(t, r, n, Boundary::Strict)
}

pub fn subspace_f_with(
    t: &CMatrix,
    r: f64,
    n: usize,
    policy: Boundary,
) -> Result<SpectralSubspace> {
    check_matrix(t)?;
    check_radius(r)?;
    let mods = moduli(t)?;
    let r_eff = guard_radius(&mods, r, policy)?;
    let expected = mods.iter().filter(|&&m| m >= r_eff).count();
    let desc = SetDescriptor::Codisk(Ball {
        center: c64::new(0.0, 0.0),
        radius: r,
    });
    let dim = t.nrows();
    if expected == dim {
        return Ok(SpectralSubspace::new(t, identity(dim), desc));
    }
    if expected == 0 {
        return Ok(SpectralSubspace::new(t, CMatrix::zeros(dim, 0), desc));
    }
    let b = hs_limit(t, Side::Right, n)?;
    let k = b.eigenvalues.iter().filter(|&&e| e >= r_eff).count();
    if k != expected {
        return Err(Error::NoConvergence(format!(
            "power limit at n = {n} puts {k} eigenvalues above r = {r_eff}, expected {expected}"
        )));
    }
    let basis = b.vectors.columns(dim - k, k).into_owned();
    Ok(SpectralSubspace::new(t, basis, desc))
}

/// Ground truth: invariant subspace of the eigenvalues selected by `pred`,
/// from the reordered Schur form.
pub fn oracle_generalized_eigenspace(
    t: &CMatrix,
    pred: impl Fn(c64) -> bool,
) -> Result<Projection> {
    check_matrix(t)?;
    let dim = t.nrows();
    let sch = schur(t)?;
    let ev = sch.eigenvalues();
    let sel: Vec<bool> = ev.iter().map(|&l| pred(l)).collect();
    let mut gap = f64::INFINITY;
    for i in 0..dim {
        for j in 0..dim {
            if sel[i] && !sel[j] {
                gap = gap.min((ev[i] - ev[j]).norm());
            }
        }
    }
    if gap < 1e-10 {
        return Err(Error::DefectiveClustering { gap });
    }
    let (re, m) = reorder_schur(&sch, pred);
    Ok(Projection::from_basis(
        &re.z.columns(0, m).into_owned(),
        dim,
        DEFAULT_RANK_TOL,
    ))
}

fn shifted(t: &CMatrix, c: c64) -> CMatrix {
    t - identity(t.nrows()) * c
}

/// `K_T(S)` for the set `S`: the largest `T`-invariant subspace whose
/// restriction has Brown measure concentrated on `S`.
pub fn spectral_subspace(t: &CMatrix, set: &SetDescriptor, n: usize) -> Result<SpectralSubspace> {
    check_matrix(t)?;
    set.validate()?;
    let dim = t.nrows();
    match set {
        SetDescriptor::All => Ok(SpectralSubspace::new(t, identity(dim), set.clone())),
        SetDescriptor::Empty => Ok(SpectralSubspace::new(
            t,
            CMatrix::zeros(dim, 0),
            set.clone(),
        )),
        SetDescriptor::Disk(b) => {
            let mut s = subspace_e(&shifted(t, b.center), b.radius, n)?;
            s.descriptor = set.clone();
            s.invariance_residual = s.proj.invariance_residual(t);
            Ok(s)
        }
        SetDescriptor::Codisk(b) => {
            let mut s = subspace_f(&shifted(t, b.center), b.radius, n)?;
            s.descriptor = set.clone();
            s.invariance_residual = s.proj.invariance_residual(t);
            Ok(s)
        }
        SetDescriptor::Closed(cover) => {
            let mu = brown_atoms(t)?;
            let needed: Vec<&Ball> = cover
                .iter()
                .filter(|b| {
                    mu.atoms
                        .iter()
                        .any(|a| (a.location() - b.center).norm() < b.radius)
                })
                .collect();
            let mut acc = Projection::identity(dim);
            for b in needed {
                let f = subspace_f(&shifted(t, b.center), b.radius, n)?;
                acc = proj_meet(&acc, &f.proj)?;
            }
            Ok(SpectralSubspace::from_projection(t, acc, set.clone()))
        }
        SetDescriptor::Pred(p) => {
            let proj = oracle_generalized_eigenspace(t, |z| p.holds(z))?;
            let s = SpectralSubspace::from_projection(t, proj, set.clone());
            let limit = 1e-8 * (1.0 + norm2(t));
            if s.invariance_residual > limit {
                return Err(Error::NotInvariant {
                    residual: s.invariance_residual,
                });
            }
            Ok(s)
        }
    }
}

/// `mu_T(S)` as an eigenvalue count.
pub fn atom_count(mu: &BrownMeasure, set: &SetDescriptor) -> usize {
    mu.count(|z| set.contains(z))
}

/// Atoms within the clustering tolerance of the set boundary.
pub fn boundary_atoms(t: &CMatrix, set: &SetDescriptor) -> Result<usize> {
    let mu = brown_atoms(t)?;
    let tol = BOUNDARY_GUARD.max(atom_tolerance(t));
    let near = |z: c64, b: &Ball| ((z - b.center).norm() - b.radius).abs() < tol;
    Ok(mu
        .atoms
        .iter()
        .filter(|a| {
            let z = a.location();
            match set {
                SetDescriptor::Disk(b) | SetDescriptor::Codisk(b) => near(z, b),
                SetDescriptor::Closed(cover) => cover.iter().any(|b| near(z, b)),
                _ => false,
            }
        })
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, diag_real, jordan_block, op_norm, ZERO};
    use crate::testutil::random_matrix;

    fn sorted_moduli(t: &CMatrix) -> Vec<f64> {
        let mut m = moduli(t).unwrap();
        m.sort_by(f64::total_cmp);
        m
    }

    #[test]
    fn normal_limit_is_abs() {
        let t = diag(&[c64::new(0.0, 2.0), c64::new(-0.5, 0.0)]);
        for n in [1, 2, 8] {
            let a = hs_limit(&t, Side::Left, n).unwrap();
            assert!(
                (a.eigenvalues[0] - 0.5).abs() < 1e-14 && (a.eigenvalues[1] - 2.0).abs() < 1e-14
            );
            assert!(norm2(&(&a.matrix - diag_real(&[2.0, 0.5]))) < 1e-14);
        }
    }

    #[test]
    fn nilpotent_limit_is_zero() {
        let a = hs_limit(&jordan_block(2, ZERO), Side::Left, 2).unwrap();
        assert!(a.eigenvalues.iter().all(|&e| e == 0.0));
        assert_eq!(norm2(&a.matrix), 0.0);
    }

    #[test]
    fn limit_matches_moduli() {
        let t = random_matrix(6, 17);
        let a = hs_limit(&t, Side::Left, 256).unwrap();
        let m = sorted_moduli(&t);
        for (e, x) in a.eigenvalues.iter().zip(&m) {
            assert!((e - x).abs() < 1e-3, "{e} vs {x}");
        }
        let b = hs_limit(&t, Side::Right, 256).unwrap();
        for (e, x) in b.eigenvalues.iter().zip(&m) {
            assert!((e - x).abs() < 1e-3);
        }
        assert!(a.eigenvalues.iter().all(|&e| e <= op_norm(&t) + 1e-8));
        assert!(hs_limit(&t, Side::Left, 6).is_err());
    }

    #[test]
    fn e_and_f_of_diagonal() {
        let t = diag_real(&[0.5, 2.0]);
        let e = subspace_e(&t, 1.0, 64).unwrap();
        assert_eq!(e.rank(), 1);
        assert!(norm2(&(&e.proj.matrix - diag_real(&[1.0, 0.0]))) < 1e-12);
        let f = subspace_f(&t, 1.0, 64).unwrap();
        assert!(norm2(&(&f.proj.matrix - diag_real(&[0.0, 1.0]))) < 1e-12);
        assert!(matches!(
            subspace_e(&t, 2.0, 64),
            Err(Error::BoundaryCollision { .. })
        ));
        let relaxed = subspace_e_with(&t, 2.0, 64, Boundary::RightContinuous).unwrap();
        assert_eq!(relaxed.rank(), 2);
    }

    #[test]
    fn jordan_block_e_is_everything() {
        let e = subspace_e(&jordan_block(3, ZERO), 0.3, 64).unwrap();
        assert_eq!(e.rank(), 3);
        let t = diag(&[c64::new(0.5, 0.5), c64::new(-1.0, 1.0)]);
        assert_eq!(subspace_f(&t, 0.1, 16).unwrap().rank(), 2);
    }

    #[test]
    fn oracle_trivial_predicates() {
        let t = random_matrix(4, 2);
        assert_eq!(
            oracle_generalized_eigenspace(&t, |_| false).unwrap().rank,
            0
        );
        let all = oracle_generalized_eigenspace(&t, |_| true).unwrap();
        assert!(norm2(&(all.matrix - identity(4))) < 1e-12);
        let d = diag_real(&[1.0, 3.0]);
        let p = oracle_generalized_eigenspace(&d, |l| l.norm() < 2.0).unwrap();
        assert!(norm2(&(p.matrix - diag_real(&[1.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn closed_set_by_cover() {
        let t = diag(&[c64::new(1.0, 0.0), c64::new(0.0, 2.0), c64::new(-3.0, 0.0)]);
        let set: SetDescriptor = "closed:[0,2,1;-3,0,1]".parse().unwrap();
        let s = spectral_subspace(&t, &set, 64).unwrap();
        assert_eq!(s.rank(), 1);
        assert!((s.proj.matrix[(0, 0)].re - 1.0).abs() < 1e-10);
        assert_eq!(
            spectral_subspace(&t, &SetDescriptor::All, 8)
                .unwrap()
                .rank(),
            3
        );
        assert_eq!(
            spectral_subspace(&t, &SetDescriptor::Empty, 8)
                .unwrap()
                .rank(),
            0
        );
    }
}
