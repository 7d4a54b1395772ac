//! Contour-integral spectral projections on circles.
//!
//! With `T' = (T - c) / rho` and equidistant nodes `w_k = exp(2 pi i k / n)`
//! the trapezoidal rule for `(1 / 2 pi i) ∮ (l - T)^-1 dl` is
//!
//! ```text
//! E_n = (1/n) sum_k (w_k - T')^-1 w_k
//! ```
//!
//! which, as a rational function of `T'`, equals `(1 - T'^n)^-1`. The node
//! sums therefore satisfy a family of exact algebraic identities at every
//! finite `n`; those are exposed as residual checks alongside the projection
//! itself.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, eigenvalues, identity, inverse, matrix_power, norm2, pairwise_sum, svd,
    CMatrix, Projection,
};

/// Node count beyond which doubling gives up.
pub const MAX_NODES: usize = 1 << 20;
/// Eigenvalues closer than this multiple of the radius to the contour are rejected.
pub const COLLISION_GUARD: f64 = 1e-6;
/// Guard used by the raw node sums.
pub const NODE_SUM_GUARD: f64 = 1e-8;

/// Circle `|l - center| = radius` sampled at `nodes` equidistant points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    pub center: c64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: c64, radius: f64, nodes: usize) -> Result<Self> {
        let c = Self {
            center,
            radius,
            nodes,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn unit(nodes: usize) -> Self {
        Self {
            center: c64::new(0.0, 0.0),
            radius: 1.0,
            nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contour radius {} must be positive",
                self.radius
            )));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "contour center must be finite".into(),
            ));
        }
        if self.nodes < 4 || !self.nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "node count {} must be even and at least 4",
                self.nodes
            )));
        }
        Ok(())
    }

    /// `(T - c) / rho`.
    pub fn normalize(&self, t: &CMatrix) -> CMatrix {
        (t - identity(t.nrows()) * self.center).unscale(self.radius)
    }

    /// Distance of the nearest eigenvalue to the circle, with that eigenvalue.
    pub fn clearance(&self, t: &CMatrix) -> Result<(f64, c64)> {
        let ev = eigenvalues(t)?;
        Ok(ev
            .into_iter()
            .map(|l| (((l - self.center).norm() - self.radius).abs(), l))
            .fold((f64::INFINITY, c64::new(0.0, 0.0)), |a, b| {
                if b.0 < a.0 {
                    b
                } else {
                    a
                }
            }))
    }

    fn guard(&self, t: &CMatrix, factor: f64) -> Result<()> {
        self.validate()?;
        let (d, l) = self.clearance(t)?;
        if d < factor * self.radius {
            return Err(Error::ContourCollision {
                eigenvalue: format!("{l}"),
                distance: d,
            });
        }
        Ok(())
    }
}

fn node(n: usize, k: usize, half_shift: bool) -> c64 {
    let k = if half_shift { k as f64 - 0.5 } else { k as f64 };
    c64::from_polar(1.0, 2.0 * PI * k / n as f64)
}

/// `(1/n) sum_k (w_k - tp)^-1 w_k^power` over `k = 1..=n`.
fn weighted_node_sum(tp: &CMatrix, n: usize, half_shift: bool, power: i32) -> Result<CMatrix> {
    let dim = tp.nrows();
    let term = |k: usize| -> Result<CMatrix> {
        let w = node(n, k + 1, half_shift);
        let r = inverse(&(identity(dim) * w - tp))?;
        Ok(r * w.powi(power))
    };
    Ok(pairwise_sum(0, n, dim, &term)?.unscale(n as f64))
}

/// `E_n` on the aligned nodes `2 pi k / n`.
pub fn node_sum_e(t: &CMatrix, c: &ContourSpec) -> Result<CMatrix> {
    check_matrix(t)?;
    c.guard(t, NODE_SUM_GUARD)?;
    weighted_node_sum(&c.normalize(t), c.nodes, false, 1)
}

/// `F_n` on the half-shifted nodes `2 pi (k - 1/2) / n`.
pub fn node_sum_f(t: &CMatrix, c: &ContourSpec) -> Result<CMatrix> {
    check_matrix(t)?;
    c.guard(t, NODE_SUM_GUARD)?;
    weighted_node_sum(&c.normalize(t), c.nodes, true, 1)
}

/// `|E_n F_n - (E_n + F_n) / 2|_2`, zero in exact arithmetic for every `n`.
pub fn midpoint_identity(t: &CMatrix, c: &ContourSpec) -> Result<f64> {
    let e = node_sum_e(t, c)?;
    let f = node_sum_f(t, c)?;
    Ok(norm2(&(&e * &f - (&e + &f).scale(0.5))))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub m: usize,
    pub n: usize,
    /// `|G_n - T'^m E_n|_2 / (1 + |T'^m E_n|_2)`.
    pub g_residual: f64,
    /// `|H_n - T'^-m (1 - E_n)|_2 / (1 + |T'^-m (1 - E_n)|_2)`; absent for `m = 0`,
    /// where the identity does not hold.
    pub h_residual: Option<f64>,
}

/// Checks `G_n = T'^m E_n` and `H_n = T'^-m (1 - E_n)` for `n > m`, where
/// `T'` is `T` in the contour's normalized coordinates.
pub fn moment_identity(t: &CMatrix, c: &ContourSpec, m: usize, n: usize) -> Result<MomentReport> {
    check_matrix(t)?;
    if n <= m {
        return Err(Error::InvalidParameter(format!(
            "need n > m (n = {n}, m = {m})"
        )));
    }
    let spec = ContourSpec { nodes: n, ..*c };
    // Node counts here need not be even; only the collision guard applies.
    if !(spec.radius.is_finite() && spec.radius > 0.0) || n == 0 {
        return Err(Error::InvalidParameter("bad contour".into()));
    }
    let (d, l) = spec.clearance(t)?;
    if d < NODE_SUM_GUARD * spec.radius {
        return Err(Error::ContourCollision {
            eigenvalue: format!("{l}"),
            distance: d,
        });
    }
    let tp = spec.normalize(t);
    let dim = tp.nrows();
    let e = weighted_node_sum(&tp, n, false, 1)?;
    let g = weighted_node_sum(&tp, n, false, m as i32 + 1)?;
    let tm_e = matrix_power(&tp, m as u32) * &e;
    let g_residual = norm2(&(&g - &tm_e)) / (1.0 + norm2(&tm_e));
    let h_residual = if m == 0 {
        None
    } else {
        let tinv = inverse(&tp)?;
        let h = -weighted_node_sum(&tp, n, false, 1 - m as i32)?;
        let rhs = matrix_power(&tinv, m as u32) * (identity(dim) - &e);
        Some(norm2(&(&h - &rhs)) / (1.0 + norm2(&rhs)))
    };
    Ok(MomentReport {
        m,
        n,
        g_residual,
        h_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialFractionReport {
    pub n: usize,
    pub m: usize,
    /// Per-sample relative residuals of `1/(z^n - 1)`, `z^m/(z^n - 1)` and
    /// (for `m >= 1`) `z^(n-m)/(z^n - 1)` against their node expansions.
    pub residuals: Vec<[f64; 3]>,
    pub max_residual: f64,
}

fn rel(lhs: c64, rhs: c64) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(1.0)
}

/// Scalar partial-fraction expansions over the `n`-th roots of unity.
pub fn partial_fraction_check(
    n: usize,
    m: usize,
    samples: &[c64],
) -> Result<PartialFractionReport> {
    if n == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= m < n (n = {n}, m = {m})"
        )));
    }
    let roots: Vec<c64> = (1..=n).map(|k| node(n, k, false)).collect();
    let mut residuals = Vec::with_capacity(samples.len());
    for &z in samples {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NearPole(format!("{z}")));
        }
        // Poles of 1/(z^n - 1) and 1/(z^n + 1) are the 2n-th roots of unity.
        let d = (0..2 * n)
            .map(|k| (z - c64::from_polar(1.0, PI * k as f64 / n as f64)).norm())
            .fold(f64::INFINITY, f64::min);
        if d < 1e-6 {
            return Err(Error::NearPole(format!("{z}")));
        }
        let q = z.powu(n as u32) - 1.0;
        let mut s0 = c64::new(0.0, 0.0);
        let mut s1 = c64::new(0.0, 0.0);
        let mut s2 = c64::new(0.0, 0.0);
        for &w in &roots {
            let r = (z - w).inv();
            s0 += r * w;
            s1 += r * w.powu(m as u32 + 1);
            s2 += r * w.powi(1 - m as i32);
        }
        let nf = n as f64;
        let r0 = rel(q.inv(), s0 / nf);
        let r1 = rel(z.powu(m as u32) / q, s1 / nf);
        let r2 = if m == 0 {
            0.0
        } else {
            rel(z.powu((n - m) as u32) / q, s2 / nf)
        };
        residuals.push([r0, r1, r2]);
    }
    let max_residual = residuals.iter().flatten().copied().fold(0.0, f64::max);
    Ok(PartialFractionReport {
        n,
        m,
        residuals,
        max_residual,
    })
}

#[derive(Debug, Clone)]
pub struct RieszResult {
    pub e: CMatrix,
    /// Orthogonal projection onto the range of `e`.
    pub proj: Projection,
    /// `|E^2 - E|_2` at the final node count.
    pub idempotency_residual: f64,
    pub nodes_used: usize,
    /// `|E T - T E|_2`.
    pub commutation_residual: f64,
    /// `|P T P - T P|_2`.
    pub invariance_residual: f64,
    /// `(nodes, idempotency residual)` after each doubling.
    pub history: Vec<(usize, f64)>,
    /// Whether the residual fell at every doubling past `4 * dim` nodes
    /// (ignoring steps already at roundoff level).
    pub monotone_decay: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszSummary {
    pub nodes_used: usize,
    pub idempotency_residual: f64,
    pub rank: usize,
    pub trace: f64,
}

impl RieszResult {
    pub fn summary(&self) -> RieszSummary {
        RieszSummary {
            nodes_used: self.nodes_used,
            idempotency_residual: self.idempotency_residual,
            rank: self.proj.rank,
            trace: self.proj.trace(),
        }
    }
}

/// Riesz projection for the disk bounded by `c`, refined by node doubling
/// (`E_2n = (E_n + F_n) / 2`) until `|E^2 - E|_2 < tol`.
pub fn riesz_projection(t: &CMatrix, c: &ContourSpec, tol: f64) -> Result<RieszResult> {
    check_matrix(t)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    c.guard(t, COLLISION_GUARD)?;
    let dim = t.nrows();
    let tp = c.normalize(t);
    let mut n = c.nodes;
    let mut e = weighted_node_sum(&tp, n, false, 1)?;
    let mut history = Vec::new();
    let mut monotone_decay = true;
    let residual = loop {
        let r = norm2(&(&e * &e - &e));
        if let Some(&(prev_n, prev)) = history.last() {
            let floor = 1e3 * f64::EPSILON * (1.0 + norm2(&e).powi(2));
            if prev_n >= 4 * dim && prev > floor && r >= prev {
                monotone_decay = false;
            }
        }
        history.push((n, r));
        if r < tol {
            break r;
        }
        if 2 * n > MAX_NODES {
            return Err(Error::NoConvergence(format!(
                "idempotency residual {r:e} above {tol:e} at {n} nodes"
            )));
        }
        let f = weighted_node_sum(&tp, n, true, 1)?;
        e = (&e + &f).scale(0.5);
        n *= 2;
    };

    // Singular values of an idempotent are 0 or >= 1.
    let dec = svd(&e);
    let rank = dec.s.iter().take_while(|&&s| s > 0.5).count();
    let proj = Projection::from_basis(&dec.u.columns(0, rank).into_owned(), dim, 0.5);

    let scale = 1.0 + norm2(t);
    let invariance_residual = proj.invariance_residual(t);
    if invariance_residual > 1e-8 * scale {
        return Err(Error::NotInvariant {
            residual: invariance_residual,
        });
    }
    let inside = |l: c64| (l - c.center).norm() < c.radius;
    let q = proj.basis();
    if rank > 0
        && !eigenvalues(&(q.adjoint() * t * &q))?
            .into_iter()
            .all(inside)
    {
        return Err(Error::Numerical(
            "compression has eigenvalues outside the contour".into(),
        ));
    }
    if rank < dim {
        let qc = proj.complement().basis();
        if eigenvalues(&(qc.adjoint() * t * &qc))?
            .into_iter()
            .any(inside)
        {
            return Err(Error::Numerical(
                "complementary compression has eigenvalues inside the contour".into(),
            ));
        }
    }
    Ok(RieszResult {
        commutation_residual: norm2(&(&e * t - t * &e)),
        e,
        proj,
        idempotency_residual: residual,
        nodes_used: n,
        invariance_residual,
        history,
        monotone_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, jordan_block, op_norm};
    use crate::subspace::{spectral_subspace, SetDescriptor};
    use crate::testutil::random_matrix;

    /// Closed form `E_n = (1 - T'^n)^-1`.
    fn closed_form_e(tp: &CMatrix, n: usize) -> CMatrix {
        inverse(&(identity(tp.nrows()) - matrix_power(tp, n as u32))).unwrap()
    }

    #[test]
    fn zero_matrix_gives_identity() {
        for n in [4, 6, 16] {
            let e = node_sum_e(&CMatrix::zeros(3, 3), &ContourSpec::unit(n)).unwrap();
            assert!(norm2(&(e - identity(3))) < 1e-15);
        }
        assert!(midpoint_identity(&CMatrix::zeros(3, 3), &ContourSpec::unit(4)).unwrap() < 1e-14);
    }

    #[test]
    fn node_sum_matches_closed_form() {
        let t = random_matrix(5, 31).scale(1.3);
        let c = ContourSpec::new(c64::new(0.1, -0.2), 0.9, 16).unwrap();
        let e = node_sum_e(&t, &c).unwrap();
        let oracle = closed_form_e(&c.normalize(&t), 16);
        assert!(norm2(&(e - &oracle)) < 1e-11 * (1.0 + norm2(&oracle)));
    }

    #[test]
    fn diagonal_limits() {
        let t = diag_real(&[0.5, 2.0]);
        let e = node_sum_e(&t, &ContourSpec::unit(64)).unwrap();
        assert!(norm2(&(e - diag_real(&[1.0, 0.0]))) < 1e-15);
        let e = node_sum_e(&diag_real(&[2.0]), &ContourSpec::unit(64)).unwrap();
        assert!(e[(0, 0)].norm() < 1e-15);
        assert!(midpoint_identity(&t, &ContourSpec::unit(8)).unwrap() < 1e-12);
    }

    #[test]
    fn midpoint_random_split() {
        let mut t = random_matrix(5, 77);
        for i in 0..5 {
            t[(i, i)] += c64::new(if i < 2 { 0.0 } else { 2.5 }, 0.0);
        }
        let c = ContourSpec::unit(16);
        let e = node_sum_e(&t, &c).unwrap();
        assert!(midpoint_identity(&t, &c).unwrap() < 1e-10 * (1.0 + norm2(&e).powi(2)));
    }

    #[test]
    fn moments() {
        let c = ContourSpec::unit(4);
        let r = moment_identity(&diag_real(&[0.5, 2.0]), &c, 2, 8).unwrap();
        assert!(r.g_residual < 1e-11 && r.h_residual.unwrap() < 1e-11);
        let r0 = moment_identity(&diag_real(&[0.5, 2.0]), &c, 0, 8).unwrap();
        assert!(r0.g_residual == 0.0 && r0.h_residual.is_none());
        let mut t = random_matrix(4, 9);
        for i in 0..4 {
            t[(i, i)] += c64::new(0.4 * i as f64 + 0.3, 0.0);
        }
        let r = moment_identity(&t, &c, 3, 16).unwrap();
        assert!(r.g_residual < 1e-9 && r.h_residual.unwrap() < 1e-9, "{r:?}");
        assert!(moment_identity(&t, &c, 3, 3).is_err());
        let sing = diag_real(&[0.0, 2.0]);
        assert!(matches!(
            moment_identity(&sing, &c, 1, 8),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn partial_fractions() {
        // n = 2, z = 0: both sides are -1.
        let r = partial_fraction_check(2, 0, &[c64::new(0.0, 0.0)]).unwrap();
        assert!(r.max_residual < 1e-15);
        let hand = (1.0 / (0.0 - 1.0) * 1.0 + -(1.0 / (0.0 + 1.0))) / 2.0;
        assert_eq!(hand, -1.0);
        let r = partial_fraction_check(4, 1, &[c64::new(2.0, 0.0)]).unwrap();
        assert!(r.max_residual < 1e-13);
        let r = partial_fraction_check(
            8,
            3,
            &[c64::new(-3.7, 0.0), c64::new(0.2, 0.0), c64::new(5.0, 0.0)],
        )
        .unwrap();
        assert!(r.max_residual < 1e-13);
        assert!(matches!(
            partial_fraction_check(4, 1, &[c64::new(0.0, 1.0)]),
            Err(Error::NearPole(_))
        ));
        assert!(partial_fraction_check(4, 4, &[c64::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn projection_simple_cases() {
        let r = riesz_projection(&diag_real(&[0.5, 2.0]), &ContourSpec::unit(8), 1e-12).unwrap();
        assert!(norm2(&(&r.proj.matrix - diag_real(&[1.0, 0.0]))) < 1e-12);
        let t = jordan_block(2, c64::new(0.5, 0.0));
        let r = riesz_projection(&t, &ContourSpec::unit(8), 1e-12).unwrap();
        assert_eq!(r.proj.rank, 2);
        assert!(r.commutation_residual < 1e-12);
    }

    #[test]
    fn projection_matches_disk_subspace() {
        let t = random_matrix(6, 5);
        let mut moduli: Vec<f64> = eigenvalues(&t).unwrap().iter().map(|l| l.norm()).collect();
        moduli.sort_by(f64::total_cmp);
        let r = 0.5 * (moduli[1] + moduli[2]);
        let c = ContourSpec::new(c64::new(0.0, 0.0), r, 16).unwrap();
        let res = riesz_projection(&t, &c, 1e-12).unwrap();
        assert_eq!(res.proj.rank, 2);
        assert!(res.monotone_decay);
        let set = SetDescriptor::Disk(crate::subspace::Ball {
            center: c.center,
            radius: r,
        });
        let s = spectral_subspace(&t, &set, 1024).unwrap();
        assert!(op_norm(&(&res.proj.matrix - &s.proj.matrix)) < 1e-6);
        assert!(res.commutation_residual < 1e-8 * (1.0 + norm2(&t)));
    }

    #[test]
    fn collisions_and_bad_contours() {
        let t = diag_real(&[1.0, 0.2]);
        assert!(matches!(
            riesz_projection(&t, &ContourSpec::unit(8), 1e-10),
            Err(Error::ContourCollision { .. })
        ));
        assert!(ContourSpec::new(c64::new(0.0, 0.0), 1.0, 5).is_err());
        assert!(ContourSpec::new(c64::new(0.0, 0.0), 0.0, 8).is_err());
        let near = diag_real(&[1.0 - 1e-5]);
        assert!(matches!(
            riesz_projection(&near, &ContourSpec::unit(4), 1e-14),
            Err(Error::NoConvergence(_))
        ));
    }
}
