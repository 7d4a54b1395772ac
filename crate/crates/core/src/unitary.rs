//! Block unitaries in `M_2(M_n)`: the graph unitary `u(T)`, its Lipschitz
//! estimates, and the constructive factorization of unitaries near `1` into
//! a block-diagonal part and two rotations.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, check_same_dim, herm_eig, herm_fun, identity, norm2, op_norm, polar, CMatrix,
};

/// Unitarity tolerance used when blocks are produced internally.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on the structural form of `v` handed to the later lemmas.
pub const FORM_TOL: f64 = 1e-9;
/// Absolute slack on the proven norm bounds.
pub const BOUND_SLACK: f64 = 1e-10;

/// `2 x 2` block matrix with square blocks of equal size, unitary within `tol`.
#[derive(Debug, Clone)]
pub struct BlockUnitary2 {
    pub u11: CMatrix,
    pub u12: CMatrix,
    pub u21: CMatrix,
    pub u22: CMatrix,
    pub tol: f64,
}

impl BlockUnitary2 {
    pub fn new(u11: CMatrix, u12: CMatrix, u21: CMatrix, u22: CMatrix, tol: f64) -> Result<Self> {
        for b in [&u11, &u12, &u21, &u22] {
            check_matrix(b)?;
            check_same_dim(&u11, b)?;
        }
        let u = Self {
            u11,
            u12,
            u21,
            u22,
            tol,
        };
        let res = u.unitarity_residual();
        if res > tol {
            return Err(Error::Malformed(format!(
                "not unitary: |u*u - 1| = {res:e}"
            )));
        }
        Ok(u)
    }

    /// Splits a `2n x 2n` matrix into blocks.
    pub fn from_matrix(m: &CMatrix, tol: f64) -> Result<Self> {
        check_matrix(m)?;
        if !m.nrows().is_multiple_of(2) {
            return Err(Error::Dimension(format!("odd size {}", m.nrows())));
        }
        let n = m.nrows() / 2;
        let b = |i: usize, j: usize| m.view((i * n, j * n), (n, n)).into_owned();
        Self::new(b(0, 0), b(0, 1), b(1, 0), b(1, 1), tol)
    }

    pub fn diag(a: CMatrix, d: CMatrix) -> Result<Self> {
        let n = a.nrows();
        Self::new(
            a,
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            d,
            UNITARY_TOL,
        )
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u11: identity(n),
            u12: CMatrix::zeros(n, n),
            u21: CMatrix::zeros(n, n),
            u22: identity(n),
            tol: UNITARY_TOL,
        }
    }

    pub fn block_dim(&self) -> usize {
        self.u11.nrows()
    }

    pub fn assemble(&self) -> CMatrix {
        assemble(&self.u11, &self.u12, &self.u21, &self.u22)
    }

    /// `|u* u - 1|_2` on the assembled matrix.
    pub fn unitarity_residual(&self) -> f64 {
        let u = self.assemble();
        norm2(&(u.adjoint() * &u - identity(u.nrows())))
    }

    /// Block product `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_same_dim(&self.u11, &other.u11)?;
        Self::from_matrix(
            &(self.assemble() * other.assemble()),
            self.tol.max(other.tol),
        )
    }

    /// `|u - 1|` in operator norm.
    pub fn dist_to_identity(&self) -> f64 {
        let u = self.assemble();
        op_norm(&(&u - identity(u.nrows())))
    }
}

fn assemble(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

fn block_diag(a: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assemble(a, &CMatrix::zeros(n, n), &CMatrix::zeros(n, n), d)
}

/// `(1 + X* X)^(-1/2)`.
fn inv_sqrt_gram(x: &CMatrix) -> Result<CMatrix> {
    let n = x.nrows();
    herm_fun(&(identity(n) + x.adjoint() * x), |s| 1.0 / s.sqrt())
}

/// `(1 - X)^(1/2)` for Hermitian `0 <= X <= 1`, clamping roundoff below zero.
fn sqrt_one_minus(x: &CMatrix) -> Result<CMatrix> {
    herm_fun(&(identity(x.nrows()) - x), |s| s.max(0.0).sqrt())
}

/// Inverse square root of a positive definite `h` from the 64-point (or
/// `nodes`-point) midpoint rule for `x^(-1/2) = (2/pi) int_0^(pi/2) (x cos^2 + sin^2)^-1`.
pub fn inv_sqrt_quadrature(h: &CMatrix, nodes: usize) -> Result<CMatrix> {
    let eig = herm_eig(h)?;
    if eig.values.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter(
            "matrix is not positive definite".into(),
        ));
    }
    let n = h.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for k in 0..nodes {
        let th = (k as f64 + 0.5) * PI / (2 * nodes) as f64;
        let (s, c) = th.sin_cos();
        acc += crate::linalg::inverse(&(h.scale(c * c) + identity(n).scale(s * s)))?;
    }
    Ok(acc.unscale(nodes as f64))
}

/// `e^(i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = herm_eig(h)?;
    let mut scaled = eig.vectors.clone();
    for (j, &l) in eig.values.iter().enumerate() {
        let z = c64::from_polar(1.0, t * l);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= z);
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// `u(T) = [[(1+T*T)^(-1/2) T*, -(1+T*T)^(-1/2)], [(1+TT*)^(-1/2), (1+TT*)^(-1/2) T]]`.
pub fn graph_unitary(t: &CMatrix) -> Result<BlockUnitary2> {
    check_matrix(t)?;
    let a = inv_sqrt_gram(t)?;
    let b = inv_sqrt_gram(&t.adjoint())?;
    BlockUnitary2::new(&a * t.adjoint(), -&a, b.clone(), &b * t, UNITARY_TOL)
}

/// Maximum deviation between the spectral and quadrature inverse square roots
/// used by `graph_unitary`.
pub fn graph_unitary_quadrature_check(t: &CMatrix, nodes: usize) -> Result<f64> {
    let n = t.nrows();
    let mut worst: f64 = 0.0;
    for g in [t.adjoint() * t, t * t.adjoint()] {
        let h = identity(n) + g;
        let exact = herm_fun(&h, |s| 1.0 / s.sqrt())?;
        worst = worst.max(op_norm(&(exact - inv_sqrt_quadrature(&h, nodes)?)));
    }
    Ok(worst)
}

/// With `(v; w) = u(T) (x; y)`, returns `|y - (1+T*T)^(-1/2)(T* w - v)|_2`.
pub fn graph_identity_residual(t: &CMatrix, x: &CMatrix, y: &CMatrix) -> Result<f64> {
    let u = graph_unitary(t)?;
    let v = &u.u11 * x + &u.u12 * y;
    let w = &u.u21 * x + &u.u22 * y;
    let a = inv_sqrt_gram(t)?;
    Ok(norm2(&(y - a * (t.adjoint() * w - v))))
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// `|S - T|`.
    pub distance: f64,
    /// `|(1+S*S)^(-1/2) S* - (1+T*T)^(-1/2) T*|`, bound `5/4 |S - T|`.
    pub adjoint_piece: f64,
    /// `|(1+S*S)^(-1/2) - (1+T*T)^(-1/2)|`, bound `2/pi |S - T|`.
    pub inverse_piece: f64,
    /// `|u(S) - u(T)|`, bound `2 |S - T|`.
    pub graph: f64,
    pub pass: bool,
}

impl LipschitzReport {
    fn ratio(x: f64, d: f64) -> f64 {
        if d == 0.0 {
            0.0
        } else {
            x / d
        }
    }

    pub fn adjoint_ratio(&self) -> f64 {
        Self::ratio(self.adjoint_piece, self.distance)
    }

    pub fn inverse_ratio(&self) -> f64 {
        Self::ratio(self.inverse_piece, self.distance)
    }

    pub fn graph_ratio(&self) -> f64 {
        Self::ratio(self.graph, self.distance)
    }
}

/// Operator-norm Lipschitz estimates for the pieces of `u(T)`.
pub fn resolvent_piece_lipschitz(s: &CMatrix, t: &CMatrix) -> Result<LipschitzReport> {
    check_matrix(s)?;
    check_matrix(t)?;
    check_same_dim(s, t)?;
    let (as_, at) = (inv_sqrt_gram(s)?, inv_sqrt_gram(t)?);
    let distance = op_norm(&(s - t));
    let adjoint_piece = op_norm(&(&as_ * s.adjoint() - &at * t.adjoint()));
    let inverse_piece = op_norm(&(&as_ - &at));
    let graph = op_norm(&(graph_unitary(s)?.assemble() - graph_unitary(t)?.assemble()));
    let pass = adjoint_piece <= 1.25 * distance + BOUND_SLACK
        && inverse_piece <= 2.0 / PI * distance + BOUND_SLACK
        && graph <= 2.0 * distance + BOUND_SLACK;
    Ok(LipschitzReport {
        distance,
        adjoint_piece,
        inverse_piece,
        graph,
        pass,
    })
}

/// `u = diag(w1, w2) v` with `v = [[(1-ll*)^(1/2), l], [-l*, (1-l*l)^(1/2)]]`.
#[derive(Debug, Clone)]
pub struct WvFactor {
    pub w1: CMatrix,
    pub w2: CMatrix,
    pub l: CMatrix,
    pub v: BlockUnitary2,
    /// `|u - w v|_2`.
    pub reconstruction_residual: f64,
    pub u_dist: f64,
    pub v_dist: f64,
    pub w1_dist: f64,
    pub w2_dist: f64,
    pub l_norm: f64,
    /// `|l| < 1`, `|v - 1| <= 2|u - 1|` and `|w_i - 1| <= 3|u - 1|`.
    pub bounds_hold: bool,
}

/// The `(1 - ll*)^(1/2)`-form block unitary built from `l`.
pub fn v_from_l(l: &CMatrix) -> Result<BlockUnitary2> {
    let a = sqrt_one_minus(&(l * l.adjoint()))?;
    let d = sqrt_one_minus(&(l.adjoint() * l))?;
    BlockUnitary2::new(a, l.clone(), -l.adjoint(), d, UNITARY_TOL)
}

pub fn factor_wv(u: &BlockUnitary2) -> Result<WvFactor> {
    let u_dist = u.dist_to_identity();
    if !(u_dist < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|u - 1| = {u_dist} must be below 1"
        )));
    }
    let (w1, _) = polar(&u.u11);
    let (w2, _) = polar(&u.u22);
    let l = w1.adjoint() * &u.u12;
    let v = v_from_l(&l)?;
    let recon = block_diag(&w1, &w2) * v.assemble();
    let reconstruction_residual = norm2(&(recon - u.assemble()));
    let n = u.block_dim();
    let v_dist = v.dist_to_identity();
    let w1_dist = op_norm(&(&w1 - identity(n)));
    let w2_dist = op_norm(&(&w2 - identity(n)));
    let l_norm = op_norm(&l);
    let bounds_hold = l_norm < 1.0
        && v_dist <= 2.0 * u_dist + BOUND_SLACK
        && w1_dist <= 3.0 * u_dist + BOUND_SLACK
        && w2_dist <= 3.0 * u_dist + BOUND_SLACK;
    Ok(WvFactor {
        w1,
        w2,
        l,
        v,
        reconstruction_residual,
        u_dist,
        v_dist,
        w1_dist,
        w2_dist,
        l_norm,
        bounds_hold,
    })
}

/// `v = diag(w3, 1) [[(1-m^2)^(1/2), m], [-m, (1-m^2)^(1/2)]] diag(w3*, 1)`, `m = |l|`.
#[derive(Debug, Clone)]
pub struct PolarConjugation {
    pub w3: CMatrix,
    pub m: CMatrix,
    /// The middle factor.
    pub vp: BlockUnitary2,
    pub reconstruction_residual: f64,
}

pub fn factor_polar_conjugation(v: &BlockUnitary2) -> Result<PolarConjugation> {
    let l = &v.u12;
    let expected =
        v_from_l(l).map_err(|e| Error::Malformed(format!("bad off-diagonal block: {e}")))?;
    let form = norm2(&(expected.assemble() - v.assemble()));
    if form > FORM_TOL {
        return Err(Error::Malformed(format!(
            "v deviates from the l-form by {form:e}"
        )));
    }
    let n = v.block_dim();
    let (w3, m) = if op_norm(l) == 0.0 {
        (identity(n), CMatrix::zeros(n, n))
    } else {
        polar(l)
    };
    let vp = v_from_l(&m)?;
    let recon =
        block_diag(&w3, &identity(n)) * vp.assemble() * block_diag(&w3.adjoint(), &identity(n));
    Ok(PolarConjugation {
        reconstruction_residual: norm2(&(recon - v.assemble())),
        w3,
        m,
        vp,
    })
}

/// `v' = diag(w4*, 1) R(w5) R(w5*) diag(1, w4)` with
/// `R(w) = [[cos t, sin t w], [-sin t w*, cos t]]` and `sin 2t = |m|`.
#[derive(Debug, Clone)]
pub struct RotationDecomp {
    pub w3: Option<CMatrix>,
    pub w4: CMatrix,
    pub w5: CMatrix,
    pub theta: f64,
    pub reconstruction_residual: f64,
    /// Same product with `diag(w4, 1)` as the right factor; fails unless `w4` is scalar.
    pub printed_form_residual: f64,
    pub vp_dist: f64,
    pub w4_dist: f64,
    /// `theta <= |v' - 1|` and `|w4 - 1| <= 2 |v' - 1|`.
    pub bounds_hold: bool,
}

fn rotation(theta: f64, w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let (s, c) = theta.sin_cos();
    assemble(
        &identity(n).scale(c),
        &w.scale(s),
        &(-w.adjoint().scale(s)),
        &identity(n).scale(c),
    )
}

pub fn rotation_decomp(vp: &BlockUnitary2) -> Result<RotationDecomp> {
    let m = vp.u12.clone();
    let n = vp.block_dim();
    let eig = herm_eig(&m).map_err(|e| Error::Malformed(format!("m is not Hermitian: {e}")))?;
    if eig.values.first().is_some_and(|&x| x < -FORM_TOL) {
        return Err(Error::Malformed("m is not positive semidefinite".into()));
    }
    let form = norm2(&(v_from_l(&m)?.assemble() - vp.assemble()));
    if form > FORM_TOL || norm2(&(&vp.u21 + &m)) > FORM_TOL {
        return Err(Error::Malformed(format!(
            "v' deviates from the m-form by {form:e}"
        )));
    }
    let norm_m = op_norm(&m);
    if !(norm_m < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|m| = {norm_m} must be below 1"
        )));
    }
    let vp_dist = vp.dist_to_identity();
    let (theta, w4, w5) = if norm_m == 0.0 {
        (0.0, identity(n), identity(n))
    } else {
        let theta = 0.5 * norm_m.asin();
        let mp = m.unscale(norm_m);
        let root = herm_fun(&(identity(n) - &mp * &mp), |x| x.max(0.0).sqrt())?;
        let w5 = mp + root * c64::new(0.0, 1.0);
        let (s, c) = theta.sin_cos();
        let k = identity(n).scale(c * c) - (&w5 * &w5).scale(s * s);
        (theta, polar(&k).0, w5)
    };
    let middle = rotation(theta, &w5) * rotation(theta, &w5.adjoint());
    let left = block_diag(&w4.adjoint(), &identity(n));
    let target = vp.assemble();
    let recon = &left * &middle * block_diag(&identity(n), &w4);
    let printed = &left * &middle * block_diag(&w4, &identity(n));
    let w4_dist = op_norm(&(&w4 - identity(n)));
    Ok(RotationDecomp {
        w3: None,
        reconstruction_residual: norm2(&(recon - &target)),
        printed_form_residual: norm2(&(printed - &target)),
        bounds_hold: theta <= vp_dist + 1e-12 && w4_dist <= 2.0 * vp_dist + 1e-12,
        vp_dist,
        w4_dist,
        theta,
        w4,
        w5,
    })
}

/// Full chain `u -> (w1, w2, v) -> (w3, v') -> (w4, w5, theta)` and the
/// residual of recomposing `u` from the pieces.
#[derive(Debug, Clone)]
pub struct FullFactorization {
    pub wv: WvFactor,
    pub polar: PolarConjugation,
    pub rotation: RotationDecomp,
    pub roundtrip_residual: f64,
}

pub fn factor_block_unitary(u: &BlockUnitary2) -> Result<FullFactorization> {
    let wv = factor_wv(u)?;
    let pc = factor_polar_conjugation(&wv.v)?;
    let mut rot = rotation_decomp(&pc.vp)?;
    rot.w3 = Some(pc.w3.clone());
    let n = u.block_dim();
    let one = identity(n);
    let vp = block_diag(&rot.w4.adjoint(), &one)
        * rotation(rot.theta, &rot.w5)
        * rotation(rot.theta, &rot.w5.adjoint())
        * block_diag(&one, &rot.w4);
    let v = block_diag(&pc.w3, &one) * vp * block_diag(&pc.w3.adjoint(), &one);
    let recon = block_diag(&wv.w1, &wv.w2) * v;
    Ok(FullFactorization {
        roundtrip_residual: norm2(&(recon - u.assemble())),
        wv,
        polar: pc,
        rotation: rot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    fn hermitian(n: usize, seed: u64) -> CMatrix {
        let x = random_matrix(n, seed);
        (&x + x.adjoint()).scale(0.5)
    }

    /// `exp(i H)` on `2n x 2n`, rescaled so that `|u - 1| = target`.
    fn near_identity(n: usize, seed: u64, target: f64) -> BlockUnitary2 {
        let h = hermitian(2 * n, seed);
        let h = h.unscale(op_norm(&h));
        // |e^{i t h} - 1| = 2 sin(t/2) for |h| = 1.
        let t = 2.0 * (target / 2.0).asin();
        BlockUnitary2::from_matrix(&unitary_exp(&h, t).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn graph_unitary_special_cases() {
        let u = graph_unitary(&CMatrix::zeros(2, 2)).unwrap();
        let z = CMatrix::zeros(2, 2);
        assert!(norm2(&(&u.u11 - &z)) == 0.0 && norm2(&(&u.u12 + identity(2))) < 1e-15);
        assert!(norm2(&(&u.u21 - identity(2))) < 1e-15 && norm2(&(&u.u22 - &z)) == 0.0);
        let u = graph_unitary(&identity(3)).unwrap();
        let r = 0.5f64.sqrt();
        let expect = assemble(
            &identity(3).scale(r),
            &identity(3).scale(-r),
            &identity(3).scale(r),
            &identity(3).scale(r),
        );
        assert!(norm2(&(u.assemble() - expect)) < 1e-15);
        let u = graph_unitary(&random_matrix(4, 3)).unwrap();
        assert!(u.unitarity_residual() < 1e-12);
    }

    #[test]
    fn quadrature_cross_check() {
        let t = random_matrix(4, 8);
        assert!(graph_unitary_quadrature_check(&t, 64).unwrap() < 1e-10);
        assert!(inv_sqrt_quadrature(&(-identity(2)), 64).is_err());
    }

    #[test]
    fn graph_identity() {
        let t = random_matrix(4, 1);
        let r = graph_identity_residual(&t, &random_matrix(4, 2), &random_matrix(4, 3)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn lipschitz_bounds() {
        let t = random_matrix(4, 11);
        let r = resolvent_piece_lipschitz(&t, &t).unwrap();
        assert_eq!((r.adjoint_piece, r.inverse_piece, r.graph), (0.0, 0.0, 0.0));
        let s = &t + identity(4).scale(1e-3);
        assert!(resolvent_piece_lipschitz(&s, &t).unwrap().pass);
        for seed in 0..20 {
            let s = random_matrix(4, 100 + seed).scale(2.0);
            let t = random_matrix(4, 200 + seed).scale(2.0);
            let r = resolvent_piece_lipschitz(&s, &t).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn wv_identity_and_scalar_rotation() {
        let f = factor_wv(&BlockUnitary2::identity(3)).unwrap();
        assert!(norm2(&(&f.w1 - identity(3))) < 1e-15 && op_norm(&f.l) < 1e-15);
        // u = [[cos, sin], [-sin, cos]] with a phase on the first row.
        let th: f64 = 0.1;
        let ph = c64::from_polar(1.0, 0.05);
        let m = |x: c64| CMatrix::from_element(1, 1, x);
        let u = BlockUnitary2::new(
            m(ph * th.cos()),
            m(ph * th.sin()),
            m(c64::new(-th.sin(), 0.0)),
            m(c64::new(th.cos(), 0.0)),
            1e-12,
        )
        .unwrap();
        let f = factor_wv(&u).unwrap();
        assert!((f.l[(0, 0)] - c64::new(th.sin(), 0.0)).norm() < 1e-15);
        assert!((f.w1[(0, 0)] - ph).norm() < 1e-15);
        assert!(f.bounds_hold && f.reconstruction_residual < 1e-15);
    }

    #[test]
    fn wv_random() {
        let u = near_identity(3, 5, 0.3);
        let f = factor_wv(&u).unwrap();
        assert!(f.reconstruction_residual < 1e-9 && f.bounds_hold, "{f:?}");
        let far = near_identity(3, 5, 1.5);
        assert!(factor_wv(&far).is_err());
    }

    #[test]
    fn polar_conjugation() {
        let pc = factor_polar_conjugation(&BlockUnitary2::identity(2)).unwrap();
        assert!(norm2(&(&pc.w3 - identity(2))) == 0.0 && norm2(&pc.m) == 0.0);
        let l = random_matrix(3, 4).scale(0.3);
        let pc = factor_polar_conjugation(&v_from_l(&l).unwrap()).unwrap();
        assert!(pc.reconstruction_residual < 1e-9);
        let bad = BlockUnitary2::identity(2);
        let mut swapped = bad.clone();
        std::mem::swap(&mut swapped.u11, &mut swapped.u12);
        assert!(matches!(
            factor_polar_conjugation(&swapped),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn rotation_scalar_and_zero() {
        let r = rotation_decomp(&BlockUnitary2::identity(2)).unwrap();
        assert_eq!(r.theta, 0.0);
        assert!(r.reconstruction_residual == 0.0);
        let m = CMatrix::from_element(1, 1, c64::new((0.4f64).sin(), 0.0));
        let r = rotation_decomp(&v_from_l(&m).unwrap()).unwrap();
        assert!((r.theta - 0.2).abs() < 1e-15);
        assert!(r.reconstruction_residual < 1e-14 && r.bounds_hold);
    }

    #[test]
    fn rotation_random_psd() {
        let h = hermitian(4, 9);
        let m = herm_fun(&h, |x| x.abs()).unwrap();
        let m = m.scale(0.5 / op_norm(&m));
        let r = rotation_decomp(&v_from_l(&m).unwrap()).unwrap();
        assert!(r.reconstruction_residual < 1e-9 && r.bounds_hold, "{r:?}");
        // Non-scalar w4: the diag(w4, 1) placement does not reproduce v'.
        assert!(r.printed_form_residual > 1e-3);
    }

    #[test]
    fn full_roundtrip() {
        for seed in 0..10 {
            let u = near_identity(3, 40 + seed, 0.2 + 0.05 * (seed % 5) as f64);
            let f = factor_block_unitary(&u).unwrap();
            assert!(f.roundtrip_residual < 1e-8, "{}", f.roundtrip_residual);
            assert!(f.wv.bounds_hold && f.rotation.bounds_hold);
        }
    }
}
