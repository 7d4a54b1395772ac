//! Fuglede-Kadison determinants and Brown measures.
//!
//! For an `n x n` matrix the determinant is `Delta(T) = |det T|^(1/n)` and
//! the Brown measure is the eigenvalue distribution with weight `1/n` per
//! eigenvalue. The regularized measure of `T + a z` (with `z` a free
//! spherical perturbation) has a smooth density, evaluated here in closed
//! form from the singular value decomposition of `T - lambda`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, eigenvalues, identity, norm2, op_norm, singular_values, svd, CMatrix,
};
use crate::power::power_log_svd;

/// Singular values at or below this are treated as exact zeros.
pub const UNDERFLOW: f64 = 1e-300;

/// `Delta(T) = exp(tau(log |T|))`, zero when `T` is (numerically) singular.
pub fn fk_determinant(t: &CMatrix) -> f64 {
    let s = singular_values(t);
    if s.iter().any(|&x| x <= UNDERFLOW) {
        return 0.0;
    }
    (s.iter().map(|x| x.ln()).sum::<f64>() / s.len() as f64).exp()
}

/// `log Delta(T)`, `-inf` for singular input.
pub fn log_fk_determinant(t: &CMatrix) -> f64 {
    let s = singular_values(t);
    if s.iter().any(|&x| x <= UNDERFLOW) {
        return f64::NEG_INFINITY;
    }
    s.iter().map(|x| x.ln()).sum::<f64>() / s.len() as f64
}

/// `L_eps(lambda) = 1/2 tau(log((T - lambda)*(T - lambda) + eps))`.
pub fn log_det_shifted(t: &CMatrix, lambda: c64, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be >= 0")));
    }
    let n = t.nrows();
    let shifted = t - identity(n) * lambda;
    let s = singular_values(&shifted);
    let mut acc = 0.0;
    for x in s {
        let v = x * x + eps;
        if v <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += v.ln();
    }
    Ok(0.5 * acc / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub re: f64,
    pub im: f64,
    pub weight: f64,
    #[serde(skip)]
    pub multiplicity: usize,
}

impl Atom {
    pub fn location(&self) -> c64 {
        c64::new(self.re, self.im)
    }
}

/// Atomic Brown measure: eigenvalues with weight `k / n`.
#[derive(Debug, Clone, Serialize)]
pub struct BrownMeasure {
    pub atoms: Vec<Atom>,
    #[serde(skip)]
    pub n: usize,
    pub normalized: bool,
}

impl BrownMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Number of eigenvalues (with multiplicity) satisfying `pred`.
    pub fn count(&self, pred: impl Fn(c64) -> bool) -> usize {
        self.atoms
            .iter()
            .filter(|a| pred(a.location()))
            .map(|a| a.multiplicity)
            .sum()
    }

    /// `mu(B)` for the set described by `pred`.
    pub fn measure(&self, pred: impl Fn(c64) -> bool) -> f64 {
        self.count(pred) as f64 / self.n as f64
    }

    /// `int |lambda|^p d mu`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.location().norm().powf(p))
            .sum()
    }

    /// Atom locations repeated by multiplicity.
    pub fn points(&self) -> Vec<c64> {
        self.atoms
            .iter()
            .flat_map(|a| std::iter::repeat_n(a.location(), a.multiplicity))
            .collect()
    }
}

/// Single-linkage clustering of points within `tol`.
pub fn cluster(points: &[c64], tol: f64) -> Vec<Vec<c64>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut c = i;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<c64>)> = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(p),
            None => groups.push((r, vec![p])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Clustering tolerance for eigenvalues of `t`.
pub fn atom_tolerance(t: &CMatrix) -> f64 {
    1e-8 * (1.0 + norm2(t))
}

/// Brown measure of a matrix: its eigenvalues, weight `1/n` each, merged
/// within `1e-8 (1 + |T|_2)`.
pub fn brown_atoms(t: &CMatrix) -> Result<BrownMeasure> {
    check_matrix(t)?;
    let n = t.nrows();
    let ev = eigenvalues(t)?;
    let mut atoms: Vec<Atom> = cluster(&ev, atom_tolerance(t))
        .into_iter()
        .map(|g| {
            let k = g.len();
            let mean = g.iter().sum::<c64>() / k as f64;
            Atom {
                re: mean.re,
                im: mean.im,
                weight: k as f64 / n as f64,
                multiplicity: k,
            }
        })
        .collect();
    atoms.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(BrownMeasure {
        atoms,
        n,
        normalized: true,
    })
}

/// `r'(T) = max |lambda|` over the support of the Brown measure.
pub fn modified_spectral_radius(t: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(t)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// `|T^m|_p^(1/m)`, computed from log singular values of `T^m`.
pub fn power_norm_root(t: &CMatrix, p: f64, m: usize) -> Result<f64> {
    if !(p > 0.0) || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "need p > 0 and m >= 1 (p = {p}, m = {m})"
        )));
    }
    let st = power_log_svd(t, m);
    let n = t.nrows() as f64;
    // log tau(|T^m|^p) with a max shift
    let top = st.log_s[0];
    if top == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let sum: f64 = st.log_s.iter().map(|l| ((l - top) * p).exp()).sum();
    let log_tau = top * p + (sum / n).ln();
    Ok((log_tau / (p * m as f64)).exp())
}

/// `(|T^k|_{p/k}^{p/k})_{k=1..n_max}`, which decreases towards
/// `int |lambda|^p d mu_T`.
pub fn power_moment_sequence(t: &CMatrix, p: f64, n_max: usize) -> Result<Vec<f64>> {
    check_matrix(t)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} must be positive")));
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    let n = t.nrows() as f64;
    let mut acc = crate::power::PowerSvd::new(t);
    let mut out = Vec::with_capacity(n_max);
    for k in 1..=n_max {
        acc.step();
        let st = acc.state();
        let e = p / k as f64;
        let v: f64 = st.log_s.iter().map(|l| (l * e).exp()).sum::<f64>() / n;
        out.push(v);
    }
    Ok(out)
}

/// Five probe points on a circle of radius `0.5 (1 + |T|)`, nudged away
/// from the spectrum.
pub fn probe_points(t: &CMatrix) -> Vec<c64> {
    let r = 0.5 * (1.0 + op_norm(t));
    let ev = eigenvalues(t).unwrap_or_default();
    (0..5)
        .map(|j| {
            let mut theta = 0.7 + 2.0 * std::f64::consts::PI * j as f64 / 5.0;
            let mut lambda = c64::from_polar(r, theta);
            for _ in 0..16 {
                if ev.iter().all(|e| (e - lambda).norm() > 1e-3 * r) {
                    break;
                }
                theta += 0.05;
                lambda = c64::from_polar(r, theta);
            }
            lambda
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialCdfReport {
    pub n: usize,
    /// Atoms of `nu_n`: eigenvalues of `((T^n)* T^n)^(1/n)`.
    pub nu_n: Vec<f64>,
    /// Atoms of `nu`: `|lambda_i|^2`.
    pub nu: Vec<f64>,
    /// Exclusion radius around atoms of `nu`.
    pub eta: f64,
    pub distance: f64,
}

fn cdf(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&x| x <= t) as f64 / sorted.len() as f64
}

/// Sup distance between the CDFs of `nu_n` and `nu`, taken over points at
/// distance at least `eta = 0.02 (1 + max nu)` from the atoms of `nu`.
pub fn radial_cdf_compare(t: &CMatrix, n: usize) -> Result<RadialCdfReport> {
    check_matrix(t)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let st = power_log_svd(t, n);
    let mut nu_n: Vec<f64> = st
        .log_s
        .iter()
        .map(|l| (2.0 * l / n as f64).exp())
        .collect();
    let mut nu: Vec<f64> = eigenvalues(t)?.iter().map(|l| l.norm_sqr()).collect();
    nu_n.sort_by(f64::total_cmp);
    nu.sort_by(f64::total_cmp);
    let eta = 0.02 * (1.0 + nu.last().copied().unwrap_or(0.0));
    let allowed = |x: f64| x >= 0.0 && nu.iter().all(|a| (x - a).abs() >= eta);
    let mut candidates: Vec<f64> = vec![0.0];
    candidates.extend(nu_n.iter().copied());
    for a in &nu {
        candidates.push(a + eta);
        candidates.push(a - eta);
    }
    let distance = candidates
        .into_iter()
        .filter(|&x| allowed(x))
        .map(|x| (cdf(&nu_n, x) - cdf(&nu, x)).abs())
        .fold(0.0, f64::max);
    Ok(RadialCdfReport {
        n,
        nu_n,
        nu,
        eta,
        distance,
    })
}

/// Rectangular sampling lattice `re_min + i h`, `im_min + j h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub h: f64,
}

impl GridSpec {
    pub fn square(half_width: f64, h: f64) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
            h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max, self.h]
            .iter()
            .all(|x| x.is_finite());
        if !finite || !(self.h > 0.0) || self.re_max < self.re_min || self.im_max < self.im_min {
            return Err(Error::InvalidParameter(format!("bad grid {self:?}")));
        }
        if self.re_points() * self.im_points() > 50_000_000 {
            return Err(Error::InvalidParameter("grid too large".into()));
        }
        Ok(())
    }

    pub fn re_points(&self) -> usize {
        ((self.re_max - self.re_min) / self.h + 1e-9).floor() as usize + 1
    }

    pub fn im_points(&self) -> usize {
        ((self.im_max - self.im_min) / self.h + 1e-9).floor() as usize + 1
    }

    pub fn re_axis(&self) -> Vec<f64> {
        (0..self.re_points())
            .map(|i| self.re_min + i as f64 * self.h)
            .collect()
    }

    pub fn im_axis(&self) -> Vec<f64> {
        (0..self.im_points())
            .map(|j| self.im_min + j as f64 * self.h)
            .collect()
    }
}

/// Regularized Brown density sampled on a grid.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Row-major over `(im, re)`: `values[j * re.len() + i]`.
    pub values: Vec<f64>,
    pub a: f64,
    pub h: f64,
    /// Max discrepancy against the Laplacian stencil, when requested.
    pub laplacian_discrepancy: Option<f64>,
}

impl DensityGrid {
    pub fn mass(&self) -> f64 {
        self.h * self.h * self.values.iter().sum::<f64>()
    }

    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.re.len() + i]
    }

    /// `(re, im, density)` triples in storage order.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let nr = self.re.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.re[k % nr], self.im[k / nr], v))
    }
}

/// Density of the Brown measure of `T + a z` at `lambda`:
/// `(a^2/pi) tau((T(l)* T(l) + a^2)^-1 (T(l) T(l)* + a^2)^-1)`, `T(l) = T - lambda`.
pub fn brown_density_at(t: &CMatrix, a: f64, lambda: c64) -> f64 {
    let n = t.nrows();
    let shifted = t - identity(n) * lambda;
    let dec = svd(&shifted);
    let a2 = a * a;
    let w: Vec<f64> = dec.s.iter().map(|s| 1.0 / (s * s + a2)).collect();
    // tau(V D V* W D W*) = (1/n) sum_ij D_i D_j |(V* W)_ij|^2
    let m = dec.v.adjoint() * &dec.u;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += w[i] * w[j] * m[(i, j)].norm_sqr();
        }
    }
    (a2 / std::f64::consts::PI) * acc / n as f64
}

/// `(1/2 pi)` times the five-point Laplacian of `L_{a^2}` at `lambda`.
pub fn laplacian_density_at(t: &CMatrix, a: f64, lambda: c64, h: f64) -> Result<f64> {
    let e = a * a;
    let c = log_det_shifted(t, lambda, e)?;
    let mut sum = -4.0 * c;
    for d in [
        c64::new(h, 0.0),
        c64::new(-h, 0.0),
        c64::new(0.0, h),
        c64::new(0.0, -h),
    ] {
        sum += log_det_shifted(t, lambda + d, e)?;
    }
    Ok(sum / (h * h) / (2.0 * std::f64::consts::PI))
}

/// Evaluates the regularized density on `grid`; with `cross_check` the
/// Laplacian stencil is evaluated at every grid point as well.
pub fn brown_density_reg(
    t: &CMatrix,
    a: f64,
    grid: &GridSpec,
    cross_check: bool,
) -> Result<DensityGrid> {
    check_matrix(t)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization a = {a} must be positive"
        )));
    }
    grid.validate()?;
    if grid.h > a / 4.0 {
        return Err(Error::InvalidParameter(format!(
            "grid spacing h = {} exceeds a/4 = {}",
            grid.h,
            a / 4.0
        )));
    }
    let re = grid.re_axis();
    let im = grid.im_axis();
    let nr = re.len();
    let pts: Vec<c64> = (0..nr * im.len())
        .map(|k| c64::new(re[k % nr], im[k / nr]))
        .collect();
    let values: Vec<f64> = pts.par_iter().map(|&l| brown_density_at(t, a, l)).collect();
    let laplacian_discrepancy = if cross_check {
        let diffs: Result<Vec<f64>> = pts
            .par_iter()
            .zip(values.par_iter())
            .map(|(&l, &v)| Ok((laplacian_density_at(t, a, l, grid.h)? - v).abs()))
            .collect();
        Some(diffs?.into_iter().fold(0.0, f64::max))
    } else {
        None
    };
    Ok(DensityGrid {
        re,
        im,
        values,
        a,
        h: grid.h,
        laplacian_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, diag_real, jordan_block, ZERO};
    use crate::testutil::random_matrix;

    #[test]
    fn determinant_trivial_cases() {
        assert_eq!(fk_determinant(&identity(3)), 1.0);
        assert!((fk_determinant(&diag_real(&[2.0, 0.5])) - 1.0).abs() < 1e-15);
        assert_eq!(fk_determinant(&jordan_block(3, ZERO)), 0.0);
    }

    #[test]
    fn determinant_vs_lu() {
        for seed in 0..10 {
            let t = random_matrix(4, seed);
            let det = t.clone().lu().determinant().norm().powf(0.25);
            assert!((fk_determinant(&t) - det).abs() < 1e-10 * det);
        }
    }

    #[test]
    fn shifted_log_det() {
        assert_eq!(
            log_det_shifted(&CMatrix::zeros(2, 2), ZERO, 1.0).unwrap(),
            0.0
        );
        assert!(
            log_det_shifted(&diag_real(&[1.0, -1.0]), ZERO, 0.0)
                .unwrap()
                .abs()
                < 1e-15
        );
        let t = random_matrix(4, 3);
        let l = c64::new(0.1, -0.2);
        let vals: Vec<f64> = [1.0, 0.1, 0.01, 1e-12]
            .iter()
            .map(|&e| log_det_shifted(&t, l, e).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let limit = fk_determinant(&(&t - identity(4) * l)).ln();
        assert!((vals[3] - limit).abs() < 1e-8);
        assert!(log_det_shifted(&t, l, -1.0).is_err());
    }

    #[test]
    fn atoms_of_simple_matrices() {
        let m = brown_atoms(&diag(&[c64::new(1.0, 0.0), c64::new(0.0, 1.0)])).unwrap();
        assert_eq!(m.atoms.len(), 2);
        assert!(m.atoms.iter().all(|a| (a.weight - 0.5).abs() < 1e-15));
        let j = brown_atoms(&jordan_block(3, ZERO)).unwrap();
        assert_eq!(j.atoms.len(), 1);
        assert_eq!(j.atoms[0].multiplicity, 3);
        assert!((j.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_at_origin_for_zero_matrix() {
        let z = CMatrix::zeros(3, 3);
        assert!((brown_density_at(&z, 1.0, ZERO) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        let far: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&r| brown_density_at(&z, 1.0, c64::new(r, 0.0)))
            .collect();
        assert!(far.windows(2).all(|w| w[0] > w[1]));
        // closed form 1/(pi (1 + |l|^2)^2)
        let l = c64::new(0.3, 0.7);
        let exact = 1.0 / (std::f64::consts::PI * (1.0 + l.norm_sqr()).powi(2));
        assert!((brown_density_at(&z, 1.0, l) - exact).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_coarse_spacing() {
        let t = random_matrix(2, 1);
        let g = GridSpec::square(1.0, 0.2);
        assert!(brown_density_reg(&t, 0.5, &g, false).is_err());
        assert!(brown_density_reg(&t, 0.0, &g, false).is_err());
    }

    #[test]
    fn moments_of_normal_matrix_are_constant() {
        let t = diag(&[c64::new(0.5, 0.5), c64::new(-1.0, 0.0), c64::new(0.0, 2.0)]);
        let seq = power_moment_sequence(&t, 2.0, 10).unwrap();
        let exact = (0.5 + 1.0 + 4.0) / 3.0;
        assert!(seq.iter().all(|v| (v - exact).abs() < 1e-12));
        let j = power_moment_sequence(&jordan_block(2, ZERO), 2.0, 4).unwrap();
        assert!((j[0] - 0.5).abs() < 1e-15 && j[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radial_cdf_on_structured_inputs() {
        let t = diag(&[c64::new(0.5, 0.5), c64::new(-1.0, 0.0)]);
        assert!(radial_cdf_compare(&t, 3).unwrap().distance < 1e-10);
        let r = radial_cdf_compare(&jordan_block(2, ZERO), 2).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.nu_n.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spectral_radius_vs_norm() {
        let j = jordan_block(2, ZERO);
        assert_eq!(modified_spectral_radius(&j).unwrap(), 0.0);
        assert!((crate::linalg::op_norm(&j) - 1.0).abs() < 1e-15);
        assert_eq!(modified_spectral_radius(&identity(3)).unwrap(), 1.0);
    }
}
