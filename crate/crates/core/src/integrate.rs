//! Dyadic Riemann integrals of Hölder paths into Schatten `p`-quasi-normed
//! matrix spaces, `0 < p < 1`.
//!
//! For `f: [a, b] -> M_n` with `|f(x) - f(y)|_p <= C |x - y|^alpha` and
//! `gamma = p + p alpha - 1 > 0` the right-endpoint dyadic sums
//!
//! ```text
//! S_n = (b - a) / 2^n * sum_{k=1..2^n} f(a + k (b - a) / 2^n)
//! ```
//!
//! converge in the metric `|X - Y|_p^p`, with
//! `|S_n - S_(n-1)|_p^p <= C^p (b - a)^(p + p alpha) / (2 * 2^(n gamma))`.
//! All bounds below are stated for the `p`-th power of the quasi-norm, which
//! is subadditive.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_matrix, pairwise_sum, schatten_pow, schatten_qnorm, CMatrix};

/// Relative slack on declared constants and proven bounds.
pub const BOUND_SLACK: f64 = 0.05;
/// Extra dyadic levels used for reference integrals.
pub const REFERENCE_EXTRA_LEVELS: u32 = 6;
/// Largest accepted dyadic level.
pub const MAX_LEVELS: u32 = 24;

type PathFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Matrix-valued path with declared Hölder data.
#[derive(Clone)]
pub struct HoelderPath {
    f: PathFn,
    pub a: f64,
    pub b: f64,
    /// Hölder constant `C`.
    pub c: f64,
    pub alpha: f64,
    pub p: f64,
    pub dim: usize,
    pub name: String,
}

impl fmt::Debug for HoelderPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HoelderPath")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("c", &self.c)
            .field("alpha", &self.alpha)
            .field("p", &self.p)
            .finish()
    }
}

/// `p + p alpha - 1`.
pub fn gamma(p: f64, alpha: f64) -> f64 {
    p + p * alpha - 1.0
}

impl HoelderPath {
    /// Builds a path and verifies the declared `(C, alpha)` on 100 random
    /// pairs with 1% slack.
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
        a: f64,
        b: f64,
        c: f64,
        alpha: f64,
        p: f64,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!(
                "need a < b, got [{a}, {b}]"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {p} must lie in (0, 1)"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (0, 1]"
            )));
        }
        if !(gamma(p, alpha) > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha p + p - 1 = {} must be positive",
                gamma(p, alpha)
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Hölder constant {c} must be positive"
            )));
        }
        let f0 = f(a);
        check_matrix(&f0)?;
        let path = Self {
            f: Arc::new(f),
            a,
            b,
            c,
            alpha,
            p,
            dim: f0.nrows(),
            name: name.into(),
        };
        let fitted = path.estimate_constant(100, 0x5eed)?;
        if fitted > 1.01 * c {
            return Err(Error::InvalidParameter(format!(
                "declared Hölder constant {c} is below the sampled ratio {fitted}"
            )));
        }
        Ok(path)
    }

    pub fn eval(&self, x: f64) -> CMatrix {
        (self.f)(x)
    }

    /// Largest `|f(x) - f(y)|_p / |x - y|^alpha` over random pairs.
    pub fn estimate_constant(&self, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = rng.random_range(self.a..=self.b);
            let y = rng.random_range(self.a..=self.b);
            if x == y {
                continue;
            }
            let d = schatten_qnorm(&(self.eval(x) - self.eval(y)), self.p)?;
            worst = worst.max(d / (x - y).abs().powf(self.alpha));
        }
        Ok(worst)
    }

    pub fn gamma(&self) -> f64 {
        gamma(self.p, self.alpha)
    }

    fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Bound on `|S_n - S_(n-1)|_p^p`, valid for `n >= 1`.
    pub fn level_bound(&self, n: u32) -> f64 {
        let k = self.c.powf(self.p) * self.width().powf(self.p + self.p * self.alpha) / 2.0;
        k * (-(n as f64) * self.gamma()).exp2()
    }

    /// Bound on `|S_levels - integral|_p^p`: the sum of the level bounds past `levels`.
    pub fn tail_bound(&self, levels: u32) -> f64 {
        self.level_bound(levels + 1) / (1.0 - (-self.gamma()).exp2())
    }

    /// Same path and data on `[-b, -a]`, evaluated at `-x`.
    pub fn reflected(&self) -> Self {
        let f = self.f.clone();
        Self {
            f: Arc::new(move |x| f(-x)),
            a: -self.b,
            b: -self.a,
            name: format!("{}-reflected", self.name),
            ..self.clone()
        }
    }

    /// Restriction to `[a, b]`, which must lie inside the current interval.
    pub fn restricted(&self, a: f64, b: f64) -> Result<Self> {
        if !(self.a <= a && a < b && b <= self.b) {
            return Err(Error::InvalidParameter(format!(
                "[{a}, {b}] is not a subinterval of [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(Self {
            a,
            b,
            ..self.clone()
        })
    }

    /// `U f(.) U*` for a unitary `u`.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let f = self.f.clone();
        let u = u.clone();
        Self {
            f: Arc::new(move |x| &u * f(x) * u.adjoint()),
            name: format!("{}-conjugated", self.name),
            ..self.clone()
        }
    }

    pub fn constant(m: &CMatrix, a: f64, b: f64, alpha: f64, p: f64) -> Result<Self> {
        let m = m.clone();
        Self::new("constant", move |_| m.clone(), a, b, 1.0, alpha, p)
    }

    /// `x M`. Hölder with constant `|M|_p` for `alpha = 1`, and for `alpha < 1`
    /// on intervals of length at most one.
    pub fn linear(m: &CMatrix, a: f64, b: f64, alpha: f64, p: f64) -> Result<Self> {
        let c = schatten_qnorm(m, p)?;
        let m = m.clone();
        Self::new("linear", move |x| m.scale(x), a, b, c, alpha, p)
    }

    /// `|x - (a + b) / 2|^alpha M`.
    pub fn spike(m: &CMatrix, a: f64, b: f64, alpha: f64, p: f64) -> Result<Self> {
        let c = schatten_qnorm(m, p)?;
        let m = m.clone();
        let mid = 0.5 * (a + b);
        Self::new(
            "spike",
            move |x| m.scale((x - mid).abs().powf(alpha)),
            a,
            b,
            c,
            alpha,
            p,
        )
    }
}

fn check_levels(levels: u32) -> Result<()> {
    if levels > MAX_LEVELS {
        return Err(Error::InvalidParameter(format!(
            "levels = {levels} exceeds {MAX_LEVELS}"
        )));
    }
    Ok(())
}

/// `sum_{k in ks} f(a + k h)` for `ks = start, start + step, ...` (`count` terms).
fn strided_sum(
    path: &HoelderPath,
    h: f64,
    start: usize,
    step: usize,
    count: usize,
) -> Result<CMatrix> {
    let term = |j: usize| Ok(path.eval(path.a + (start + j * step) as f64 * h));
    pairwise_sum(0, count, path.dim, &term)
}

/// All dyadic sums `S_0, ..., S_levels`.
pub fn dyadic_sums(path: &HoelderPath, levels: u32) -> Result<Vec<CMatrix>> {
    check_levels(levels)?;
    let w = path.width();
    let mut sums = vec![path.eval(path.b).scale(w)];
    for n in 1..=levels {
        let cells = 1usize << n;
        let h = w / cells as f64;
        // New points are the odd multiples of h.
        let odd = strided_sum(path, h, 1, 2, cells / 2)?;
        let s = sums[n as usize - 1].scale(0.5) + odd.scale(h);
        sums.push(s);
    }
    Ok(sums)
}

/// `S_levels` with the bound on `|S_levels - integral|_p^p`.
pub fn dyadic_integral(path: &HoelderPath, levels: u32) -> Result<(CMatrix, f64)> {
    check_levels(levels)?;
    let cells = 1usize << levels;
    let h = path.width() / cells as f64;
    let s = strided_sum(path, h, 1, 1, cells)?.scale(h);
    Ok((s, path.tail_bound(levels)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDifference {
    pub level: u32,
    /// `|S_n - S_(n-1)|_p^p`.
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Successive-level differences against the level bound.
pub fn level_difference_check(path: &HoelderPath, levels: u32) -> Result<Vec<LevelDifference>> {
    let sums = dyadic_sums(path, levels)?;
    (1..=levels)
        .map(|n| {
            let observed = schatten_pow(&(&sums[n as usize] - &sums[n as usize - 1]), path.p)?;
            let bound = path.level_bound(n);
            Ok(LevelDifference {
                level: n,
                observed,
                bound,
                pass: observed <= (1.0 + BOUND_SLACK) * bound,
            })
        })
        .collect()
}

fn check_partition(path: &HoelderPath, partition: &[f64], tags: &[f64]) -> Result<()> {
    let bad = |msg: String| {
        Err(Error::InvalidParameter(format!(
            "malformed partition: {msg}"
        )))
    };
    if partition.len() < 2 {
        return bad("need at least two points".into());
    }
    let tol = 1e-12 * path.width();
    if (partition[0] - path.a).abs() > tol || (partition[partition.len() - 1] - path.b).abs() > tol
    {
        return bad(format!("must span [{}, {}]", path.a, path.b));
    }
    if partition.windows(2).any(|w| !(w[0] < w[1])) {
        return bad("points must be strictly increasing".into());
    }
    if tags.len() != partition.len() - 1 {
        return bad(format!(
            "{} cells but {} tags",
            partition.len() - 1,
            tags.len()
        ));
    }
    for (i, &t) in tags.iter().enumerate() {
        if !(partition[i] <= t && t <= partition[i + 1]) {
            return bad(format!("tag {t} outside cell {i}"));
        }
    }
    Ok(())
}

/// `sum_i f(t_i) (x_i - x_(i-1))`.
pub fn riemann_sum(path: &HoelderPath, partition: &[f64], tags: &[f64]) -> Result<CMatrix> {
    check_partition(path, partition, tags)?;
    let term = |i: usize| Ok(path.eval(tags[i]).scale(partition[i + 1] - partition[i]));
    pairwise_sum(0, tags.len(), path.dim, &term)
}

/// Largest cell width.
pub fn mesh(partition: &[f64]) -> f64 {
    partition
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// Outcome of checking an observed `p`-th power quasi-norm against a bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound: f64,
    pub observed: f64,
    pub slack: f64,
    /// Tail of the reference integral, added to the allowance.
    pub reference_tail: f64,
    pub pass: bool,
}

impl BoundReport {
    fn new(bound: f64, observed: f64, reference_tail: f64) -> Self {
        Self {
            bound,
            observed,
            slack: BOUND_SLACK,
            reference_tail,
            pass: observed <= (1.0 + BOUND_SLACK) * bound + reference_tail,
        }
    }
}

fn reference(path: &HoelderPath, levels: u32) -> Result<(CMatrix, f64)> {
    dyadic_integral(path, levels + REFERENCE_EXTRA_LEVELS)
}

/// `|M - integral|_p^p <= C^p (b - a) delta^gamma / gamma` for a tagged partition.
pub fn partition_bound_check(
    path: &HoelderPath,
    partition: &[f64],
    tags: &[f64],
    levels: u32,
) -> Result<BoundReport> {
    let m = riemann_sum(path, partition, tags)?;
    let (int, tail) = reference(path, levels)?;
    let g = path.gamma();
    let bound = path.c.powf(path.p) * path.width() * mesh(partition).powf(g) / g;
    Ok(BoundReport::new(
        bound,
        schatten_pow(&(m - int), path.p)?,
        tail,
    ))
}

/// Right-tagged sums over two partitions differ by at most
/// `C^p (m + n) max(delta_x, delta_y)^(p + alpha p)`.
pub fn two_partition_check(path: &HoelderPath, xs: &[f64], ys: &[f64]) -> Result<BoundReport> {
    let tx = riemann_sum(path, xs, &xs[1..])?;
    let ty = riemann_sum(path, ys, &ys[1..])?;
    let cells = (xs.len() - 1 + ys.len() - 1) as f64;
    let bound =
        path.c.powf(path.p) * cells * mesh(xs).max(mesh(ys)).powf(path.p + path.alpha * path.p);
    Ok(BoundReport::new(
        bound,
        schatten_pow(&(tx - ty), path.p)?,
        0.0,
    ))
}

/// `|(b - a) f(c) - integral|_p^p <= C^p (b - a)^(p + alpha p) / gamma`.
pub fn mean_bound_check(path: &HoelderPath, c: f64, levels: u32) -> Result<BoundReport> {
    if !(path.a <= c && c <= path.b) {
        return Err(Error::InvalidParameter(format!(
            "c = {c} outside [{}, {}]",
            path.a, path.b
        )));
    }
    let (int, tail) = reference(path, levels)?;
    let lhs = path.eval(c).scale(path.width()) - int;
    let bound =
        path.c.powf(path.p) * path.width().powf(path.p + path.alpha * path.p) / path.gamma();
    Ok(BoundReport::new(bound, schatten_pow(&lhs, path.p)?, tail))
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyReport {
    /// `|X - Y|_p`.
    pub discrepancy: f64,
    /// `|X - Y|_p^p`.
    pub discrepancy_pow: f64,
    /// Sum of the tail bounds of the integrals involved.
    pub tail_bound: f64,
    pub pass: bool,
}

impl DiscrepancyReport {
    fn new(diff: &CMatrix, p: f64, tail_bound: f64) -> Result<Self> {
        let discrepancy_pow = schatten_pow(diff, p)?;
        Ok(Self {
            discrepancy: discrepancy_pow.powf(1.0 / p),
            discrepancy_pow,
            tail_bound,
            pass: discrepancy_pow <= tail_bound,
        })
    }
}

/// `int_a^b f` against `int_a^c f + int_c^b f`, all at `levels`.
pub fn additivity_check(path: &HoelderPath, c: f64, levels: u32) -> Result<DiscrepancyReport> {
    if !(path.a < c && c < path.b) {
        return Err(Error::InvalidParameter(format!(
            "c = {c} outside ({}, {})",
            path.a, path.b
        )));
    }
    let left = path.restricted(path.a, c)?;
    let right = path.restricted(c, path.b)?;
    let (whole, t0) = dyadic_integral(path, levels)?;
    let (l, t1) = dyadic_integral(&left, levels)?;
    let (r, t2) = dyadic_integral(&right, levels)?;
    DiscrepancyReport::new(&(whole - l - r), path.p, t0 + t1 + t2)
}

/// `int_{-b}^{-a} f(-x) dx` against `int_a^b f`, both at `levels`.
pub fn reflection_check(path: &HoelderPath, levels: u32) -> Result<DiscrepancyReport> {
    let refl = path.reflected();
    let (x, t0) = dyadic_integral(path, levels)?;
    let (y, t1) = dyadic_integral(&refl, levels)?;
    DiscrepancyReport::new(&(x - y), path.p, t0 + t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::testutil::{random_matrix, random_unitary};

    fn m4() -> CMatrix {
        random_matrix(4, 21)
    }

    #[test]
    fn rejects_bad_data() {
        let m = m4();
        assert!(HoelderPath::linear(&m, 0.0, 1.0, 0.8, 0.55).is_err());
        assert!(HoelderPath::linear(&m, 1.0, 0.0, 1.0, 0.6).is_err());
        assert!(HoelderPath::linear(&m, 0.0, 1.0, 1.0, 1.2).is_err());
        let c = schatten_qnorm(&m, 0.6).unwrap();
        assert!(HoelderPath::new("bad", move |x| m.scale(x), 0.0, 1.0, 0.5 * c, 1.0, 0.6).is_err());
    }

    #[test]
    fn constant_is_exact() {
        let m = m4();
        let path = HoelderPath::constant(&m, -1.0, 2.0, 1.0, 0.6).unwrap();
        for levels in [0, 3, 7] {
            let (s, tail) = dyadic_integral(&path, levels).unwrap();
            assert!(norm2(&(s - m.scale(3.0))) < 1e-13);
            assert!(tail > 0.0);
        }
    }

    #[test]
    fn linear_closed_form() {
        // Right-endpoint sums of x on [0, 1]: (2^n + 1) / 2^(n+1).
        let m = m4();
        let path = HoelderPath::linear(&m, 0.0, 1.0, 1.0, 0.6).unwrap();
        let sums = dyadic_sums(&path, 10).unwrap();
        for (n, s) in sums.iter().enumerate() {
            let k = (2f64.powi(n as i32) + 1.0) / 2f64.powi(n as i32 + 1);
            assert!(norm2(&(s - m.scale(k))) < 1e-13, "level {n}");
        }
        let (s, tail) = dyadic_integral(&path, 10).unwrap();
        assert!(norm2(&(&s - &sums[10])) < 1e-13);
        assert!(schatten_pow(&(s - m.scale(0.5)), 0.6).unwrap() <= tail);
    }

    #[test]
    fn spike_level_differences() {
        let path = HoelderPath::spike(&m4(), 0.0, 1.0, 0.8, 0.6).unwrap();
        for d in level_difference_check(&path, 14).unwrap() {
            assert!(d.pass, "{d:?}");
        }
    }

    #[test]
    fn riemann_sum_basics() {
        let m = m4();
        let path = HoelderPath::linear(&m, 0.0, 2.0, 1.0, 0.6).unwrap();
        let single = riemann_sum(&path, &[0.0, 2.0], &[2.0]).unwrap();
        assert!(norm2(&(single - path.eval(2.0).scale(2.0))) < 1e-15);
        let xs: Vec<f64> = (0..=8).map(|k| k as f64 / 4.0).collect();
        let s = riemann_sum(&path, &xs, &xs[1..]).unwrap();
        assert!(norm2(&(s - &dyadic_sums(&path, 3).unwrap()[3])) < 1e-14);
        let c = HoelderPath::constant(&m, 0.0, 2.0, 1.0, 0.6).unwrap();
        let s = riemann_sum(&c, &[0.0, 0.3, 1.7, 2.0], &[0.1, 1.0, 2.0]).unwrap();
        assert!(norm2(&(s - m.scale(2.0))) < 1e-14);
        assert!(riemann_sum(&c, &[0.0, 1.0, 1.0, 2.0], &[0.5, 1.0, 1.5]).is_err());
        assert!(riemann_sum(&c, &[0.0, 1.0, 2.0], &[1.5, 1.5]).is_err());
        assert!(riemann_sum(&c, &[0.0, 1.0], &[0.5]).is_err());
    }

    #[test]
    fn partition_bound_holds_and_shrinks() {
        let path = HoelderPath::spike(&m4(), 0.0, 1.0, 0.8, 0.6).unwrap();
        let mut prev = f64::INFINITY;
        for k in [4, 6, 8] {
            let xs: Vec<f64> = (0..=(1 << k)).map(|i| i as f64 / (1 << k) as f64).collect();
            let tags: Vec<f64> = xs.windows(2).map(|w| 0.3 * w[0] + 0.7 * w[1]).collect();
            let r = partition_bound_check(&path, &xs, &tags, 12).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.observed < prev);
            prev = r.observed;
        }
        let c = HoelderPath::constant(&m4(), 0.0, 1.0, 1.0, 0.6).unwrap();
        let r = partition_bound_check(&c, &[0.0, 0.5, 1.0], &[0.2, 0.9], 8).unwrap();
        assert!(r.observed < 1e-20 && r.bound > 0.0);
    }

    #[test]
    fn mean_bound_linear_closed_form() {
        // f(a) - mean = -M/2 on [0, 1].
        let m = m4();
        let path = HoelderPath::linear(&m, 0.0, 1.0, 1.0, 0.6).unwrap();
        let r = mean_bound_check(&path, 0.0, 12).unwrap();
        let hand = schatten_pow(&m.scale(0.5), 0.6).unwrap();
        assert!((r.observed - hand).abs() < 1e-2 * hand);
        assert!(r.pass);
    }

    #[test]
    fn additivity_and_reflection() {
        let m = m4();
        let c = HoelderPath::constant(&m, 0.0, 1.0, 1.0, 0.6).unwrap();
        assert!(additivity_check(&c, 0.5, 6).unwrap().discrepancy < 1e-12);
        assert!(reflection_check(&c, 6).unwrap().discrepancy < 1e-12);
        for path in [
            HoelderPath::linear(&m, 0.0, 1.0, 1.0, 0.6).unwrap(),
            HoelderPath::spike(&m, 0.0, 1.0, 0.8, 0.6).unwrap(),
        ] {
            let r = additivity_check(&path, 0.5, 10).unwrap();
            assert!(r.pass, "{r:?}");
            let r = reflection_check(&path, 10).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert!(additivity_check(&c, 1.0, 4).is_err());
    }

    #[test]
    fn two_partitions() {
        let path = HoelderPath::spike(&m4(), 0.0, 1.0, 1.0, 0.6).unwrap();
        let xs = [0.0, 0.2, 0.45, 0.5, 0.8, 1.0];
        let ys = [0.0, 0.1, 0.35, 0.6, 0.9, 1.0];
        assert!(two_partition_check(&path, &xs, &ys).unwrap().pass);
    }

    #[test]
    fn conjugation_covariance() {
        let u = random_unitary(4, 2);
        let path = HoelderPath::spike(&m4(), 0.0, 1.0, 0.8, 0.6).unwrap();
        let (s, _) = dyadic_integral(&path, 8).unwrap();
        let (su, _) = dyadic_integral(&path.conjugated(&u), 8).unwrap();
        assert!(norm2(&(su - &u * s * u.adjoint())) < 1e-13);
    }
}
