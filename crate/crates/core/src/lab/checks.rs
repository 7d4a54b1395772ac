use rayon::prelude::*;
use serde::Serialize;

use super::sampler::{sample_perturbed_stream, CircularPair, GinibreSampler};
use super::transport::{bl_distance_to_atoms, ks_two_sample};
use super::{envelope_ratio, Lab, McReport};
use crate::brown::{brown_atoms, brown_density_reg, GridSpec};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_matrix, check_same_dim, eigenvalues, inverse, kron_identity, log_abs_det, op_norm,
    schatten_pow, schatten_qnorm, singular_values, CMatrix,
};
use crate::unitary::BlockUnitary2;

/// Runs `f(trial)` for every trial, in parallel, keeping trial order.
fn run_trials<R: Send>(
    trials: usize,
    f: impl Fn(u64) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_p(p: f64, upper: f64) -> Result<()> {
    if !(p > 0.0 && p < upper) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} outside (0, {upper})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DeterminantReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub a: f64,
    /// `(1/2n) sum_i log(s_i(T)^2 + a^2)`.
    pub rhs: f64,
    /// Mean of `log Delta(sample)` over trials.
    pub mean: f64,
    pub bias: f64,
    pub std_error: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasSequenceReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub ms: Vec<usize>,
    pub biases: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Grid for the eigenvalue histogram: a window cut into square bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub bin: f64,
}

impl HistogramGrid {
    /// Smallest window of whole bins centred on the spectrum of `t` with a
    /// `3a` margin on every side.
    pub fn covering(t: &CMatrix, a: f64, bin: f64) -> Result<Self> {
        if !(bin > 0.0) || !bin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bin width {bin} must be positive"
            )));
        }
        let ev = eigenvalues(t)?;
        let (mut lo, mut hi) = (
            c64::new(f64::INFINITY, f64::INFINITY),
            c64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for l in &ev {
            lo = c64::new(lo.re.min(l.re), lo.im.min(l.im));
            hi = c64::new(hi.re.max(l.re), hi.im.max(l.im));
        }
        let span = |lo: f64, hi: f64| {
            let width = hi - lo + 6.0 * a;
            let k = (width / bin - 1e-9).ceil().max(1.0);
            let mid = 0.5 * (lo + hi);
            (mid - 0.5 * k * bin, mid + 0.5 * k * bin)
        };
        let (re_min, re_max) = span(lo.re, hi.re);
        let (im_min, im_max) = span(lo.im, hi.im);
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
            bin,
        })
    }

    pub fn re_bins(&self) -> usize {
        ((self.re_max - self.re_min) / self.bin).round() as usize
    }

    pub fn im_bins(&self) -> usize {
        ((self.im_max - self.im_min) / self.bin).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max, self.bin]
            .iter()
            .all(|x| x.is_finite())
            && self.bin > 0.0
            && self.re_bins() >= 1
            && self.im_bins() >= 1
            && ((self.re_max - self.re_min) / self.bin - self.re_bins() as f64).abs() < 1e-6
            && ((self.im_max - self.im_min) / self.bin - self.im_bins() as f64).abs() < 1e-6;
        if !ok || self.re_bins() * self.im_bins() > 1_000_000 {
            return Err(Error::InvalidParameter(format!(
                "bad histogram grid {self:?}"
            )));
        }
        Ok(())
    }

    fn covers(&self, t: &CMatrix, a: f64) -> Result<bool> {
        let margin = 3.0 * a * (1.0 - 1e-9);
        Ok(eigenvalues(t)?.iter().all(|l| {
            l.re - margin >= self.re_min
                && l.re + margin <= self.re_max
                && l.im - margin >= self.im_min
                && l.im + margin <= self.im_max
        }))
    }

    /// Bin index of `z`, row-major over `(im, re)`.
    fn bin_of(&self, z: c64) -> Option<usize> {
        let i = ((z.re - self.re_min) / self.bin).floor();
        let j = ((z.im - self.im_min) / self.bin).floor();
        if i < 0.0 || j < 0.0 || !i.is_finite() || !j.is_finite() {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i < self.re_bins() && j < self.im_bins()).then(|| j * self.re_bins() + i)
    }

    fn center(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.re_bins(), k / self.re_bins());
        (
            self.re_min + (i as f64 + 0.5) * self.bin,
            self.im_min + (j as f64 + 0.5) * self.bin,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub a: f64,
    pub grid: HistogramGrid,
    pub points: usize,
    /// Eigenvalue counts per bin, row-major over `(im, re)`.
    pub counts: Vec<usize>,
    /// Mass of the regularized density per bin.
    pub expected: Vec<f64>,
    pub outside_fraction: f64,
    pub outside_expected: f64,
    /// Spacing of the midpoint rule used to integrate the density.
    pub quadrature_h: f64,
}

impl HistogramReport {
    /// `re,im,count` rows at bin centres.
    pub fn csv(&self) -> String {
        let mut s = String::from("re,im,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let (x, y) = self.grid.center(k);
            s.push_str(&format!("{x:.16e},{y:.16e},{c}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub a_values: Vec<f64>,
    /// Bounded-Lipschitz distance from the pooled eigenvalues to `mu_T`.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub p: f64,
    /// `|S - T|` in operator norm.
    pub distance: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub mean_ratio: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub ms: Vec<usize>,
    pub max_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    #[serde(flatten)]
    pub summary: McReport,
    pub p: f64,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    #[serde(skip)]
    pub lhs: Vec<f64>,
    #[serde(skip)]
    pub rhs: Vec<f64>,
}

/// `g_u(z) = (u11 x + u12 y)(u21 x + u22 y)^-1` with the blocks of `u`
/// acting as `u_ij (x) 1_m`.
pub fn g_u(u: &BlockUnitary2, pair: &CircularPair) -> Result<CMatrix> {
    let dim = pair.x.nrows();
    let k = u.block_dim();
    if k == 0 || !dim.is_multiple_of(k) {
        return Err(Error::Dimension(format!(
            "block size {k} does not divide {dim}"
        )));
    }
    let m = dim / k;
    let lift = |b: &CMatrix| kron_identity(b, m);
    let num = lift(&u.u11) * &pair.x + lift(&u.u12) * &pair.y;
    let den = lift(&u.u21) * &pair.x + lift(&u.u22) * &pair.y;
    Ok(num * inverse(&den)?)
}

fn dp_sample(u: &BlockUnitary2, v: &BlockUnitary2, pair: &CircularPair, p: f64) -> Result<f64> {
    schatten_pow(&(g_u(u, pair)? - g_u(v, pair)?), p)
}

impl Lab {
    fn pair(&self, dim: usize, trial: u64) -> Result<CircularPair> {
        GinibreSampler::new(dim, self.seed, trial).circular_pair(
            self.thresholds.condition_limit,
            self.thresholds.max_resamples,
        )
    }

    /// Mean of `log Delta(T (x) 1_m + a z)` against
    /// `log Delta(T*T + a^2)^(1/2) = (1/2n) sum_i log(s_i(T)^2 + a^2)`.
    pub fn determinant_identity(
        &self,
        t: &CMatrix,
        a: f64,
        m: usize,
        trials: usize,
    ) -> Result<DeterminantReport> {
        check_matrix(t)?;
        if trials < 10 {
            return Err(Error::InvalidParameter(format!(
                "need at least 10 trials, got {trials}"
            )));
        }
        let s = singular_values(t);
        let rhs = s.iter().map(|x| (x * x + a * a).ln()).sum::<f64>() / (2.0 * s.len() as f64);
        let samples = run_trials(trials, |k| {
            let model = sample_perturbed_stream(t, a, m, self.seed, k, &self.thresholds)?;
            Ok(log_abs_det(&model.sample) / model.dim() as f64)
        })?;
        let (mean, std_error) = mean_and_se(&samples);
        let bias = mean - rhs;
        let th = self.thresholds.bias;
        let pass = bias.abs() < th && bias.is_finite();
        Ok(DeterminantReport {
            summary: self.report(bias.abs(), Some(th), pass, m, trials),
            a,
            rhs,
            mean,
            bias,
            std_error,
            samples,
        })
    }

    /// Runs [`Lab::determinant_identity`] along increasing `ms` and checks
    /// that `|bias|` decreases in envelope.
    pub fn determinant_bias_sequence(
        &self,
        t: &CMatrix,
        a: f64,
        ms: &[usize],
        trials: usize,
    ) -> Result<BiasSequenceReport> {
        if ms.len() < 2 || ms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("block sizes must increase".into()));
        }
        let mut biases = Vec::new();
        let mut std_errors = Vec::new();
        for &m in ms {
            let r = self.determinant_identity(t, a, m, trials)?;
            biases.push(r.bias.abs());
            std_errors.push(r.std_error);
        }
        let ratio = envelope_ratio(&biases, &std_errors);
        let th = 1.0 + self.thresholds.envelope_slack;
        Ok(BiasSequenceReport {
            summary: self.report(ratio, Some(th), ratio <= th, *ms.last().unwrap(), trials),
            ms: ms.to_vec(),
            biases,
            std_errors,
        })
    }

    /// L1 distance between the pooled eigenvalue histogram and the bin
    /// masses of the regularized Brown density of `T + a z`, threshold `l1`.
    pub fn density_histogram(
        &self,
        t: &CMatrix,
        a: f64,
        m: usize,
        trials: usize,
        grid: &HistogramGrid,
    ) -> Result<HistogramReport> {
        self.histogram_with(t, a, m, trials, grid, self.thresholds.l1)
    }

    /// As [`Lab::density_histogram`] with the `atom_l1` threshold, meant for
    /// small `a` where the mass concentrates at the eigenvalues of `T`.
    pub fn atom_histogram(
        &self,
        t: &CMatrix,
        a: f64,
        m: usize,
        trials: usize,
        grid: &HistogramGrid,
    ) -> Result<HistogramReport> {
        self.histogram_with(t, a, m, trials, grid, self.thresholds.atom_l1)
    }

    fn histogram_with(
        &self,
        t: &CMatrix,
        a: f64,
        m: usize,
        trials: usize,
        grid: &HistogramGrid,
        threshold: f64,
    ) -> Result<HistogramReport> {
        check_matrix(t)?;
        grid.validate()?;
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
        }
        if trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if !grid.covers(t, a)? {
            return Err(Error::InvalidParameter(
                "grid must cover the spectrum with a 3a margin".into(),
            ));
        }
        let expected = bin_masses(t, a, grid)?;
        let quadrature_h = grid.bin / refinement(grid.bin, a) as f64;
        let ev = run_trials(trials, |k| {
            let model = sample_perturbed_stream(t, a, m, self.seed, k, &self.thresholds)?;
            eigenvalues(&model.sample)
        })?;
        let mut counts = vec![0usize; expected.len()];
        let mut outside = 0usize;
        let mut points = 0usize;
        for l in ev.iter().flatten() {
            points += 1;
            match grid.bin_of(*l) {
                Some(b) => counts[b] += 1,
                None => outside += 1,
            }
        }
        let total = points as f64;
        let outside_expected = (1.0 - expected.iter().sum::<f64>()).max(0.0);
        let outside_fraction = outside as f64 / total;
        let l1 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &e)| (c as f64 / total - e).abs())
            .sum::<f64>()
            + (outside_fraction - outside_expected).abs();
        Ok(HistogramReport {
            summary: self.report(l1, Some(threshold), l1 < threshold, m, trials),
            a,
            grid: *grid,
            points,
            counts,
            expected,
            outside_fraction,
            outside_expected,
            quadrature_h,
        })
    }

    /// Bounded-Lipschitz distance between the eigenvalues of
    /// `T (x) 1_m + a z` (pooled over trials) and `mu_T`, along a decreasing
    /// sequence of `a`; the same `z` realizations are reused for every `a`.
    pub fn weak_convergence(
        &self,
        t: &CMatrix,
        m: usize,
        a_values: &[f64],
        trials: usize,
    ) -> Result<WeakConvergenceReport> {
        check_matrix(t)?;
        if a_values.len() < 2
            || a_values.windows(2).any(|w| !(w[1] < w[0]))
            || a_values.iter().any(|a| !(*a >= 0.0) || !a.is_finite())
        {
            return Err(Error::InvalidParameter(
                "a values must be non-negative and strictly decreasing".into(),
            ));
        }
        if trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        let atoms: Vec<(c64, usize)> = brown_atoms(t)?
            .atoms
            .iter()
            .map(|a| (a.location(), a.multiplicity))
            .collect();
        let mut distances = Vec::with_capacity(a_values.len());
        for &a in a_values {
            let ev = run_trials(trials, |k| {
                let model = sample_perturbed_stream(t, a, m, self.seed, k, &self.thresholds)?;
                eigenvalues(&model.sample)
            })?;
            let pts: Vec<c64> = ev.into_iter().flatten().collect();
            distances.push(bl_distance_to_atoms(&pts, &atoms)?);
        }
        let ratio = envelope_ratio(&distances, &[]);
        let th = 1.0 + self.thresholds.envelope_slack;
        let pass = ratio <= th && distances.last() < distances.first();
        Ok(WeakConvergenceReport {
            summary: self.report(ratio, Some(th), pass, m, trials),
            a_values: a_values.to_vec(),
            distances,
        })
    }

    /// Distribution of `|(S + z)^-1 - (T + z)^-1|_p / |S - T|` over samples
    /// of `z`, for `0 < p < 2/3`. Only finiteness is asserted.
    pub fn resolvent_lipschitz(
        &self,
        s: &CMatrix,
        t: &CMatrix,
        p: f64,
        m: usize,
        trials: usize,
    ) -> Result<ResolventReport> {
        check_matrix(s)?;
        check_matrix(t)?;
        check_same_dim(s, t)?;
        check_p(p, 2.0 / 3.0)?;
        if m < super::MIN_BLOCK || trials == 0 {
            return Err(Error::InvalidParameter(format!(
                "need m >= {} and trials > 0",
                super::MIN_BLOCK
            )));
        }
        let distance = op_norm(&(s - t));
        let (ks, kt) = (kron_identity(s, m), kron_identity(t, m));
        let mut ratios = run_trials(trials, |k| {
            if distance == 0.0 {
                return Ok(0.0);
            }
            let z = self.pair(s.nrows() * m, k)?.z();
            let diff = inverse(&(&ks + &z))? - inverse(&(&kt + &z))?;
            Ok(schatten_qnorm(&diff, p)? / distance)
        })?;
        ratios.sort_by(f64::total_cmp);
        let max_ratio = *ratios.last().unwrap();
        let median_ratio = ratios[ratios.len() / 2];
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let pass = ratios.iter().all(|r| r.is_finite());
        Ok(ResolventReport {
            summary: self.report(max_ratio, None, pass, m, trials),
            p,
            distance,
            max_ratio,
            median_ratio,
            mean_ratio,
            ratios,
        })
    }

    /// Max resolvent ratios along `ms`; passes when they agree within the
    /// `stability_factor`.
    pub fn resolvent_stability(
        &self,
        s: &CMatrix,
        t: &CMatrix,
        p: f64,
        ms: &[usize],
        trials: usize,
    ) -> Result<StabilityReport> {
        if ms.is_empty() {
            return Err(Error::InvalidParameter("no block sizes".into()));
        }
        let mut max_ratios = Vec::new();
        for &m in ms {
            max_ratios.push(self.resolvent_lipschitz(s, t, p, m, trials)?.max_ratio);
        }
        let hi = max_ratios.iter().copied().fold(0.0, f64::max);
        let lo = max_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = if hi == 0.0 { 1.0 } else { hi / lo };
        let th = self.thresholds.stability_factor;
        Ok(StabilityReport {
            summary: self.report(spread, Some(th), spread <= th, *ms.last().unwrap(), trials),
            ms: ms.to_vec(),
            max_ratios,
        })
    }

    fn ks_report(
        &self,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        p: f64,
        m: usize,
        trials: usize,
    ) -> Result<KsReport> {
        let d = ks_two_sample(&lhs, &rhs)?;
        let th = self.thresholds.ks;
        Ok(KsReport {
            summary: self.report(d, Some(th), d < th, m, trials),
            p,
            lhs_mean: lhs.iter().sum::<f64>() / lhs.len() as f64,
            rhs_mean: rhs.iter().sum::<f64>() / rhs.len() as f64,
            lhs,
            rhs,
        })
    }

    fn dp_pairs(
        &self,
        u: &BlockUnitary2,
        m: usize,
        trials: usize,
        f: impl Fn(&CircularPair) -> Result<(f64, f64)> + Sync + Send,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if m < super::MIN_BLOCK || trials == 0 {
            return Err(Error::InvalidParameter(format!(
                "need m >= {} and trials > 0",
                super::MIN_BLOCK
            )));
        }
        let dim = u.block_dim() * m;
        let out = run_trials(trials, |k| f(&self.pair(dim, k)?))?;
        Ok(out.into_iter().unzip())
    }

    /// Two-sample KS test of `d_p(uw, vw)` against `d_p(u, v)`, with
    /// `d_p(u, v) = |g_u(z) - g_v(z)|_p^p`; both sides share the samples
    /// of `z`, so `w = 1` gives identical samples.
    pub fn dp_right_invariance(
        &self,
        u: &BlockUnitary2,
        v: &BlockUnitary2,
        w: &BlockUnitary2,
        p: f64,
        m: usize,
        trials: usize,
    ) -> Result<KsReport> {
        check_p(p, 2.0 / 3.0)?;
        let (uw, vw) = (u.compose(w)?, v.compose(w)?);
        check_same_dim(&u.u11, &v.u11)?;
        let (lhs, rhs) = self.dp_pairs(u, m, trials, |pair| {
            Ok((dp_sample(&uw, &vw, pair, p)?, dp_sample(u, v, pair, p)?))
        })?;
        self.ks_report(lhs, rhs, p, m, trials)
    }

    /// Same protocol for `d_p(wu, wv)` with a block-diagonal unitary `w`.
    pub fn dp_left_invariance(
        &self,
        u: &BlockUnitary2,
        v: &BlockUnitary2,
        w: &BlockUnitary2,
        p: f64,
        m: usize,
        trials: usize,
    ) -> Result<KsReport> {
        check_p(p, 2.0 / 3.0)?;
        let off = op_norm(&w.u12).max(op_norm(&w.u21));
        if off > w.tol {
            return Err(Error::InvalidParameter(format!(
                "w is not block diagonal (off-diagonal norm {off:e})"
            )));
        }
        let (wu, wv) = (w.compose(u)?, w.compose(v)?);
        check_same_dim(&u.u11, &v.u11)?;
        let (lhs, rhs) = self.dp_pairs(u, m, trials, |pair| {
            Ok((dp_sample(&wu, &wv, pair, p)?, dp_sample(u, v, pair, p)?))
        })?;
        self.ks_report(lhs, rhs, p, m, trials)
    }

    /// KS test of `|g_u(z)|_p` against `|z|_p`, `0 < p < 1`.
    pub fn gu_norm_invariance(
        &self,
        u: &BlockUnitary2,
        p: f64,
        m: usize,
        trials: usize,
    ) -> Result<KsReport> {
        check_p(p, 1.0)?;
        let (lhs, rhs) = self.dp_pairs(u, m, trials, |pair| {
            Ok((
                schatten_qnorm(&g_u(u, pair)?, p)?,
                schatten_qnorm(&pair.z(), p)?,
            ))
        })?;
        self.ks_report(lhs, rhs, p, m, trials)
    }
}

/// Fine cells per bin so that the quadrature spacing is at most `a/4`.
fn refinement(bin: f64, a: f64) -> usize {
    ((4.0 * bin / a) - 1e-9).ceil().max(8.0) as usize
}

/// Mass of the regularized density in every bin (midpoint rule).
fn bin_masses(t: &CMatrix, a: f64, grid: &HistogramGrid) -> Result<Vec<f64>> {
    let r = refinement(grid.bin, a);
    let h = grid.bin / r as f64;
    let spec = GridSpec {
        re_min: grid.re_min + 0.5 * h,
        re_max: grid.re_max - 0.5 * h,
        im_min: grid.im_min + 0.5 * h,
        im_max: grid.im_max - 0.5 * h,
        h,
    };
    let dens = brown_density_reg(t, a, &spec, false)?;
    let (nr, ni) = (grid.re_bins(), grid.im_bins());
    if dens.re.len() != nr * r || dens.im.len() != ni * r {
        return Err(Error::Numerical(
            "density grid does not align with bins".into(),
        ));
    }
    let mut out = vec![0.0; nr * ni];
    for j in 0..ni * r {
        for i in 0..nr * r {
            out[(j / r) * nr + i / r] += dens.value_at(i, j) * h * h;
        }
    }
    Ok(out)
}
