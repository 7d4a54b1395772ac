use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::Thresholds;
use crate::error::{Error, Result};
use crate::linalg::{c64, check_matrix, inverse, kron_identity, norm2, CMatrix};

/// Smallest block dimension accepted by the samplers.
pub const MIN_BLOCK: usize = 8;

/// Complex Ginibre matrices of size `dim` with entry variance `1/dim`, so
/// that `tau(x* x) = 1`.
///
/// Each `(seed, stream)` pair selects an independent ChaCha8 stream, which
/// is how trials get private substreams.
#[derive(Debug, Clone)]
pub struct GinibreSampler {
    pub dim: usize,
    pub seed: u64,
    pub stream: u64,
    rng: ChaCha8Rng,
}

impl GinibreSampler {
    pub fn new(dim: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            dim,
            seed,
            stream,
            rng,
        }
    }

    pub fn next_matrix(&mut self) -> CMatrix {
        let sd = (0.5 / self.dim as f64).sqrt();
        let rng = &mut self.rng;
        CMatrix::from_fn(self.dim, self.dim, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c64::new(re * sd, im * sd)
        })
    }

    /// A pair `(x, y)` with `y` inverted; `y` is redrawn while its normalized
    /// Frobenius condition number `|y|_2 |y^-1|_2` exceeds `limit`.
    pub fn circular_pair(&mut self, limit: f64, max_resamples: usize) -> Result<CircularPair> {
        let x = self.next_matrix();
        for resamples in 0..=max_resamples {
            let y = self.next_matrix();
            if let Ok(y_inv) = inverse(&y) {
                let condition = norm2(&y) * norm2(&y_inv);
                if condition.is_finite() && condition <= limit {
                    return Ok(CircularPair {
                        x,
                        y,
                        y_inv,
                        condition,
                        resamples,
                    });
                }
            }
        }
        Err(Error::Numerical(format!(
            "denominator ill-conditioned after {max_resamples} resamples"
        )))
    }
}

/// Realization of a circular pair `{x, y}` together with `y^-1`.
#[derive(Debug, Clone)]
pub struct CircularPair {
    pub x: CMatrix,
    pub y: CMatrix,
    pub y_inv: CMatrix,
    pub condition: f64,
    pub resamples: usize,
}

impl CircularPair {
    /// `z = x y^-1`.
    pub fn z(&self) -> CMatrix {
        &self.x * &self.y_inv
    }
}

/// One realization of `T (x) 1_m + a x y^-1`.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedModel {
    #[serde(skip)]
    pub t: CMatrix,
    pub a: f64,
    pub m: usize,
    pub seed: u64,
    pub stream: u64,
    pub condition: f64,
    pub resamples: usize,
    #[serde(skip)]
    pub sample: CMatrix,
}

impl PerturbedModel {
    pub fn dim(&self) -> usize {
        self.sample.nrows()
    }
}

/// Samples `T (x) 1_m + a x y^-1` on stream 0 of `seed`.
///
/// `x, y` are independent Ginibre matrices of size `nm`; they are only
/// asymptotically free from `T (x) 1_m`. With `a = 0` the sample is
/// `T (x) 1_m` exactly and no randomness is drawn.
pub fn sample_perturbed(t: &CMatrix, a: f64, m: usize, seed: u64) -> Result<PerturbedModel> {
    sample_perturbed_stream(t, a, m, seed, 0, &Thresholds::pinned())
}

pub fn sample_perturbed_stream(
    t: &CMatrix,
    a: f64,
    m: usize,
    seed: u64,
    stream: u64,
    th: &Thresholds,
) -> Result<PerturbedModel> {
    check_matrix(t)?;
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "a = {a} must be non-negative"
        )));
    }
    if m < MIN_BLOCK {
        return Err(Error::InvalidParameter(format!(
            "block dimension m = {m} < {MIN_BLOCK}"
        )));
    }
    let base = kron_identity(t, m);
    let mut model = PerturbedModel {
        t: t.clone(),
        a,
        m,
        seed,
        stream,
        condition: 1.0,
        resamples: 0,
        sample: base,
    };
    if a == 0.0 {
        return Ok(model);
    }
    let pair = GinibreSampler::new(t.nrows() * m, seed, stream)
        .circular_pair(th.condition_limit, th.max_resamples)?;
    let z = pair.z();
    model.sample.zip_apply(&z, |s, w| *s += w * a);
    model.condition = pair.condition;
    model.resamples = pair.resamples;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;
    use crate::testutil::random_matrix;

    #[test]
    fn zero_regularization_is_exact() {
        let t = random_matrix(3, 1);
        let s = sample_perturbed(&t, 0.0, 8, 5).unwrap();
        assert_eq!(s.sample, kron_identity(&t, 8));
    }

    #[test]
    fn reproducible() {
        let t = diag_real(&[1.0, -1.0]);
        let a = sample_perturbed(&t, 0.5, 16, 42).unwrap();
        let b = sample_perturbed(&t, 0.5, 16, 42).unwrap();
        assert_eq!(a.sample, b.sample);
        let c = sample_perturbed(&t, 0.5, 16, 43).unwrap();
        assert_ne!(a.sample, c.sample);
    }

    #[test]
    fn zero_matrix_gives_ratio() {
        let t = CMatrix::zeros(1, 1);
        let s = sample_perturbed(&t, 1.0, 64, 9).unwrap();
        let mut g = GinibreSampler::new(64, 9, 0);
        let x = g.next_matrix();
        let y = g.next_matrix();
        let z = &x * inverse(&y).unwrap();
        assert!(norm2(&(&s.sample - z)) < 1e-12 * norm2(&s.sample));
    }

    #[test]
    fn streams_differ() {
        let a = GinibreSampler::new(8, 1, 0).next_matrix();
        let b = GinibreSampler::new(8, 1, 1).next_matrix();
        assert_ne!(a, b);
    }

    #[test]
    fn ginibre_second_moment() {
        let x = GinibreSampler::new(300, 3, 0).next_matrix();
        let tr = norm2(&x).powi(2);
        assert!((tr - 1.0).abs() < 0.02, "{tr}");
    }

    #[test]
    fn rejects_small_blocks_and_bad_a() {
        let t = diag_real(&[1.0]);
        assert!(sample_perturbed(&t, 1.0, 4, 0).is_err());
        assert!(sample_perturbed(&t, -1.0, 16, 0).is_err());
        assert!(sample_perturbed(&t, f64::NAN, 16, 0).is_err());
    }

    #[test]
    fn persistent_ill_conditioning_errors() {
        let th = Thresholds {
            condition_limit: 0.5,
            ..Thresholds::pinned()
        };
        let t = diag_real(&[1.0]);
        let r = sample_perturbed_stream(&t, 1.0, 8, 0, 0, &th);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
