use serde::Serialize;

use crate::error::{Error, Result};

/// Geometric means `g_n = (c_1 ... c_n)^(1/n)` of the weighted shift
/// `T e_n = c_n e_(n+1)` with `c_n = 1` on dyadic blocks `[2^k, 2^(k+1))`
/// for even `k` and `c_n = 2` for odd `k`.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedShiftSeries {
    pub levels: u32,
    /// `g_n` for `n = 1..2^levels - 1`.
    #[serde(skip)]
    pub g: Vec<f64>,
    /// Max of `g_n` over the last two dyadic octaves.
    pub limsup_estimate: f64,
    /// Min of `g_n` over the last two dyadic octaves.
    pub liminf_estimate: f64,
}

impl WeightedShiftSeries {
    pub fn g_at(&self, n: usize) -> f64 {
        self.g[n - 1]
    }
}

pub fn shift_weight(n: usize) -> f64 {
    let k = usize::BITS - 1 - n.leading_zeros();
    if k.is_multiple_of(2) {
        1.0
    } else {
        2.0
    }
}

pub fn weighted_shift_demo(levels: u32) -> Result<WeightedShiftSeries> {
    if !(4..=30).contains(&levels) {
        return Err(Error::InvalidParameter(format!(
            "levels = {levels} must lie in 4..=30"
        )));
    }
    let n_max = (1usize << levels) - 1;
    let mut g = Vec::with_capacity(n_max);
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        log_sum += shift_weight(n).ln();
        g.push((log_sum / n as f64).exp());
    }
    let lo = 1usize << (levels - 2);
    let window = &g[lo - 1..];
    let limsup_estimate = window.iter().copied().fold(f64::MIN, f64::max);
    let liminf_estimate = window.iter().copied().fold(f64::MAX, f64::min);
    Ok(WeightedShiftSeries {
        levels,
        g,
        limsup_estimate,
        liminf_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_follow_dyadic_blocks() {
        assert_eq!(shift_weight(1), 1.0);
        assert_eq!(shift_weight(2), 2.0);
        assert_eq!(shift_weight(3), 2.0);
        assert_eq!(shift_weight(4), 1.0);
        assert_eq!(shift_weight(8), 2.0);
    }

    #[test]
    fn estimates_approach_the_two_limits() {
        let s = weighted_shift_demo(20).unwrap();
        assert_eq!(s.g_at(1), 1.0);
        assert!((s.limsup_estimate - 2f64.powf(2.0 / 3.0)).abs() < 0.02);
        assert!((s.liminf_estimate - 2f64.powf(1.0 / 3.0)).abs() < 0.02);
        assert!(weighted_shift_demo(3).is_err());
    }
}
