//! Seeded random inputs shared by the unit tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c64, qr, CMatrix};

/// Complex Gaussian matrix with entry variance `1/n`.
pub fn random_matrix(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (0.5 / n as f64).sqrt();
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(re * sd, im * sd)
    })
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> CMatrix {
    qr(&random_matrix(n, seed.wrapping_add(0x9e37))).0
}
