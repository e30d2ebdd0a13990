use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const MAX_DIM: usize = 32;

const PRIMES: [u64; MAX_DIM] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131,
];

/// Halton sequence with a seeded Cranley-Patterson rotation, on `[0, 1)^d`.
pub(crate) struct ShiftedHalton {
    shift: Vec<f64>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "at most {} dimensions supported", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ShiftedHalton {
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(index as u64, p) + s).fract())
            .collect()
    }
}
