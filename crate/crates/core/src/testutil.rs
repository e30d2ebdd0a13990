use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n x d` points uniform on `[0, scale)`.
pub fn random_points(n: usize, d: usize, seed: u64, scale: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * scale)
}

pub fn random_vector(n: usize, seed: u64) -> nalgebra::DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nalgebra::DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
