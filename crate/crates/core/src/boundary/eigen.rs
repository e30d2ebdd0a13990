//! Smallest eigenpairs of the Dirichlet 5-point Laplacian on a masked grid.
//!
//! Shift-invert block Lanczos: Krylov blocks are generated with the inverse
//! Laplacian (applied through a banded Cholesky factor), fully
//! reorthogonalized, and the wanted pairs are extracted by Rayleigh-Ritz on the
//! Laplacian itself. The block size covers the eigenvalue multiplicities that
//! symmetric domains produce.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GridDomain;
use crate::error::{Error, Result};

/// Below this many unknowns a dense symmetric eigensolve is cheaper.
const DENSE_LIMIT: usize = 400;
const BLOCK: usize = 6;
const RESIDUAL_TOL: f64 = 1e-7;

/// `-Laplacian` scaled by `1 / h^2`, over the interior nodes in row-major order.
pub(crate) struct Laplacian {
    n: usize,
    inv_h2: f64,
    /// For each unknown, the unknown indices of its interior neighbours.
    neighbours: Vec<Vec<usize>>,
}

impl Laplacian {
    pub(crate) fn new(domain: &GridDomain) -> Self {
        let (nx, ny) = (domain.nx(), domain.ny());
        let mut index = vec![usize::MAX; nx * ny];
        let nodes = domain.interior_nodes();
        for (k, &(i, j)) in nodes.iter().enumerate() {
            index[j * nx + i] = k;
        }
        let neighbours = nodes
            .iter()
            .map(|&(i, j)| domain.neighbours(i, j).map(|flat| index[flat]).collect())
            .collect();
        let h = domain.spacing();
        Laplacian {
            n: nodes.len(),
            inv_h2: 1.0 / (h * h),
            neighbours,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, nb) in self.neighbours.iter().enumerate() {
            let s: f64 = nb.iter().map(|&m| x[m]).sum();
            y[k] = (4.0 * x[k] - s) * self.inv_h2;
        }
    }

    fn apply_matrix(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(v.nrows(), v.ncols());
        for c in 0..v.ncols() {
            let (src, dst) = (v.column(c), &mut out.column_mut(c));
            let mut buf = vec![0.0; self.n];
            self.apply(src.as_slice(), &mut buf);
            dst.copy_from_slice(&buf);
        }
        out
    }

    pub(crate) fn dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::from_diagonal_element(self.n, self.n, 4.0 * self.inv_h2);
        for (k, nb) in self.neighbours.iter().enumerate() {
            for &m in nb {
                a[(k, m)] = -self.inv_h2;
            }
        }
        a
    }

    fn bandwidth(&self) -> usize {
        self.neighbours
            .iter()
            .enumerate()
            .flat_map(|(k, nb)| nb.iter().map(move |&m| k.abs_diff(m)))
            .max()
            .unwrap_or(0)
    }
}

/// Cholesky factor of a symmetric positive-definite banded matrix,
/// stored row-wise as `l[k * (b + 1) + (k - j)]` for `k - b <= j <= k`.
pub(crate) struct BandedCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub(crate) fn factor(op: &Laplacian) -> Result<Self> {
        let (n, b) = (op.n, op.bandwidth());
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for (k, nb) in op.neighbours.iter().enumerate() {
            l[k * w] = 4.0 * op.inv_h2;
            for &m in nb {
                if m < k {
                    l[k * w + (k - m)] = -op.inv_h2;
                }
            }
        }
        for k in 0..n {
            let lo = k.saturating_sub(b);
            for j in lo..=k {
                let mut s = l[k * w + (k - j)];
                for p in lo.max(j.saturating_sub(b))..j {
                    s -= l[k * w + (k - p)] * l[j * w + (j - p)];
                }
                if j == k {
                    if s <= 0.0 {
                        return Err(Error::Numeric("Laplacian factorization lost positive definiteness".into()));
                    }
                    l[k * w] = s.sqrt();
                } else {
                    l[k * w + (k - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, b, l })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for k in 0..n {
            let mut s = x[k];
            for p in k.saturating_sub(b)..k {
                s -= self.l[k * w + (k - p)] * x[p];
            }
            x[k] = s / self.l[k * w];
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for q in k + 1..(k + b + 1).min(n) {
                s -= self.l[q * w + (q - k)] * x[q];
            }
            x[k] = s / self.l[k * w];
        }
    }
}

/// The `m` smallest eigenpairs, eigenvalues ascending, eigenvectors as unit-norm columns.
pub(crate) fn smallest_eigenpairs(op: &Laplacian, m: usize, seed: u64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if op.n() <= DENSE_LIMIT {
        Ok(dense_smallest(op, m))
    } else {
        lanczos_smallest(op, m, seed)
    }
}

pub(crate) fn dense_smallest(op: &Laplacian, m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(op.dense());
    select_smallest(&eig.eigenvalues, &eig.eigenvectors, m)
}

fn select_smallest(values: &DVector<f64>, vectors: &DMatrix<f64>, m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let order = &order[..m];
    let vals = order.iter().map(|&i| values[i]).collect();
    let mut vecs = vectors.select_columns(order.iter());
    for mut c in vecs.column_iter_mut() {
        // deterministic sign: largest-magnitude entry positive
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c.neg_mut();
        }
    }
    (vals, vecs)
}

pub(crate) fn lanczos_smallest(op: &Laplacian, m: usize, seed: u64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.n();
    let chol = BandedCholesky::factor(op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = n.min((6 * m + 120).next_multiple_of(BLOCK));
    let mut next_check = n.min((2 * m + 30).next_multiple_of(BLOCK));

    let mut basis = DMatrix::<f64>::zeros(n, 0);
    let mut block = random_block(n, BLOCK.min(n), &mut rng);
    loop {
        let fresh = orthonormalize_against(&basis, block, &mut rng);
        let start = basis.ncols();
        basis = basis.resize_horizontally(start + fresh.ncols(), 0.0);
        basis.columns_mut(start, fresh.ncols()).copy_from(&fresh);

        if basis.ncols() >= next_check || basis.ncols() >= cap {
            if let Some(found) = rayleigh_ritz(op, &basis, m) {
                return Ok(found);
            }
            if basis.ncols() >= cap {
                return Err(Error::Numeric(format!(
                    "Lanczos did not converge for {m} eigenpairs within {} Krylov vectors",
                    basis.ncols()
                )));
            }
            next_check = cap.min((next_check * 3 / 2).next_multiple_of(BLOCK));
        }

        let mut next = fresh.clone();
        for mut c in next.column_iter_mut() {
            chol.solve_in_place(c.as_mut_slice());
        }
        let room = cap - basis.ncols();
        block = if room < next.ncols() { next.columns(0, room).into_owned() } else { next };
    }
}

fn random_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// Orthonormalizes `w` against the columns of `basis` and itself (two passes).
/// Columns that collapse are replaced by fresh random directions.
fn orthonormalize_against(basis: &DMatrix<f64>, mut w: DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = w.nrows();
    for c in 0..w.ncols() {
        let mut attempts = 0;
        loop {
            let before = w.column(c).norm();
            for _ in 0..2 {
                if basis.ncols() > 0 {
                    let coeff = basis.tr_mul(&w.column(c));
                    let proj = basis * coeff;
                    w.column_mut(c).axpy(-1.0, &proj, 1.0);
                }
                for p in 0..c {
                    let d = w.column(p).dot(&w.column(c));
                    let prev = w.column(p).clone_owned();
                    w.column_mut(c).axpy(-d, &prev, 1.0);
                }
            }
            let after = w.column(c).norm();
            if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
                w.column_mut(c).scale_mut(1.0 / after);
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "could not extend an orthonormal basis of dimension {n}");
            let fresh = random_block(n, 1, rng);
            w.column_mut(c).copy_from(&fresh.column(0));
        }
    }
    w
}

fn rayleigh_ritz(op: &Laplacian, basis: &DMatrix<f64>, m: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let lv = op.apply_matrix(basis);
    let mut h = basis.tr_mul(&lv);
    h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let (theta, u) = select_smallest(&eig.eigenvalues, &eig.eigenvectors, m);
    let vecs = basis * &u;
    let lvecs = &lv * &u;
    for (k, &t) in theta.iter().enumerate() {
        let r = lvecs.column(k) - vecs.column(k) * t;
        if r.norm() > RESIDUAL_TOL * t.abs() {
            return None;
        }
    }
    let mut vecs = vecs;
    for mut c in vecs.column_iter_mut() {
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c.neg_mut();
        }
    }
    Some((theta, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate() -> GridDomain {
        GridDomain::full(24, 20, 0.05)
            .unwrap()
            .with_circle_hole(0.4, 0.5, 0.12)
            .unwrap()
            .with_rect_hole(0.8, 0.2, 0.95, 0.4)
            .unwrap()
    }

    #[test]
    fn banded_solve_matches_dense() {
        let op = Laplacian::new(&plate());
        let chol = BandedCholesky::factor(&op).unwrap();
        let b: Vec<f64> = (0..op.n()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let mut x = b.clone();
        chol.solve_in_place(&mut x);
        let mut back = vec![0.0; op.n()];
        op.apply(&x, &mut back);
        let err = back.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn lanczos_agrees_with_dense_eigensolver() {
        let op = Laplacian::new(&plate());
        assert!(op.n() > 300);
        let m = 40;
        let (dv, dvec) = dense_smallest(&op, m);
        let (lv, lvec) = lanczos_smallest(&op, m, 3).unwrap();
        for (a, b) in dv.iter().zip(&lv) {
            assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
        }
        // compare spanned subspaces rather than individual vectors
        let overlap = dvec.tr_mul(&lvec);
        let sv = overlap.singular_values();
        assert!(sv.iter().all(|s| (s - 1.0).abs() < 1e-6), "{sv}");
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        // square: lambda(i, j) = lambda(j, i)
        let d = GridDomain::full(24, 24, 1.0 / 25.0).unwrap();
        let op = Laplacian::new(&d);
        let (dv, _) = dense_smallest(&op, 12);
        let (lv, lvec) = lanczos_smallest(&op, 12, 9).unwrap();
        for (a, b) in dv.iter().zip(&lv) {
            assert!((a - b).abs() < 1e-8 * a);
        }
        let gram = lvec.tr_mul(&lvec);
        assert!((gram - DMatrix::identity(12, 12)).amax() < 1e-10);
    }
}
