use std::sync::Arc;

use nalgebra::DMatrix;

use super::eigen::{smallest_eigenpairs, Laplacian};
use super::{se_spectral_density_2d, GridDomain};
use crate::error::{Error, Result};
use crate::kernel::{combine_sum, Kernel, SeParams};

const EIGEN_SEED: u64 = 0x5eed_ba51;

/// Lowest Dirichlet eigenpairs of a [`GridDomain`].
///
/// Eigenfunctions are stored as full-grid fields (zero at masked nodes) and are
/// orthonormal under the grid inner product `sum_k f(k) g(k) h^2`.
#[derive(Debug)]
pub struct ReducedRankBasis {
    domain: GridDomain,
    eigenvalues: Vec<f64>,
    /// `(nx * ny) x M`, row index `j * nx + i`.
    fields: DMatrix<f64>,
}

/// Builds the `m` smallest-eigenvalue eigenpairs of `-Laplacian` with zero
/// boundary values on the outer edge and every hole perimeter.
pub fn build_basis(domain: &GridDomain, m: usize) -> Result<ReducedRankBasis> {
    let n = domain.n_interior();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "basis size must be in 1..={n} (interior nodes), got {m}"
        )));
    }
    let op = Laplacian::new(domain);
    let (eigenvalues, vectors) = smallest_eigenpairs(&op, m, EIGEN_SEED)?;
    let inv_h = 1.0 / domain.spacing();
    let mut fields = DMatrix::zeros(domain.nx() * domain.ny(), m);
    for (k, (i, j)) in domain.interior_nodes().into_iter().enumerate() {
        let row = j * domain.nx() + i;
        for c in 0..m {
            fields[(row, c)] = vectors[(k, c)] * inv_h;
        }
    }
    Ok(ReducedRankBasis {
        domain: domain.clone(),
        eigenvalues,
        fields,
    })
}

impl ReducedRankBasis {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    /// Eigenvalues in ascending order, in units of 1 / length^2.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Value of eigenfunction `c` at grid node `(i, j)`.
    pub fn node_value(&self, c: usize, i: usize, j: usize) -> f64 {
        self.fields[(j * self.domain.nx() + i, c)]
    }

    /// Grid inner product between eigenfunctions `a` and `b`.
    pub fn inner_product(&self, a: usize, b: usize) -> f64 {
        let h2 = self.domain.spacing().powi(2);
        self.fields.column(a).dot(&self.fields.column(b)) * h2
    }

    fn corner(&self, i: isize, j: isize) -> Option<usize> {
        let (nx, ny) = (self.domain.nx() as isize, self.domain.ny() as isize);
        (i >= 0 && j >= 0 && i < nx && j < ny).then(|| (j * nx + i) as usize)
    }

    /// All eigenfunctions at one point, by bilinear interpolation between nodes.
    ///
    /// Points on the outer boundary ring are valid (every eigenfunction is 0
    /// there); points strictly inside a hole are rejected.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size()];
        self.features_into(x, &mut out)?;
        Ok(out)
    }

    fn features_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != 2 {
            return Err(Error::invalid(format!("constrained kernel needs 2D points, got {}", x.len())));
        }
        let h = self.domain.spacing();
        let (w, ht) = self.domain.extent();
        let eps = 1e-9 * h;
        if !(x[0] >= -eps && x[0] <= w + eps && x[1] >= -eps && x[1] <= ht + eps) {
            return Err(Error::invalid(format!("point ({}, {}) lies outside the domain", x[0], x[1])));
        }
        let snap = |t: f64| if (t - t.round()).abs() < 1e-9 { t.round() } else { t };
        let u = snap(x[0] / h - 1.0).clamp(-1.0, self.domain.nx() as f64);
        let v = snap(x[1] / h - 1.0).clamp(-1.0, self.domain.ny() as f64);
        let (i0, j0) = (u.floor() as isize, v.floor() as isize);
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let corners = [
            (i0, j0, (1.0 - fu) * (1.0 - fv)),
            (i0 + 1, j0, fu * (1.0 - fv)),
            (i0, j0 + 1, (1.0 - fu) * fv),
            (i0 + 1, j0 + 1, fu * fv),
        ];
        // every cell whose closure holds the point: a point on a grid line or
        // node touches the cells on both sides
        let span = |k: isize, f: f64| if f == 0.0 { k - 1..=k + 1 } else { k..=k + 1 };
        let in_hole = span(i0, fu).all(|i| {
            span(j0, fv).all(|j| {
                self.corner(i, j)
                    .is_some_and(|_| !self.domain.is_inside(i as usize, j as usize))
            })
        });
        if in_hole {
            return Err(Error::invalid(format!("point ({}, {}) lies inside a hole", x[0], x[1])));
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, j, wgt) in corners {
            if wgt == 0.0 {
                continue;
            }
            if let Some(row) = self.corner(i, j) {
                for (o, f) in out.iter_mut().zip(self.fields.row(row).iter()) {
                    *o += wgt * f;
                }
            }
        }
        Ok(())
    }

    /// `N x M` matrix of eigenfunction values at the rows of `x`.
    pub fn feature_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = self.size();
        let mut out = DMatrix::zeros(x.nrows(), m);
        let mut buf = vec![0.0; m];
        for r in 0..x.nrows() {
            self.features_into(&[x[(r, 0)], x[(r, 1)]], &mut buf)?;
            for (c, v) in buf.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
        Ok(out)
    }
}

/// Reduced-rank covariance `sum_i S(sqrt(lambda_i)) phi_i(x) phi_i(x')`.
///
/// `params` must carry a single (isotropic) length scale; its noise variance is ignored.
pub fn eval_constrained(basis: &ReducedRankBasis, params: &SeParams, x: &[f64], xp: &[f64]) -> Result<f64> {
    params.validate()?;
    let l = isotropic(params)?;
    let (fa, fb) = (basis.features(x)?, basis.features(xp)?);
    Ok(basis
        .eigenvalues()
        .iter()
        .zip(fa.iter().zip(&fb))
        .map(|(lam, (a, b))| se_spectral_density_2d(params.signal_variance, l, lam.sqrt()) * (a * b))
        .sum())
}

/// The constrained covariance plus a white-noise term, as a standard [`Kernel`].
pub fn wrap_as_kernel(basis: Arc<ReducedRankBasis>, params: &SeParams) -> Result<Kernel> {
    params.validate()?;
    let l = isotropic(params)?;
    combine_sum(vec![
        Kernel::constrained(basis, params.signal_variance, l)?,
        Kernel::white_noise(params.noise_variance)?,
    ])
}

fn isotropic(params: &SeParams) -> Result<f64> {
    match params.length_scales.as_slice() {
        [l] => Ok(*l),
        other => Err(Error::invalid(format!(
            "constrained kernel takes one isotropic length scale, got {}",
            other.len()
        ))),
    }
}

#[cfg(test)]
mod tests;
