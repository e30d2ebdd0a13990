use super::*;
use crate::kernel::eval_se;
use crate::testutil::min_eigenvalue;
use std::f64::consts::PI;

fn plate() -> GridDomain {
    GridDomain::full(30, 24, 1.0 / 31.0)
        .unwrap()
        .with_circle_hole(0.3, 0.4, 0.1)
        .unwrap()
        .with_rect_hole(0.6, 0.2, 0.75, 0.5)
        .unwrap()
}

#[test]
fn unit_square_matches_analytic_dirichlet_spectrum() {
    let d = GridDomain::full(64, 64, 1.0 / 65.0).unwrap();
    let b = build_basis(&d, 4).unwrap();
    let expected = [2.0, 5.0, 5.0, 8.0].map(|s| PI * PI * s);
    for (got, want) in b.eigenvalues().iter().zip(expected) {
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }
}

#[test]
fn eigenfunctions_vanish_on_masked_nodes() {
    let d = plate();
    let b = build_basis(&d, 20).unwrap();
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            if !d.is_inside(i, j) {
                for c in 0..b.size() {
                    assert_eq!(b.node_value(c, i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn basis_is_orthonormal_under_grid_inner_product() {
    let b = build_basis(&plate(), 25).unwrap();
    for a in 0..b.size() {
        for c in 0..b.size() {
            let want = if a == c { 1.0 } else { 0.0 };
            assert!((b.inner_product(a, c) - want).abs() < 1e-8);
        }
    }
    assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    assert!(b.eigenvalues()[0] > 0.0);
}

#[test]
fn too_large_basis_rejected() {
    let d = GridDomain::full(3, 3, 1.0).unwrap();
    assert!(matches!(build_basis(&d, 10), Err(Error::InvalidArgument(_))));
    assert!(build_basis(&d, 0).is_err());
}

#[test]
fn covariance_decays_towards_hole_edge() {
    let d = plate();
    let b = build_basis(&d, 30).unwrap();
    let p = SeParams::new(1.0, vec![0.15], 0.0).unwrap();
    let x = [0.3, 0.75];
    // grid row j = 14 (y = 15/31) is masked at x = 0.3 by the circular hole
    let edge = 15.0 / 31.0;
    let far = eval_constrained(&b, &p, &x, &[0.3, 0.62]).unwrap().abs();
    let mut prev = far;
    for frac in [0.5, 0.1, 0.01] {
        let k = eval_constrained(&b, &p, &x, &[0.3, edge + frac / 31.0]).unwrap().abs();
        assert!(k < prev && k < frac * far * 2.0, "{k} at {frac}");
        prev = k;
    }
    assert!(eval_constrained(&b, &p, &x, &[0.3, edge]).unwrap().abs() < 1e-12);
    // outer boundary ring
    let outer = eval_constrained(&b, &p, &x, &[0.3, 25.0 / 31.0]).unwrap();
    assert!(outer.abs() < 1e-12);
}

#[test]
fn points_outside_or_in_holes_rejected() {
    let b = build_basis(&plate(), 5).unwrap();
    let p = SeParams::new(1.0, vec![0.15], 0.0).unwrap();
    assert!(eval_constrained(&b, &p, &[0.3, 0.4], &[0.5, 0.5]).is_err());
    assert!(eval_constrained(&b, &p, &[1.5, 0.4], &[0.5, 0.5]).is_err());
    let two_scales = SeParams::new(1.0, vec![0.1, 0.2], 0.0).unwrap();
    assert!(eval_constrained(&b, &two_scales, &[0.5, 0.5], &[0.5, 0.5]).is_err());
}

#[test]
fn symmetric_exactly() {
    let b = build_basis(&plate(), 15).unwrap();
    let p = SeParams::new(2.0, vec![0.2], 0.0).unwrap();
    let (x, y) = ([0.13, 0.71], [0.52, 0.11]);
    assert_eq!(
        eval_constrained(&b, &p, &x, &y).unwrap(),
        eval_constrained(&b, &p, &y, &x).unwrap()
    );
}

#[test]
fn converges_to_squared_exponential_away_from_edges() {
    let d = GridDomain::full(48, 48, 1.0 / 49.0).unwrap();
    let b = build_basis(&d, 256).unwrap();
    let p = SeParams::new(1.0, vec![0.1], 0.0).unwrap();
    let x = [22.0 / 49.0, 24.0 / 49.0];
    for y in [[27.0 / 49.0, 24.0 / 49.0], [22.0 / 49.0, 24.0 / 49.0], [25.0 / 49.0, 28.0 / 49.0]] {
        let approx = eval_constrained(&b, &p, &x, &y).unwrap();
        let exact = eval_se(&x, &y, false, &SeParams::new(1.0, vec![0.1, 0.1], 0.0).unwrap()).unwrap();
        assert!((approx - exact).abs() / exact < 0.05, "{approx} vs {exact}");
    }
}

#[test]
fn wrapped_kernel_gram_is_psd_and_low_rank() {
    let b = Arc::new(build_basis(&plate(), 12).unwrap());
    let k = wrap_as_kernel(b.clone(), &SeParams::new(1.0, vec![0.2], 0.0).unwrap()).unwrap();
    let d = plate();
    let pts: Vec<f64> = d
        .interior_nodes()
        .into_iter()
        .step_by(13)
        .take(40)
        .flat_map(|(i, j)| {
            let (x, y) = d.node_position(i, j);
            [x, y]
        })
        .collect();
    let x = DMatrix::from_row_slice(pts.len() / 2, 2, &pts);
    let g = k.gram(&x, &x, true).unwrap();
    assert!(min_eigenvalue(&g) >= -1e-10);
    let sv = g.singular_values();
    let rank = sv.iter().filter(|s| **s > 1e-10 * sv.max()).count();
    assert!(rank <= 12, "rank {rank}");
}

#[test]
fn constrained_gradients_match_finite_differences() {
    let b = Arc::new(build_basis(&plate(), 20).unwrap());
    let k = wrap_as_kernel(b, &SeParams::new(1.3, vec![0.17], 0.02).unwrap()).unwrap();
    let x = DMatrix::from_row_slice(6, 2, &[0.1, 0.1, 0.5, 0.7, 0.45, 0.66, 0.9, 0.3, 0.2, 0.6, 0.55, 0.15]);
    let analytic = k.param_gradients(&x).unwrap();
    let theta = k.log_params();
    let h = 1e-6;
    for (p, g) in analytic.iter().enumerate() {
        let mut up = theta.clone();
        up[p] += h;
        let mut dn = theta.clone();
        dn[p] -= h;
        let fd = (k.with_log_params(&up).unwrap().gram(&x, &x, true).unwrap()
            - k.with_log_params(&dn).unwrap().gram(&x, &x, true).unwrap())
            / (2.0 * h);
        assert!((g - &fd).norm() / fd.norm() < 1e-5, "param {p}");
    }
}
