use super::*;
use crate::testutil::{min_eigenvalue, random_points};
use proptest::prelude::*;
use std::f64::consts::PI;

fn se2() -> Kernel {
    Kernel::squared_exponential(1.7, vec![0.6, 1.9]).unwrap()
}

fn sdof() -> Kernel {
    Kernel::sdof(SdofParams::new(2.0 * PI, 0.08, 0.9).unwrap())
}

fn mdof() -> Kernel {
    Kernel::mdof(
        ModalSet::new(vec![
            SdofParams::new(3.0, 0.05, 0.4).unwrap(),
            SdofParams::new(11.0, 0.12, 2.0).unwrap(),
        ])
        .unwrap(),
    )
}

fn product() -> Kernel {
    combine_product(vec![
        (mdof(), vec![0]),
        (Kernel::squared_exponential(1.3, vec![0.4]).unwrap(), vec![1]),
    ])
    .unwrap()
}

/// One representative of every variant, paired with its input dimension.
fn all_kernels() -> Vec<(&'static str, Kernel, usize)> {
    vec![
        ("se", se2(), 2),
        ("white_noise", Kernel::white_noise(0.3).unwrap(), 2),
        ("sdof", sdof(), 1),
        ("mdof", mdof(), 1),
        ("sum", combine_sum(vec![se2(), Kernel::white_noise(0.05).unwrap()]).unwrap(), 2),
        ("product", product(), 2),
        (
            "product_with_noise",
            combine_sum(vec![product(), Kernel::white_noise(0.01).unwrap()]).unwrap(),
            2,
        ),
    ]
}

#[test]
fn single_point_gram() {
    let x = DMatrix::from_row_slice(1, 2, &[0.2, -0.4]);
    let k = Kernel::se_with_noise(&SeParams::new(1.0, vec![1.0, 1.0], 0.1).unwrap()).unwrap();
    let g = k.gram(&x, &x, true).unwrap();
    assert_eq!(g.shape(), (1, 1));
    assert!((g[(0, 0)] - 1.1).abs() < 1e-15);
    // cross-Grams never carry the noise term
    let g = k.gram(&x, &x, false).unwrap();
    assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
}

#[test]
fn symmetric_in_arguments() {
    for (name, k, d) in all_kernels() {
        let a = random_points(100, d, 1, 3.0);
        let b = random_points(100, d, 2, 3.0);
        for i in 0..100 {
            let (xa, xb): (Vec<f64>, Vec<f64>) = (a.row(i).iter().copied().collect(), b.row(i).iter().copied().collect());
            let kab = k.eval(&xa, &xb, false).unwrap();
            let kba = k.eval(&xb, &xa, false).unwrap();
            assert!((kab - kba).abs() < 1e-14, "{name}: {kab} vs {kba}");
        }
        let g = k.gram(&a, &a, true).unwrap();
        assert!((&g - g.transpose()).amax() < 1e-14, "{name}");
    }
}

#[test]
fn grams_are_positive_semidefinite() {
    for (name, k, d) in all_kernels() {
        let x = random_points(50, d, 11, 4.0);
        let g = k.gram(&x, &x, true).unwrap();
        let tol = -1e-8 * g.trace().max(1.0);
        assert!(min_eigenvalue(&g) >= tol, "{name}: {}", min_eigenvalue(&g));
    }
}

#[test]
fn gram_entries_match_scalar_evaluation() {
    for (name, k, d) in all_kernels() {
        let rows = random_points(7, d, 3, 2.0);
        let cols = random_points(9, d, 4, 2.0);
        let cross = k.gram(&rows, &cols, false).unwrap();
        let auto = k.gram(&rows, &rows, true).unwrap();
        let pairs = [(0, 0), (1, 5), (2, 8), (3, 3), (4, 1), (5, 7), (6, 2), (0, 6), (3, 0), (6, 8)];
        for (i, j) in pairs {
            let xi: Vec<f64> = rows.row(i).iter().copied().collect();
            let xj: Vec<f64> = cols.row(j).iter().copied().collect();
            let e = k.eval(&xi, &xj, false).unwrap();
            assert!((cross[(i, j)] - e).abs() <= 1e-14 * (1.0 + e.abs()), "{name} ({i},{j})");
            let j = j % 7;
            let xj: Vec<f64> = rows.row(j).iter().copied().collect();
            let e = k.eval(&xi, &xj, i == j).unwrap();
            assert!((auto[(i, j)] - e).abs() <= 1e-14 * (1.0 + e.abs()), "{name} auto ({i},{j})");
        }
    }
}

#[test]
fn sum_is_elementwise_addition() {
    let k1 = se2();
    let k2 = combine_product(vec![
        (Kernel::squared_exponential(0.5, vec![0.3]).unwrap(), vec![0]),
        (Kernel::squared_exponential(2.0, vec![1.1]).unwrap(), vec![1]),
    ])
    .unwrap();
    let x = random_points(5, 2, 21, 2.0);
    let g1 = k1.gram(&x, &x, true).unwrap();
    let g2 = k2.gram(&x, &x, true).unwrap();
    let gs = combine_sum(vec![k1.clone(), k2]).unwrap().gram(&x, &x, true).unwrap();
    assert!((gs - (&g1 + &g2)).amax() < 1e-12);

    let single = combine_sum(vec![k1.clone()]).unwrap().gram(&x, &x, true).unwrap();
    assert_eq!(single, g1);
    assert!(min_eigenvalue(&(&g1 + &g1)) >= -1e-8 * (2.0 * g1.trace()));
}

#[test]
fn product_on_grid_is_kronecker() {
    let kt = sdof();
    let kx = Kernel::squared_exponential(1.4, vec![0.7]).unwrap();
    let ts = [0.0, 0.13, 0.41];
    let xs = [0.25, 0.9];
    let mut pts = Vec::new();
    for t in ts {
        for x in xs {
            pts.extend([t, x]);
        }
    }
    let grid = DMatrix::from_row_slice(6, 2, &pts);
    let t = DMatrix::from_column_slice(3, 1, &ts);
    let x = DMatrix::from_column_slice(2, 1, &xs);
    let gt = kt.gram(&t, &t, true).unwrap();
    let gx = kx.gram(&x, &x, true).unwrap();
    let prod = combine_product(vec![(kt, vec![0]), (kx, vec![1])]).unwrap();
    let g = prod.gram(&grid, &grid, true).unwrap();
    assert!((g - gt.kronecker(&gx)).amax() < 1e-12);
}

#[test]
fn product_of_one_factor_is_identity() {
    let x = random_points(6, 2, 5, 1.0);
    let k = se2();
    let p = combine_product(vec![(k.clone(), vec![0, 1])]).unwrap();
    assert_eq!(p.gram(&x, &x, true).unwrap(), k.gram(&x, &x, true).unwrap());
}

#[test]
fn product_rejects_overlapping_slices() {
    let r = combine_product(vec![(se2(), vec![0, 1]), (sdof(), vec![1])]);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
    assert!(combine_product(vec![]).is_err());
    assert!(combine_sum(vec![]).is_err());
    // SE over two columns cannot sit on a one-column slice
    assert!(combine_product(vec![(se2(), vec![0])]).is_err());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let x1 = random_points(3, 1, 1, 1.0);
    let x2 = random_points(3, 2, 1, 1.0);
    assert!(se2().gram(&x1, &x1, true).is_err());
    assert!(se2().gram(&x2, &x1, false).is_err());
    assert!(sdof().gram(&x2, &x2, true).is_err());
    assert!(se2().eval(&[0.0], &[0.0], true).is_err());
}

#[test]
fn se_signal_variance_gradient_is_the_gram() {
    let k = se2();
    let x = random_points(6, 2, 8, 2.0);
    let g = k.param_gradients(&x).unwrap();
    assert_eq!(g.len(), 3);
    assert!((&g[0] - k.gram(&x, &x, true).unwrap()).amax() < 1e-15);

    let wn = Kernel::white_noise(0.37).unwrap();
    let g = wn.param_gradients(&x).unwrap();
    assert_eq!(g[0], DMatrix::from_diagonal_element(6, 6, 0.37));
}

/// Central differences in log-space, compared under relative Frobenius error.
fn check_gradients_fd(k: &Kernel, x: &DMatrix<f64>, tol: f64) {
    let analytic = k.param_gradients(x).unwrap();
    let theta = k.log_params();
    assert_eq!(analytic.len(), theta.len());
    let h = 1e-6;
    for (p, g) in analytic.iter().enumerate() {
        let mut up = theta.clone();
        up[p] += h;
        let mut dn = theta.clone();
        dn[p] -= h;
        let fd = (k.with_log_params(&up).unwrap().gram(x, x, true).unwrap()
            - k.with_log_params(&dn).unwrap().gram(x, x, true).unwrap())
            / (2.0 * h);
        let scale = fd.norm().max(1e-12);
        let rel = (g - &fd).norm() / scale;
        assert!(rel < tol, "param {} ({}): rel err {rel}", p, k.param_info()[p].name);
    }
}

#[test]
fn gradients_match_finite_differences() {
    for (name, k, d) in all_kernels() {
        for seed in 0..3 {
            let x = random_points(6, d, 100 + seed, 1.5);
            eprintln!("{name} seed {seed}");
            check_gradients_fd(&k, &x, 1e-5);
        }
    }
}

#[test]
fn log_params_roundtrip() {
    for (_, k, _) in all_kernels() {
        let back = k.with_log_params(&k.log_params()).unwrap();
        let (a, b) = (k.params(), back.params());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14 * x.abs());
        }
        assert_eq!(k.param_info().len(), k.n_params());
    }
    assert!(se2().with_log_params(&[0.0]).is_err());
}

#[test]
fn param_info_tracks_product_slices() {
    let info = product().param_info();
    assert_eq!(info[0].kind, ParamKind::NaturalFrequency { dim: 0, mode: 0, n_modes: 2 });
    assert_eq!(info[7].kind, ParamKind::LengthScale { dims: vec![1] });
    assert!(info[7].name.starts_with("product[1]."));
}

#[test]
fn kernel_toml_roundtrip() {
    #[derive(Serialize, Deserialize)]
    struct Wrap {
        kernel: Kernel,
    }
    let k = combine_sum(vec![product(), Kernel::white_noise(0.01).unwrap()]).unwrap();
    let text = toml::to_string(&Wrap { kernel: k.clone() }).unwrap();
    let back: Wrap = toml::from_str(&text).unwrap();
    assert_eq!(back.kernel, k);

    let bad = text.replace("damping_ratio = 0.05", "damping_ratio = 1.5");
    assert!(toml::from_str::<Wrap>(&bad).is_err());
}

proptest! {
    #[test]
    fn sdof_kernel_is_stationary(t1 in -50.0f64..50.0, t2 in -50.0f64..50.0, shift in -20.0f64..20.0) {
        let k = sdof();
        let a = k.eval(&[t1], &[t2], false).unwrap();
        let b = k.eval(&[t1 + shift], &[t2 + shift], false).unwrap();
        let c = eval_sdof(t1 - t2, &SdofParams::new(2.0 * PI, 0.08, 0.9).unwrap()).unwrap();
        let scale = SdofParams::new(2.0 * PI, 0.08, 0.9).unwrap().variance();
        prop_assert!((a - b).abs() < 1e-9 * scale);
        prop_assert!((a - c).abs() < 1e-9 * scale);
    }

    #[test]
    fn se_bounded_by_signal_variance(x in proptest::collection::vec(-10.0f64..10.0, 4)) {
        let k = se2();
        let v = k.eval(&x[..2], &x[2..], false).unwrap();
        prop_assert!(v > -0.0 && v <= 1.7);
    }
}
