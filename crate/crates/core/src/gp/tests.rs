use super::*;
use crate::kernel::{combine_product, combine_sum, ModalSet, SdofParams, SeParams};
use crate::testutil::{random_points, random_vector};
use std::f64::consts::PI;

fn se_noise(noise: f64) -> Kernel {
    Kernel::se_with_noise(&SeParams::new(1.3, vec![0.7, 1.1], noise).unwrap()).unwrap()
}

fn dataset(n: usize, seed: u64) -> TrainingSet {
    TrainingSet::new(random_points(n, 2, seed, 3.0), random_vector(n, seed + 1000)).unwrap()
}

fn dense_system(kernel: &Kernel, data: &TrainingSet) -> DMatrix<f64> {
    let n = data.len();
    DMatrix::from_fn(n, n, |i, j| {
        let a: Vec<f64> = data.x().row(i).iter().copied().collect();
        let b: Vec<f64> = data.x().row(j).iter().copied().collect();
        kernel.eval(&a, &b, i == j).unwrap()
    })
}

#[test]
fn single_point_factor_is_scalar_root() {
    let data = TrainingSet::new(DMatrix::from_row_slice(1, 2, &[0.3, 0.1]), DVector::from_element(1, 0.4)).unwrap();
    let gp = fit(&se_noise(0.2), &MeanFunction::Zero, &data).unwrap();
    assert_eq!(gp.jitter_used(), 0.0);
    assert!((gp.factor()[(0, 0)] - 1.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn training_set_rejects_bad_input() {
    assert!(TrainingSet::new(DMatrix::zeros(0, 1), DVector::zeros(0)).is_err());
    assert!(TrainingSet::new(DMatrix::zeros(3, 1), DVector::zeros(2)).is_err());
    let mut x = DMatrix::zeros(2, 1);
    x[(1, 0)] = f64::NAN;
    assert!(TrainingSet::new(x, DVector::zeros(2)).is_err());
}

#[test]
fn weights_match_explicit_inverse() {
    let data = dataset(8, 3);
    let k = se_noise(0.05);
    let gp = fit(&k, &MeanFunction::Zero, &data).unwrap();
    let kd = dense_system(&k, &data);
    let oracle = kd.clone().try_inverse().unwrap() * data.y();
    assert!((gp.weights() - oracle).amax() < 1e-8);
    let l = gp.factor();
    assert!((&l * l.transpose() - &kd).norm() / kd.norm() < 1e-8);
}

#[test]
fn duplicate_rows_without_noise() {
    let mut x = random_points(6, 2, 4, 2.0);
    let dup = x.row(1).clone_owned();
    x.set_row(4, &dup);
    let data = TrainingSet::new(x, random_vector(6, 5)).unwrap();
    let k = Kernel::squared_exponential(1.0, vec![0.5, 0.5]).unwrap();

    let strict = FitOptions { jitter_ladder: vec![0.0] };
    match fit_with(&k, &MeanFunction::Zero, &data, &strict) {
        Err(Error::IllConditioned { jitter_ladder }) => assert_eq!(jitter_ladder, vec![0.0]),
        other => panic!("expected ill-conditioned error, got {other:?}"),
    }
    // the default ladder rescues the singular Gram and reports what it added
    let gp = fit(&k, &MeanFunction::Zero, &data).unwrap();
    assert!(gp.jitter_used() > 0.0);
}

#[test]
fn prediction_reverts_to_prior_far_from_data() {
    let data = dataset(10, 6);
    let mean = MeanFunction::linear(vec![0.5], -1.0, vec![1]).unwrap();
    let k = se_noise(0.01);
    let gp = fit(&k, &mean, &data).unwrap();
    let far = DMatrix::from_row_slice(2, 2, &[500.0, 40.0, -300.0, 700.0]);
    let p = gp.predict(&far, false).unwrap();
    let prior = mean.eval(&far).unwrap();
    assert!((&p.mean - prior).amax() < 1e-12);
    assert!((p.variance.add_scalar(-1.3)).amax() < 1e-12);
}

#[test]
fn noise_free_interpolation() {
    let data = dataset(7, 7);
    let k = Kernel::squared_exponential(1.0, vec![0.8, 0.8]).unwrap();
    let gp = fit(&k, &MeanFunction::Zero, &data).unwrap();
    let p = gp.predict(&data.x().rows(2, 1).into_owned(), false).unwrap();
    assert!((p.mean[0] - data.y()[2]).abs() < 1e-6);
    assert!(p.variance[0] <= 1e-8);
}

#[test]
fn posterior_matches_dense_formula() {
    let data = dataset(12, 8);
    let k = se_noise(0.1);
    let mean = MeanFunction::linear(vec![0.3, -0.2], 0.5, vec![0, 1]).unwrap();
    let gp = fit(&k, &mean, &data).unwrap();
    let xs = random_points(9, 2, 9, 3.0);
    let p = gp.predict(&xs, true).unwrap();

    let kinv = dense_system(&k, &data).try_inverse().unwrap();
    let ks = k.gram(&xs, data.x(), false).unwrap();
    let kss = k.gram(&xs, &xs, false).unwrap();
    let r = data.y() - mean.eval(data.x()).unwrap();
    let mu = mean.eval(&xs).unwrap() + &ks * &kinv * r;
    let cov = &kss - &ks * &kinv * ks.transpose();
    assert!((&p.mean - mu).amax() < 1e-8);
    let full = p.full_covariance.unwrap();
    assert!((&full - &cov).amax() < 1e-8);
    assert!((full.diagonal() - &p.variance).amax() == 0.0);

    let diag_only = gp.predict(&xs, false).unwrap();
    assert!((diag_only.variance - p.variance).amax() < 1e-12);
}

#[test]
fn noise_add_back_is_per_point() {
    let data = dataset(5, 10);
    let gp = fit(&se_noise(0.25), &MeanFunction::Zero, &data).unwrap();
    let nv = gp.noise_variance_at(&random_points(3, 2, 1, 1.0)).unwrap();
    assert!((nv.add_scalar(-0.25)).amax() < 1e-15);
}

#[test]
fn lml_of_single_point() {
    let data = TrainingSet::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0]), DVector::from_element(1, 0.7)).unwrap();
    let (v, _) = log_marginal_likelihood(&se_noise(0.2), &MeanFunction::Zero, &data).unwrap();
    let tv = 1.5;
    let expect = -0.5 * 0.49 / tv - 0.5 * f64::ln(tv) - 0.5 * (2.0 * PI).ln();
    assert!((v - expect).abs() < 1e-14);
}

#[test]
fn lml_matches_dense_computation() {
    let data = dataset(10, 11);
    let k = se_noise(0.07);
    let mean = MeanFunction::linear(vec![1.0], 0.2, vec![0]).unwrap();
    let (v, _) = log_marginal_likelihood(&k, &mean, &data).unwrap();
    let kd = dense_system(&k, &data);
    let r = data.y() - mean.eval(data.x()).unwrap();
    let quad = (r.transpose() * kd.clone().try_inverse().unwrap() * &r)[0];
    let expect = -0.5 * quad - 0.5 * kd.determinant().ln() - 5.0 * (2.0 * PI).ln();
    assert!((v - expect).abs() < 1e-8);
}

fn gradient_families() -> Vec<(&'static str, Kernel, TrainingSet)> {
    let wn = |v| Kernel::white_noise(v).unwrap();
    let t = random_points(12, 1, 21, 4.0);
    let y1 = random_vector(12, 22);
    let ts = TrainingSet::new(t, y1).unwrap();
    let xt = random_points(12, 2, 23, 2.0);
    let y2 = random_vector(12, 24);
    let st = TrainingSet::new(xt, y2).unwrap();
    let sdof = Kernel::sdof(SdofParams::new(4.0, 0.1, 20.0).unwrap());
    let mdof = Kernel::mdof(
        ModalSet::new(vec![SdofParams::new(2.0, 0.1, 1.0).unwrap(), SdofParams::new(6.0, 0.2, 30.0).unwrap()]).unwrap(),
    );
    let prod = combine_product(vec![
        (mdof.clone(), vec![0]),
        (Kernel::squared_exponential(1.0, vec![0.8]).unwrap(), vec![1]),
    ])
    .unwrap();
    vec![
        ("se", se_noise(0.1), dataset(12, 20)),
        ("sdof", combine_sum(vec![sdof, wn(0.05)]).unwrap(), ts.clone()),
        ("mdof", combine_sum(vec![mdof, wn(0.05)]).unwrap(), ts),
        ("product", combine_sum(vec![prod, wn(0.05)]).unwrap(), st),
    ]
}

#[test]
fn lml_gradient_matches_finite_differences() {
    for (name, k, data) in gradient_families() {
        let (_, g) = log_marginal_likelihood(&k, &MeanFunction::Zero, &data).unwrap();
        let theta = k.log_params();
        let h = 1e-6;
        let fd = DVector::from_fn(theta.len(), |p, _| {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[p] += h;
            dn[p] -= h;
            let f = |t: &[f64]| log_marginal_likelihood(&k.with_log_params(t).unwrap(), &MeanFunction::Zero, &data).unwrap().0;
            (f(&up) - f(&dn)) / (2.0 * h)
        });
        let rel = (&g - &fd).norm() / fd.norm().max(1e-12);
        assert!(rel < 1e-4, "{name}: {rel}\n{g}\n{fd}");
    }
}

#[test]
fn posterior_variance_bounded_by_prior_and_shrinks_with_data() {
    let data = dataset(20, 30);
    let k = se_noise(0.05);
    let xs = random_points(15, 2, 31, 3.0);
    let mut last: Option<DVector<f64>> = None;
    for n in [1, 5, 10, 20] {
        let idx: Vec<usize> = (0..n).collect();
        let gp = fit(&k, &MeanFunction::Zero, &data.select(&idx)).unwrap();
        let v = gp.predict(&xs, false).unwrap().variance;
        assert!(v.iter().all(|&vi| vi <= 1.3 + 1e-10));
        if let Some(prev) = &last {
            assert!(v.iter().zip(prev.iter()).all(|(a, b)| *a <= b + 1e-10));
        }
        last = Some(v);
    }
}

#[test]
fn invariant_under_row_permutation() {
    let data = dataset(15, 40);
    let k = se_noise(0.1);
    let perm: Vec<usize> = (0..15).map(|i| (i * 7) % 15).collect();
    let shuffled = data.select(&perm);
    let xs = random_points(6, 2, 41, 3.0);
    let a = fit(&k, &MeanFunction::Zero, &data).unwrap().predict(&xs, true).unwrap();
    let b = fit(&k, &MeanFunction::Zero, &shuffled).unwrap().predict(&xs, true).unwrap();
    assert!((&a.mean - &b.mean).amax() < 1e-8);
    assert!((a.full_covariance.unwrap() - b.full_covariance.unwrap()).amax() < 1e-8);
    let la = log_marginal_likelihood(&k, &MeanFunction::Zero, &data).unwrap();
    let lb = log_marginal_likelihood(&k, &MeanFunction::Zero, &shuffled).unwrap();
    assert!((la.0 - lb.0).abs() < 1e-8);
    assert!((la.1 - lb.1).amax() < 1e-8);
}

#[test]
fn mean_shift_equivalence() {
    for seed in 0..5 {
        let data = dataset(14, 50 + seed);
        let k = se_noise(0.03);
        let mean = MeanFunction::linear(vec![0.8, -1.4], 2.5, vec![0, 1]).unwrap();
        let xs = random_points(8, 2, 60 + seed, 3.0);
        let with_mean = fit(&k, &mean, &data).unwrap().predict(&xs, true).unwrap();

        let shifted = TrainingSet::new(data.x().clone(), data.y() - mean.eval(data.x()).unwrap()).unwrap();
        let zero = fit(&k, &MeanFunction::Zero, &shifted).unwrap().predict(&xs, true).unwrap();
        let restored = zero.mean + mean.eval(&xs).unwrap();
        assert!((&with_mean.mean - restored).amax() < 1e-10);
        assert!((with_mean.full_covariance.unwrap() - zero.full_covariance.unwrap()).amax() < 1e-10);
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let data = dataset(4, 70);
    let gp = fit(&se_noise(0.1), &MeanFunction::Zero, &data).unwrap();
    assert!(matches!(gp.predict(&DMatrix::zeros(2, 3), false), Err(Error::InvalidArgument(_))));
    let k1 = Kernel::squared_exponential(1.0, vec![1.0]).unwrap();
    assert!(fit(&k1, &MeanFunction::Zero, &data).is_err());
}
