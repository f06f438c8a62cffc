use rdim::geometry::{
    ellipsoidal_proj_metric, iso_check, proj_distance, sample_grassmannian, Subspace,
};
use rdim::linalg::qr_orthonormalize;
use rdim::network::{forward_with_hooks, lipschitz_surrogates, FcnModel};
use rdim::{Matrix, Rng};

/// Kolmogorov-Smirnov statistic of `samples` against U[0, 1).
fn ks_uniform(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

fn line_angle(s: &Subspace) -> f64 {
    let (x, y) = (s.frame().get(0, 0), s.frame().get(1, 0));
    y.atan2(x).rem_euclid(std::f64::consts::PI) / std::f64::consts::PI
}

#[test]
fn lines_in_the_plane_are_uniform() {
    let mut rng = Rng::new(41);
    let angles: Vec<f64> = (0..10_000)
        .map(|_| line_angle(&sample_grassmannian(2, 1, &mut rng).unwrap()))
        .collect();
    // Critical value for p = 0.01 is 1.628/√n.
    let d = ks_uniform(angles);
    assert!(d < 1.628 / 100.0, "KS statistic {d}");
}

#[test]
fn rotated_draws_stay_uniform() {
    let mut rng = Rng::new(42);
    let rot = qr_orthonormalize(&rng.normal_matrix(2, 2, 1.0)).unwrap();
    let angles: Vec<f64> = (0..10_000)
        .map(|_| {
            let s = sample_grassmannian(2, 1, &mut rng).unwrap();
            line_angle(&Subspace::from_frame(rot.matmul(s.frame()).unwrap()).unwrap())
        })
        .collect();
    assert!(ks_uniform(angles) < 1.628 / 100.0);
}

#[test]
fn projector_ignores_frame_rotation() {
    let mut rng = Rng::new(43);
    for _ in 0..50 {
        let d = 2 + rng.below(7);
        let r = 1 + rng.below(d);
        let v = sample_grassmannian(d, r, &mut rng).unwrap();
        let q = qr_orthonormalize(&rng.normal_matrix(r, r, 1.0)).unwrap();
        let w = Subspace::from_frame(v.frame().matmul(&q).unwrap()).unwrap();
        assert!(v.projector().max_abs_diff(&w.projector()) < 1e-10);
        let p = v.projector();
        assert!(p.matmul(&p).unwrap().max_abs_diff(&p) < 1e-9);
    }
}

#[test]
fn isotropic_metric_is_bounded() {
    let mut rng = Rng::new(44);
    for _ in 0..100 {
        let d = 2 + rng.below(6);
        let r = 1 + rng.below(d - 1);
        let a = sample_grassmannian(d, r, &mut rng).unwrap();
        let b = sample_grassmannian(d, r, &mut rng).unwrap();
        let rho = proj_distance(&a, &b).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&rho));
        assert!(proj_distance(&a, &a).unwrap() < 1e-12);
        let via_sigma = ellipsoidal_proj_metric(&a, &b, &Matrix::identity(d)).unwrap();
        assert!((via_sigma - rho).abs() < 1e-10);
    }
}

#[test]
fn iso_check_is_symmetric_for_identical_samples() {
    let mut rng = Rng::new(45);
    let model = FcnModel::kaiming_uniform(&[4, 7, 7, 2], &mut rng).unwrap();
    let lip = lipschitz_surrogates(&model).unwrap();
    let x = rng.normal_matrix(4, 30, 1.0);
    let f = forward_with_hooks(&model, &x).unwrap();
    let g = forward_with_hooks(&model, &x).unwrap();
    let a = iso_check(&f, &g, &model, &lip, 0.3).unwrap();
    let b = iso_check(&g, &f, &model, &lip, 0.3).unwrap();
    assert_eq!(a, b);
    for l in &a.per_layer {
        assert!(l.theta > 0.0 && l.kappa_hat >= 0.0 && l.b_sub_hat >= 0.0);
    }
}

#[test]
fn iso_check_on_disjoint_halves_is_finite() {
    let mut rng = Rng::new(46);
    let model = FcnModel::kaiming_uniform(&[3, 8, 2], &mut rng).unwrap();
    let lip = lipschitz_surrogates(&model).unwrap();
    let x = rng.normal_matrix(3, 60, 1.0);
    let first: Vec<usize> = (0..30).collect();
    let second: Vec<usize> = (30..60).collect();
    let f = forward_with_hooks(&model, &x.select_columns(&first)).unwrap();
    let g = forward_with_hooks(&model, &x.select_columns(&second)).unwrap();
    let cert = iso_check(&f, &g, &model, &lip, 0.05).unwrap();
    for l in &cert.per_layer {
        assert!(l.active_dim > 0);
        assert!(l.kappa_hat.is_finite() && l.kappa_hat > 0.0);
        assert!(l.b_sub_hat.is_finite());
    }
    let huge = iso_check(&f, &g, &model, &lip, 1e6).unwrap();
    assert!(huge.per_layer.iter().all(|l| l.degenerate && l.kappa_hat == 0.0));
}
