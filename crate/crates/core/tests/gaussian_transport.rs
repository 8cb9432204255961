use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riemstat::gaussian_transport::*;
use riemstat::{Error, Matrix};

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> PointCloud<f64> {
    PointCloud::new((0..n).map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect()).collect())
        .unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force(a: &PointCloud<f64>, b: &PointCloud<f64>) -> f64 {
    let n = a.len();
    permutations(n)
        .into_iter()
        .map(|p| {
            let costs = p.iter().enumerate().map(|(i, &j)| truncated_cost(&a.points()[i], &b.points()[j])).collect();
            ordered_sum(costs) / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn identical_clouds_are_at_distance_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_cloud(&mut rng, 20, 3, 2.0);
    assert_eq!(truncated_w1_empirical(&a, &a).unwrap().value, 0.0);
    let mut shuffled = a.points().to_vec();
    shuffled.reverse();
    let b = PointCloud::new(shuffled).unwrap();
    assert_eq!(truncated_w1_empirical(&a, &b).unwrap().value, 0.0);
}

#[test]
fn singleton_clouds() {
    let a = PointCloud::<f64>::new(vec![vec![0.0, 0.0]]).unwrap();
    let b = PointCloud::new(vec![vec![0.3, 0.4]]).unwrap();
    assert!((truncated_w1_empirical(&a, &b).unwrap().value - 0.5).abs() < 1e-15);
    let c = PointCloud::new(vec![vec![3.0, 4.0]]).unwrap();
    assert_eq!(truncated_w1_empirical(&a, &c).unwrap().value, 1.0);
}

#[test]
fn six_point_clouds_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let a = random_cloud(&mut rng, 6, 2, 1.0);
        let b = random_cloud(&mut rng, 6, 2, 1.0);
        assert_eq!(truncated_w1_empirical(&a, &b).unwrap().value, brute_force(&a, &b));
    }
}

#[test]
fn small_clouds_match_brute_force_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=7 {
        for _ in 0..10 {
            let a = random_cloud(&mut rng, n, 3, 1.5);
            let b = random_cloud(&mut rng, n, 3, 1.5);
            assert_eq!(truncated_w1_empirical(&a, &b).unwrap().value, brute_force(&a, &b), "n = {n}");
        }
    }
}

#[test]
fn metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let a = random_cloud(&mut rng, n, 2, 1.0);
        let b = random_cloud(&mut rng, n, 2, 1.0);
        let c = random_cloud(&mut rng, n, 2, 1.0);
        let ab = truncated_w1_empirical(&a, &b).unwrap().value;
        let ba = truncated_w1_empirical(&b, &a).unwrap().value;
        let bc = truncated_w1_empirical(&b, &c).unwrap().value;
        let ac = truncated_w1_empirical(&a, &c).unwrap().value;
        assert_eq!(ab, ba);
        assert!(ac <= ab + bc + 1e-12);
        assert!((0.0..=1.0).contains(&ab));
        assert!(ab > 0.0);
    }
}

#[test]
fn kantorovich_rubinstein_lower_bound() {
    // Coordinate ramps clipped to [0, 1] are 1-Lipschitz for 1 ∧ ‖·‖.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let a = random_cloud(&mut rng, 30, 3, 1.5);
        let b = random_cloud(&mut rng, 30, 3, 1.5);
        let w = truncated_w1_empirical(&a, &b).unwrap().value;
        for k in 0..3 {
            for t in [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0] {
                for sign in [1.0, -1.0] {
                    let f = |p: &Vec<f64>| (sign * p[k] - t).clamp(0.0, 1.0);
                    let ma = a.points().iter().map(f).sum::<f64>() / 30.0;
                    let mb = b.points().iter().map(f).sum::<f64>() / 30.0;
                    assert!((ma - mb).abs() <= w + 1e-12);
                }
            }
        }
    }
}

#[test]
fn size_mismatch_and_cap() {
    let a = PointCloud::new(vec![vec![0.0]; 3]).unwrap();
    let b = PointCloud::new(vec![vec![0.0]; 4]).unwrap();
    assert!(matches!(truncated_w1_empirical(&a, &b), Err(Error::SizeMismatch(3, 4))));
    let big = PointCloud::new(vec![vec![0.0]; 513]).unwrap();
    assert!(matches!(truncated_w1_empirical(&big, &big), Err(Error::CapExceeded { size: 513, cap: 512 })));
    assert!(truncated_w1_with_cap(&a, &a, 2).is_err());
    assert!(PointCloud::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
}

#[test]
fn zero_covariance_samples_the_mean() {
    let m = MultivariateNormal::new(vec![1.0, -2.0], Matrix::zeros(2, 2)).unwrap();
    let c = m.sample(10, 7);
    assert!(c.points().iter().all(|p| p == &vec![1.0, -2.0]));
}

#[test]
fn unit_variance_sample() {
    let m = MultivariateNormal::<f64>::standard(1);
    let c = m.sample(100_000, 8);
    let var = c.covariance()[(0, 0)];
    assert!((0.97..=1.03).contains(&var), "{var}");
}

#[test]
fn degenerate_direction_is_constant() {
    let m = MultivariateNormal::new(vec![0.0, 5.0], Matrix::from_diag(&[1.0, 0.0])).unwrap();
    let c = m.sample(1000, 9);
    assert!(c.points().iter().all(|p| p[1] == 5.0));
}

#[test]
fn covariance_validation() {
    let bad = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
    assert!(matches!(MultivariateNormal::new(vec![0.0, 0.0], bad), Err(Error::InvalidCovariance(_))));
    let neg = Matrix::from_diag(&[1.0, -1e-3]);
    assert!(MultivariateNormal::new(vec![0.0, 0.0], neg).is_err());
    let tiny = Matrix::from_diag(&[1.0, -1e-11]);
    assert!(MultivariateNormal::new(vec![0.0, 0.0], tiny).is_ok());
}

#[test]
fn sampling_is_deterministic_and_correlated() {
    let cov = Matrix::from_rows(&[vec![2.0, 0.8], vec![0.8, 1.0]]).unwrap();
    let m = MultivariateNormal::new(vec![0.0, 0.0], cov.clone()).unwrap();
    assert_eq!(m.sample(50, 10), m.sample(50, 10));
    assert_ne!(m.sample(50, 10), m.sample(50, 11));
    let c = m.sample(100_000, 12).covariance();
    assert!(c.max_abs_diff(&cov) < 0.05);
}

#[test]
fn sample_from_the_model_is_within_baseline() {
    let m = MultivariateNormal::<f64>::standard(2);
    let a = m.sample(256, 100);
    let est = w1_sample_vs_mvn(&a, &m, 8, 101).unwrap();
    let base = mvn_self_baseline(&m, 256, 8, 102).unwrap();
    assert_eq!(est.method, WassersteinMethod::Resampled);
    let se = est.std_error.unwrap().hypot(base.std_error.unwrap());
    assert!(est.value <= base.value + 3.0 * se, "{} vs {} ± {se}", est.value, base.value);
}

#[test]
fn point_mass_against_itself() {
    let m = MultivariateNormal::new(vec![0.5, 0.5], Matrix::zeros(2, 2)).unwrap();
    let a = PointCloud::new(vec![vec![0.5, 0.5]; 64]).unwrap();
    assert_eq!(w1_sample_vs_mvn(&a, &m, 4, 1).unwrap().value, 0.0);
}

#[test]
fn shifted_cloud_saturates() {
    // With spread small against the shift nearly every matched pair costs 1.
    let m = MultivariateNormal::new(vec![0.0, 0.0], Matrix::from_diag(&[0.05, 0.05])).unwrap();
    let shifted = PointCloud::new(
        m.sample(256, 200).points().iter().map(|p| vec![p[0] + 2.0, p[1]]).collect(),
    )
    .unwrap();
    let est = w1_sample_vs_mvn(&shifted, &m, 4, 201).unwrap();
    assert!(est.value >= 0.8, "{}", est.value);
}

#[test]
fn shifted_unit_normal_meets_ramp_bound() {
    // For unit covariance the population distance is only about 0.67: the ramp
    // u ↦ clamp(u₁ − 0.5, 0, 1) separates N(0, I) and N(2e₁, I) by
    // ∫_{0.5}^{1.5} (Φ(s) − Φ(s − 2)) ds ≈ 0.663.
    let m = MultivariateNormal::<f64>::standard(2);
    let shifted = PointCloud::new(
        m.sample(256, 200).points().iter().map(|p| vec![p[0] + 2.0, p[1]]).collect(),
    )
    .unwrap();
    let est = w1_sample_vs_mvn(&shifted, &m, 4, 201).unwrap();
    assert!(est.value >= 0.6 && est.value < 0.8, "{}", est.value);
}

#[test]
fn single_precision_assignment() {
    let a = PointCloud::<f32>::new(vec![vec![0.0], vec![1.0]]).unwrap();
    let b = PointCloud::<f32>::new(vec![vec![1.1], vec![0.1]]).unwrap();
    assert!((truncated_w1_empirical(&a, &b).unwrap().value - 0.1).abs() < 1e-6);
}
