//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riemstat::diagnostics::{
    covariance_vn, lindeberg_comparison_check, local_lindeberg, semi_global_lindeberg, LindebergForm,
};
use riemstat::experiment::{
    euclidean_clouds, fixtures, manifold_clt_clouds, run_euclidean_approx_experiment, run_manifold_clt_experiment,
    run_wlln_experiment, DistributionFamily, ExperimentConfig, FellerVerdict,
};
use riemstat::frechet::{frechet_mean, Sample, SolverMethod, SolverOptions};
use riemstat::gaussian_transport::{ordered_sum, truncated_cost, truncated_w1_empirical, PointCloud};
use riemstat::manifold::finite_difference_hessian;
use riemstat::{Error, ManifoldKind, Point, TangentVector};

type M = ManifoldKind<f64>;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("geometry oracle suite", Some(Duration::from_secs(30)), geometry),
        ("flat reduction", None, flat_reduction),
        ("unit-trace law", None, unit_trace),
        ("Wasserstein exactness", None, wasserstein),
        ("WLLN at desk scale", Some(Duration::from_secs(300)), wlln),
        ("Euclidean central approximation", Some(Duration::from_secs(300)), euclidean_approximation),
        ("manifold CLT", Some(Duration::from_secs(600)), manifold_clt),
        ("diagnostics logic", None, diagnostics_logic),
        ("determinism", None, determinism),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = run();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > *limit {
                out.pass = false;
                out.detail.push_str(&format!("; runtime {:.1}s exceeds {}s", took.as_secs_f64(), limit.as_secs()));
            }
        }
        println!(
            "criterion {}: {} — {name} ({:.1}s): {}",
            k + 1,
            if out.pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------- 1 ----------

fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_point(m: &M, rng: &mut ChaCha8Rng) -> Point<f64> {
    m.project(gauss(rng, m.ambient_len())).unwrap()
}

fn random_tangent(m: &M, x: &Point<f64>, rng: &mut ChaCha8Rng, max_norm: f64) -> TangentVector<f64> {
    let c = gauss(rng, m.dim());
    let len = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = rng.random::<f64>() * max_norm;
    m.from_frame(&m.frame(x), &c.iter().map(|v| v * r / len).collect::<Vec<_>>())
}

fn reach(m: &M) -> f64 {
    let inj = m.injectivity_radius();
    if inj.is_finite() {
        inj - 0.1
    } else {
        3.0
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn hopf(z: &[f64]) -> Vec<f64> {
    let (a, b, c, d) = (z[0], z[1], z[2], z[3]);
    vec![2.0 * (a * c + b * d), 2.0 * (a * d - b * c), a * a + b * b - c * c - d * d]
}

fn geometry() -> Outcome {
    let families = [
        M::euclidean(3).unwrap(),
        M::sphere(2, 1.0).unwrap(),
        M::sphere(3, 2.5).unwrap(),
        M::hyperbolic(2, -1.0).unwrap(),
        M::hyperbolic(3, -0.5).unwrap(),
        M::complex_projective(1, 4.0).unwrap(),
        M::complex_projective(2, 1.0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    let (mut round_trip, mut isometry, mut hessian) = (0.0f64, 0.0f64, 0.0f64);
    for m in &families {
        for _ in 0..1000 {
            let x = random_point(m, &mut rng);
            let v = random_tangent(m, &x, &mut rng, reach(m));
            let y = m.exp(&v).unwrap();
            let l = m.log(&x, &y).unwrap();
            round_trip = round_trip.max(max_diff(l.comps(), v.comps())).max(m.dist(&m.exp(&l).unwrap(), &y).unwrap());
            let u = random_tangent(m, &x, &mut rng, 2.0);
            let w = random_tangent(m, &x, &mut rng, 2.0);
            let (pu, pw) = (m.transport(&x, &y, &u).unwrap(), m.transport(&x, &y, &w).unwrap());
            isometry = isometry.max((m.inner(&pu, &pw) - m.inner(&u, &w)).abs());
        }
        for _ in 0..200 {
            let x = random_point(m, &mut rng);
            let src = m.exp(&random_tangent(m, &x, &mut rng, reach(m))).unwrap();
            let frame = m.frame(&x);
            let h = m.hessian(&x, &src, &frame).unwrap();
            let fd = finite_difference_hessian(m, &x, &src, &frame, 1e-4);
            hessian = hessian.max(h.matrix.max_abs_diff(&fd));
        }
    }
    // ℂP¹ with κ = 4 is the round sphere of radius ½.
    let (c, s) = (M::complex_projective(1, 4.0).unwrap(), M::sphere(2, 4.0).unwrap());
    let mut cross = 0.0f64;
    for _ in 0..1000 {
        let z = random_point(&c, &mut rng);
        let w = random_point(&c, &mut rng);
        let (hz, hw) = (s.point(hopf(z.coords())).unwrap(), s.point(hopf(w.coords())).unwrap());
        cross = cross.max((c.dist(&z, &w).unwrap() - s.dist(&hz, &hw).unwrap()).abs());
        if let (Ok(a), Ok(b)) = (c.hessian(&z, &w, &c.frame(&z)), s.hessian(&hz, &hw, &s.frame(&hz))) {
            cross = cross.max(max_diff(&a.matrix.symmetric_eigen().values, &b.matrix.symmetric_eigen().values));
        }
    }
    Outcome::new(
        round_trip <= 1e-9 && isometry <= 1e-10 && hessian <= 1e-5 && cross <= 1e-9,
        format!("round trip {round_trip:.1e}, transport isometry {isometry:.1e}, Hessian vs FD {hessian:.1e}, ℂP¹≡S² {cross:.1e}"),
    )
}

// ---------- 2 ----------

fn small(fam: DistributionFamily, schedule: Vec<usize>, replicates: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(fam);
    cfg.n_schedule = schedule;
    cfg.replicates = replicates;
    cfg.seed = seed;
    cfg
}

fn flat_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1a7);
    let e = M::euclidean(3).unwrap();
    let (mut mean_err, mut newton_iters) = (0.0f64, 0usize);
    for _ in 0..100 {
        let n = rng.random_range(1..50);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| gauss(&mut rng, 3).iter().map(|v| 5.0 * v).collect()).collect();
        let mean: Vec<f64> = (0..3).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let s = Sample::new(e, pts.into_iter().map(|p| e.point(p).unwrap()).collect()).unwrap();
        for method in [SolverMethod::GradientDescent, SolverMethod::Newton] {
            let r = frechet_mean(&s, &SolverOptions::default(), method).unwrap();
            mean_err = mean_err.max(max_diff(r.estimate.coords(), &mean));
            if method == SolverMethod::Newton {
                newton_iters = newton_iters.max(r.iters);
            }
        }
    }
    // Fixtures with 2φ_n = n, so that H̃_n = I.
    let mut cloud_err = 0.0f64;
    for fam in [fixtures::euclidean_uniform_pm1(), fixtures::alternating_coordinate()] {
        let cfg = small(fam, vec![16, 64, 256], 128, 31);
        let ec = euclidean_clouds(&cfg).unwrap();
        let mc = manifold_clt_clouds(&cfg).unwrap();
        for ((_, a), (_, b, _)) in ec.iter().zip(&mc) {
            let b = b.as_ref().expect("no failures in flat space");
            for (p, q) in a.points().iter().zip(b.points()) {
                cloud_err = cloud_err.max(max_diff(p, q));
            }
        }
    }
    Outcome::new(
        mean_err <= 1e-10 && newton_iters <= 1 && cloud_err <= 1e-9,
        format!("mean error {mean_err:.1e}, Newton iterations ≤ {newton_iters}, cloud difference {cloud_err:.1e}"),
    )
}

// ---------- 3 ----------

fn unit_trace() -> Outcome {
    let mut worst = 0.0f64;
    let mut excluded = Vec::new();
    for name in fixtures::FIXTURE_NAMES {
        let fam = fixtures::by_name(name).unwrap();
        let cfg = small(fam, vec![16, 64, 256], 2, 3);
        let table = cfg.oracle_table().unwrap();
        for n in [1, 16, 64, 256] {
            match covariance_vn(&table, cfg.family.center(), cfg.family.frame(), n) {
                Ok(v) => worst = worst.max((v.trace() - 1.0).abs()),
                Err(Error::DegenerateModel) => {
                    excluded.push(name);
                    break;
                }
                Err(e) => return Outcome::new(false, format!("{name}: {e}")),
            }
        }
    }
    Outcome::new(
        worst <= 1e-9,
        format!("max |tr V_n − 1| = {worst:.1e} over all fixtures; undefined (zero energy) for {excluded:?}"),
    )
}

// ---------- 4 ----------

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

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud<f64> {
    PointCloud::new((0..n).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()).unwrap()
}

fn wasserstein() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a55);
    let mut mismatches = 0;
    let mut cases = 0;
    for n in 1..=7 {
        let perms = permutations(n);
        for _ in 0..40 {
            let d = rng.random_range(1..4);
            let a = random_cloud(&mut rng, n, d);
            let b = random_cloud(&mut rng, n, d);
            let brute = perms
                .iter()
                .map(|p| {
                    let costs = p.iter().enumerate().map(|(i, &j)| truncated_cost(&a.points()[i], &b.points()[j])).collect();
                    ordered_sum(costs) / n as f64
                })
                .fold(f64::INFINITY, f64::min);
            cases += 1;
            if truncated_w1_empirical(&a, &b).unwrap().value != brute {
                mismatches += 1;
            }
        }
    }
    let mut axiom = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let (a, b, c) = (random_cloud(&mut rng, n, 2), random_cloud(&mut rng, n, 2), random_cloud(&mut rng, n, 2));
        let w = |x: &PointCloud<f64>, y: &PointCloud<f64>| truncated_w1_empirical(x, y).unwrap().value;
        axiom = axiom.max(w(&a, &a)).max((w(&a, &b) - w(&b, &a)).abs()).max(w(&a, &c) - w(&a, &b) - w(&b, &c));
    }
    Outcome::new(
        mismatches == 0 && axiom <= 1e-12,
        format!("{mismatches}/{cases} mismatches against brute force; worst axiom violation {axiom:.1e}"),
    )
}

// ---------- 5 ----------

fn wlln() -> Outcome {
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in 1..=10u64 {
        let cfg = small(fixtures::sphere_bounded_non_iid(), vec![16, 64, 256, 1024], 256, seed);
        let r = match run_wlln_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => return Outcome::new(false, format!("seed {seed}: {e}")),
        };
        let ratio = r.rows.last().unwrap().wlln_ratio.unwrap();
        let errors: Vec<f64> = r.rows.iter().map(|row| row.mean_error.unwrap().value).collect();
        let ratio_ok = ratio.within(1.0, 3.0);
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        if ratio_ok && decreasing {
            good += 1;
        } else {
            notes.push(format!("seed {seed}: ratio {:.4}±{:.4}, decreasing {decreasing}", ratio.value, ratio.std_error));
        }
    }
    Outcome::new(good >= 9, format!("{good}/10 seeds pass {}", notes.join("; ")))
}

// ---------- 6 ----------

fn euclidean_approximation() -> Outcome {
    let cfg = small(fixtures::euclidean_uniform_pm1(), vec![16, 64, 256, 1024], 256, 61);
    let r = run_euclidean_approx_experiment(&cfg).unwrap();
    let last = r.rows.last().unwrap();
    let (w, b) = (last.w1.unwrap().value, last.w1_baseline.unwrap().value);
    let pm1 = w <= b + 0.02;

    let cfg = small(fixtures::alternating_coordinate(), vec![16, 64, 256, 1024], 256, 62);
    let r = run_euclidean_approx_experiment(&cfg).unwrap();
    let alt_margin = r
        .rows
        .iter()
        .map(|row| row.w1.unwrap().value - row.w1_baseline.unwrap().value)
        .fold(f64::NEG_INFINITY, f64::max);
    let table = cfg.oracle_table().unwrap();
    let vs: Vec<_> = cfg
        .n_schedule
        .iter()
        .map(|&n| covariance_vn(&table, cfg.family.center(), cfg.family.frame(), n).unwrap())
        .collect();
    let mut spread = 0.0f64;
    for a in &vs {
        for b in &vs {
            spread = spread.max(a.sub(b).frobenius_norm());
        }
    }
    Outcome::new(
        pm1 && alt_margin <= 0.05 && spread >= 0.5,
        format!(
            "uniform ±1 n=1024: W̃₁ {w:.4} vs baseline {b:.4}; alternating: max W̃₁ − baseline {alt_margin:.4}, max ‖V_n − V_m‖ {spread:.4}"
        ),
    )
}

// ---------- 7 ----------

fn manifold_clt() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, fam, seed) in
        [("iid", fixtures::sphere_iid_uniform_ball(), 71), ("non-iid", fixtures::sphere_bounded_non_iid(), 72)]
    {
        let cfg = small(fam, vec![512], 256, seed);
        let r = match run_manifold_clt_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => return Outcome::new(false, format!("{name}: {e}")),
        };
        let row = &r.rows[0];
        let (Some(w), Some(b)) = (row.w1, row.w1_baseline) else {
            return Outcome::new(false, format!("{name}: row aborted ({:?})", row.failures));
        };
        let cov = row.replicate_covariance.as_ref().unwrap();
        let se = row.replicate_covariance_se.as_ref().unwrap();
        let pred = &row.prediction.as_ref().unwrap().predicted_cov;
        let mut worst_z = 0.0f64;
        for i in 0..cov.rows() {
            for j in 0..cov.cols() {
                worst_z = worst_z.max((cov[(i, j)] - pred[(i, j)]).abs() / se[(i, j)]);
            }
        }
        let ok = w.value <= b.value + 0.05 && worst_z <= 3.0;
        pass &= ok;
        notes.push(format!(
            "{name}: W̃₁ {:.4} vs baseline {:.4}, worst covariance deviation {worst_z:.2} SE, hypotheses verified {:?}",
            w.value, b.value, r.hypotheses_verified
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

// ---------- 8 ----------

fn diagnostics_logic() -> Outcome {
    const LARGE_N: usize = 1 << 16;
    let mut notes = Vec::new();
    let mut pass = true;

    let bounded = ["sphere_bounded_non_iid", "sphere_iid_uniform_ball", "hyperbolic_bounded", "complex_projective_bounded", "euclidean_uniform_pm1"];
    let mut nonzero = Vec::new();
    for name in bounded {
        let cfg = small(fixtures::by_name(name).unwrap(), vec![LARGE_N], 2, 81);
        let table = cfg.oracle_table().unwrap();
        let o = cfg.family.center();
        for eps in [0.1, 0.01] {
            let local = [LindebergForm::HalfWeighted, LindebergForm::Unweighted]
                .map(|f| local_lindeberg(&table, o, eps, LARGE_N, f).unwrap().value);
            let semi = semi_global_lindeberg(&table, o, eps, LARGE_N).unwrap().value;
            if local.iter().any(|&v| v != 0.0) || semi != 0.0 {
                nonzero.push(format!("{name} ε={eps}: local {local:?}, semi {semi}"));
            }
        }
    }
    pass &= nonzero.is_empty();
    notes.push(format!("bounded fixtures at n={LARGE_N}: {} nonzero {nonzero:?}", nonzero.len()));

    let mut cfg = small(fixtures::dominating_tail(), vec![16, 64, 256], 64, 82);
    cfg.epsilon_list = vec![0.1];
    let r = run_euclidean_approx_experiment(&cfg).unwrap();
    let min_local = r
        .rows
        .iter()
        .flat_map(|row| &row.lindeberg)
        .filter(|l| l.form == LindebergForm::HalfWeighted)
        .map(|l| l.estimate.value)
        .fold(f64::INFINITY, f64::min);
    let f = r.feller.unwrap();
    let flagged = f.lindeberg_violated && f.verdict == FellerVerdict::NotApplicable;
    pass &= min_local >= 0.5 && flagged;
    notes.push(format!("dominating tail: min local Lindeberg {min_local:.3}, flagged {flagged} ({:?})", f.verdict));

    let mut violations = Vec::new();
    let mut checked = 0;
    for name in fixtures::FIXTURE_NAMES {
        // Zero energy: both statistics are undefined.
        if name == "point_mass" {
            continue;
        }
        let cfg = small(fixtures::by_name(name).unwrap(), vec![256], 2, 83);
        let table = cfg.oracle_table().unwrap();
        for n in [4, 16, 64, 256] {
            for eps in [0.5, 0.1, 0.01] {
                let c = lindeberg_comparison_check(&table, cfg.family.center(), eps, n, 3.0).unwrap();
                checked += 1;
                if !(c.upper_holds && c.lower_holds) {
                    violations.push(format!("{name} n={n} ε={eps}"));
                }
            }
        }
    }
    pass &= violations.is_empty();
    notes.push(format!("local vs semi-global comparison bounds: {} of {checked} cases violated {violations:?}", violations.len()));
    Outcome::new(pass, notes.join("; "))
}

// ---------- 9 ----------

fn run_cli(args: &[&str], config: &Path, out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_riemstat"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let fixtures_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let runs: [(&[&str], &str); 5] = [
        (&["mean"], "sphere3_mean.json"),
        (&["diagnose"], "diagnose_normal.json"),
        (&["experiment"], "wlln_sphere.json"),
        (&["experiment"], "clt_uniform_pm1.json"),
        (&["experiment"], "clt_sphere.json"),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (k, (args, config)) in runs.iter().enumerate() {
        let config = fixtures_dir.join(config);
        let mut bodies = Vec::new();
        for (r, threads) in [1, 8, 8].into_iter().enumerate() {
            let out = tmp.path().join(format!("{k}_{r}"));
            if let Err(e) = run_cli(args, &config, &out, threads) {
                return Outcome::new(false, format!("{}: {e}", config.display()));
            }
            bodies.push(csv_files(&out));
        }
        if bodies[0].is_empty() || bodies.iter().any(|b| *b != bodies[0]) {
            mismatched.push(config.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    Outcome::new(
        mismatched.is_empty(),
        format!("{} commands, CSV bodies compared at 1 vs 8 threads and across re-runs; mismatched {mismatched:?}", runs.len()),
    )
}
