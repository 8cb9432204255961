//! Model families of independent, non-identically distributed manifold
//! random variables and the Monte Carlo experiments run on them.
//!
//! Seed streams: sample point `X_i` of replicate `r` is drawn from
//! `derive_seed(root, r, i)`, so samples are nested across the schedule.
//! Auxiliary streams use replicate slots counted down from `u64::MAX`
//! (see [`ORACLE_STREAM`], [`W1_STREAM`], [`BASELINE_STREAM`]).

mod family;
mod feller;
pub mod fixtures;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use family::{
    draw_sample, CovarianceShape, DistributionFamily, FamilySpec, OracleOptions, ScaleSchedule, TangentLaw,
};
pub use feller::{feller_converse_check, FellerInputs, FellerReport, FellerThresholds, FellerVerdict};

use crate::diagnostics::{
    aggregate_energy, clt_prediction, local_lindeberg, theorem52_condition_report, CltPrediction,
    ConditionThresholds, Estimate, LindebergForm, OracleTable, Theorem52Report,
};
use crate::error::{Error, Result};
use crate::frechet::{solve, SolverMethod, SolverOptions};
use crate::gaussian_transport::{mvn_self_baseline, w1_sample_vs_mvn_with_cap, MultivariateNormal, PointCloud};
use crate::linalg::Matrix;
use crate::manifold::Family;
use crate::seed::derive_seed;

/// Replicate slot of the oracle draw streams.
pub const ORACLE_STREAM: u64 = u64::MAX;
/// Replicate slot of the W̃₁ resampling streams (index = n).
pub const W1_STREAM: u64 = u64::MAX - 1;
/// Replicate slot of the baseline streams (index = n).
pub const BASELINE_STREAM: u64 = u64::MAX - 2;

/// Replicate solver failures above this fraction abort a manifold CLT row.
pub const ROW_ABORT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct W1Options {
    /// Resampled reference clouds per estimate.
    pub reps: usize,
    /// Largest cloud for exact assignment.
    pub cap: usize,
}

impl Default for W1Options {
    fn default() -> Self {
        Self { reps: 8, cap: crate::gaussian_transport::DEFAULT_ASSIGNMENT_CAP }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: DistributionFamily,
    #[serde(default = "default_schedule")]
    pub n_schedule: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Ball-restricted solver; the ball defaults to radius `r_max` about the
    /// family centre.
    #[serde(default)]
    pub solver: SolverOptions<f64>,
    #[serde(default = "default_method")]
    pub method: SolverMethod,
    #[serde(default)]
    pub w1: W1Options,
    #[serde(default = "default_epsilons")]
    pub epsilon_list: Vec<f64>,
    #[serde(default)]
    pub oracle: OracleOptions,
    /// Radii for the local-geometry condition (defaults to `r_max/{8,4,2}`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_list: Option<Vec<f64>>,
    #[serde(default)]
    pub thresholds: ConditionThresholds,
}

fn default_schedule() -> Vec<usize> {
    vec![16, 64, 256, 1024]
}

fn default_replicates() -> usize {
    256
}

fn default_method() -> SolverMethod {
    SolverMethod::Newton
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.01]
}

impl ExperimentConfig {
    pub fn new(family: DistributionFamily) -> Self {
        Self {
            family,
            n_schedule: default_schedule(),
            replicates: default_replicates(),
            seed: 0,
            solver: SolverOptions::default(),
            method: default_method(),
            w1: W1Options::default(),
            epsilon_list: default_epsilons(),
            oracle: OracleOptions::default(),
            rho_list: None,
            thresholds: ConditionThresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() || self.n_schedule[0] == 0 || self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("n_schedule must be non-empty, positive and increasing".into()));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidConfig("at least two replicates are needed".into()));
        }
        if self.replicates > self.w1.cap {
            return Err(Error::InvalidConfig(format!(
                "replicates ({}) exceed the W1 assignment cap ({})",
                self.replicates, self.w1.cap
            )));
        }
        if self.w1.reps == 0 {
            return Err(Error::InvalidConfig("w1.reps must be positive".into()));
        }
        if self.epsilon_list.is_empty() || self.epsilon_list.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidConfig("epsilon_list must hold positive values".into()));
        }
        let top = self.family.sigma(self.n_max());
        if !(top * top * self.n_max() as f64).is_finite() {
            return Err(Error::InvalidConfig(format!(
                "the scale schedule overflows double precision by n = {}",
                self.n_max()
            )));
        }
        self.solver_options()?.validate(self.family.manifold())
    }

    fn n_max(&self) -> usize {
        *self.n_schedule.last().expect("validated")
    }

    /// Solver options with the default ball filled in.
    pub fn solver_options(&self) -> Result<SolverOptions<f64>> {
        let mut opts = self.solver.clone();
        if opts.ball_center.is_none() {
            let r = opts.ball_radius.unwrap_or(self.family.r_max());
            if r.is_finite() {
                opts = opts.with_ball(self.family.center().clone(), r);
            } else {
                opts.ball_radius = None;
            }
        }
        Ok(opts)
    }

    /// Oracle table over `1..=n_max`; the oracle stream is derived from the root seed.
    pub fn oracle_table(&self) -> Result<OracleTable> {
        let mut opts = self.oracle.clone();
        opts.seed = derive_seed(self.seed, ORACLE_STREAM, self.oracle.seed);
        self.family.oracle_table(self.n_max(), &opts)
    }

    /// Condition report at the family centre, with Lindeberg flags at `epsilon_list`.
    pub fn condition_report(&self, table: &OracleTable) -> Result<Theorem52Report> {
        let mut thresholds = self.thresholds.clone();
        thresholds.epsilons = self.epsilon_list.clone();
        theorem52_condition_report(table, self.family.center(), self.family.frame(), &self.rhos(), &self.n_schedule, &thresholds)
    }

    fn rhos(&self) -> Vec<f64> {
        self.rho_list.clone().unwrap_or_else(|| {
            let r = self.family.r_max();
            let base = if r.is_finite() { r } else { 2.0 };
            vec![base / 8.0, base / 4.0, base / 2.0]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Wlln,
    Euclidean,
    Clt,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FailureCounts {
    pub non_convergence: usize,
    pub cut_locus: usize,
    pub other: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.non_convergence + self.cut_locus + self.other
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LindebergValue {
    pub epsilon: f64,
    pub form: LindebergForm,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub replicates: usize,
    pub phi_n: Estimate,
    pub w1: Option<Estimate>,
    pub w1_baseline: Option<Estimate>,
    pub w1_reps: usize,
    /// Mean of `dist(x̂_n, o)` over converged replicates.
    pub mean_error: Option<Estimate>,
    /// Mean of `Σ½d(X_i, o)²/φ_n(o)`; the SE includes the oracle error of `φ_n`.
    pub wlln_ratio: Option<Estimate>,
    pub lindeberg: Vec<LindebergValue>,
    pub prediction: Option<CltPrediction>,
    pub replicate_covariance: Option<Matrix<f64>>,
    pub replicate_covariance_se: Option<Matrix<f64>>,
    /// `E‖Y_n‖²/φ_n(o)` for the last index.
    pub tail_ratio: f64,
    pub failures: FailureCounts,
    pub aborted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: Option<String>,
    pub root_seed: u64,
    pub library_version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub mode: ExperimentMode,
    pub rows: Vec<ExperimentRow>,
    pub provenance: Provenance,
    /// Manifold CLT only: whether the condition report passed.
    pub hypotheses_verified: Option<bool>,
    pub condition_report: Option<Theorem52Report>,
    pub feller: Option<FellerReport>,
}

impl ExperimentResult {
    fn new(mode: ExperimentMode, cfg: &ExperimentConfig, rows: Vec<ExperimentRow>) -> Self {
        Self {
            mode,
            rows,
            provenance: Provenance {
                config_hash: None,
                root_seed: cfg.seed,
                library_version: crate::VERSION.to_string(),
            },
            hypotheses_verified: None,
            condition_report: None,
            feller: None,
        }
    }
}

/// Mean and standard error of `values`.
fn summarize(values: &[f64]) -> Option<Estimate> {
    if values.is_empty() {
        return None;
    }
    let (mean, se) = crate::gaussian_transport::mean_and_se(values);
    Some(Estimate { value: mean, std_error: se.unwrap_or(f64::NAN) })
}

fn positive_phi(table: &OracleTable, cfg: &ExperimentConfig, n: usize) -> Result<Estimate> {
    let phi = aggregate_energy(table, cfg.family.center(), n)?;
    if !(phi.value > 0.0) {
        return Err(Error::DegenerateModel);
    }
    Ok(phi)
}

fn lindeberg_values(table: &OracleTable, cfg: &ExperimentConfig, n: usize) -> Result<Vec<LindebergValue>> {
    let mut out = Vec::new();
    for &epsilon in &cfg.epsilon_list {
        for form in [LindebergForm::HalfWeighted, LindebergForm::Unweighted] {
            let estimate = local_lindeberg(table, cfg.family.center(), epsilon, n, form)?;
            out.push(LindebergValue { epsilon, form, estimate });
        }
    }
    Ok(out)
}

fn tail_ratio(table: &OracleTable, cfg: &ExperimentConfig, n: usize, phi: f64) -> f64 {
    2.0 * table.law_of(n - 1).expected_half_dist_sq(cfg.family.center()).value / phi
}

fn base_row(table: &OracleTable, cfg: &ExperimentConfig, n: usize) -> Result<ExperimentRow> {
    let phi = positive_phi(table, cfg, n)?;
    Ok(ExperimentRow {
        n,
        replicates: cfg.replicates,
        tail_ratio: tail_ratio(table, cfg, n, phi.value),
        phi_n: phi,
        w1: None,
        w1_baseline: None,
        w1_reps: cfg.w1.reps,
        mean_error: None,
        wlln_ratio: None,
        lindeberg: lindeberg_values(table, cfg, n)?,
        prediction: None,
        replicate_covariance: None,
        replicate_covariance_se: None,
        failures: FailureCounts::default(),
        aborted: false,
    })
}

enum SolveOutcome {
    Converged(crate::manifold::Point<f64>),
    NonConvergence,
    CutLocus,
    Other,
}

fn solve_replicate(cfg: &ExperimentConfig, opts: &SolverOptions<f64>, n: usize, r: usize) -> Result<SolveOutcome> {
    let sample = cfg.family.draw_replicate(n, cfg.seed, r as u64)?;
    let x0 = sample.points()[0].clone();
    Ok(match solve(&sample, &x0, opts, cfg.method) {
        Ok(rep) if rep.converged => SolveOutcome::Converged(rep.estimate),
        Ok(_) | Err(Error::NonConvergence { .. }) => SolveOutcome::NonConvergence,
        Err(Error::CutLocusAbort { .. }) | Err(Error::CutLocus { .. }) => SolveOutcome::CutLocus,
        Err(_) => SolveOutcome::Other,
    })
}

fn count_failures(outcomes: &[SolveOutcome]) -> FailureCounts {
    let mut f = FailureCounts::default();
    for o in outcomes {
        match o {
            SolveOutcome::Converged(_) => {}
            SolveOutcome::NonConvergence => f.non_convergence += 1,
            SolveOutcome::CutLocus => f.cut_locus += 1,
            SolveOutcome::Other => f.other += 1,
        }
    }
    f
}

/// Scalar law of large numbers for the energies and consistency of the
/// ball-restricted empirical Fréchet mean.
pub fn run_wlln_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let table = cfg.oracle_table()?;
    let opts = cfg.solver_options()?;
    let m = *cfg.family.manifold();
    let o = cfg.family.center();
    let mut rows = Vec::with_capacity(cfg.n_schedule.len());
    for &n in &cfg.n_schedule {
        let mut row = base_row(&table, cfg, n)?;
        let phi = row.phi_n;
        let per_rep = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let sample = cfg.family.draw_replicate(n, cfg.seed, r as u64)?;
                let energy: f64 = sample
                    .points()
                    .iter()
                    .map(|p| m.dist(p, o).map(|d| 0.5 * d * d))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .sum();
                let outcome = solve_replicate(cfg, &opts, n, r)?;
                Ok((energy / phi.value, outcome))
            })
            .collect::<Result<Vec<_>>>()?;
        let ratios: Vec<f64> = per_rep.iter().map(|(x, _)| *x).collect();
        let outcomes: Vec<SolveOutcome> = per_rep.into_iter().map(|(_, o)| o).collect();
        let errors = outcomes
            .iter()
            .filter_map(|o| match o {
                SolveOutcome::Converged(x) => Some(m.dist(x, cfg.family.center())),
                _ => None,
            })
            .collect::<Result<Vec<_>>>()?;
        row.wlln_ratio = summarize(&ratios).map(|e| Estimate {
            value: e.value,
            std_error: e.std_error.hypot(e.value * phi.std_error / phi.value),
        });
        row.mean_error = summarize(&errors);
        row.failures = count_failures(&outcomes);
        rows.push(row);
    }
    Ok(ExperimentResult::new(ExperimentMode::Wlln, cfg, rows))
}

/// Replicate clouds of the normalized sums `ΣY_i/√(2φ_n(o))` (frame
/// coordinates), one per scheduled `n`.
pub fn euclidean_clouds(cfg: &ExperimentConfig) -> Result<Vec<(usize, PointCloud<f64>)>> {
    cfg.validate()?;
    let table = cfg.oracle_table()?;
    cfg.n_schedule.iter().map(|&n| Ok((n, euclidean_cloud(cfg, &table, n)?))).collect()
}

fn euclidean_cloud(cfg: &ExperimentConfig, table: &OracleTable, n: usize) -> Result<PointCloud<f64>> {
    let phi = positive_phi(table, cfg, n)?.value;
    let scale = 1.0 / (2.0 * phi).sqrt();
    let d = cfg.family.manifold().dim();
    let points = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut s = vec![0.0; d];
            for v in cfg.family.draw_tangents(n, cfg.seed, r as u64) {
                s.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
            s.iter().map(|x| x * scale).collect()
        })
        .collect();
    PointCloud::new(points)
}

fn compare_to_mvn(cfg: &ExperimentConfig, row: &mut ExperimentRow, cloud: &PointCloud<f64>, cov: Matrix<f64>) -> Result<()> {
    let n = row.n as u64;
    let mvn = MultivariateNormal::new(vec![0.0; cloud.dim()], cov)?;
    let w = w1_sample_vs_mvn_with_cap(cloud, &mvn, cfg.w1.reps, derive_seed(cfg.seed, W1_STREAM, n), cfg.w1.cap)?;
    let b = mvn_self_baseline(&mvn, cloud.len(), cfg.w1.reps, derive_seed(cfg.seed, BASELINE_STREAM, n))?;
    row.w1 = Some(Estimate { value: w.value, std_error: w.std_error.unwrap_or(0.0) });
    row.w1_baseline = Some(Estimate { value: b.value, std_error: b.std_error.unwrap_or(0.0) });
    let (cov, se) = replicate_covariance(cloud);
    row.replicate_covariance = Some(cov);
    row.replicate_covariance_se = Some(se);
    Ok(())
}

/// Sample covariance of the cloud and entrywise standard errors from the
/// spread of the centred products.
pub fn replicate_covariance(cloud: &PointCloud<f64>) -> (Matrix<f64>, Matrix<f64>) {
    let d = cloud.dim();
    let r = cloud.len() as f64;
    let mean = cloud.mean();
    let mut cov = Matrix::zeros(d, d);
    let mut se = Matrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let z: Vec<f64> = cloud.points().iter().map(|p| (p[j] - mean[j]) * (p[k] - mean[k])).collect();
            cov[(j, k)] = z.iter().sum::<f64>() / (r - 1.0);
            let zm = z.iter().sum::<f64>() / r;
            let var = z.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / (r - 1.0);
            se[(j, k)] = (var / r).sqrt();
        }
    }
    (cov, se)
}

/// Central approximation of normalized Euclidean sums by `N(0, V_n)`.
pub fn run_euclidean_approx_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.family.manifold().family() != Family::Euclidean {
        return Err(Error::UnsupportedManifold("the Euclidean approximation experiment needs a Euclidean family".into()));
    }
    let table = cfg.oracle_table()?;
    let o = cfg.family.center();
    let frame = cfg.family.frame();
    let mut rows = Vec::with_capacity(cfg.n_schedule.len());
    for &n in &cfg.n_schedule {
        let mut row = base_row(&table, cfg, n)?;
        let pred = clt_prediction(&table, o, frame, n).ok();
        let v_n = crate::diagnostics::covariance_vn(&table, o, frame, n)?;
        let cloud = euclidean_cloud(cfg, &table, n)?;
        compare_to_mvn(cfg, &mut row, &cloud, v_n)?;
        row.prediction = pred;
        rows.push(row);
    }
    let mut result = ExperimentResult::new(ExperimentMode::Euclidean, cfg, rows);
    result.feller = Some(feller_converse_check(&FellerInputs::from_rows(&result.rows, &cfg.epsilon_list), &FellerThresholds::default()));
    Ok(result)
}

/// `(n, cloud, failures)`; the cloud is `None` for aborted rows.
pub type RowCloud = (usize, Option<PointCloud<f64>>, FailureCounts);

/// Replicate clouds of `√(2φ_n(o))·log_o(x̂_n)` (frame coordinates) with the
/// failure counts of each row.
pub fn manifold_clt_clouds(cfg: &ExperimentConfig) -> Result<Vec<RowCloud>> {
    cfg.validate()?;
    let table = cfg.oracle_table()?;
    let opts = cfg.solver_options()?;
    cfg.n_schedule.iter().map(|&n| manifold_cloud(cfg, &table, &opts, n).map(|(c, f)| (n, c, f))).collect()
}

fn manifold_cloud(
    cfg: &ExperimentConfig,
    table: &OracleTable,
    opts: &SolverOptions<f64>,
    n: usize,
) -> Result<(Option<PointCloud<f64>>, FailureCounts)> {
    let m = cfg.family.manifold();
    let o = cfg.family.center();
    let phi = positive_phi(table, cfg, n)?.value;
    let scale = (2.0 * phi).sqrt();
    let outcomes = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| solve_replicate(cfg, opts, n, r))
        .collect::<Result<Vec<_>>>()?;
    let failures = count_failures(&outcomes);
    if failures.total() as f64 > ROW_ABORT_FRACTION * cfg.replicates as f64 {
        return Ok((None, failures));
    }
    let points = outcomes
        .iter()
        .filter_map(|o_| match o_ {
            SolveOutcome::Converged(x) => Some(x),
            _ => None,
        })
        .map(|x| {
            let v = m.log(o, x)?;
            Ok(m.coefficients(cfg.family.frame(), &v).iter().map(|c| c * scale).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Some(PointCloud::new(points)?), failures))
}

/// Manifold central approximation: the cloud of `√(2φ_n(o))·log_o(x̂_n)`
/// against `N(0, H̃_n⁻¹V_nH̃_n⁻¹)`.
pub fn run_manifold_clt_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let table = cfg.oracle_table()?;
    let opts = cfg.solver_options()?;
    let o = cfg.family.center();
    let frame = cfg.family.frame();
    let report = cfg.condition_report(&table)?;
    let mut rows = Vec::with_capacity(cfg.n_schedule.len());
    for &n in &cfg.n_schedule {
        let mut row = base_row(&table, cfg, n)?;
        let pred = clt_prediction(&table, o, frame, n)?;
        let (cloud, failures) = manifold_cloud(cfg, &table, &opts, n)?;
        row.failures = failures;
        match cloud {
            Some(c) if c.len() >= 2 => compare_to_mvn(cfg, &mut row, &c, pred.predicted_cov.clone())?,
            _ => row.aborted = true,
        }
        row.prediction = Some(pred);
        rows.push(row);
    }
    let mut result = ExperimentResult::new(ExperimentMode::Clt, cfg, rows);
    result.hypotheses_verified = Some(report.all_pass);
    result.condition_report = Some(report);
    Ok(result)
}

/// Dispatch on the mode.
pub fn run_experiment(mode: ExperimentMode, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match mode {
        ExperimentMode::Wlln => run_wlln_experiment(cfg),
        ExperimentMode::Euclidean => run_euclidean_approx_experiment(cfg),
        ExperimentMode::Clt => run_manifold_clt_experiment(cfg),
    }
}
