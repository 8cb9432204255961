use riemstat::diagnostics::{lindeberg_curve, LindebergForm};
use riemstat::experiment::{run_experiment, ExperimentResult};
use riemstat::frechet::{solve, strict_local_min_certificate, Sample};
use serde::Serialize;

use crate::config::{experiment_config, read_points, with_seed, CliResult, DiagnoseConfig, Loaded, MeanConfig};
use crate::output::{num, opt, unix_now, Manifest, OutDir};
use crate::Common;

const FORMS: [LindebergForm; 2] = [LindebergForm::HalfWeighted, LindebergForm::Unweighted];

fn form_name(f: LindebergForm) -> &'static str {
    match f {
        LindebergForm::HalfWeighted => "half_weighted",
        LindebergForm::Unweighted => "unweighted",
    }
}

fn manifest(command: &str, c: &Common, loaded: &Loaded, seed: Option<u64>) -> Manifest {
    Manifest {
        command: command.into(),
        config_path: c.config.display().to_string(),
        config_hash: loaded.hash.clone(),
        root_seed: seed,
        threads: rayon::current_num_threads(),
        started_at: unix_now(),
        finished_at: 0.0,
        library_version: riemstat::VERSION.into(),
        outputs: Vec::new(),
    }
}

pub fn mean(c: &Common) -> CliResult<()> {
    let loaded = Loaded::read(&c.config)?;
    let cfg: MeanConfig = loaded.parse()?;
    let m = cfg.manifold;
    let points = read_points(&m, &loaded.relative(&cfg.points))?;
    let x0 = match &cfg.x0 {
        Some(v) => m.point(v.clone())?,
        None => points[0].clone(),
    };
    cfg.solver.validate(&m)?;
    let manifest = manifest("mean", c, &loaded, c.seed);
    let sample = Sample::new(m, points)?;
    let report = solve(&sample, &x0, &cfg.solver, cfg.method)?;

    let mut out = OutDir::create(&c.out)?;
    out.json("solve_report.json", &report)?;
    let d = report.estimate.coords().len();
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.extend(["energy", "grad_norm", "iters", "converged", "hit_ball_boundary"].map(String::from));
    let mut row: Vec<String> = report.estimate.coords().iter().map(|&v| num(v)).collect();
    row.extend([
        num(report.energy),
        num(report.final_grad_norm),
        report.iters.to_string(),
        report.converged.to_string(),
        report.hit_ball_boundary.to_string(),
    ]);
    out.csv("estimate.csv", &header, &[row])?;
    out.finish(manifest)
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    config_hash: &'a str,
    root_seed: u64,
    report: riemstat::diagnostics::Theorem52Report,
    certificate: Option<Vec<riemstat::frechet::CertificateRow>>,
}

pub fn diagnose(c: &Common) -> CliResult<()> {
    let loaded = Loaded::read(&c.config)?;
    let dc: DiagnoseConfig = loaded.parse()?;
    let cfg = with_seed(dc.experiment, c.seed)?;
    let manifest = manifest("diagnose", c, &loaded, Some(cfg.seed));
    let table = cfg.oracle_table()?;
    let report = cfg.condition_report(&table)?;
    let o = cfg.family.center();
    let certificate = match &dc.certificate {
        Some(k) => Some(strict_local_min_certificate(&table, o, k.rho0, k.rho1, k.grid, &cfg.n_schedule)?),
        None => None,
    };

    let mut out = OutDir::create(&c.out)?;

    let mut rhos: Vec<f64> = report.rows.first().map(|r| r.local_geometry.iter().map(|e| e.rho).collect()).unwrap_or_default();
    rhos.dedup();
    let mut header: Vec<String> = ["n", "phi_n", "phi_n_se", "c1", "hessian_control", "hessian_control_se", "h_tilde_inv_norm", "h_tilde_condition"]
        .map(String::from)
        .to_vec();
    for r in &rhos {
        header.push(format!("local_geometry_sup_e_{r}"));
        header.push(format!("local_geometry_e_sup_{r}"));
    }
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.n.to_string(),
                num(r.phi_n.value),
                num(r.phi_n.std_error),
                opt(r.c1),
                opt(r.hessian_control.map(|e| e.value)),
                opt(r.hessian_control.map(|e| e.std_error)),
                opt(r.h_tilde_inv_norm),
                opt(r.h_tilde_condition),
            ];
            for e in &r.local_geometry {
                v.push(num(e.sup_of_expectation));
                v.push(num(e.expectation_of_sup));
            }
            v
        })
        .collect();
    out.csv("conditions.csv", &header, &rows)?;

    let mut rows = Vec::new();
    for &eps in &cfg.epsilon_list {
        for form in FORMS {
            match lindeberg_curve(&table, o, eps, &cfg.n_schedule, form) {
                Ok(curve) => {
                    for (n, e) in curve.entries {
                        rows.push(vec![n.to_string(), num(eps), form_name(form).into(), num(e.value), num(e.std_error)]);
                    }
                }
                // Zero energy: the statistic is undefined.
                Err(riemstat::Error::DegenerateModel) => {
                    for n in &cfg.n_schedule {
                        rows.push(vec![n.to_string(), num(eps), form_name(form).into(), String::new(), String::new()]);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let header = ["n", "epsilon", "form", "value", "se"].map(String::from);
    out.csv("lindeberg.csv", &header, &rows)?;

    out.json(
        "condition_report.json",
        &DiagnoseOutput { config_hash: &loaded.hash, root_seed: cfg.seed, report, certificate },
    )?;
    out.finish(manifest)
}

pub fn experiment(c: &Common, mode: Option<&str>) -> CliResult<()> {
    let loaded = Loaded::read(&c.config)?;
    let mode = loaded.mode(mode)?;
    let cfg = experiment_config(&loaded, c.seed)?;
    let manifest = manifest("experiment", c, &loaded, Some(cfg.seed));
    let mut result = run_experiment(mode, &cfg)?;
    result.provenance.config_hash = Some(loaded.hash.clone());

    let mut out = OutDir::create(&c.out)?;
    let (header, rows) = experiment_table(&result, &cfg.epsilon_list);
    out.csv("experiment.csv", &header, &rows)?;
    out.json("result.json", &result)?;
    out.finish(manifest)
}

fn experiment_table(result: &ExperimentResult, epsilons: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = [
        "n", "replicates", "phi_n", "phi_n_se", "w1", "w1_se", "w1_baseline", "w1_baseline_se", "mean_error",
        "mean_error_se", "wlln_ratio", "wlln_ratio_se", "tail_ratio",
    ]
    .map(String::from)
    .to_vec();
    for &eps in epsilons {
        for form in FORMS {
            header.push(format!("lindeberg_{}_{eps}", form_name(form)));
            header.push(format!("lindeberg_{}_{eps}_se", form_name(form)));
        }
    }
    header.extend(["non_convergence", "cut_locus", "other_failures", "aborted"].map(String::from));

    let rows = result
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.n.to_string(),
                r.replicates.to_string(),
                num(r.phi_n.value),
                num(r.phi_n.std_error),
                opt(r.w1.map(|e| e.value)),
                opt(r.w1.map(|e| e.std_error)),
                opt(r.w1_baseline.map(|e| e.value)),
                opt(r.w1_baseline.map(|e| e.std_error)),
                opt(r.mean_error.map(|e| e.value)),
                opt(r.mean_error.map(|e| e.std_error)),
                opt(r.wlln_ratio.map(|e| e.value)),
                opt(r.wlln_ratio.map(|e| e.std_error)),
                num(r.tail_ratio),
            ];
            for &eps in epsilons {
                for form in FORMS {
                    let hit = r.lindeberg.iter().find(|l| l.epsilon == eps && l.form == form);
                    v.push(opt(hit.map(|l| l.estimate.value)));
                    v.push(opt(hit.map(|l| l.estimate.std_error)));
                }
            }
            v.extend([
                r.failures.non_convergence.to_string(),
                r.failures.cut_locus.to_string(),
                r.failures.other.to_string(),
                r.aborted.to_string(),
            ]);
            v
        })
        .collect();
    (header, rows)
}
