use serde::{Deserialize, Serialize};

use super::ExperimentRow;
use crate::diagnostics::LindebergForm;

/// Per-`n` model functionals and the W̃₁ curve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FellerInputs {
    pub n: Vec<usize>,
    /// `E‖Y_n‖²/φ_n`.
    pub tail_ratio: Vec<f64>,
    pub phi: Vec<f64>,
    /// Unweighted local Lindeberg statistic at one ε.
    pub lindeberg: Vec<f64>,
    pub w1: Vec<f64>,
    pub w1_baseline: Vec<f64>,
}

impl FellerInputs {
    /// Collect from experiment rows, using the largest ε in `epsilons`.
    /// Rows without a W̃₁ value are skipped.
    pub fn from_rows(rows: &[ExperimentRow], epsilons: &[f64]) -> Self {
        let eps = epsilons.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Self::default();
        for r in rows {
            let (Some(w), Some(b)) = (r.w1, r.w1_baseline) else { continue };
            let lind = r
                .lindeberg
                .iter()
                .find(|l| l.epsilon == eps && l.form == LindebergForm::Unweighted)
                .map_or(f64::NAN, |l| l.estimate.value);
            out.n.push(r.n);
            out.tail_ratio.push(r.tail_ratio);
            out.phi.push(r.phi_n.value);
            out.lindeberg.push(lind);
            out.w1.push(w.value);
            out.w1_baseline.push(b.value);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FellerThresholds {
    /// Largest final `E‖Y_n‖²/φ_n` counted as vanishing.
    pub tail_ratio_max: f64,
    /// Smallest `φ_last/φ_first` counted as growing without bound.
    pub phi_growth_min: f64,
    /// Largest final Lindeberg value counted as vanishing.
    pub lindeberg_max: f64,
    /// Largest final W̃₁ excess over baseline counted as vanishing.
    pub w1_margin: f64,
}

impl Default for FellerThresholds {
    fn default() -> Self {
        Self { tail_ratio_max: 0.05, phi_growth_min: 4.0, lindeberg_max: 0.05, w1_margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FellerVerdict {
    /// The preconditions do not trend as required.
    NotApplicable,
    /// The observed trends agree with the converse.
    Consistent,
    /// Preconditions hold, Lindeberg does not vanish, yet W̃₁ does.
    Inconsistent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FellerReport {
    pub preconditions_hold: bool,
    pub lindeberg_vanishes: bool,
    pub w1_vanishes: bool,
    pub verdict: FellerVerdict,
    pub lindeberg_violated: bool,
    pub w1_fails_to_decrease: bool,
}

/// "Trends to zero" at finite `n`: the last value is at most the first and
/// at most `max`.
fn vanishes(v: &[f64], max: f64) -> bool {
    match (v.first(), v.last()) {
        (Some(a), Some(b)) => b.is_finite() && *b <= *a && *b <= max,
        _ => false,
    }
}

/// Finite-`n` contrapositive of the Feller converse.
pub fn feller_converse_check(inputs: &FellerInputs, t: &FellerThresholds) -> FellerReport {
    let phi_grows = inputs.phi.windows(2).all(|w| w[1] >= w[0])
        && match (inputs.phi.first(), inputs.phi.last()) {
            (Some(a), Some(b)) => *b >= t.phi_growth_min * a,
            _ => false,
        };
    let preconditions_hold = inputs.n.len() >= 2 && phi_grows && vanishes(&inputs.tail_ratio, t.tail_ratio_max);
    let lindeberg_vanishes = vanishes(&inputs.lindeberg, t.lindeberg_max);
    let excess_ok = match (inputs.w1.last(), inputs.w1_baseline.last()) {
        (Some(w), Some(b)) => *w <= b + t.w1_margin,
        _ => false,
    };
    let decreasing = match (inputs.w1.first(), inputs.w1.last()) {
        (Some(a), Some(b)) => b <= a,
        _ => false,
    };
    let w1_vanishes = excess_ok && decreasing;
    let verdict = if !preconditions_hold {
        FellerVerdict::NotApplicable
    } else if !lindeberg_vanishes && w1_vanishes {
        FellerVerdict::Inconsistent
    } else {
        FellerVerdict::Consistent
    };
    FellerReport {
        preconditions_hold,
        lindeberg_vanishes,
        w1_vanishes,
        verdict,
        lindeberg_violated: !lindeberg_vanishes,
        w1_fails_to_decrease: !w1_vanishes,
    }
}
