//! Multivariate normal sampling and the truncated Wasserstein-1 distance with
//! cost `1 ∧ ‖u − v‖` between equal-size empirical clouds.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed;

/// Default largest cloud size accepted by the exact assignment solver.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 512;

/// Eigenvalues above this (negative) floor are rounding noise and clipped to 0.
const PSD_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct MultivariateNormal<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    #[serde(skip)]
    factor: Matrix<T>,
}

impl<T: Scalar> MultivariateNormal<T> {
    /// Validates symmetry (1e-12) and positive semi-definiteness, clipping
    /// eigenvalues in `[−1e-10, 0)` to zero.
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let d = mean.len();
        if cov.rows() != d || cov.cols() != d {
            return Err(Error::InvalidCovariance(format!(
                "covariance is {}x{} for a mean of length {d}",
                cov.rows(),
                cov.cols()
            )));
        }
        if cov.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let asym = cov.max_abs_diff(&cov.transpose());
        if asym > T::lit(1e-12) {
            return Err(Error::InvalidCovariance(format!("asymmetry {asym}")));
        }
        let eig = cov.symmetric_eigen();
        if let Some(&l) = eig.values.iter().find(|&&l| l < T::lit(PSD_FLOOR)) {
            return Err(Error::InvalidCovariance(format!("negative eigenvalue {l}")));
        }
        let factor = eig.map_values(|l| l.max(T::zero()).sqrt());
        Ok(Self { mean, cov, factor })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(vec![T::zero(); dim], Matrix::identity(dim)).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    /// `count` iid draws `mean + S z` with `S` the symmetric square root of
    /// the covariance; deterministic per seed.
    pub fn sample(&self, count: usize, seed: u64) -> PointCloud<T> {
        let mut rng = seed::stream(seed);
        let d = self.dim();
        let points = (0..count)
            .map(|_| {
                let z: Vec<T> = (0..d).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
                let mut x = self.factor.matvec(&z);
                for (xi, &mi) in x.iter_mut().zip(&self.mean) {
                    *xi += mi;
                }
                x
            })
            .collect();
        PointCloud { dim: d, points }
    }
}

/// Equal-weight empirical measure on vectors of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<T> {
    dim: usize,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::SizeMismatch(dim, p.len()));
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for p in &self.points {
            for (mi, &pi) in m.iter_mut().zip(p) {
                *mi += pi;
            }
        }
        let n = T::from_usize(self.len().max(1));
        m.iter().map(|&v| v / n).collect()
    }

    /// Sample covariance with divisor `n − 1`.
    pub fn covariance(&self) -> Matrix<T> {
        let mean = self.mean();
        let mut c = Matrix::zeros(self.dim, self.dim);
        for p in &self.points {
            let dev: Vec<T> = p.iter().zip(&mean).map(|(&a, &b)| a - b).collect();
            c.add_scaled_assign(T::one(), &Matrix::outer(&dev));
        }
        c.scale(T::one() / T::from_usize(self.len().saturating_sub(1).max(1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WassersteinMethod {
    ExactAssignment,
    Resampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEstimate<T> {
    pub value: T,
    pub method: WassersteinMethod,
    pub std_error: Option<T>,
}

/// Truncated cost `1 ∧ ‖u − v‖`.
pub fn truncated_cost<T: Scalar>(u: &[T], v: &[T]) -> T {
    let d2: T = u.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum();
    d2.sqrt().min(T::one())
}

/// Sum of a set of costs in ascending order, so that equal matchings give
/// bit-identical totals regardless of orientation.
pub fn ordered_sum<T: Scalar>(mut costs: Vec<T>) -> T {
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    costs.into_iter().fold(T::zero(), |acc, c| acc + c)
}

/// Exact truncated W₁ between equal-size clouds with the default cap.
pub fn truncated_w1_empirical<T: Scalar>(
    a: &PointCloud<T>,
    b: &PointCloud<T>,
) -> Result<WassersteinEstimate<T>> {
    truncated_w1_with_cap(a, b, DEFAULT_ASSIGNMENT_CAP)
}

pub fn truncated_w1_with_cap<T: Scalar>(
    a: &PointCloud<T>,
    b: &PointCloud<T>,
    cap: usize,
) -> Result<WassersteinEstimate<T>> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if !a.is_empty() && a.dim() != b.dim() {
        return Err(Error::SizeMismatch(a.dim(), b.dim()));
    }
    let n = a.len();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    if n == 0 {
        return Ok(WassersteinEstimate {
            value: T::zero(),
            method: WassersteinMethod::ExactAssignment,
            std_error: None,
        });
    }
    let cost: Vec<Vec<T>> = a
        .points()
        .iter()
        .map(|u| b.points().iter().map(|v| truncated_cost(u, v)).collect())
        .collect();
    let perm = min_cost_assignment(&cost);
    let total = ordered_sum(perm.iter().enumerate().map(|(i, &j)| cost[i][j]).collect());
    Ok(WassersteinEstimate {
        value: total / T::from_usize(n),
        method: WassersteinMethod::ExactAssignment,
        std_error: None,
    })
}

/// Minimum-cost perfect matching on a square cost matrix by successive
/// shortest augmenting paths with dual potentials. Returns `perm` with row
/// `i` assigned to column `perm[i]`.
pub fn min_cost_assignment<T: Scalar>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; column 0 is the virtual root.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![T::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = T::infinity();
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    perm
}

/// Mean and standard error of a list of values (`None` below two values).
pub(crate) fn mean_and_se<T: Scalar>(values: &[T]) -> (T, Option<T>) {
    let k = values.len();
    if k == 0 {
        return (T::zero(), None);
    }
    let kt = T::from_usize(k);
    let mean = values.iter().copied().sum::<T>() / kt;
    if k < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::from_usize(k - 1);
    (mean, Some((var / kt).sqrt()))
}

/// Resampled estimate of the population W̃₁ between the law behind `a` and
/// `m`: the mean over `reps` of the exact distance from `a` to a fresh
/// equal-size MVN cloud. Biased upward by the sampling noise of both clouds;
/// compare against [`mvn_self_baseline`] rather than against zero.
pub fn w1_sample_vs_mvn<T: Scalar>(
    a: &PointCloud<T>,
    m: &MultivariateNormal<T>,
    reps: usize,
    seed: u64,
) -> Result<WassersteinEstimate<T>> {
    w1_sample_vs_mvn_with_cap(a, m, reps, seed, DEFAULT_ASSIGNMENT_CAP)
}

pub fn w1_sample_vs_mvn_with_cap<T: Scalar>(
    a: &PointCloud<T>,
    m: &MultivariateNormal<T>,
    reps: usize,
    seed: u64,
    cap: usize,
) -> Result<WassersteinEstimate<T>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if !a.is_empty() && a.dim() != m.dim() {
        return Err(Error::SizeMismatch(a.dim(), m.dim()));
    }
    if a.len() > cap {
        return Err(Error::CapExceeded { size: a.len(), cap });
    }
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let b = m.sample(a.len(), seed::derive_seed(seed, r as u64, 0));
            truncated_w1_with_cap(a, &b, cap).map(|w| w.value)
        })
        .collect::<Result<Vec<T>>>()?;
    let (value, std_error) = mean_and_se(&values);
    Ok(WassersteinEstimate { value, method: WassersteinMethod::Resampled, std_error })
}

/// Same-distribution baseline: mean W̃₁ between two independent MVN clouds
/// of size `size`, over `reps` pairs.
pub fn mvn_self_baseline<T: Scalar>(
    m: &MultivariateNormal<T>,
    size: usize,
    reps: usize,
    seed: u64,
) -> Result<WassersteinEstimate<T>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let a = m.sample(size, seed::derive_seed(seed, r as u64, 1));
            let b = m.sample(size, seed::derive_seed(seed, r as u64, 2));
            truncated_w1_empirical(&a, &b).map(|w| w.value)
        })
        .collect::<Result<Vec<T>>>()?;
    let (value, std_error) = mean_and_se(&values);
    Ok(WassersteinEstimate { value, method: WassersteinMethod::Resampled, std_error })
}
