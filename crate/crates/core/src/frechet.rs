//! Empirical energy functions and local empirical Fréchet means.
//!
//! Both solvers iterate `x ← Exp_x(η·δ)` with Armijo backtracking on the
//! empirical energy `Σ ½dist(X_i, x)²`. Gradient descent uses `δ = mean of
//! Exp_x⁻¹(X_i)`; Newton solves `(Σ H_i(x)) δ = Σ Exp_x⁻¹(X_i)` in a frame and
//! falls back to the gradient step when the summed Hessian is not safely
//! positive definite. An optional geodesic ball restricts every iterate.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{aggregate_energy, halton_ball, Estimate, OracleTable};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, CONDITION_LIMIT};
use crate::manifold::{ManifoldKind, Point, TangentVector};
use crate::scalar::{self, Scalar};

/// Fraction of cut-locus terms above which a solve is abandoned.
pub const CUT_LOCUS_ABORT_FRACTION: f64 = 0.01;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const BOUNDARY_BISECTIONS: usize = 60;

/// A realised sample `X_1, …, X_n`.
#[derive(Debug, Clone, Serialize)]
pub struct Sample<T> {
    manifold: ManifoldKind<T>,
    points: Vec<Point<T>>,
}

impl<T: Scalar> Sample<T> {
    /// Validates every point against the manifold.
    pub fn new(manifold: ManifoldKind<T>, points: Vec<Point<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("sample must be non-empty".into()));
        }
        let points = points
            .into_iter()
            .map(|p| manifold.point(p.into_coords()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifold, points })
    }

    pub fn manifold(&self) -> &ManifoldKind<T> {
        &self.manifold
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary<T> {
    /// `Σ ½dist(X_i, x)²`.
    pub value: T,
    /// `−Σ Exp_x⁻¹(X_i)` over the terms off the cut locus of `x`.
    pub gradient: TangentVector<T>,
    pub gradient_norm: T,
    pub at: Point<T>,
    /// Terms left out of the gradient because `X_i` sits on the cut locus of `x`.
    pub skipped: usize,
}

/// Empirical energy, its Riemannian gradient and the count of cut-locus terms.
pub fn empirical_energy<T: Scalar>(s: &Sample<T>, x: &Point<T>) -> Result<EnergySummary<T>> {
    let m = &s.manifold;
    let x = m.point(x.coords().to_vec())?;
    let mut value = T::zero();
    let mut grad = vec![T::zero(); m.ambient_len()];
    let mut skipped = 0;
    for p in &s.points {
        let d = m.dist_raw(x.coords(), p.coords());
        value += T::lit(0.5) * d * d;
        match m.log_raw(x.coords(), p.coords()) {
            Ok(l) => scalar::axpy(-T::one(), &l, &mut grad),
            Err(Error::CutLocus { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let gradient_norm = m.norm_raw(&grad);
    let gradient = m.project_tangent(&x, &grad);
    Ok(EnergySummary { value, gradient, gradient_norm, at: x, skipped })
}

fn energy_value<T: Scalar>(s: &Sample<T>, x: &[T]) -> T {
    s.points
        .iter()
        .map(|p| {
            let d = s.manifold.dist_raw(x, p.coords());
            T::lit(0.5) * d * d
        })
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SolverOptions<T> {
    pub max_iters: usize,
    /// Convergence threshold on `‖Σ Exp_x⁻¹(X_i)‖`.
    pub grad_tol: T,
    /// Backtracking factor in `(0, 1)`.
    pub step_shrink: T,
    pub ball_center: Option<Point<T>>,
    pub ball_radius: Option<T>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: T::lit(1e-10),
            step_shrink: T::lit(0.5),
            ball_center: None,
            ball_radius: None,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_ball(mut self, center: Point<T>, radius: T) -> Self {
        self.ball_center = Some(center);
        self.ball_radius = Some(radius);
        self
    }

    pub fn validate(&self, m: &ManifoldKind<T>) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.grad_tol > T::zero()) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        if !(self.step_shrink > T::zero() && self.step_shrink < T::one()) {
            return Err(Error::InvalidConfig("step_shrink must lie in (0, 1)".into()));
        }
        match (&self.ball_center, self.ball_radius) {
            (None, None) => Ok(()),
            (Some(c), Some(r)) => {
                m.point(c.coords().to_vec())?;
                if !(r > T::zero()) || r >= m.injectivity_radius() {
                    return Err(Error::InvalidConfig(format!(
                        "ball radius {r} must lie in (0, {})",
                        m.injectivity_radius()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::InvalidConfig("ball_center and ball_radius must be set together".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    GradientDescent,
    Newton,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport<T> {
    pub estimate: Point<T>,
    pub iters: usize,
    pub final_grad_norm: T,
    pub energy: T,
    pub converged: bool,
    pub hit_ball_boundary: bool,
    pub method: SolverMethod,
    /// Newton iterations that fell back to a gradient step because the summed
    /// Hessian was singular, indefinite or ill-conditioned.
    pub singular_hessian_fallbacks: usize,
    /// Largest number of cut-locus terms skipped at any iterate.
    pub max_skipped_terms: usize,
}

/// Gradient-descent Fréchet mean.
pub fn frechet_mean_gd<T: Scalar>(s: &Sample<T>, x0: &Point<T>, opts: &SolverOptions<T>) -> Result<SolveReport<T>> {
    solve(s, x0, opts, SolverMethod::GradientDescent)
}

/// Newton Fréchet mean.
pub fn frechet_mean_newton<T: Scalar>(
    s: &Sample<T>,
    x0: &Point<T>,
    opts: &SolverOptions<T>,
) -> Result<SolveReport<T>> {
    solve(s, x0, opts, SolverMethod::Newton)
}

/// Solve starting from the first sample point.
pub fn frechet_mean<T: Scalar>(s: &Sample<T>, opts: &SolverOptions<T>, method: SolverMethod) -> Result<SolveReport<T>> {
    let x0 = s.points[0].clone();
    solve(s, &x0, opts, method)
}

struct Ball<'a, T> {
    center: &'a Point<T>,
    radius: T,
}

pub fn solve<T: Scalar>(
    s: &Sample<T>,
    x0: &Point<T>,
    opts: &SolverOptions<T>,
    method: SolverMethod,
) -> Result<SolveReport<T>> {
    let m = &s.manifold;
    opts.validate(m)?;
    let ball = match (&opts.ball_center, opts.ball_radius) {
        (Some(c), Some(r)) => Some(Ball { center: c, radius: r }),
        _ => None,
    };
    let mut x = m.point(x0.coords().to_vec())?;
    if let Some(b) = &ball {
        if m.dist(b.center, &x)? > b.radius + T::lit(1e-12) {
            return Err(Error::InvalidConfig("starting point lies outside the ball".into()));
        }
    }
    let n = s.len();
    let mut fallbacks = 0;
    let mut max_skipped = 0;
    let mut hit_boundary = false;
    let eps = T::epsilon();
    for iter in 0..=opts.max_iters {
        let summary = empirical_energy(s, &x)?;
        max_skipped = max_skipped.max(summary.skipped);
        if summary.skipped as f64 > CUT_LOCUS_ABORT_FRACTION * n as f64 {
            return Err(Error::CutLocusAbort { skipped: summary.skipped, total: n });
        }
        let report = |converged: bool, x: Point<T>, hit: bool, fallbacks: usize| SolveReport {
            estimate: x,
            iters: iter,
            final_grad_norm: summary.gradient_norm,
            energy: summary.value,
            converged,
            hit_ball_boundary: hit,
            method,
            singular_hessian_fallbacks: fallbacks,
            max_skipped_terms: max_skipped,
        };
        if summary.gradient_norm <= opts.grad_tol {
            return Ok(report(true, x, hit_boundary, fallbacks));
        }
        if iter == opts.max_iters {
            break;
        }
        // Descent direction δ (tangent at x) and slope ⟨grad, δ⟩ < 0.
        let neg_grad: Vec<T> = summary.gradient.comps().iter().map(|&g| -g).collect();
        let gd_dir = scalar::scaled(T::one() / T::from_usize(n), &neg_grad);
        let dir = match method {
            SolverMethod::GradientDescent => gd_dir,
            SolverMethod::Newton => match newton_direction(s, &x, &neg_grad)? {
                Some(d) => d,
                None => {
                    fallbacks += 1;
                    gd_dir
                }
            },
        };
        let slope = m.inner_raw(summary.gradient.comps(), &dir);
        if !(slope < T::zero()) {
            break;
        }
        let step = line_search(s, &x, &dir, slope, summary.value, summary.gradient_norm, opts, ball.as_ref(), eps)?;
        match step {
            Some((y, clamped)) => {
                hit_boundary |= clamped;
                x = y;
            }
            None => {
                let on_boundary = ball
                    .as_ref()
                    .is_some_and(|b| m.dist_raw(b.center.coords(), x.coords()) >= b.radius * (T::one() - T::lit(1e-9)));
                if on_boundary {
                    // Stationary for the restricted problem: the descent
                    // direction points out of the ball.
                    return Ok(report(false, x, true, fallbacks));
                }
                return Err(Error::NonConvergence { iters: iter, grad_norm: summary.gradient_norm.to_f64_lossy() });
            }
        }
    }
    let last = empirical_energy(s, &x)?;
    Err(Error::NonConvergence { iters: opts.max_iters, grad_norm: last.gradient_norm.to_f64_lossy() })
}

/// Newton direction from the summed Hessian, or `None` if it is not safely
/// positive definite.
fn newton_direction<T: Scalar>(s: &Sample<T>, x: &Point<T>, neg_grad: &[T]) -> Result<Option<Vec<T>>> {
    let m = &s.manifold;
    let frame = m.frame(x);
    let d = m.dim();
    let mut h = Matrix::zeros(d, d);
    for p in &s.points {
        match m.hessian_matrix(x, p, &frame) {
            Ok(hp) => h.add_scaled_assign(T::one(), &hp),
            Err(Error::CutLocus { .. }) | Err(Error::DomainError(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let eig = h.symmetric_eigen();
    let lmin = eig.values.first().copied().unwrap_or(T::zero());
    if !(lmin > T::zero()) || !(eig.condition_number().to_f64_lossy() < CONDITION_LIMIT) {
        return Ok(None);
    }
    let inv = eig.map_values(|l| T::one() / l);
    let b = m.coefficients_raw(&frame, neg_grad);
    let delta = inv.matvec(&b);
    Ok(Some(m.from_frame(&frame, &delta).comps().to_vec()))
}

/// Armijo backtracking along `Exp_x(η·dir)`, with the step clamped to the
/// ball. Returns the accepted point and whether it was clamped.
#[allow(clippy::too_many_arguments)]
fn line_search<T: Scalar>(
    s: &Sample<T>,
    x: &Point<T>,
    dir: &[T],
    slope: T,
    e0: T,
    g0: T,
    opts: &SolverOptions<T>,
    ball: Option<&Ball<'_, T>>,
    eps: T,
) -> Result<Option<(Point<T>, bool)>> {
    let m = &s.manifold;
    let mut eta = T::one();
    let c = T::lit(ARMIJO_C);
    // Below this predicted decrease the energy difference is rounding noise.
    let resolution = T::lit(64.0) * eps * e0.max(T::min_positive_value());
    for _ in 0..MAX_BACKTRACKS {
        let (t, clamped) = match ball {
            Some(b) => clamp_to_ball(m, x, dir, eta, b),
            None => (eta, false),
        };
        if t > T::zero() {
            let v = scalar::scaled(t, dir);
            let y = m.project(m.exp_raw(x.coords(), &v))?;
            let e1 = energy_value(s, y.coords());
            let predicted = -c * t * slope;
            if e1 <= e0 - predicted && e1 < e0 {
                return Ok(Some((y, clamped)));
            }
            if predicted < resolution && e1 <= e0 + resolution {
                let g1 = empirical_energy(s, &y)?.gradient_norm;
                if g1 < g0 {
                    return Ok(Some((y, clamped)));
                }
            }
        }
        eta *= opts.step_shrink;
    }
    Ok(None)
}

/// Largest `t ≤ eta` with `Exp_x(t·dir)` inside the ball (bisection).
fn clamp_to_ball<T: Scalar>(m: &ManifoldKind<T>, x: &Point<T>, dir: &[T], eta: T, b: &Ball<'_, T>) -> (T, bool) {
    let inside = |t: T| {
        let y = m.exp_raw(x.coords(), &scalar::scaled(t, dir));
        m.dist_raw(b.center.coords(), &y) <= b.radius
    };
    if inside(eta) {
        return (eta, false);
    }
    let (mut lo, mut hi) = (T::zero(), eta);
    for _ in 0..BOUNDARY_BISECTIONS {
        let mid = T::lit(0.5) * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, true)
}

/// Estimated annulus constant for the uniform strict-local-minimum property.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateRow {
    pub n: usize,
    /// `min over the annulus grid of φ̂_n(y)/φ̂_n(o) − 1`.
    pub kappa_hat: Estimate,
    /// Coordinates (in the frame at `o`) of the minimising grid point.
    pub argmin: Vec<f64>,
    /// Negative estimates flag a violated hypothesis.
    pub violated: bool,
}

/// Grid: `grid` radii evenly spaced in `[rho0, rho1]` times a fixed direction
/// set (± frame axes and 2d Halton directions). Expectations come from the
/// oracle table, on common draws across grid points.
pub fn strict_local_min_certificate(
    table: &OracleTable,
    o: &Point<f64>,
    rho0: f64,
    rho1: f64,
    grid: usize,
    n_schedule: &[usize],
) -> Result<Vec<CertificateRow>> {
    let m = *table.manifold();
    if !(rho0 > 0.0 && rho0 <= rho1 && rho1 < m.injectivity_radius()) {
        return Err(Error::InvalidConfig(format!(
            "annulus radii must satisfy 0 < {rho0} ≤ {rho1} < injectivity radius"
        )));
    }
    if grid == 0 {
        return Err(Error::InvalidConfig("grid must contain at least one radius".into()));
    }
    let frame = m.frame(o);
    let d = m.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = sign;
            dirs.push(e);
        }
    }
    for p in halton_ball(d, 2 * d) {
        let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            dirs.push(p.iter().map(|v| v / n).collect());
        }
    }
    let radii: Vec<f64> = if grid == 1 {
        vec![rho0]
    } else {
        (0..grid).map(|k| rho0 + (rho1 - rho0) * k as f64 / (grid - 1) as f64).collect()
    };
    let mut points = Vec::new();
    for &r in &radii {
        for u in &dirs {
            let c: Vec<f64> = u.iter().map(|v| v * r).collect();
            points.push((c.clone(), m.exp(&m.from_frame(&frame, &c))?));
        }
    }
    n_schedule
        .iter()
        .map(|&n| {
            let phi_o = aggregate_energy(table, o, n)?;
            if !(phi_o.value > 0.0) {
                return Err(Error::DegenerateModel);
            }
            let mut best: Option<(Estimate, Vec<f64>)> = None;
            for (c, y) in &points {
                let r = table.energy_ratio(o, y, n)?;
                if best.as_ref().is_none_or(|(b, _)| r.value < b.value) {
                    best = Some((r, c.clone()));
                }
            }
            let (r, argmin) = best.expect("non-empty grid");
            let kappa_hat = Estimate { value: r.value - 1.0, std_error: r.std_error };
            Ok(CertificateRow { n, violated: kappa_hat.value < 0.0, kappa_hat, argmin })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCheck {
    pub point: Vec<f64>,
    /// `φ_n(y)`.
    pub lhs: f64,
    /// `dist(y, o)²·n/16`.
    pub rhs: f64,
    pub pass: bool,
}

/// Linear-growth bound for the empirical energy of a sample (`n = |sample|`).
pub fn growth_bound_check_sample(s: &Sample<f64>, o: &Point<f64>, test_points: &[Point<f64>]) -> Result<Vec<GrowthCheck>> {
    let m = s.manifold();
    let n = s.len() as f64;
    test_points
        .iter()
        .map(|y| {
            let lhs = energy_value(s, y.coords());
            let rhs = m.dist(y, o)?.powi(2) * n / 16.0;
            Ok(GrowthCheck { point: y.coords().to_vec(), lhs, rhs, pass: lhs >= rhs })
        })
        .collect()
}

/// Linear-growth bound for the model aggregate energy over the first `n` laws.
pub fn growth_bound_check_model(
    table: &OracleTable,
    n: usize,
    o: &Point<f64>,
    test_points: &[Point<f64>],
) -> Result<Vec<GrowthCheck>> {
    let m = *table.manifold();
    test_points
        .iter()
        .map(|y| {
            let lhs = aggregate_energy(table, y, n)?.value;
            let rhs = m.dist(y, o)?.powi(2) * n as f64 / 16.0;
            Ok(GrowthCheck { point: y.coords().to_vec(), lhs, rhs, pass: lhs >= rhs })
        })
        .collect()
}
