use serde::Serialize;

use super::{Family, ManifoldKind, Point, TangentFrame};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Below this value of `√|κ|·s` the curvature quotients switch to their series.
const SERIES_CUTOFF: f64 = 1e-4;

/// `f_κ(s) = √|κ|·s·C_κ(s)/S_κ(s)` (`1` when `κ = 0`).
///
/// Fails with [`Error::DomainError`] for `κ > 0`, `s ≥ π/√κ`.
pub fn f_kappa<T: Scalar>(kappa: T, s: T) -> Result<T> {
    check_domain(kappa, s)?;
    if kappa == T::zero() {
        return Ok(T::one());
    }
    let x = kappa.abs().sqrt() * s;
    if x < T::lit(SERIES_CUTOFF) {
        return Ok(T::one() - kappa * s * s * (T::one() / T::lit(3.0) + kappa * s * s / T::lit(45.0)));
    }
    Ok(if kappa > T::zero() { x * x.cos() / x.sin() } else { x * x.cosh() / x.sinh() })
}

/// `(1 − f_κ(s))/s²`, continuous at `s = 0` with limit `κ/3`.
pub fn one_minus_f_kappa_over_sq<T: Scalar>(kappa: T, s: T) -> Result<T> {
    check_domain(kappa, s)?;
    if kappa == T::zero() {
        return Ok(T::zero());
    }
    let x = kappa.abs().sqrt() * s;
    if x < T::lit(SERIES_CUTOFF) {
        return Ok(kappa / T::lit(3.0) + kappa * kappa * s * s / T::lit(45.0));
    }
    Ok((T::one() - f_kappa(kappa, s)?) / (s * s))
}

fn check_domain<T: Scalar>(kappa: T, s: T) -> Result<()> {
    if s < T::zero() || !s.is_finite() {
        return Err(Error::DomainError(format!("distance {s} must be finite and non-negative")));
    }
    if kappa > T::zero() && kappa.sqrt() * s >= T::PI() {
        return Err(Error::DomainError(format!(
            "distance {s} reaches the conjugate radius π/√κ for κ = {kappa}"
        )));
    }
    Ok(())
}

/// `H(x) = Hess ½dist(·, src)²` at `x` in a tangent frame.
#[derive(Debug, Clone, Serialize)]
pub struct HessianOperator<T> {
    pub base: Point<T>,
    pub frame: TangentFrame<T>,
    pub matrix: Matrix<T>,
}

/// Closed form from `l = Exp_x⁻¹(src)` (`r = ‖l‖`):
///
/// * constant curvature: `f_κ(r)·I + ((1 − f_κ(r))/r²)·Φ`
/// * ℂPⁿ: `f_{κ/4}(r)·I + ((1 − f_{κ/4}(r))/r²)·Φ + ((f_κ(r) − f_{κ/4}(r))/r²)·Φʲ`
///
/// so that the radial eigenvalue is 1, the `ȷ`-direction carries `f_κ` and the
/// Hermitian complement carries `f_{κ/4}`.
pub(super) fn closed_form<T: Scalar>(
    m: &ManifoldKind<T>,
    frame: &TangentFrame<T>,
    log: &[T],
) -> Result<Matrix<T>> {
    let d = frame.dim();
    let r = m.norm_raw(log);
    let kappa = m.kappa();
    let c = m.coefficients_raw(frame, log);
    match m.family() {
        Family::Euclidean | Family::Sphere | Family::Hyperbolic => {
            let f = f_kappa(kappa, r)?;
            let q = one_minus_f_kappa_over_sq(kappa, r)?;
            let mut h = Matrix::identity(d).scale(f);
            h.add_scaled_assign(q, &Matrix::outer(&c));
            Ok(h)
        }
        Family::ComplexProjective => {
            let quarter = kappa / T::lit(4.0);
            let f4 = f_kappa(quarter, r)?;
            let q4 = one_minus_f_kappa_over_sq(quarter, r)?;
            let qk = one_minus_f_kappa_over_sq(kappa, r)?;
            let jl = super::complex_projective::times_i(log);
            let cj = m.coefficients_raw(frame, &jl);
            let mut h = Matrix::identity(d).scale(f4);
            h.add_scaled_assign(q4, &Matrix::outer(&c));
            h.add_scaled_assign(q4 - qk, &Matrix::outer(&cj));
            Ok(h)
        }
    }
}

/// Central finite-difference Hessian of `a ↦ ½dist(Exp_x(Σ aᵣeᵣ), src)²` at
/// `a = 0`, i.e. the Hessian in normal coordinates. A test oracle for
/// [`ManifoldKind::hessian`]; not used by any solver.
pub fn finite_difference_hessian<T: Scalar>(
    m: &ManifoldKind<T>,
    x: &Point<T>,
    src: &Point<T>,
    frame: &TangentFrame<T>,
    step: T,
) -> Matrix<T> {
    let d = frame.dim();
    let energy = |coeffs: &[T]| {
        let v = m.from_frame(frame, coeffs);
        let y = m.exp_raw(x.coords(), v.comps());
        let r = m.dist_raw(&y, src.coords());
        T::lit(0.5) * r * r
    };
    let mut h = Matrix::zeros(d, d);
    let mut a = vec![T::zero(); d];
    let g0 = energy(&a);
    let h2 = step * step;
    for r in 0..d {
        a[r] = step;
        let gp = energy(&a);
        a[r] = -step;
        let gm = energy(&a);
        a[r] = T::zero();
        h[(r, r)] = (gp - T::lit(2.0) * g0 + gm) / h2;
        for s in (r + 1)..d {
            let mut eval = |sr: T, ss: T| {
                a[r] = sr * step;
                a[s] = ss * step;
                let g = energy(&a);
                a[r] = T::zero();
                a[s] = T::zero();
                g
            };
            let one = T::one();
            let val = (eval(one, one) - eval(one, -one) - eval(-one, one) + eval(-one, -one))
                / (T::lit(4.0) * h2);
            h[(r, s)] = val;
            h[(s, r)] = val;
        }
    }
    h
}
