//! Round sphere of radius `R = 1/√κ`, embedded as the unit sphere of ℝ^{d+1};
//! tangent components are in metric units (scaled by `R`).

use crate::scalar::{self, Scalar};

/// Central angle between two unit vectors, accurate for nearby points.
pub(super) fn angle<T: Scalar>(x: &[T], y: &[T]) -> T {
    let c = scalar::dot(x, y);
    let s = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let u = b - c * a;
            u * u
        })
        .sum::<T>()
        .sqrt();
    s.atan2(c)
}

pub(super) fn exp<T: Scalar>(radius: T, x: &[T], v: &[T]) -> Vec<T> {
    let nv = scalar::norm(v);
    if nv == T::zero() {
        return x.to_vec();
    }
    let theta = nv / radius;
    let (s, c) = theta.sin_cos();
    let k = s / nv;
    let y: Vec<T> = x.iter().zip(v).map(|(&a, &b)| c * a + k * b).collect();
    let n = scalar::norm(&y);
    scalar::scaled(T::one() / n, &y)
}

/// Returns the central angle and `Exp_x⁻¹(y)`.
pub(super) fn log<T: Scalar>(radius: T, x: &[T], y: &[T]) -> (T, Vec<T>) {
    let c = scalar::dot(x, y);
    let mut u: Vec<T> = x.iter().zip(y).map(|(&a, &b)| b - c * a).collect();
    let r = scalar::dot(x, &u);
    scalar::axpy(-r, x, &mut u);
    let s = scalar::norm(&u);
    let theta = s.atan2(c);
    if s == T::zero() {
        return (theta, vec![T::zero(); x.len()]);
    }
    (theta, scalar::scaled(radius * theta / s, &u))
}

pub(super) fn project_tangent<T: Scalar>(x: &[T], v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    let c = scalar::dot(x, v);
    scalar::axpy(-c, x, &mut out);
    out
}

/// Projections of the ambient basis, dropping the axis most aligned with `x`.
pub(super) fn frame<T: Scalar>(x: &[T]) -> Vec<Vec<T>> {
    let n = x.len();
    let skip = argmax_abs(x);
    let candidates = (0..n)
        .filter(|&k| k != skip)
        .map(|k| {
            let mut e = vec![T::zero(); n];
            e[k] = T::one();
            project_tangent(x, &e)
        })
        .collect();
    super::gram_schmidt(candidates, n - 1, scalar::dot)
}

pub(super) fn argmax_abs<T: Scalar>(x: &[T]) -> usize {
    let mut best = 0;
    for (k, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = k;
        }
    }
    best
}
