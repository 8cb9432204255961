//! Hyperboloid model `{x : ⟨x,x⟩_L = −R², x₀ > 0}` with `R = 1/√|κ|`.

use crate::scalar::{self, Scalar};

/// Minkowski form `−a₀b₀ + Σ aᵢbᵢ`.
pub(super) fn minkowski<T: Scalar>(a: &[T], b: &[T]) -> T {
    -a[0] * b[0] + scalar::dot(&a[1..], &b[1..])
}

/// Point on the upper sheet with the given spatial coordinates.
pub(super) fn lift<T: Scalar>(radius: T, spatial: &[T]) -> Vec<T> {
    let s2 = scalar::dot(spatial, spatial);
    let mut out = Vec::with_capacity(spatial.len() + 1);
    out.push((radius * radius + s2).sqrt());
    out.extend_from_slice(spatial);
    out
}

pub(super) fn project_tangent<T: Scalar>(radius: T, x: &[T], v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    let c = minkowski(x, v) / (radius * radius);
    scalar::axpy(c, x, &mut out);
    out
}

/// Component of `y` orthogonal to `x`, and `cosh(dist/R)`.
fn split<T: Scalar>(radius: T, x: &[T], y: &[T]) -> (Vec<T>, T) {
    let c = (-minkowski(x, y) / (radius * radius)).max(T::one());
    let mut u: Vec<T> = x.iter().zip(y).map(|(&a, &b)| b - c * a).collect();
    let r = minkowski(x, &u) / (radius * radius);
    scalar::axpy(r, x, &mut u);
    (u, c)
}

fn angle_from<T: Scalar>(radius: T, u: &[T], c: T) -> T {
    if c < T::lit(2.0) {
        let s = minkowski(u, u).max(T::zero()).sqrt();
        (s / radius).asinh()
    } else {
        c.acosh()
    }
}

pub(super) fn dist<T: Scalar>(radius: T, x: &[T], y: &[T]) -> T {
    let (u, c) = split(radius, x, y);
    radius * angle_from(radius, &u, c)
}

pub(super) fn exp<T: Scalar>(radius: T, x: &[T], v: &[T]) -> Vec<T> {
    let nv = minkowski(v, v).max(T::zero()).sqrt();
    if nv == T::zero() {
        return x.to_vec();
    }
    let theta = nv / radius;
    let k = radius * theta.sinh() / nv;
    let ch = theta.cosh();
    let y: Vec<T> = x.iter().zip(v).map(|(&a, &b)| ch * a + k * b).collect();
    lift(radius, &y[1..])
}

pub(super) fn log<T: Scalar>(radius: T, x: &[T], y: &[T]) -> Vec<T> {
    let (u, c) = split(radius, x, y);
    let nu = minkowski(&u, &u).max(T::zero()).sqrt();
    if nu == T::zero() {
        return vec![T::zero(); x.len()];
    }
    let d = radius * angle_from(radius, &u, c);
    scalar::scaled(d / nu, &u)
}

/// Projected spatial axes, orthonormalised in the Minkowski form.
pub(super) fn frame<T: Scalar>(radius: T, x: &[T]) -> Vec<Vec<T>> {
    let n = x.len();
    let candidates = (1..n)
        .map(|k| {
            let mut e = vec![T::zero(); n];
            e[k] = T::one();
            project_tangent(radius, x, &e)
        })
        .collect();
    super::gram_schmidt(candidates, n - 1, minkowski)
}
