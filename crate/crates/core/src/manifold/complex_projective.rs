//! ℂPⁿ as unit vectors of ℂⁿ⁺¹ modulo phase, with the Fubini–Study metric
//! scaled to holomorphic sectional curvature κ: `dist = (2/√κ)·arccos|⟨z,w⟩|`.
//!
//! Tangent vectors at a representative `z` are horizontal lifts
//! (`⟨z, v⟩ = 0` Hermitian) in metric units.

use num_complex::Complex;

use crate::scalar::{self, Scalar};

/// Entries below this modulus are skipped when fixing the phase.
const PHASE_PIVOT_TOL: f64 = 1e-8;

fn to_complex<T: Scalar>(v: &[T]) -> Vec<Complex<T>> {
    v.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect()
}

fn to_real<T: Scalar>(v: &[Complex<T>]) -> Vec<T> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Hermitian product `Σ conj(aₖ) bₖ` of interleaved vectors.
fn herm<T: Scalar>(a: &[T], b: &[T]) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (p, q) in a.chunks_exact(2).zip(b.chunks_exact(2)) {
        acc.re += p[0] * q[0] + p[1] * q[1];
        acc.im += p[0] * q[1] - p[1] * q[0];
    }
    acc
}

pub(super) fn herm_abs<T: Scalar>(a: &[T], b: &[T]) -> T {
    herm(a, b).norm()
}

fn rotate<T: Scalar>(phase: Complex<T>, v: &[T]) -> Vec<T> {
    to_real(&to_complex(v).into_iter().map(|c| c * phase).collect::<Vec<_>>())
}

pub(super) fn times_i<T: Scalar>(v: &[T]) -> Vec<T> {
    v.chunks_exact(2).flat_map(|p| [-p[1], p[0]]).collect()
}

/// Representative whose first non-negligible entry is real and positive.
pub(super) fn phase_fixed<T: Scalar>(z: &[T]) -> Vec<T> {
    let tol = T::lit(PHASE_PIVOT_TOL);
    let zc = to_complex(z);
    let pivot = zc.iter().find(|c| c.norm() > tol).or_else(|| zc.iter().max_by(|a, b| {
        a.norm().partial_cmp(&b.norm()).unwrap_or(std::cmp::Ordering::Equal)
    }));
    match pivot {
        Some(p) if p.norm() > T::zero() => rotate(p.conj() / p.norm(), z),
        _ => z.to_vec(),
    }
}

pub(super) fn project_tangent<T: Scalar>(z: &[T], v: &[T]) -> Vec<T> {
    let c = herm(z, v);
    let zc = to_complex(z);
    let vc = to_complex(v);
    to_real(&vc.iter().zip(&zc).map(|(&a, &b)| a - b * c).collect::<Vec<_>>())
}

/// Horizontal part of `w` relative to `z` after aligning phases, with `|⟨z,w⟩|`
/// and the unit phase `⟨z,w⟩/|⟨z,w⟩|`.
fn split<T: Scalar>(z: &[T], w: &[T]) -> (Vec<T>, T, Complex<T>) {
    let c = herm(z, w);
    let a = c.norm();
    let phase = if a > T::zero() { c / a } else { Complex::new(T::one(), T::zero()) };
    let aligned = rotate(phase.conj(), w);
    let mut u: Vec<T> = aligned.iter().zip(z).map(|(&p, &q)| p - a * q).collect();
    u = project_tangent(z, &u);
    (u, a, phase)
}

/// Fubini–Study angle in `[0, π/2]`.
pub(super) fn angle<T: Scalar>(z: &[T], w: &[T]) -> T {
    let (u, a, _) = split(z, w);
    scalar::norm(&u).atan2(a)
}

pub(super) fn exp<T: Scalar>(scale: T, z: &[T], v: &[T]) -> Vec<T> {
    let nv = scalar::norm(v);
    if nv == T::zero() {
        return z.to_vec();
    }
    let theta = nv / scale;
    let (s, c) = theta.sin_cos();
    let k = s / nv;
    let y: Vec<T> = z.iter().zip(v).map(|(&a, &b)| c * a + k * b).collect();
    let n = scalar::norm(&y);
    phase_fixed(&scalar::scaled(T::one() / n, &y))
}

/// Returns the Fubini–Study angle and `Exp_z⁻¹(w)`.
pub(super) fn log<T: Scalar>(scale: T, z: &[T], w: &[T]) -> (T, Vec<T>) {
    let (u, a, _) = split(z, w);
    let s = scalar::norm(&u);
    let theta = s.atan2(a);
    if s == T::zero() {
        return (theta, vec![T::zero(); z.len()]);
    }
    (theta, scalar::scaled(scale * theta / s, &u))
}

/// Transport along the geodesic `t ↦ cos t·z + sin t·û`: the complex line
/// spanned by the velocity turns with it, its Hermitian complement is fixed.
pub(super) fn transport<T: Scalar>(scale: T, z: &[T], w: &[T], log_zw: &[T], v: &[T]) -> Vec<T> {
    let nl = scalar::norm(log_zw);
    if nl == T::zero() {
        return v.to_vec();
    }
    let theta = nl / scale;
    let unit = scalar::scaled(T::one() / nl, log_zw);
    let (s, c) = theta.sin_cos();
    let coef = herm(&unit, v);
    let zc = to_complex(z);
    let uc = to_complex(&unit);
    let vc = to_complex(v);
    let (_, _, phase) = split(z, w);
    let out: Vec<Complex<T>> = vc
        .iter()
        .zip(zc.iter().zip(&uc))
        .map(|(&vk, (&zk, &uk))| {
            let perp = vk - coef * uk;
            let velocity = uk * c - zk * s;
            (coef * velocity + perp) * phase
        })
        .collect();
    project_tangent(w, &to_real(&out))
}

/// Real frame `w₁, i·w₁, …, wₙ, i·wₙ` from a complex orthonormal basis of the
/// Hermitian complement of `z`.
pub(super) fn frame<T: Scalar>(z: &[T]) -> Vec<Vec<T>> {
    let zc = to_complex(z);
    let m = zc.len();
    let skip = (0..m).fold(0, |b, k| if zc[k].norm() > zc[b].norm() { k } else { b });
    let mut complex_basis: Vec<Vec<T>> = Vec::with_capacity(m - 1);
    for k in (0..m).filter(|&k| k != skip) {
        let mut e = vec![T::zero(); 2 * m];
        e[2 * k] = T::one();
        let mut v = project_tangent(z, &e);
        for _ in 0..2 {
            for b in &complex_basis {
                let c = herm(b, &v);
                let bc = to_complex(b);
                let vc = to_complex(&v);
                v = to_real(&vc.iter().zip(&bc).map(|(&x, &y)| x - y * c).collect::<Vec<_>>());
            }
        }
        let n = scalar::norm(&v);
        complex_basis.push(scalar::scaled(T::one() / n, &v));
    }
    complex_basis
        .into_iter()
        .flat_map(|b| {
            let jb = times_i(&b);
            [b, jb]
        })
        .collect()
}
