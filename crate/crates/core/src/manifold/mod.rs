//! Geometry of the four model spaces: Euclidean space, the round sphere,
//! hyperbolic space (hyperboloid model) and complex projective space with the
//! Fubini–Study metric.
//!
//! Points are stored in ambient coordinates. Tangent vectors are stored as
//! ambient components expressed in *metric units*: the Riemannian inner
//! product of two tangent vectors is the Euclidean dot product of their
//! components (Minkowski product for the hyperboloid). Complex vectors are
//! stored as interleaved `(re, im)` pairs.

mod complex_projective;
mod euclidean;
mod hessian;
mod hyperbolic;
mod sphere;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{self, Scalar};

pub use hessian::{f_kappa, finite_difference_hessian, one_minus_f_kappa_over_sq, HessianOperator};

/// Relative tolerance on the distance/injectivity-radius ratio that triggers
/// [`Error::CutLocus`].
pub const CUT_LOCUS_TOL: f64 = 1e-8;

/// Tolerance for embedding constraints and tangency.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// [`CONSTRAINT_TOL`], widened to 64 ulps for low-precision scalars.
fn constraint_tol<T: Scalar>() -> T {
    T::lit(CONSTRAINT_TOL).max(T::lit(64.0) * T::epsilon())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    Sphere,
    Hyperbolic,
    ComplexProjective,
}

/// A model manifold: family, intrinsic real dimension and curvature parameter.
///
/// For [`Family::ComplexProjective`] `kappa` is the holomorphic sectional
/// curvature and `dim = 2n` for ℂPⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKind<T>", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ManifoldKind<T> {
    family: Family,
    dim: usize,
    kappa: T,
}

#[derive(Deserialize)]
struct RawKind<T> {
    family: Family,
    dim: usize,
    #[serde(default)]
    kappa: Option<T>,
}

impl<T: Scalar> TryFrom<RawKind<T>> for ManifoldKind<T> {
    type Error = Error;
    fn try_from(raw: RawKind<T>) -> Result<Self> {
        let kappa = match (raw.family, raw.kappa) {
            (_, Some(k)) => k,
            (Family::Euclidean, None) => T::zero(),
            (Family::Hyperbolic, None) => -T::one(),
            (_, None) => T::one(),
        };
        Self::new(raw.family, raw.dim, kappa)
    }
}

impl<T: Scalar> ManifoldKind<T> {
    pub fn new(family: Family, dim: usize, kappa: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidManifold("dimension must be at least 1".into()));
        }
        if !kappa.is_finite() {
            return Err(Error::InvalidManifold("curvature must be finite".into()));
        }
        let ok = match family {
            Family::Euclidean => kappa == T::zero(),
            Family::Sphere => kappa > T::zero(),
            Family::Hyperbolic => kappa < T::zero(),
            Family::ComplexProjective => kappa > T::zero() && dim >= 2 && dim.is_multiple_of(2),
        };
        if !ok {
            return Err(Error::InvalidManifold(format!(
                "{family:?} with dim {dim} and kappa {kappa} violates the family constraints"
            )));
        }
        Ok(Self { family, dim, kappa })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(Family::Euclidean, dim, T::zero())
    }

    pub fn sphere(dim: usize, kappa: T) -> Result<Self> {
        Self::new(Family::Sphere, dim, kappa)
    }

    pub fn hyperbolic(dim: usize, kappa: T) -> Result<Self> {
        Self::new(Family::Hyperbolic, dim, kappa)
    }

    /// ℂPⁿ with holomorphic sectional curvature `kappa` (real dimension `2n`).
    pub fn complex_projective(n: usize, kappa: T) -> Result<Self> {
        Self::new(Family::ComplexProjective, 2 * n, kappa)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Intrinsic real dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Length of the ambient coordinate vector of a point.
    pub fn ambient_len(&self) -> usize {
        match self.family {
            Family::Euclidean => self.dim,
            Family::Sphere | Family::Hyperbolic => self.dim + 1,
            Family::ComplexProjective => self.dim + 2,
        }
    }

    /// Metric length scale: sphere/hyperboloid radius `1/√|κ|`; `2/√κ` for ℂPⁿ.
    pub(crate) fn length_scale(&self) -> T {
        match self.family {
            Family::Euclidean => T::one(),
            Family::Sphere | Family::Hyperbolic => T::one() / self.kappa.abs().sqrt(),
            Family::ComplexProjective => T::lit(2.0) / self.kappa.sqrt(),
        }
    }

    pub fn injectivity_radius(&self) -> T {
        match self.family {
            Family::Euclidean | Family::Hyperbolic => T::infinity(),
            Family::Sphere | Family::ComplexProjective => T::PI() / self.kappa.sqrt(),
        }
    }

    /// Largest distance between two points (infinite for non-compact families).
    pub fn diameter(&self) -> T {
        self.injectivity_radius()
    }

    /// Distinguished base point: origin, north pole `e_{d+1}`, hyperboloid apex,
    /// or `[1:0:…:0]`.
    pub fn origin(&self) -> Point<T> {
        let mut c = vec![T::zero(); self.ambient_len()];
        match self.family {
            Family::Euclidean => {}
            Family::Sphere => c[self.dim] = T::one(),
            Family::Hyperbolic => c[0] = self.length_scale(),
            Family::ComplexProjective => c[0] = T::one(),
        }
        Point { coords: c }
    }

    /// Validate ambient coordinates as a point (constraint to [`CONSTRAINT_TOL`]).
    pub fn point(&self, coords: Vec<T>) -> Result<Point<T>> {
        self.check_len(&coords)?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        let tol = constraint_tol::<T>();
        match self.family {
            Family::Euclidean => {}
            Family::Sphere | Family::ComplexProjective => {
                let n2 = scalar::dot(&coords, &coords);
                if (n2 - T::one()).abs() > tol {
                    return Err(Error::InvalidPoint(format!("squared norm {n2} is not 1")));
                }
            }
            Family::Hyperbolic => {
                let r2 = self.length_scale().powi(2);
                let q = hyperbolic::minkowski(&coords, &coords);
                let scale = coords[0] * coords[0];
                if coords[0] <= T::zero() || (q + r2).abs() > tol * scale.max(T::one()) {
                    return Err(Error::InvalidPoint(format!(
                        "Minkowski norm {q} differs from {} or lies on the lower sheet",
                        -r2
                    )));
                }
            }
        }
        let coords = if self.family == Family::ComplexProjective {
            complex_projective::phase_fixed(&coords)
        } else {
            coords
        };
        Ok(Point { coords })
    }

    /// Project arbitrary ambient coordinates onto the manifold (normalise,
    /// lift to the upper hyperboloid sheet, fix the ℂPⁿ phase).
    pub fn project(&self, coords: Vec<T>) -> Result<Point<T>> {
        self.check_len(&coords)?;
        let coords = match self.family {
            Family::Euclidean => coords,
            Family::Sphere => {
                let n = scalar::norm(&coords);
                if n == T::zero() {
                    return Err(Error::InvalidPoint("cannot project the zero vector".into()));
                }
                scalar::scaled(T::one() / n, &coords)
            }
            Family::Hyperbolic => hyperbolic::lift(self.length_scale(), &coords[1..]),
            Family::ComplexProjective => {
                let n = scalar::norm(&coords);
                if n == T::zero() {
                    return Err(Error::InvalidPoint("cannot project the zero vector".into()));
                }
                complex_projective::phase_fixed(&scalar::scaled(T::one() / n, &coords))
            }
        };
        Ok(Point { coords })
    }

    /// Build a tangent vector, validating tangency at `base`.
    pub fn tangent(&self, base: &Point<T>, comps: Vec<T>) -> Result<TangentVector<T>> {
        if comps.len() != self.ambient_len() {
            return Err(Error::InvalidTangent(format!(
                "expected {} components, got {}",
                self.ambient_len(),
                comps.len()
            )));
        }
        let v = TangentVector { base: base.clone(), comps };
        self.check_tangent(&v)?;
        Ok(v)
    }

    /// Orthogonal projection of ambient components onto the tangent space at `base`.
    pub fn project_tangent(&self, base: &Point<T>, comps: &[T]) -> TangentVector<T> {
        let x = &base.coords;
        let comps = match self.family {
            Family::Euclidean => comps.to_vec(),
            Family::Sphere => sphere::project_tangent(x, comps),
            Family::Hyperbolic => hyperbolic::project_tangent(self.length_scale(), x, comps),
            Family::ComplexProjective => complex_projective::project_tangent(x, comps),
        };
        TangentVector { base: base.clone(), comps }
    }

    pub fn zero_tangent(&self, base: &Point<T>) -> TangentVector<T> {
        TangentVector { base: base.clone(), comps: vec![T::zero(); self.ambient_len()] }
    }

    /// Riemannian inner product of two tangent vectors at the same base point.
    pub fn inner(&self, u: &TangentVector<T>, v: &TangentVector<T>) -> T {
        self.inner_raw(&u.comps, &v.comps)
    }

    pub fn norm(&self, v: &TangentVector<T>) -> T {
        self.inner(v, v).max(T::zero()).sqrt()
    }

    pub(crate) fn inner_raw(&self, u: &[T], v: &[T]) -> T {
        match self.family {
            Family::Hyperbolic => hyperbolic::minkowski(u, v),
            _ => scalar::dot(u, v),
        }
    }

    pub(crate) fn norm_raw(&self, v: &[T]) -> T {
        self.inner_raw(v, v).max(T::zero()).sqrt()
    }

    /// Geodesic distance.
    pub fn dist(&self, x: &Point<T>, y: &Point<T>) -> Result<T> {
        self.check_len(&x.coords)?;
        self.check_len(&y.coords)?;
        Ok(self.dist_raw(&x.coords, &y.coords))
    }

    pub(crate) fn dist_raw(&self, x: &[T], y: &[T]) -> T {
        match self.family {
            Family::Euclidean => euclidean::dist(x, y),
            Family::Sphere => self.length_scale() * sphere::angle(x, y),
            Family::Hyperbolic => hyperbolic::dist(self.length_scale(), x, y),
            Family::ComplexProjective => self.length_scale() * complex_projective::angle(x, y),
        }
    }

    /// Exponential map at the base point of `v`.
    pub fn exp(&self, v: &TangentVector<T>) -> Result<Point<T>> {
        self.check_tangent(v)?;
        Ok(Point { coords: self.exp_raw(&v.base.coords, &v.comps) })
    }

    pub(crate) fn exp_raw(&self, x: &[T], v: &[T]) -> Vec<T> {
        match self.family {
            Family::Euclidean => euclidean::exp(x, v),
            Family::Sphere => sphere::exp(self.length_scale(), x, v),
            Family::Hyperbolic => hyperbolic::exp(self.length_scale(), x, v),
            Family::ComplexProjective => complex_projective::exp(self.length_scale(), x, v),
        }
    }

    /// Inverse exponential map `Exp_x⁻¹(y)`; refuses points on or near the cut locus.
    pub fn log(&self, x: &Point<T>, y: &Point<T>) -> Result<TangentVector<T>> {
        self.check_len(&x.coords)?;
        self.check_len(&y.coords)?;
        let comps = self.log_raw(&x.coords, &y.coords)?;
        Ok(TangentVector { base: x.clone(), comps })
    }

    pub(crate) fn log_raw(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        match self.family {
            Family::Euclidean => Ok(euclidean::log(x, y)),
            Family::Hyperbolic => Ok(hyperbolic::log(self.length_scale(), x, y)),
            Family::Sphere => {
                let (angle, comps) = sphere::log(self.length_scale(), x, y);
                self.check_cut_locus(angle / T::PI())?;
                Ok(comps)
            }
            Family::ComplexProjective => {
                let (angle, comps) = complex_projective::log(self.length_scale(), x, y);
                self.check_cut_locus(angle / T::FRAC_PI_2())?;
                Ok(comps)
            }
        }
    }

    fn check_cut_locus(&self, ratio: T) -> Result<()> {
        if ratio >= T::one() - T::lit(CUT_LOCUS_TOL) {
            Err(Error::CutLocus { ratio: ratio.to_f64_lossy() })
        } else {
            Ok(())
        }
    }

    /// Parallel transport of `v` (based at `x`) along the minimal geodesic to `y`.
    pub fn transport(
        &self,
        x: &Point<T>,
        y: &Point<T>,
        v: &TangentVector<T>,
    ) -> Result<TangentVector<T>> {
        if v.base.coords != x.coords {
            return Err(Error::InvalidTangent("vector is not based at the source point".into()));
        }
        self.check_tangent(v)?;
        let comps = self.transport_raw(&x.coords, &y.coords, &v.comps)?;
        Ok(TangentVector { base: y.clone(), comps })
    }

    pub(crate) fn transport_raw(&self, x: &[T], y: &[T], v: &[T]) -> Result<Vec<T>> {
        match self.family {
            Family::Euclidean => Ok(v.to_vec()),
            Family::Sphere | Family::Hyperbolic => {
                let l = self.log_raw(x, y)?;
                let d2 = self.inner_raw(&l, &l);
                if d2 == T::zero() {
                    return Ok(v.to_vec());
                }
                let back = self.log_raw(y, x)?;
                let coef = self.inner_raw(&l, v) / d2;
                let mut out = v.to_vec();
                scalar::axpy(-coef, &l, &mut out);
                scalar::axpy(-coef, &back, &mut out);
                Ok(match self.family {
                    Family::Sphere => sphere::project_tangent(y, &out),
                    _ => hyperbolic::project_tangent(self.length_scale(), y, &out),
                })
            }
            Family::ComplexProjective => {
                let l = self.log_raw(x, y)?;
                Ok(complex_projective::transport(self.length_scale(), x, y, &l, v))
            }
        }
    }

    /// Deterministic orthonormal frame of the tangent space at `x`.
    pub fn frame(&self, x: &Point<T>) -> TangentFrame<T> {
        let xs = &x.coords;
        let basis = match self.family {
            Family::Euclidean => euclidean::frame(self.dim),
            Family::Sphere => sphere::frame(xs),
            Family::Hyperbolic => hyperbolic::frame(self.length_scale(), xs),
            Family::ComplexProjective => complex_projective::frame(xs),
        };
        TangentFrame {
            base: x.clone(),
            basis: basis.into_iter().map(|comps| TangentVector { base: x.clone(), comps }).collect(),
        }
    }

    /// Parallel transport of a whole frame from its base point to `y`.
    pub fn transport_frame(&self, frame: &TangentFrame<T>, y: &Point<T>) -> Result<TangentFrame<T>> {
        let basis = frame
            .basis
            .iter()
            .map(|e| {
                let comps = self.transport_raw(&frame.base.coords, &y.coords, &e.comps)?;
                Ok(TangentVector { base: y.clone(), comps })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TangentFrame { base: y.clone(), basis })
    }

    /// Tangent vector `Σ cᵣ eᵣ`.
    pub fn from_frame(&self, frame: &TangentFrame<T>, coeffs: &[T]) -> TangentVector<T> {
        let mut comps = vec![T::zero(); self.ambient_len()];
        for (e, &c) in frame.basis.iter().zip(coeffs) {
            scalar::axpy(c, &e.comps, &mut comps);
        }
        TangentVector { base: frame.base.clone(), comps }
    }

    /// Frame coefficients `⟨v, eᵣ⟩`.
    pub fn coefficients(&self, frame: &TangentFrame<T>, v: &TangentVector<T>) -> Vec<T> {
        self.coefficients_raw(frame, &v.comps)
    }

    pub(crate) fn coefficients_raw(&self, frame: &TangentFrame<T>, v: &[T]) -> Vec<T> {
        frame.basis.iter().map(|e| self.inner_raw(&e.comps, v)).collect()
    }

    /// Complex structure `ȷ` on ℂPⁿ.
    pub fn complex_structure(&self, v: &TangentVector<T>) -> Result<TangentVector<T>> {
        if self.family != Family::ComplexProjective {
            return Err(Error::UnsupportedManifold(format!(
                "{:?} carries no complex structure",
                self.family
            )));
        }
        Ok(TangentVector { base: v.base.clone(), comps: complex_projective::times_i(&v.comps) })
    }

    /// Matrix of `Φ_{x,y}: v ↦ ⟨Exp_x⁻¹ y, v⟩ Exp_x⁻¹ y` in `frame`.
    pub fn phi(&self, x: &Point<T>, y: &Point<T>, frame: &TangentFrame<T>) -> Result<Matrix<T>> {
        let l = self.log(x, y)?;
        Ok(Matrix::outer(&self.coefficients(frame, &l)))
    }

    /// Hessian operator of `½dist(·, src)²` at `x`, as a matrix in `frame`.
    pub fn hessian(
        &self,
        x: &Point<T>,
        src: &Point<T>,
        frame: &TangentFrame<T>,
    ) -> Result<HessianOperator<T>> {
        let matrix = self.hessian_matrix(x, src, frame)?;
        Ok(HessianOperator { base: x.clone(), frame: frame.clone(), matrix })
    }

    pub(crate) fn hessian_matrix(
        &self,
        x: &Point<T>,
        src: &Point<T>,
        frame: &TangentFrame<T>,
    ) -> Result<Matrix<T>> {
        let l = self.log_raw(&x.coords, &src.coords)?;
        hessian::closed_form(self, frame, &l)
    }

    fn check_len(&self, c: &[T]) -> Result<()> {
        if c.len() != self.ambient_len() {
            return Err(Error::InvalidPoint(format!(
                "expected {} ambient coordinates, got {}",
                self.ambient_len(),
                c.len()
            )));
        }
        Ok(())
    }

    fn check_tangent(&self, v: &TangentVector<T>) -> Result<()> {
        self.check_len(&v.base.coords)
            .map_err(|e| Error::InvalidTangent(e.to_string()))?;
        if v.comps.len() != self.ambient_len() {
            return Err(Error::InvalidTangent("component count mismatch".into()));
        }
        let x = &v.base.coords;
        let scale = T::one().max(scalar::norm(&v.comps) * scalar::norm(x).max(T::one()));
        let tol = constraint_tol::<T>() * scale;
        let residual = match self.family {
            Family::Euclidean => T::zero(),
            Family::Sphere => scalar::dot(x, &v.comps).abs(),
            Family::Hyperbolic => hyperbolic::minkowski(x, &v.comps).abs(),
            Family::ComplexProjective => complex_projective::herm_abs(x, &v.comps),
        };
        if residual > tol {
            return Err(Error::InvalidTangent(format!("tangency residual {residual}")));
        }
        Ok(())
    }
}

/// A point in ambient coordinates. ℂPⁿ points are phase-fixed unit
/// representatives (first non-negligible entry real and positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentVector<T> {
    base: Point<T>,
    comps: Vec<T>,
}

impl<T: Scalar> TangentVector<T> {
    pub fn base(&self) -> &Point<T> {
        &self.base
    }

    pub fn comps(&self) -> &[T] {
        &self.comps
    }

    pub fn scale(&self, s: T) -> Self {
        Self { base: self.base.clone(), comps: scalar::scaled(s, &self.comps) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let comps = self.comps.iter().zip(&other.comps).map(|(&a, &b)| a + b).collect();
        Self { base: self.base.clone(), comps }
    }
}

/// Orthonormal basis of a tangent space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentFrame<T> {
    base: Point<T>,
    basis: Vec<TangentVector<T>>,
}

impl<T: Scalar> TangentFrame<T> {
    pub fn base(&self) -> &Point<T> {
        &self.base
    }

    pub fn basis(&self) -> &[TangentVector<T>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Gram matrix of the frame vectors.
    pub fn gram(&self, m: &ManifoldKind<T>) -> Matrix<T> {
        let d = self.basis.len();
        let mut g = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = m.inner(&self.basis[i], &self.basis[j]);
            }
        }
        g
    }
}

/// Modified Gram–Schmidt under an arbitrary inner product, skipping vectors
/// that become numerically dependent.
pub(crate) fn gram_schmidt<T: Scalar>(
    candidates: Vec<Vec<T>>,
    want: usize,
    inner: impl Fn(&[T], &[T]) -> T,
) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::with_capacity(want);
    for mut v in candidates {
        if out.len() == want {
            break;
        }
        for _ in 0..2 {
            for e in &out {
                let c = inner(e, &v);
                scalar::axpy(-c, e, &mut v);
            }
        }
        let n = inner(&v, &v).max(T::zero()).sqrt();
        if n > T::lit(1e-6) {
            out.push(scalar::scaled(T::one() / n, &v));
        }
    }
    out
}
