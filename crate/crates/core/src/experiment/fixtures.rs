//! Shipped model families.

use super::family::{CovarianceShape, DistributionFamily, FamilySpec, ScaleSchedule, TangentLaw};
use crate::manifold::ManifoldKind;

fn build(spec: FamilySpec) -> DistributionFamily {
    DistributionFamily::new(spec).expect("fixture families are valid")
}

fn spec(manifold: ManifoldKind<f64>, law: TangentLaw, scale: ScaleSchedule, r_max: Option<f64>) -> FamilySpec {
    FamilySpec {
        manifold,
        center: None,
        law,
        scale,
        shape: CovarianceShape::Isotropic,
        r_max,
        symmetrize: true,
        direction: None,
    }
}

/// S² (κ = 1), truncated Gaussians with σ alternating 0.1, 0.3; `r_max = 0.6`.
pub fn sphere_bounded_non_iid() -> DistributionFamily {
    build(spec(
        ManifoldKind::sphere(2, 1.0).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Alternating { values: vec![0.1, 0.3] },
        Some(0.6),
    ))
}

/// S² (κ = 1), iid uniform on the tangent ball of radius 0.5.
pub fn sphere_iid_uniform_ball() -> DistributionFamily {
    build(spec(
        ManifoldKind::sphere(2, 1.0).unwrap(),
        TangentLaw::UniformBall,
        ScaleSchedule::Constant { sigma: 0.5 },
        Some(0.5),
    ))
}

/// H² (κ = −1), iid truncated Gaussians σ = 0.5, `r_max = 1.5`.
pub fn hyperbolic_bounded() -> DistributionFamily {
    build(spec(
        ManifoldKind::hyperbolic(2, -1.0).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Constant { sigma: 0.5 },
        Some(1.5),
    ))
}

/// ℂP¹ (κ = 4), iid truncated Gaussians σ = 0.25, `r_max = 0.6`.
pub fn complex_projective_bounded() -> DistributionFamily {
    build(spec(
        ManifoldKind::complex_projective(1, 4.0).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Constant { sigma: 0.25 },
        Some(0.6),
    ))
}

/// ℝ¹, iid uniform on {−1, +1}.
pub fn euclidean_uniform_pm1() -> DistributionFamily {
    build(spec(
        ManifoldKind::euclidean(1).unwrap(),
        TangentLaw::TwoPoint,
        ScaleSchedule::Constant { sigma: 1.0 },
        None,
    ))
}

/// ℝ^d, iid standard normal.
pub fn euclidean_standard_normal(d: usize) -> DistributionFamily {
    build(spec(
        ManifoldKind::euclidean(d).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Constant { sigma: 1.0 },
        None,
    ))
}

/// ℝ², unit normals along `e₁` for indices in `(4^k, 4^{k+1}]` with `k` even
/// and along `e₂` for `k` odd: the normalised covariance keeps swinging
/// between the two axes and has no limit.
pub fn alternating_coordinate() -> DistributionFamily {
    let mut s = spec(
        ManifoldKind::euclidean(2).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Constant { sigma: 1.0 },
        None,
    );
    s.shape = CovarianceShape::AlternatingBlocks { base: 4, blocks: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
    build(s)
}

/// ℝ¹, `Y_i = ±2^i`: the last summand carries a fixed share of the variance.
pub fn dominating_tail() -> DistributionFamily {
    build(spec(
        ManifoldKind::euclidean(1).unwrap(),
        TangentLaw::TwoPoint,
        ScaleSchedule::Geometric { start: 2.0, ratio: 2.0 },
        None,
    ))
}

/// S² (κ = 1), every `X_i = o`.
pub fn point_mass() -> DistributionFamily {
    build(spec(
        ManifoldKind::sphere(2, 1.0).unwrap(),
        TangentLaw::TruncatedGaussian,
        ScaleSchedule::Constant { sigma: 0.0 },
        Some(0.5),
    ))
}

/// Fixture by name, as used by configuration files.
pub fn by_name(name: &str) -> Option<DistributionFamily> {
    Some(match name {
        "sphere_bounded_non_iid" => sphere_bounded_non_iid(),
        "sphere_iid_uniform_ball" => sphere_iid_uniform_ball(),
        "hyperbolic_bounded" => hyperbolic_bounded(),
        "complex_projective_bounded" => complex_projective_bounded(),
        "euclidean_uniform_pm1" => euclidean_uniform_pm1(),
        "euclidean_standard_normal" => euclidean_standard_normal(2),
        "alternating_coordinate" => alternating_coordinate(),
        "dominating_tail" => dominating_tail(),
        "point_mass" => point_mass(),
        _ => return None,
    })
}

pub const FIXTURE_NAMES: [&str; 9] = [
    "sphere_bounded_non_iid",
    "sphere_iid_uniform_ball",
    "hyperbolic_bounded",
    "complex_projective_bounded",
    "euclidean_uniform_pm1",
    "euclidean_standard_normal",
    "alternating_coordinate",
    "dominating_tail",
    "point_mass",
];
