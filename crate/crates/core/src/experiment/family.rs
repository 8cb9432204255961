use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{AtomOracle, EuclideanGaussianOracle, MomentOracle, OracleTable};
use crate::error::{Error, Result};
use crate::frechet::Sample;
use crate::linalg::Matrix;
use crate::manifold::{Family, ManifoldKind, Point, TangentFrame};
use crate::seed;

/// Base law of the tangent vector `v_i` (frame coordinates at the centre).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentLaw {
    /// `N(0, σ²·diag(shape))` conditioned on `‖v‖ ≤ r_max`.
    TruncatedGaussian,
    /// `±σ·u` with equal probability, `u` the unit `direction`.
    TwoPoint,
    /// `σ·diag(shape)^{1/2}·U` with `U` uniform on the unit ball, conditioned on `‖v‖ ≤ r_max`.
    UniformBall,
}

/// Per-index scale `σ_i` (indices are 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleSchedule {
    Constant { sigma: f64 },
    /// `σ_i = values[(i − 1) mod len]`.
    Alternating { values: Vec<f64> },
    /// `σ_i = start·ratio^{i−1}`.
    Geometric { start: f64, ratio: f64 },
}

impl ScaleSchedule {
    pub fn sigma(&self, i: usize) -> f64 {
        match self {
            Self::Constant { sigma } => *sigma,
            Self::Alternating { values } => values[(i - 1) % values.len()],
            Self::Geometric { start, ratio } => start * ratio.powi(i as i32 - 1),
        }
    }
}

/// Per-index diagonal covariance shape in frame coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceShape {
    Isotropic,
    Diagonal { diag: Vec<f64> },
    /// Index `i` lies in block `k` when `base^k < i ≤ base^{k+1}` (index 1 in
    /// block 0) and uses `blocks[k mod len]`: stretches of geometrically
    /// growing length that cycle through the listed shapes.
    AlternatingBlocks { base: usize, blocks: Vec<Vec<f64>> },
}

impl CovarianceShape {
    /// Slot of the shape used by index `i` and its diagonal.
    fn at(&self, i: usize, d: usize) -> (usize, Vec<f64>) {
        match self {
            Self::Isotropic => (0, vec![1.0; d]),
            Self::Diagonal { diag } => (0, diag.clone()),
            Self::AlternatingBlocks { base, blocks } => {
                let mut k = 0;
                let mut hi = *base;
                while i > hi {
                    hi = hi.saturating_mul(*base);
                    k += 1;
                }
                let slot = k % blocks.len();
                (slot, blocks[slot].clone())
            }
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let check = |v: &Vec<f64>| {
            if v.len() != d || v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                Err(Error::InvalidConfig(format!("shape diagonal must have {d} non-negative entries")))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Isotropic => Ok(()),
            Self::Diagonal { diag } => check(diag),
            Self::AlternatingBlocks { base, blocks } => {
                if *base < 2 || blocks.is_empty() {
                    return Err(Error::InvalidConfig("alternating blocks need base ≥ 2 and a shape".into()));
                }
                blocks.iter().try_for_each(check)
            }
        }
    }
}

/// Serialised form of a [`DistributionFamily`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub manifold: ManifoldKind<f64>,
    /// Ambient coordinates of the common centre (the manifold origin if absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub law: TangentLaw,
    pub scale: ScaleSchedule,
    #[serde(default = "isotropic")]
    pub shape: CovarianceShape,
    /// Support radius; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub symmetrize: bool,
    /// Unit direction (frame coordinates) for the two-point law; `e₁` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

fn isotropic() -> CovarianceShape {
    CovarianceShape::Isotropic
}

/// Independent, non-identically distributed `X_i = Exp_o(v_i)` sharing the
/// centre `o`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct DistributionFamily {
    spec: FamilySpec,
    center: Point<f64>,
    frame: TangentFrame<f64>,
    direction: Vec<f64>,
}

impl From<DistributionFamily> for FamilySpec {
    fn from(f: DistributionFamily) -> Self {
        f.spec
    }
}

impl TryFrom<FamilySpec> for DistributionFamily {
    type Error = Error;
    fn try_from(spec: FamilySpec) -> Result<Self> {
        Self::new(spec)
    }
}

/// Draw attempts before a truncated law gives up on rejection and rescales.
const MAX_REJECTIONS: usize = 100_000;

impl DistributionFamily {
    pub fn new(spec: FamilySpec) -> Result<Self> {
        let m = spec.manifold;
        let center = match &spec.center {
            Some(c) => m.point(c.clone())?,
            None => m.origin(),
        };
        let d = m.dim();
        if let Some(r) = spec.r_max {
            if !(r > 0.0) || 2.0 * r >= m.injectivity_radius() {
                return Err(Error::InvalidConfig(format!(
                    "r_max = {r} must be positive and below half the injectivity radius"
                )));
            }
        } else if m.injectivity_radius().is_finite() {
            return Err(Error::InvalidConfig("compact manifolds need a finite r_max".into()));
        }
        match &spec.scale {
            ScaleSchedule::Constant { sigma } if !(*sigma >= 0.0) => {
                return Err(Error::InvalidConfig("sigma must be non-negative".into()))
            }
            ScaleSchedule::Alternating { values } if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) => {
                return Err(Error::InvalidConfig("alternating scales must be non-empty and non-negative".into()))
            }
            ScaleSchedule::Geometric { start, ratio } if !(*start >= 0.0 && *ratio > 0.0) => {
                return Err(Error::InvalidConfig("geometric scale needs start ≥ 0 and ratio > 0".into()))
            }
            _ => {}
        }
        spec.shape.validate(d)?;
        let direction = match &spec.direction {
            Some(u) => {
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                if u.len() != d || !(n > 0.0) {
                    return Err(Error::InvalidConfig(format!("direction must be a non-zero vector of length {d}")));
                }
                u.iter().map(|x| x / n).collect()
            }
            None => {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            }
        };
        if spec.law == TangentLaw::TwoPoint {
            if let Some(r) = spec.r_max {
                if let ScaleSchedule::Constant { sigma } = spec.scale {
                    if sigma > r {
                        return Err(Error::InvalidConfig("two-point scale exceeds r_max".into()));
                    }
                }
            }
        }
        let frame = m.frame(&center);
        Ok(Self { spec, center, frame, direction })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn manifold(&self) -> &ManifoldKind<f64> {
        &self.spec.manifold
    }

    pub fn center(&self) -> &Point<f64> {
        &self.center
    }

    /// The fixed frame at the centre in which tangent draws are expressed.
    pub fn frame(&self) -> &TangentFrame<f64> {
        &self.frame
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max.unwrap_or(f64::INFINITY)
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.spec.scale.sigma(i)
    }

    /// Identifies the law of index `i`: equal keys mean equal laws.
    fn law_key(&self, i: usize) -> (u64, usize) {
        let (slot, _) = self.spec.shape.at(i, self.manifold().dim());
        (self.sigma(i).to_bits(), slot)
    }

    /// One tangent draw (frame coordinates) for index `i` (1-based).
    pub fn draw_tangent(&self, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.manifold().dim();
        let sigma = self.sigma(i);
        let (_, diag) = self.spec.shape.at(i, d);
        let r_max = self.r_max();
        let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
        let scale = |z: &[f64]| -> Vec<f64> { z.iter().zip(&diag).map(|(z, s)| sigma * s.sqrt() * z).collect() };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = match self.spec.law {
            TangentLaw::TwoPoint => {
                let s = if rng.random::<bool>() { sigma } else { -sigma };
                self.direction.iter().map(|u| s * u).collect()
            }
            TangentLaw::TruncatedGaussian | TangentLaw::UniformBall => {
                let mut last = Vec::new();
                for _ in 0..MAX_REJECTIONS {
                    let u = match self.spec.law {
                        TangentLaw::TruncatedGaussian => gauss(rng),
                        _ => {
                            let z = gauss(rng);
                            let nz = norm(&z).max(f64::MIN_POSITIVE);
                            let r = rng.random::<f64>().powf(1.0 / d as f64);
                            z.iter().map(|x| x * r / nz).collect()
                        }
                    };
                    last = scale(&u);
                    if norm(&last) <= r_max {
                        break;
                    }
                }
                let n = norm(&last);
                if n > r_max {
                    last.iter_mut().for_each(|x| *x *= r_max / n);
                }
                last
            }
        };
        if self.spec.symmetrize && rng.random::<bool>() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    /// `Exp_o` of frame coordinates.
    pub fn point_from_tangent(&self, v: &[f64]) -> Point<f64> {
        let m = self.manifold();
        let t = m.from_frame(&self.frame, v);
        m.exp(&t).expect("frame vectors are tangent at the centre")
    }

    /// `X_i` of replicate `replicate` under root seed `root`; stream
    /// `derive_seed(root, replicate, i)`.
    pub fn draw_index(&self, i: usize, root: u64, replicate: u64) -> (Vec<f64>, Point<f64>) {
        let mut rng = seed::derived_stream(root, replicate, i as u64);
        let v = self.draw_tangent(i, &mut rng);
        let p = self.point_from_tangent(&v);
        (v, p)
    }

    /// Tangent draws `v_1..v_n` of one replicate.
    pub fn draw_tangents(&self, n: usize, root: u64, replicate: u64) -> Vec<Vec<f64>> {
        (1..=n)
            .map(|i| {
                let mut rng = seed::derived_stream(root, replicate, i as u64);
                self.draw_tangent(i, &mut rng)
            })
            .collect()
    }

    /// Sample `X_1..X_n` of one replicate.
    pub fn draw_replicate(&self, n: usize, root: u64, replicate: u64) -> Result<Sample<f64>> {
        let points = (1..=n).map(|i| self.draw_index(i, root, replicate).1).collect();
        Sample::new(*self.manifold(), points)
    }

    /// Moment oracles for `X_1..X_{n_max}`, one per distinct law.
    pub fn oracle_table(&self, n_max: usize, opts: &OracleOptions) -> Result<OracleTable> {
        let m = *self.manifold();
        let mut slots: HashMap<(u64, usize), usize> = HashMap::new();
        let mut representatives = Vec::new();
        let mut assignment = Vec::with_capacity(n_max);
        for i in 1..=n_max {
            let key = self.law_key(i);
            let next = slots.len();
            let slot = *slots.entry(key).or_insert_with(|| {
                representatives.push(i);
                next
            });
            assignment.push(slot);
        }
        let laws = representatives
            .iter()
            .enumerate()
            .map(|(g, &i)| self.law_oracle(i, opts, seed::derive_seed(opts.seed, g as u64, u64::MAX)))
            .collect::<Result<Vec<_>>>()?;
        OracleTable::new(m, laws, assignment)
    }

    fn law_oracle(&self, i: usize, opts: &OracleOptions, law_seed: u64) -> Result<Arc<dyn MomentOracle>> {
        let m = *self.manifold();
        let sigma = self.sigma(i);
        if sigma == 0.0 {
            return Ok(Arc::new(AtomOracle::point_mass(m, self.center.clone())));
        }
        if self.spec.law == TangentLaw::TwoPoint {
            let v: Vec<f64> = self.direction.iter().map(|u| sigma * u).collect();
            let w: Vec<f64> = v.iter().map(|x| -x).collect();
            let atoms = vec![self.point_from_tangent(&v), self.point_from_tangent(&w)];
            return Ok(Arc::new(AtomOracle::exact(m, atoms, vec![0.5, 0.5])?));
        }
        if opts.draws == 0 {
            return Err(Error::InvalidConfig("oracle draws must be positive".into()));
        }
        let mut rng = seed::stream(law_seed);
        let mut atoms = Vec::with_capacity(opts.draws);
        while atoms.len() < opts.draws {
            let v = self.draw_tangent(i, &mut rng);
            if self.spec.symmetrize {
                let w: Vec<f64> = v.iter().map(|x| -x).collect();
                atoms.push(self.point_from_tangent(&v));
                if atoms.len() < opts.draws {
                    atoms.push(self.point_from_tangent(&w));
                }
            } else {
                atoms.push(self.point_from_tangent(&v));
            }
        }
        let draws = AtomOracle::monte_carlo(m, atoms, law_seed)?;
        let gaussian_closed_form = opts.closed_form
            && m.family() == Family::Euclidean
            && self.spec.law == TangentLaw::TruncatedGaussian
            && self.spec.r_max.is_none();
        if gaussian_closed_form {
            let (_, diag) = self.spec.shape.at(i, m.dim());
            let cov = Matrix::from_diag(&diag.iter().map(|s| sigma * sigma * s).collect::<Vec<_>>());
            return Ok(Arc::new(EuclideanGaussianOracle::new(draws, self.center.coords().to_vec(), cov)?));
        }
        Ok(Arc::new(draws))
    }
}

/// Construction of the moment oracles behind the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Monte Carlo draws per distinct law.
    pub draws: usize,
    pub seed: u64,
    /// Use closed forms where available (untruncated Euclidean Gaussians).
    pub closed_form: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { draws: 1 << 15, seed: 0, closed_form: true }
    }
}

/// `draw_replicate(fam, n, seed, 0)`.
pub fn draw_sample(fam: &DistributionFamily, n: usize, seed: u64) -> Result<Sample<f64>> {
    fam.draw_replicate(n, seed, 0)
}
