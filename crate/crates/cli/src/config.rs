use std::fs;
use std::path::{Path, PathBuf};

use riemstat::experiment::{fixtures, ExperimentConfig, ExperimentMode};
use riemstat::frechet::{SolverMethod, SolverOptions};
use riemstat::{ManifoldKind, Point};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("{path}, line {line}: {msg}")]
    Points { path: PathBuf, line: usize, msg: String },
    #[error("unknown experiment mode `{0}` (expected wlln, euclidean or clt)")]
    UnknownMode(String),
    #[error(transparent)]
    Library(#[from] riemstat::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for usage and configuration errors, 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        use riemstat::Error as E;
        match self {
            Self::Io { .. } | Self::Config { .. } | Self::Points { .. } | Self::UnknownMode(_) => 2,
            Self::Library(
                E::InvalidConfig(_)
                | E::InvalidPoint(_)
                | E::InvalidTangent(_)
                | E::InvalidManifold(_)
                | E::InvalidCovariance(_)
                | E::UnsupportedManifold(_),
            ) => 2,
            Self::Library(_) | Self::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A configuration file: the raw JSON and its hash.
pub struct Loaded {
    pub path: PathBuf,
    pub value: Value,
    pub hash: String,
}

impl Loaded {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), msg: e.to_string() })?;
        if !value.is_object() {
            return Err(CliError::Config { path: path.to_path_buf(), msg: "expected a JSON object".into() });
        }
        let hash = config_hash(&value);
        Ok(Self { path: path.to_path_buf(), value, hash })
    }

    fn err(&self, msg: impl Into<String>) -> CliError {
        CliError::Config { path: self.path.clone(), msg: msg.into() }
    }

    /// Deserialize after replacing `"fixture": name` by the named family.
    pub fn parse<T: for<'de> Deserialize<'de>>(&self) -> CliResult<T> {
        let mut v = self.value.clone();
        let obj = v.as_object_mut().expect("checked on read");
        if let Some(name) = obj.remove("fixture") {
            let name = name.as_str().ok_or_else(|| self.err("`fixture` must be a string"))?;
            let fam = fixtures::by_name(name).ok_or_else(|| {
                self.err(format!("unknown fixture `{name}` (known: {})", fixtures::FIXTURE_NAMES.join(", ")))
            })?;
            obj.insert("family".into(), serde_json::to_value(fam).expect("families serialize"));
        }
        obj.remove("mode");
        serde_json::from_value(v).map_err(|e| self.err(e.to_string()))
    }

    pub fn relative(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn mode(&self, flag: Option<&str>) -> CliResult<ExperimentMode> {
        let s = match flag {
            Some(s) => s.to_string(),
            None => match self.value.get("mode") {
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(self.err("`mode` must be a string")),
                None => return Err(self.err("missing `mode`")),
            },
        };
        match s.as_str() {
            "wlln" => Ok(ExperimentMode::Wlln),
            "euclidean" => Ok(ExperimentMode::Euclidean),
            "clt" => Ok(ExperimentMode::Clt),
            _ => Err(CliError::UnknownMode(s)),
        }
    }
}

/// SHA-256 of the compact JSON with object keys in sorted order.
pub fn config_hash(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical(v).as_bytes()))
}

fn canonical(v: &Value) -> String {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", serde_json::to_string(k).expect("string"), canonical(&map[*k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

fn newton() -> SolverMethod {
    SolverMethod::Newton
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanConfig {
    pub manifold: ManifoldKind<f64>,
    /// Points file, relative to the configuration file.
    pub points: PathBuf,
    #[serde(default = "newton")]
    pub method: SolverMethod,
    #[serde(default)]
    pub solver: SolverOptions<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn default_grid() -> usize {
    4
}

#[derive(Debug, Deserialize)]
pub struct CertificateConfig {
    pub rho0: f64,
    pub rho1: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

/// An experiment configuration plus an optional strict-minimum certificate.
#[derive(Debug, Deserialize)]
pub struct DiagnoseConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub certificate: Option<CertificateConfig>,
}

/// Parse a whitespace-separated points file, one point per line; blank lines
/// and `#` comments are skipped.
pub fn read_points(m: &ManifoldKind<f64>, path: &Path) -> CliResult<Vec<Point<f64>>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| CliError::Points { path: path.to_path_buf(), line: k + 1, msg };
        let coords = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("`{t}` is not a number"))))
            .collect::<CliResult<Vec<_>>>()?;
        out.push(m.point(coords).map_err(|e| bad(e.to_string()))?);
    }
    if out.is_empty() {
        return Err(CliError::Points { path: path.to_path_buf(), line: 0, msg: "no points".into() });
    }
    Ok(out)
}

/// Experiment configuration with the seed override applied.
pub fn experiment_config(loaded: &Loaded, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let cfg: ExperimentConfig = loaded.parse()?;
    with_seed(cfg, seed)
}

pub fn with_seed(mut cfg: ExperimentConfig, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
