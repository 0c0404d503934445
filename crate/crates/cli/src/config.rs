//! Run configuration: TOML file plus command-line overrides.

use hho::adaptivity::{DriverSettings, EstimatorKind, EstimatorParams, ParamError, RefinementMode};
use hho::benchmarks::{Benchmark, BenchmarkName};
use hho::hho::Variant;
use hho::solver::optimize::SolverSettings;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Largest polynomial degree accepted by the configuration.
pub const MAX_DEGREE: usize = 6;

/// `ε` as a number or the keyword `auto`, meaning `(k+1)/100`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    Keyword(String),
}

impl Default for Epsilon {
    fn default() -> Self {
        Self::Value(0.01)
    }
}

impl FromStr for Epsilon {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<f64>() {
            Ok(v) => Ok(Self::Value(v)),
            Err(_) if s == "auto" => Ok(Self::Keyword(s.to_string())),
            Err(_) => Err(ConfigError::EpsilonKeyword(s.to_string())),
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{v}"),
            Self::Keyword(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("eps must be a number or \"auto\", got {0:?}")]
    EpsilonKeyword(String),
    #[error("k = {0} is outside 0..={MAX_DEGREE}")]
    Degree(usize),
    #[error("max_ndof must be positive")]
    MaxNdof,
    #[error("max_levels must be positive")]
    MaxLevels,
    #[error("solver.tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("solver.max_iterations must be positive")]
    Iterations,
    #[error("solver.memory must be positive")]
    Memory,
    #[error("solver.armijo must lie in (0, 1), got {0}")]
    Armijo(f64),
    #[error("zero_estimator must be nonnegative and finite, got {0}")]
    ZeroEstimator(f64),
    #[error(transparent)]
    Params(#[from] ParamError),
}

fn default_variant() -> Variant {
    Variant::RaviartThomas
}

fn default_mode() -> RefinementMode {
    RefinementMode::Adaptive
}

fn default_theta() -> f64 {
    0.5
}

fn default_max_ndof() -> usize {
    20_000
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_zero_estimator() -> f64 {
    1e-20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: BenchmarkName,
    /// Polynomial degree.
    pub k: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_mode")]
    pub mode: RefinementMode,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub eps: Epsilon,
    /// Refined meshes with more free unknowns are not solved.
    #[serde(default = "default_max_ndof")]
    pub max_ndof: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<usize>,
    /// Stop once the estimator is at most this value.
    #[serde(default = "default_zero_estimator")]
    pub zero_estimator: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Fill the `seconds` column; off by default so that reruns are
    /// byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// Command-line values that replace the corresponding config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub benchmark: Option<BenchmarkName>,
    pub degree: Option<usize>,
    pub mode: Option<RefinementMode>,
    pub theta: Option<f64>,
    pub eps: Option<Epsilon>,
    pub max_ndof: Option<usize>,
    pub variant: Option<Variant>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is representable in TOML")
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(b) = o.benchmark {
            self.benchmark = b;
        }
        if let Some(k) = o.degree {
            self.k = k;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(t) = o.theta {
            self.theta = t;
        }
        if let Some(e) = o.eps {
            self.eps = e;
        }
        if let Some(n) = o.max_ndof {
            self.max_ndof = n;
        }
        if let Some(v) = o.variant {
            self.variant = v;
        }
        if let Some(p) = o.out {
            self.out = p;
        }
    }

    pub fn epsilon(&self) -> Result<f64, ConfigError> {
        match &self.eps {
            Epsilon::Value(v) => Ok(*v),
            Epsilon::Keyword(s) if s == "auto" => Ok((self.k + 1) as f64 / 100.0),
            Epsilon::Keyword(s) => Err(ConfigError::EpsilonKeyword(s.clone())),
        }
    }

    /// Checks every field and assembles the driver settings for `benchmark`.
    pub fn driver_settings(
        &self,
        benchmark: &Benchmark<f64>,
    ) -> Result<DriverSettings, ConfigError> {
        if self.k > MAX_DEGREE {
            return Err(ConfigError::Degree(self.k));
        }
        if self.max_ndof == 0 {
            return Err(ConfigError::MaxNdof);
        }
        if self.max_levels == Some(0) {
            return Err(ConfigError::MaxLevels);
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0 && s.tolerance.is_finite()) {
            return Err(ConfigError::Tolerance(s.tolerance));
        }
        if s.max_iterations == 0 {
            return Err(ConfigError::Iterations);
        }
        if s.memory == 0 {
            return Err(ConfigError::Memory);
        }
        if !(s.armijo > 0.0 && s.armijo < 1.0) {
            return Err(ConfigError::Armijo(s.armijo));
        }
        if !(self.zero_estimator >= 0.0 && self.zero_estimator.is_finite()) {
            return Err(ConfigError::ZeroEstimator(self.zero_estimator));
        }
        let params = EstimatorParams {
            epsilon: self.epsilon()?,
            theta: self.theta,
            kind: EstimatorKind::for_benchmark(benchmark.indicator, self.variant),
        };
        params.validate(self.k, benchmark.density.growth(), self.variant)?;
        Ok(DriverSettings {
            degree: self.k,
            variant: self.variant,
            mode: self.mode,
            params,
            max_ndof: self.max_ndof,
            max_levels: self.max_levels,
            solver: self.solver.clone(),
            zero_estimator: self.zero_estimator,
        })
    }
}
