//! JSON problem description for the command-line pipeline.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::catalog::OrderBound;
use crate::error::{Error, Result};
use crate::open_set::{OpenSet, DEFAULT_MAX_DEPTH};
use crate::taming::DEFAULT_MAX_ORDER;
use crate::verify::FD_ORDER_LIMIT;

/// An interval endpoint: a number, or one of the strings `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint(pub f64);

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Endpoint(x)),
            Raw::Text(s) => match s.trim() {
                "-inf" | "-infinity" | "-Infinity" => Ok(Endpoint(f64::NEG_INFINITY)),
                "inf" | "+inf" | "infinity" | "Infinity" => Ok(Endpoint(f64::INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"-inf\" or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// `k`: a non-negative integer or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSpec(pub OrderBound);

impl Default for KSpec {
    fn default() -> Self {
        KSpec(OrderBound::Infinite)
    }
}

impl<'de> Deserialize<'de> for KSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(KSpec(OrderBound::Finite(k as usize))),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => {
                Ok(KSpec(OrderBound::Infinite))
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "k must be a non-negative integer or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Id(String),
    Full {
        id: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
}

impl FunctionSpec {
    pub fn id(&self) -> &str {
        match self {
            FunctionSpec::Id(id) | FunctionSpec::Full { id, .. } => id,
        }
    }

    pub fn params(&self) -> Map<String, Value> {
        match self {
            FunctionSpec::Id(_) => Map::new(),
            FunctionSpec::Full { params, .. } => params.clone(),
        }
    }
}

impl Default for FunctionSpec {
    fn default() -> Self {
        FunctionSpec::Id("indicator_smooth".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Extend,
    Cozero,
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Scale the knot values used by `h` (not `g`) by `1 + magnitude`.
    KnotPerturb,
    /// Divide every `A` and `B` by `magnitude` before forming `S`.
    DeflateConstants,
}

impl FaultKind {
    pub fn default_magnitude(self) -> f64 {
        match self {
            FaultKind::KnotPerturb => 1e-6,
            FaultKind::DeflateConstants => 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FaultSpec {
    Kind(FaultKind),
    Full {
        kind: FaultKind,
        magnitude: Option<f64>,
    },
}

impl FaultSpec {
    pub fn kind(&self) -> FaultKind {
        match self {
            FaultSpec::Kind(k) | FaultSpec::Full { kind: k, .. } => *k,
        }
    }

    pub fn magnitude(&self) -> f64 {
        match self {
            FaultSpec::Full {
                magnitude: Some(m), ..
            } => *m,
            _ => self.kind().default_magnitude(),
        }
    }
}

/// Zero set of `b` in complement mode.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ZeroSetSpec {
    /// Closed intervals `[lo, hi]`.
    Declared(Vec<(Endpoint, Endpoint)>),
    Detect {
        detect: DetectSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_detect_points")]
    pub points: usize,
}

fn default_detect_points() -> usize {
    100_001
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_orders")]
    pub orders: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "default_witness_samples")]
    pub witness_samples: usize,
}

fn default_orders() -> usize {
    4
}
fn default_samples() -> usize {
    10_000
}
fn default_depths() -> Vec<usize> {
    (5..=20).collect()
}
fn default_witness_samples() -> usize {
    200
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            orders: default_orders(),
            samples: default_samples(),
            depths: default_depths(),
            witness_samples: default_witness_samples(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    pub samples_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
}

fn default_max_depth() -> usize {
    DEFAULT_MAX_DEPTH
}
fn default_max_order() -> usize {
    DEFAULT_MAX_ORDER
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub open_set: Vec<(Endpoint, Endpoint)>,
    #[serde(default)]
    pub function: FunctionSpec,
    #[serde(default)]
    pub k: KSpec,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub fault_injection: Option<FaultSpec>,
    #[serde(default)]
    pub zero_set: Option<ZeroSetSpec>,
}

impl Config {
    /// Parses and validates; errors name the offending field and position.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.open_set.is_empty() {
            return Err(Error::Config(
                "`open_set` must list at least one interval".into(),
            ));
        }
        for (j, (lo, hi)) in self.open_set.iter().enumerate() {
            if lo.0.is_nan() || hi.0.is_nan() || !(lo.0 < hi.0) {
                return Err(Error::Config(format!(
                    "`open_set[{j}]`: need lo < hi, got [{}, {}]",
                    lo.0, hi.0
                )));
            }
        }
        if !(2..=60).contains(&self.max_depth) {
            return Err(Error::Config(format!(
                "`max_depth` must lie in 2..=60, got {}",
                self.max_depth
            )));
        }
        if !(1..=DEFAULT_MAX_ORDER).contains(&self.max_order) {
            return Err(Error::Config(format!(
                "`max_order` must lie in 1..={DEFAULT_MAX_ORDER}, got {}",
                self.max_order
            )));
        }
        if !(1..=FD_ORDER_LIMIT).contains(&self.checks.orders) {
            return Err(Error::Config(format!(
                "`checks.orders` must lie in 1..={FD_ORDER_LIMIT}, got {}",
                self.checks.orders
            )));
        }
        if self.checks.samples == 0 || self.checks.witness_samples == 0 {
            return Err(Error::Config(
                "`checks.samples` and `checks.witness_samples` must be positive".into(),
            ));
        }
        if self.checks.depths.len() < 2
            || self.checks.depths.iter().any(|&j| !(1..=60).contains(&j))
        {
            return Err(Error::Config(
                "`checks.depths` needs at least two entries in 1..=60".into(),
            ));
        }
        if self.checks.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "`checks.depths` must be strictly increasing".into(),
            ));
        }
        if let Some(f) = &self.fault_injection {
            let m = f.magnitude();
            let ok = match f.kind() {
                FaultKind::KnotPerturb => m.is_finite() && m != 0.0 && m > -1.0,
                FaultKind::DeflateConstants => m.is_finite() && m > 1.0,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "`fault_injection.magnitude` {m} is out of range"
                )));
            }
        }
        Ok(())
    }

    pub fn open_set(&self) -> Result<OpenSet> {
        let raw: Vec<(f64, f64)> = self.open_set.iter().map(|(a, b)| (a.0, b.0)).collect();
        OpenSet::normalize(&raw)
    }
}
