//! Knob catalogs, hardware profiles and the mapping between normalized
//! action vectors in `[0, 1]^d` and physical knob values.
//!
//! The catalog order is the canonical coordinate order: coordinate `i` of
//! every action vector refers to `catalog.knobs()[i]`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum KnobError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("knob `{knob}`: {reason}")]
    Invalid { knob: String, reason: String },
    #[error("duplicate knob name `{0}`")]
    DuplicateName(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("missing value for knob `{0}`")]
    MissingKnob(String),
    #[error("value {value} out of range for knob `{knob}`")]
    OutOfRange { knob: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnobKind {
    Integer,
    Real,
    Enum,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// A physical knob value.
///
/// Integral numbers serialize without a fractional part so that drivers see
/// `1024` rather than `1024.0`.
#[derive(Debug, Clone, PartialEq)]
pub enum KnobValue {
    Number(f64),
    Literal(String),
    Flag(bool),
}

impl KnobValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            KnobValue::Number(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for KnobValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnobValue::Number(x) => write!(f, "{x}"),
            KnobValue::Literal(s) => f.write_str(s),
            KnobValue::Flag(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for KnobValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KnobValue::Number(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => s.serialize_i64(*x as i64),
            KnobValue::Number(x) => s.serialize_f64(*x),
            KnobValue::Literal(v) => s.serialize_str(v),
            KnobValue::Flag(b) => s.serialize_bool(*b),
        }
    }
}

impl<'de> Deserialize<'de> for KnobValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Flag(bool),
            Number(f64),
            Literal(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Flag(b) => KnobValue::Flag(b),
            Raw::Number(x) => KnobValue::Number(x),
            Raw::Literal(s) => KnobValue::Literal(s),
        })
    }
}

/// Declarative description of one tunable knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnobSpec {
    pub name: String,
    pub kind: KnobKind,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    pub default: KnobValue,
    #[serde(default)]
    pub enum_values: Vec<String>,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub restart_required: bool,
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

impl KnobSpec {
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, KnobKind::Integer | KnobKind::Real)
    }

    /// Numeric bounds; `None` for enum and boolean knobs.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match (self.is_numeric(), self.min, self.max) {
            (true, Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> KnobError {
        KnobError::Invalid { knob: self.name.clone(), reason: reason.into() }
    }

    pub fn validate(&self) -> Result<(), KnobError> {
        if self.name.is_empty() {
            return Err(self.invalid("empty name"));
        }
        match self.kind {
            KnobKind::Integer | KnobKind::Real => {
                let (lo, hi) = match (self.min, self.max) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => return Err(self.invalid("numeric knob requires min and max")),
                };
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(self.invalid("bounds must be finite"));
                }
                if lo >= hi {
                    return Err(self.invalid(format!("min ({lo}) must be < max ({hi})")));
                }
                if self.scale == Scale::Log && lo <= 0.0 {
                    return Err(self.invalid("log scale requires min > 0"));
                }
                match self.default {
                    KnobValue::Number(x) if x >= lo && x <= hi => {}
                    _ => return Err(self.invalid("default must be a number within [min, max]")),
                }
            }
            KnobKind::Enum => {
                if self.enum_values.is_empty() {
                    return Err(self.invalid("enum knob requires enum_values"));
                }
                let distinct: HashSet<&String> = self.enum_values.iter().collect();
                if distinct.len() != self.enum_values.len() {
                    return Err(self.invalid("enum_values must be distinct"));
                }
                match &self.default {
                    KnobValue::Literal(s) if self.enum_values.contains(s) => {}
                    _ => return Err(self.invalid("default must be one of enum_values")),
                }
            }
            KnobKind::Boolean => {
                if !matches!(self.default, KnobValue::Flag(_)) {
                    return Err(self.invalid("boolean default must be true or false"));
                }
            }
        }
        Ok(())
    }

    /// Clamps a physical number to the knob bounds and quantizes it per kind.
    pub fn clamp_quantize(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds().expect("numeric knob");
        let x = x.clamp(lo, hi);
        match self.kind {
            KnobKind::Integer => round_half_up(x).clamp(lo.ceil(), hi.floor()),
            _ => x,
        }
    }

    /// Maps one normalized coordinate to a physical value.
    pub fn denormalize(&self, v: f64) -> KnobValue {
        let v = v.clamp(0.0, 1.0);
        match self.kind {
            KnobKind::Integer | KnobKind::Real => {
                let (lo, hi) = self.bounds().expect("validated numeric knob");
                let raw = if v <= 0.0 {
                    lo
                } else if v >= 1.0 {
                    hi
                } else {
                    match self.scale {
                        Scale::Linear => lo + v * (hi - lo),
                        Scale::Log => (lo.ln() + v * (hi.ln() - lo.ln())).exp(),
                    }
                };
                KnobValue::Number(self.clamp_quantize(raw))
            }
            KnobKind::Enum => {
                let m = self.enum_values.len();
                let idx = ((v * m as f64).floor() as usize).min(m - 1);
                KnobValue::Literal(self.enum_values[idx].clone())
            }
            KnobKind::Boolean => KnobValue::Flag(v >= 0.5),
        }
    }

    /// Maps a physical value to its normalized coordinate.
    ///
    /// Enum literal `i` of `m` maps to the center `(i + 0.5) / m` of its
    /// bucket, booleans to `0.25` / `0.75`.
    pub fn normalize(&self, value: &KnobValue) -> Result<f64, KnobError> {
        let out_of_range = || KnobError::OutOfRange { knob: self.name.clone(), value: value.to_string() };
        match (self.kind, value) {
            (KnobKind::Integer | KnobKind::Real, KnobValue::Number(x)) => {
                let (lo, hi) = self.bounds().expect("validated numeric knob");
                if !x.is_finite() || *x < lo || *x > hi {
                    return Err(out_of_range());
                }
                let v = match self.scale {
                    Scale::Linear => (x - lo) / (hi - lo),
                    Scale::Log => (x.ln() - lo.ln()) / (hi.ln() - lo.ln()),
                };
                Ok(v.clamp(0.0, 1.0))
            }
            (KnobKind::Enum, KnobValue::Literal(s)) => {
                let m = self.enum_values.len() as f64;
                let idx = self.enum_values.iter().position(|e| e == s).ok_or_else(out_of_range)?;
                Ok((idx as f64 + 0.5) / m)
            }
            (KnobKind::Boolean, KnobValue::Flag(b)) => Ok(if *b { 0.75 } else { 0.25 }),
            _ => Err(out_of_range()),
        }
    }
}

/// Ordered, validated collection of knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct KnobCatalog {
    knobs: Vec<KnobSpec>,
}

impl KnobCatalog {
    pub fn new(knobs: Vec<KnobSpec>) -> Result<Self, KnobError> {
        let mut seen = HashSet::new();
        for k in &knobs {
            k.validate()?;
            if !seen.insert(k.name.as_str()) {
                return Err(KnobError::DuplicateName(k.name.clone()));
            }
        }
        Ok(Self { knobs })
    }

    pub fn from_json(text: &str) -> Result<Self, KnobError> {
        let knobs: Vec<KnobSpec> = serde_json::from_str(text)?;
        Self::new(knobs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnobError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| KnobError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.knobs).expect("catalog serializes")
    }

    pub fn knobs(&self) -> &[KnobSpec] {
        &self.knobs
    }

    pub fn dimension(&self) -> usize {
        self.knobs.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.knobs.iter().position(|k| k.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&KnobSpec> {
        self.knobs.iter().find(|k| k.name == name)
    }

    /// SHA-256 over the canonical JSON encoding of the knob list.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.knobs).expect("catalog serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn check_dim(&self, len: usize) -> Result<(), KnobError> {
        if len != self.dimension() {
            return Err(KnobError::DimensionMismatch { expected: self.dimension(), actual: len });
        }
        Ok(())
    }

    /// Maps a normalized action to a configuration. The normalized vector is
    /// kept as given (after clamping into `[0, 1]`).
    pub fn denormalize(&self, v: &[f64]) -> Result<Configuration, KnobError> {
        self.check_dim(v.len())?;
        let normalized: Vec<f64> = v.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let physical = self.knobs.iter().zip(&normalized).map(|(k, &x)| (k.name.clone(), k.denormalize(x))).collect();
        Ok(Configuration { normalized, physical })
    }

    pub fn normalize(&self, physical: &BTreeMap<String, KnobValue>) -> Result<Vec<f64>, KnobError> {
        self.knobs
            .iter()
            .map(|k| {
                let value = physical.get(&k.name).ok_or_else(|| KnobError::MissingKnob(k.name.clone()))?;
                k.normalize(value)
            })
            .collect()
    }

    /// Builds a configuration from physical values; the normalized vector
    /// is the canonical grid point of those values.
    pub fn configuration_from_physical(
        &self,
        physical: BTreeMap<String, KnobValue>,
    ) -> Result<Configuration, KnobError> {
        let normalized = self.normalize(&physical)?;
        Ok(Configuration { normalized, physical })
    }

    pub fn default_configuration(&self) -> Configuration {
        let physical = self.knobs.iter().map(|k| (k.name.clone(), k.default.clone())).collect();
        self.configuration_from_physical(physical).expect("validated defaults are in range")
    }

    /// Snaps every coordinate to the grid point of the physical value it
    /// denormalizes to.
    pub fn quantize(&self, v: &[f64]) -> Result<Vec<f64>, KnobError> {
        self.check_dim(v.len())?;
        Ok(self
            .knobs
            .iter()
            .zip(v)
            .map(|(k, &x)| k.normalize(&k.denormalize(x)).expect("denormalized values are in range"))
            .collect())
    }
}

/// A concrete configuration: the normalized action and its physical image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub normalized: Vec<f64>,
    pub physical: BTreeMap<String, KnobValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub cpu_cores: u32,
    pub ram_bytes: u64,
    pub disk_bytes: u64,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.cpu_cores == 0 || self.ram_bytes == 0 || self.disk_bytes == 0 {
            return Err("hardware profile fields must be strictly positive".into());
        }
        Ok(())
    }
}

/// L-infinity box of half-width `ratio` around `center`, intersected with
/// the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion {
    center: Vec<f64>,
    ratio: f64,
}

impl TrustRegion {
    pub fn new(center: Vec<f64>, ratio: f64) -> Result<Self, String> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(format!("trust ratio {ratio} outside (0, 1]"));
        }
        if center.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err("trust-region center must lie in [0, 1]^d".into());
        }
        Ok(Self { center, ratio })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn clip(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.center.len(), "trust region dimension mismatch");
        v.iter()
            .zip(&self.center)
            .map(|(&x, &c)| {
                let lo = (c - self.ratio).max(0.0);
                let hi = (c + self.ratio).min(1.0);
                x.clamp(lo, hi)
            })
            .collect()
    }
}
