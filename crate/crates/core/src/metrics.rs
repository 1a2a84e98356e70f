//! Internal-metric schema, per-interval frames, their aggregation into a
//! state vector, and the scalar fitness of a performance result.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed metric schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate metric `{0}`")]
    DuplicateMetric(String),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {frame} has {actual} values, schema has {expected}")]
    FrameWidth { frame: usize, expected: usize, actual: usize },
    #[error("frames are not time-ordered at frame {0}")]
    Unordered(usize),
    #[error("counter `{metric}` decreased at frame {frame} (metric reset mid-trial)")]
    CounterDecreased { metric: String, frame: usize },
    #[error("p95 latency must be positive, got {0}")]
    NonPositiveLatency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Cumulative counter: last frame minus first frame.
    Counter,
    /// Point-in-time value: mean over frames.
    Instant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub name: String,
    pub agg: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSchema {
    entries: Vec<MetricEntry>,
}

impl MetricSchema {
    pub fn new(entries: Vec<MetricEntry>) -> Result<Self, MetricsError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(MetricsError::DuplicateMetric(e.name.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn entries(&self) -> &[MetricEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFrame {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub values: Vec<f64>,
}

/// Aggregated internal metrics of one trial, aligned with the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfResult {
    pub tps: f64,
    #[serde(rename = "p95_ms")]
    pub p95_latency_ms: f64,
    pub qps: f64,
}

/// Throughput per millisecond of tail latency; QPS does not enter.
pub fn fitness(p: &PerfResult) -> Result<f64, MetricsError> {
    if !(p.p95_latency_ms > 0.0) {
        return Err(MetricsError::NonPositiveLatency(p.p95_latency_ms));
    }
    Ok(p.tps / p.p95_latency_ms)
}

pub fn aggregate_frames(schema: &MetricSchema, frames: &[MetricFrame]) -> Result<StateVector, MetricsError> {
    if frames.len() < 2 {
        return Err(MetricsError::TooFewFrames(frames.len()));
    }
    for (t, f) in frames.iter().enumerate() {
        if f.values.len() != schema.len() {
            return Err(MetricsError::FrameWidth { frame: t, expected: schema.len(), actual: f.values.len() });
        }
        if t > 0 && f.timestamp < frames[t - 1].timestamp {
            return Err(MetricsError::Unordered(t));
        }
    }
    let frame_count = frames.len() as f64;
    let first = &frames[0];
    let last = &frames[frames.len() - 1];
    let mut s = Vec::with_capacity(schema.len());
    for (i, entry) in schema.entries().iter().enumerate() {
        match entry.agg {
            Aggregation::Counter => {
                for t in 1..frames.len() {
                    if frames[t].values[i] < frames[t - 1].values[i] {
                        return Err(MetricsError::CounterDecreased { metric: entry.name.clone(), frame: t });
                    }
                }
                s.push(last.values[i] - first.values[i]);
            }
            Aggregation::Instant => {
                s.push(frames.iter().map(|f| f.values[i]).sum::<f64>() / frame_count);
            }
        }
    }
    Ok(StateVector(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(aggs: &[Aggregation]) -> MetricSchema {
        MetricSchema::new(aggs.iter().enumerate().map(|(i, &agg)| MetricEntry { name: format!("m{i}"), agg }).collect())
            .unwrap()
    }

    fn frames(columns: &[&[f64]]) -> Vec<MetricFrame> {
        let t_len = columns[0].len();
        (0..t_len)
            .map(|t| MetricFrame { timestamp: 5.0 * (t + 1) as f64, values: columns.iter().map(|c| c[t]).collect() })
            .collect()
    }

    #[test]
    fn counter_and_instant_examples() {
        let s = schema(&[Aggregation::Counter, Aggregation::Instant]);
        let out = aggregate_frames(&s, &frames(&[&[10.0, 14.0, 25.0], &[4.0, 6.0, 8.0]])).unwrap();
        assert_eq!(out.0, vec![15.0, 6.0]);
    }

    #[test]
    fn aggregation_errors() {
        let s = schema(&[Aggregation::Counter]);
        assert!(matches!(aggregate_frames(&s, &frames(&[&[1.0]])), Err(MetricsError::TooFewFrames(1))));
        assert!(matches!(
            aggregate_frames(&s, &frames(&[&[5.0, 3.0]])),
            Err(MetricsError::CounterDecreased { frame: 1, .. })
        ));
        let mut f = frames(&[&[1.0, 2.0]]);
        f[1].timestamp = 0.0;
        assert!(matches!(aggregate_frames(&s, &f), Err(MetricsError::Unordered(1))));
        f[1].timestamp = 10.0;
        f[1].values.push(0.0);
        assert!(matches!(aggregate_frames(&s, &f), Err(MetricsError::FrameWidth { .. })));
    }

    #[test]
    fn interior_frames_do_not_change_counters() {
        let s = schema(&[Aggregation::Counter]);
        let a = aggregate_frames(&s, &frames(&[&[3.0, 40.0]])).unwrap();
        let b = aggregate_frames(&s, &frames(&[&[3.0, 9.0, 17.0, 40.0]])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn instant_scales_and_counter_ignores_shift() {
        let s = schema(&[Aggregation::Instant, Aggregation::Counter]);
        let base = aggregate_frames(&s, &frames(&[&[1.0, 2.0, 6.0], &[0.0, 5.0, 7.0]])).unwrap();
        let moved = aggregate_frames(&s, &frames(&[&[3.0, 6.0, 18.0], &[100.0, 105.0, 107.0]])).unwrap();
        assert!((moved.0[0] - 3.0 * base.0[0]).abs() < 1e-12);
        assert_eq!(moved.0[1], base.0[1]);
    }

    #[test]
    fn fitness_examples() {
        let f = fitness(&PerfResult { tps: 5078.0, p95_latency_ms: 17.20, qps: 0.0 }).unwrap();
        assert!((f - 295.26).abs() / 295.26 < 1e-3, "{f}");
        let f = fitness(&PerfResult { tps: 5220.0, p95_latency_ms: 16.71, qps: 0.0 }).unwrap();
        assert!((f - 312.42).abs() / 312.42 < 1e-3, "{f}");
        assert_eq!(fitness(&PerfResult { tps: 0.0, p95_latency_ms: 3.0, qps: 1.0 }).unwrap(), 0.0);
        assert!(fitness(&PerfResult { tps: 1.0, p95_latency_ms: 0.0, qps: 1.0 }).is_err());
    }

    #[test]
    fn fitness_monotonicity() {
        let base = PerfResult { tps: 100.0, p95_latency_ms: 10.0, qps: 0.0 };
        let more_tps = PerfResult { tps: 101.0, ..base };
        let more_lat = PerfResult { p95_latency_ms: 10.5, ..base };
        assert!(fitness(&more_tps).unwrap() > fitness(&base).unwrap());
        assert!(fitness(&more_lat).unwrap() < fitness(&base).unwrap());
    }

    #[test]
    fn shipped_schema_has_63_entries() {
        let s = MetricSchema::from_json(crate::shipped::INNODB63_SCHEMA).unwrap();
        assert_eq!(s.len(), 63);
        let counters = s.entries().iter().filter(|e| e.agg == Aggregation::Counter).count();
        assert_eq!(counters, 36);
    }
}
