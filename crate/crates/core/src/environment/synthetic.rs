//! A synthetic DBMS with a planted optimum.
//!
//! The latent score is a baseline plus one Gaussian bump per influential
//! knob plus pairwise bump products, scaled by a workload factor:
//!
//! ```text
//! latent = baseline + sum_k w_k b_k + sum_(i,j) s_ij b_i b_j
//! b_k    = exp(-c_k (v_k - opt_k)^2)
//! score  = (0.6 + 0.4 * read_fraction) * latent
//! tps    = tps_scale * score
//! p95    = latency_base_ms * (1 + threads / 64) / score
//! ```
//!
//! Coordinates are quantized through the catalog first, so two actions
//! with the same physical image perform identically. Hardware-coupled knobs
//! place their optimum at `fraction * resource` in physical units.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EnvError, EnvObservation, Environment, WorkloadSpec};
use crate::knobspace::{Configuration, HardwareProfile, KnobCatalog};
use crate::metrics::{Aggregation, MetricFrame, MetricSchema, PerfResult};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluentialKnob {
    pub index: usize,
    pub weight: f64,
    /// Peak position in normalized coordinates (ignored when coupled).
    pub optimum: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Ram,
    Cpu,
    Disk,
}

/// Performance saturates once the knob reaches `fraction` of the resource
/// (bytes for RAM and disk, cores for CPU); beyond that it degrades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRule {
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareCoupling {
    pub index: usize,
    pub resource: Resource,
    pub rule: CouplingRule,
}

fn default_baseline() -> f64 {
    1.0
}
fn default_tps_scale() -> f64 {
    1000.0
}
fn default_latency_base() -> f64 {
    100.0
}
fn default_qpt() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub influential_knobs: Vec<InfluentialKnob>,
    #[serde(default)]
    pub interaction_pairs: Vec<Interaction>,
    pub noise_sd: f64,
    pub hardware: HardwareProfile,
    #[serde(default)]
    pub hardware_couplings: Vec<HardwareCoupling>,
    #[serde(default = "default_baseline")]
    pub baseline: f64,
    #[serde(default = "default_tps_scale")]
    pub tps_scale: f64,
    #[serde(default = "default_latency_base")]
    pub latency_base_ms: f64,
    #[serde(default = "default_qpt")]
    pub queries_per_txn: f64,
}

impl SyntheticModelSpec {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn with_hardware(mut self, hardware: HardwareProfile) -> Self {
        self.hardware = hardware;
        self
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn validate(&self, dimension: usize) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidModel(m));
        let mut seen = std::collections::HashSet::new();
        for k in &self.influential_knobs {
            if k.index >= dimension {
                return bad(format!("influential index {} out of range", k.index));
            }
            if !seen.insert(k.index) {
                return bad(format!("influential index {} repeated", k.index));
            }
            if !(k.weight > 0.0) {
                return bad(format!("knob {}: weight must be > 0", k.index));
            }
            if !(k.curvature > 0.0) || !(0.0..=1.0).contains(&k.optimum) {
                return bad(format!("knob {}: bad curvature or optimum", k.index));
            }
        }
        for p in &self.interaction_pairs {
            if p.i == p.j || !seen.contains(&p.i) || !seen.contains(&p.j) {
                return bad(format!("interaction ({}, {}) must join two distinct influential knobs", p.i, p.j));
            }
        }
        for c in &self.hardware_couplings {
            if !seen.contains(&c.index) {
                return bad(format!("coupling on non-influential knob {}", c.index));
            }
            if !(c.rule.fraction > 0.0) {
                return bad(format!("coupling on knob {}: fraction must be > 0", c.index));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be >= 0".into());
        }
        if !(self.baseline > 0.0) {
            return bad("baseline must be > 0".into());
        }
        self.hardware.validate().map_err(EnvError::InvalidModel)
    }
}

/// A model spec resolved against a catalog: coupled optima are translated
/// into normalized coordinates for the spec's hardware.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    spec: SyntheticModelSpec,
    catalog: KnobCatalog,
    /// Resolved peak per influential knob, same order as the spec.
    optima: Vec<f64>,
    /// Positions of interaction endpoints in `influential_knobs`.
    pairs: Vec<(usize, usize, f64)>,
}

fn workload_factor(w: &WorkloadSpec) -> f64 {
    0.6 + 0.4 * w.read_fraction
}

fn congestion(w: &WorkloadSpec) -> f64 {
    1.0 + f64::from(w.threads) / 64.0
}

impl SyntheticModel {
    pub fn new(spec: SyntheticModelSpec, catalog: KnobCatalog) -> Result<Self, EnvError> {
        spec.validate(catalog.dimension())?;
        let mut optima: Vec<f64> = spec.influential_knobs.iter().map(|k| k.optimum).collect();
        for c in &spec.hardware_couplings {
            let knob = &catalog.knobs()[c.index];
            if !knob.is_numeric() {
                return Err(EnvError::InvalidModel(format!("coupled knob `{}` is not numeric", knob.name)));
            }
            let amount = match c.resource {
                Resource::Ram => spec.hardware.ram_bytes as f64,
                Resource::Cpu => f64::from(spec.hardware.cpu_cores),
                Resource::Disk => spec.hardware.disk_bytes as f64,
            };
            let target = knob.clamp_quantize(c.rule.fraction * amount);
            let pos = spec.influential_knobs.iter().position(|k| k.index == c.index).expect("validated");
            optima[pos] =
                knob.normalize(&crate::knobspace::KnobValue::Number(target)).expect("clamped value is in range");
        }
        let pos_of = |idx: usize| spec.influential_knobs.iter().position(|k| k.index == idx).expect("validated");
        let pairs = spec.interaction_pairs.iter().map(|p| (pos_of(p.i), pos_of(p.j), p.strength)).collect();
        Ok(Self { spec, catalog, optima, pairs })
    }

    pub fn spec(&self) -> &SyntheticModelSpec {
        &self.spec
    }

    pub fn catalog(&self) -> &KnobCatalog {
        &self.catalog
    }

    /// Normalized peak of each influential knob, in spec order.
    pub fn resolved_optima(&self) -> &[f64] {
        &self.optima
    }

    pub fn influential_indices(&self) -> Vec<usize> {
        self.spec.influential_knobs.iter().map(|k| k.index).collect()
    }

    fn quantized_coord(&self, index: usize, v: f64) -> f64 {
        let knob = &self.catalog.knobs()[index];
        knob.normalize(&knob.denormalize(v)).expect("denormalized values are in range")
    }

    fn bumps(&self, v: &[f64]) -> Vec<f64> {
        self.spec
            .influential_knobs
            .iter()
            .zip(&self.optima)
            .map(|(k, &opt)| {
                let x = self.quantized_coord(k.index, v[k.index]);
                (-k.curvature * (x - opt).powi(2)).exp()
            })
            .collect()
    }

    fn latent_from_bumps(&self, b: &[f64]) -> f64 {
        let mut s = self.spec.baseline;
        for (k, bk) in self.spec.influential_knobs.iter().zip(b) {
            s += k.weight * bk;
        }
        for &(i, j, strength) in &self.pairs {
            s += strength * b[i] * b[j];
        }
        s
    }

    fn latent(&self, v: &[f64]) -> f64 {
        self.latent_from_bumps(&self.bumps(v))
    }

    fn latent_upper_bound(&self) -> f64 {
        self.spec.baseline
            + self.spec.influential_knobs.iter().map(|k| k.weight).sum::<f64>()
            + self.pairs.iter().map(|p| p.2.max(0.0)).sum::<f64>()
    }

    fn fitness_from_score(&self, score: f64, w: &WorkloadSpec) -> f64 {
        self.spec.tps_scale * score * score / (self.spec.latency_base_ms * congestion(w))
    }

    fn perf_from_score(&self, score: f64, w: &WorkloadSpec) -> PerfResult {
        let tps = self.spec.tps_scale * score;
        PerfResult {
            tps,
            p95_latency_ms: self.spec.latency_base_ms * congestion(w) / score,
            qps: tps * self.spec.queries_per_txn,
        }
    }

    /// Noise-free score for a normalized action.
    pub fn score(&self, v: &[f64], w: &WorkloadSpec) -> f64 {
        assert_eq!(v.len(), self.catalog.dimension(), "dimension mismatch");
        workload_factor(w) * self.latent(v)
    }

    /// Noise-free fitness (throughput over p95 latency).
    pub fn true_fitness(&self, v: &[f64], w: &WorkloadSpec) -> f64 {
        self.fitness_from_score(self.score(v, w), w)
    }

    /// Fitness bound assuming every bump sits at its peak and only
    /// positive interactions contribute.
    pub fn fitness_upper_bound(&self, w: &WorkloadSpec) -> f64 {
        self.fitness_from_score(workload_factor(w) * self.latent_upper_bound(), w)
    }

    /// Deterministic search for the best noise-free fitness.
    ///
    /// Non-influential coordinates are irrelevant; they are set to the
    /// catalog defaults in the returned vector. The search runs a coarse
    /// grid over the influential subspace followed by coordinate-wise
    /// refinement with a shrinking window from the best starts.
    pub fn optimum(&self, w: &WorkloadSpec) -> (Vec<f64>, f64) {
        let idx = self.influential_indices();
        let mut base = self.catalog.default_configuration().normalized;
        if idx.is_empty() {
            let f = self.true_fitness(&base, w);
            return (base, f);
        }
        let k = idx.len();
        let eval = |base: &mut Vec<f64>, x: &[f64]| {
            for (i, &xi) in idx.iter().zip(x) {
                base[*i] = xi;
            }
            self.latent(base)
        };

        // Coarse grid: 11 points per axis up to 5 axes, fewer beyond.
        let per_axis: usize = match k {
            1..=5 => 11,
            6 => 7,
            _ => 4,
        };
        let mut starts: Vec<(f64, Vec<f64>)> = vec![(eval(&mut base, &self.optima), self.optima.clone())];
        let total = per_axis.pow(k as u32);
        let mut grid_best: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut x = vec![0.0; k];
        for cell in 0..total {
            let mut c = cell;
            for xi in x.iter_mut() {
                *xi = (c % per_axis) as f64 / (per_axis - 1) as f64;
                c /= per_axis;
            }
            let s = eval(&mut base, &x);
            grid_best.push((s, x.clone()));
            if grid_best.len() > 64 {
                grid_best.sort_by(|a, b| b.0.total_cmp(&a.0));
                grid_best.truncate(4);
            }
        }
        grid_best.sort_by(|a, b| b.0.total_cmp(&a.0));
        grid_best.truncate(4);
        starts.extend(grid_best);

        let mut best = (f64::NEG_INFINITY, vec![]);
        for (_, start) in starts {
            let mut x = start;
            let mut current = eval(&mut base, &x);
            let mut h = 0.25;
            while h > 1e-7 {
                let mut improved = false;
                for d in 0..k {
                    let lo = (x[d] - h).max(0.0);
                    let hi = (x[d] + h).min(1.0);
                    let steps = 40;
                    let mut best_d = (current, x[d]);
                    for s in 0..=steps {
                        let mut y = x.clone();
                        y[d] = lo + (hi - lo) * s as f64 / steps as f64;
                        let val = eval(&mut base, &y);
                        if val > best_d.0 {
                            best_d = (val, y[d]);
                        }
                    }
                    if best_d.0 > current {
                        current = best_d.0;
                        x[d] = best_d.1;
                        improved = true;
                    }
                }
                if !improved {
                    h *= 0.5;
                }
            }
            if current > best.0 {
                best = (current, x);
            }
        }
        for (i, &xi) in idx.iter().zip(&best.1) {
            base[*i] = self.quantized_coord(*i, xi);
        }
        let f = self.true_fitness(&base, w);
        (base, f)
    }

    fn coupled_ram_knob(&self) -> usize {
        self.spec
            .hardware_couplings
            .iter()
            .find(|c| c.resource == Resource::Ram)
            .and_then(|c| self.spec.influential_knobs.iter().position(|k| k.index == c.index))
            .unwrap_or(0)
    }
}

fn unit_hash(channel: usize, slot: usize) -> f64 {
    let h = seeds::derive(0x5EED_CAFE, "channel", (channel * 64 + slot) as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// How one metric channel responds to the latent features of a trial.
#[derive(Debug, Clone)]
enum ChannelModel {
    Constant(f64),
    /// Physical value of a knob, reported verbatim.
    KnobValue(usize),
    /// `scale * (0.02 + (1 - b))` for the RAM-coupled bump `b`.
    Miss {
        scale: f64,
    },
    /// `scale * (0.2 + sum load_l * z_l)` over the feature vector.
    Mixed {
        scale: f64,
        loads: Vec<(usize, f64)>,
    },
}

/// The synthetic environment: a resolved model plus metric synthesis.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    model: SyntheticModel,
    schema: MetricSchema,
    channels: Vec<ChannelModel>,
}

const NOISE_CLIP: f64 = 4.0;

impl SyntheticEnv {
    pub fn new(model: SyntheticModel, schema: MetricSchema) -> Self {
        let ram_knob = model.spec.hardware_couplings.iter().find(|c| c.resource == Resource::Ram).map(|c| c.index);
        let feature_count = Self::feature_count(&model);
        let channels = schema
            .entries()
            .iter()
            .enumerate()
            .map(|(c, e)| match e.name.as_str() {
                "innodb_page_size" => ChannelModel::Constant(16384.0),
                "buffer_pool_size" if ram_knob.is_some() => ChannelModel::KnobValue(ram_knob.unwrap()),
                "buffer_pool_reads" => ChannelModel::Miss { scale: 2000.0 },
                "buffer_data_reads" => ChannelModel::Miss { scale: 2000.0 * 16384.0 },
                _ => {
                    let scale = 10f64.powf(1.0 + 3.0 * unit_hash(c, 0));
                    let a = (unit_hash(c, 1) * feature_count as f64) as usize % feature_count;
                    let b = (unit_hash(c, 2) * feature_count as f64) as usize % feature_count;
                    let mut loads = vec![(a, 0.5 + unit_hash(c, 3))];
                    if b != a {
                        loads.push((b, 0.2 + 0.5 * unit_hash(c, 4)));
                    }
                    ChannelModel::Mixed { scale, loads }
                }
            })
            .collect();
        Self { model, schema, channels }
    }

    pub fn from_spec(spec: SyntheticModelSpec, catalog: KnobCatalog, schema: MetricSchema) -> Result<Self, EnvError> {
        Ok(Self::new(SyntheticModel::new(spec, catalog)?, schema))
    }

    pub fn model(&self) -> &SyntheticModel {
        &self.model
    }

    pub fn schema(&self) -> &MetricSchema {
        &self.schema
    }

    fn feature_count(model: &SyntheticModel) -> usize {
        // normalized latent, one per bump, read fraction, thread load
        3 + model.spec.influential_knobs.len()
    }

    fn features(&self, bumps: &[f64], latent: f64, w: &WorkloadSpec) -> Vec<f64> {
        let mut z = Vec::with_capacity(3 + bumps.len());
        z.push(latent / self.model.latent_upper_bound());
        z.extend_from_slice(bumps);
        z.push(w.read_fraction);
        z.push(f64::from(w.threads) / 128.0);
        z
    }

    fn channel_level(&self, c: usize, z: &[f64], bumps: &[f64], v: &[f64]) -> f64 {
        match &self.channels[c] {
            ChannelModel::Constant(x) => *x,
            ChannelModel::KnobValue(i) => {
                let knob = &self.model.catalog.knobs()[*i];
                knob.denormalize(v[*i]).as_number().unwrap_or(0.0)
            }
            ChannelModel::Miss { scale } => {
                let b = bumps.get(self.model.coupled_ram_knob()).copied().unwrap_or(1.0);
                scale * (0.02 + (1.0 - b))
            }
            ChannelModel::Mixed { scale, loads } => scale * (0.2 + loads.iter().map(|&(l, a)| a * z[l]).sum::<f64>()),
        }
    }

    /// Per-channel bounds every instant frame value respects.
    pub fn instant_channel_range(&self, c: usize) -> (f64, f64) {
        let sd = self.model.spec.noise_sd;
        let hi_noise = 1.0 + NOISE_CLIP * sd;
        match &self.channels[c] {
            ChannelModel::Constant(x) => (*x, *x),
            ChannelModel::KnobValue(i) => self.model.catalog.knobs()[*i].bounds().unwrap_or((0.0, 0.0)),
            ChannelModel::Miss { scale } => (0.0, scale * 1.02 * hi_noise),
            ChannelModel::Mixed { scale, loads } => {
                // every feature lies in [0, 1]
                (0.0, scale * (0.2 + loads.iter().map(|l| l.1).sum::<f64>()) * hi_noise)
            }
        }
    }

    fn noise(rng: &mut seeds::Rng, sd: f64) -> f64 {
        if sd == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(rng);
        z.clamp(-NOISE_CLIP, NOISE_CLIP) * sd
    }

    fn observe(&self, v: &[f64], w: &WorkloadSpec, seed: u64) -> EnvObservation {
        let sd = self.model.spec.noise_sd;
        let mut rng = seeds::rng(seed);
        let bumps = self.model.bumps(v);
        let latent = self.model.latent_from_bumps(&bumps);
        let score = workload_factor(w) * latent * Self::noise(&mut rng, sd).exp();
        let perf = self.model.perf_from_score(score, w);

        let z = self.features(&bumps, latent, w);
        let t_count = w.frame_count();
        let mut frames: Vec<MetricFrame> = (1..=t_count)
            .map(|t| MetricFrame {
                timestamp: w.frame_interval_s * t as f64,
                values: Vec::with_capacity(self.schema.len()),
            })
            .collect();
        for (c, entry) in self.schema.entries().iter().enumerate() {
            let level = self.channel_level(c, &z, &bumps, v);
            let jitter_free = matches!(self.channels[c], ChannelModel::Constant(_) | ChannelModel::KnobValue(_));
            match entry.agg {
                Aggregation::Instant => {
                    for f in frames.iter_mut() {
                        let e = if jitter_free { 0.0 } else { Self::noise(&mut rng, sd) };
                        f.values.push(level * (1.0 + e));
                    }
                }
                Aggregation::Counter => {
                    // counters carry history from before the trial
                    let mut cumulative = level * 1000.0 * (1.0 + rng.random::<f64>());
                    for f in frames.iter_mut() {
                        let e = if jitter_free { 0.0 } else { Self::noise(&mut rng, sd) };
                        cumulative += (level * w.frame_interval_s * (1.0 + e)).max(0.0);
                        f.values.push(cumulative);
                    }
                }
            }
        }
        EnvObservation { frames, perf, wall_time_s: w.duration_s }
    }
}

impl Environment for SyntheticEnv {
    fn catalog(&self) -> &KnobCatalog {
        &self.model.catalog
    }

    fn evaluate(
        &mut self,
        config: &Configuration,
        workload: &WorkloadSpec,
        seed: u64,
    ) -> Result<EnvObservation, EnvError> {
        workload.validate()?;
        let d = self.model.catalog.dimension();
        if config.normalized.len() != d {
            return Err(EnvError::InvalidConfig(format!("expected {d} coordinates, got {}", config.normalized.len())));
        }
        if config.normalized.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(EnvError::InvalidConfig("coordinates must lie in [0, 1]".into()));
        }
        Ok(self.observe(&config.normalized, workload, seed))
    }
}
