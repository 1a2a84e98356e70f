//! Knowledge hints: a static per-knob hint table, template resolution
//! against hardware, and a small controller that scales hinted values by
//! discrete factors and weights.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::knobspace::{Configuration, HardwareProfile, KnobCatalog, KnobError, KnobValue};
use crate::samplepool::Stage;
use crate::seeds;
use crate::trial::{Abort, StageOutcome, TrialContext};

/// Multiplicative factors the controller may apply to a hinted value.
pub const FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Importance weights used when several hints target one knob.
pub const WEIGHTS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
const IDENTITY_FACTOR: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum HintError {
    #[error("reading hints: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed hint file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("hints name unknown knobs: {0:?}")]
    UnknownKnobs(Vec<String>),
    #[error("hint for `{knob}`: {reason}")]
    Invalid { knob: String, reason: String },
    #[error("no hint entries")]
    Empty,
    #[error(transparent)]
    Knob(#[from] KnobError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Absolute,
    RelativeToRam,
    RelativeToCpu,
}

/// One piece of tuning knowledge. `base`, `suggested_values`, `min_value`,
/// `max_value` and `special_value` are all in template units: physical
/// values for `absolute`, a fraction of RAM bytes for `relative_to_ram`,
/// a per-core quantity for `relative_to_cpu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintEntry {
    pub knob: String,
    pub template: Template,
    pub base: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_value: Option<f64>,
    /// A value with special meaning (e.g. 0 = unlimited), taken literally.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_value: Option<f64>,
    #[serde(default)]
    pub provenance: String,
}

impl HintEntry {
    fn scale(&self, hw: &HardwareProfile) -> f64 {
        match self.template {
            Template::Absolute => 1.0,
            Template::RelativeToRam => hw.ram_bytes as f64,
            Template::RelativeToCpu => f64::from(hw.cpu_cores),
        }
    }

    /// Converts a template-unit quantity to a physical value, clamped to
    /// the entry's own bounds and the catalog's, then quantized.
    pub fn resolve_value(&self, x: f64, hw: &HardwareProfile, catalog: &KnobCatalog) -> f64 {
        let knob = catalog.get(&self.knob).expect("validated against catalog");
        let s = self.scale(hw);
        let mut v = x * s;
        if let Some(lo) = self.min_value {
            v = v.max(lo * s);
        }
        if let Some(hi) = self.max_value {
            v = v.min(hi * s);
        }
        knob.clamp_quantize(v)
    }

    fn validate(&self, catalog: &KnobCatalog) -> Result<(), HintError> {
        let bad = |reason: String| Err(HintError::Invalid { knob: self.knob.clone(), reason });
        let knob = catalog.get(&self.knob).expect("checked by caller");
        if !knob.is_numeric() {
            return bad("only integer and real knobs can be hinted".into());
        }
        let values = std::iter::once(self.base)
            .chain(self.suggested_values.iter().copied())
            .chain(self.min_value)
            .chain(self.max_value)
            .chain(self.special_value);
        if values.into_iter().any(|v| !v.is_finite()) {
            return bad("values must be finite".into());
        }
        match self.template {
            Template::RelativeToRam if !(self.base > 0.0 && self.base <= 1.5) => {
                return bad(format!("relative_to_ram base {} outside (0, 1.5]", self.base))
            }
            Template::RelativeToCpu if !(self.base > 0.0) => {
                return bad(format!("relative_to_cpu base {} must be > 0", self.base))
            }
            _ => {}
        }
        if let (Some(lo), Some(hi)) = (self.min_value, self.max_value) {
            if lo > hi {
                return bad(format!("min_value {lo} exceeds max_value {hi}"));
            }
        }
        Ok(())
    }
}

/// Parses and validates hint entries against `catalog`.
pub fn parse_hints(text: &str, catalog: &KnobCatalog) -> Result<Vec<HintEntry>, HintError> {
    let entries: Vec<HintEntry> = serde_json::from_str(text)?;
    let unknown: Vec<String> = entries
        .iter()
        .filter(|e| catalog.get(&e.knob).is_none())
        .map(|e| e.knob.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !unknown.is_empty() {
        return Err(HintError::UnknownKnobs(unknown));
    }
    for e in &entries {
        e.validate(catalog)?;
    }
    Ok(entries)
}

pub fn load_hints(path: impl AsRef<Path>, catalog: &KnobCatalog) -> Result<Vec<HintEntry>, HintError> {
    parse_hints(&fs::read_to_string(path)?, catalog)
}

/// The hinted physical value for `entry` on `hw`.
pub fn resolve_hint(entry: &HintEntry, hw: &HardwareProfile, catalog: &KnobCatalog) -> f64 {
    entry.resolve_value(entry.base, hw, catalog)
}

/// A factor and weight choice per hint entry, as indices into
/// [`FACTORS`] and [`WEIGHTS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintAction {
    pub choices: Vec<(usize, usize)>,
}

impl HintAction {
    /// Every factor 1 and every weight 1: the hints applied verbatim.
    pub fn identity(n: usize) -> Self {
        Self { choices: vec![(IDENTITY_FACTOR, 0); n] }
    }

    pub fn factor(&self, i: usize) -> f64 {
        FACTORS[self.choices[i].0]
    }

    pub fn weight(&self, i: usize) -> f64 {
        WEIGHTS[self.choices[i].1]
    }
}

/// Applies `action` to `base`: each hinted knob becomes the weight-averaged
/// `f * v` over its hints, clamped and quantized. Other knobs keep their
/// base values.
pub fn compose_configuration(
    entries: &[HintEntry],
    action: &HintAction,
    base: &Configuration,
    catalog: &KnobCatalog,
    hw: &HardwareProfile,
) -> Result<Configuration, HintError> {
    assert_eq!(action.choices.len(), entries.len(), "one choice per hint entry");
    let mut groups: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        let v = resolve_hint(e, hw, catalog);
        let w = action.weight(i);
        let g = groups.entry(e.knob.as_str()).or_insert((0.0, 0.0));
        g.0 += w * action.factor(i) * v;
        g.1 += w;
    }
    let mut normalized = base.normalized.clone();
    for (name, (sum, wsum)) in groups {
        let idx = catalog.index_of(name).expect("validated");
        let knob = &catalog.knobs()[idx];
        let value = KnobValue::Number(knob.clamp_quantize(sum / wsum));
        normalized[idx] = knob.normalize(&value)?;
    }
    Ok(catalog.denormalize(&normalized)?)
}

/// Epsilon-greedy action values over the factor and weight grids, one
/// table per hint entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintController {
    q_factor: Vec<[f64; 5]>,
    n_factor: Vec<[u32; 5]>,
    q_weight: Vec<[f64; 5]>,
    n_weight: Vec<[u32; 5]>,
    /// Knob group of each entry, for splitting credit.
    groups: Vec<usize>,
    step: u32,
    pub epsilon0: f64,
    pub decay: f64,
}

// greedy ties prefer the gentlest change
const FACTOR_PREFERENCE: [usize; 5] = [2, 1, 3, 0, 4];

fn greedy(q: &[f64; 5], n: &[u32; 5], order: &[usize]) -> usize {
    let mut best = order[0];
    for &i in order {
        // untried arms count as zero improvement
        let v = if n[i] == 0 { 0.0 } else { q[i] };
        let b = if n[best] == 0 { 0.0 } else { q[best] };
        if v > b {
            best = i;
        }
    }
    best
}

impl HintController {
    pub fn new(entries: &[HintEntry]) -> Self {
        let mut names: Vec<&str> = Vec::new();
        let groups = entries
            .iter()
            .map(|e| match names.iter().position(|n| *n == e.knob) {
                Some(p) => p,
                None => {
                    names.push(&e.knob);
                    names.len() - 1
                }
            })
            .collect();
        let n = entries.len();
        Self {
            q_factor: vec![[0.0; 5]; n],
            n_factor: vec![[0; 5]; n],
            q_weight: vec![[0.0; 5]; n],
            n_weight: vec![[0; 5]; n],
            groups,
            step: 0,
            epsilon0: 0.5,
            decay: 0.8,
        }
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon0 * self.decay.powi(self.step as i32)
    }

    /// The first step is always the identity action.
    pub fn choose(&self, rng: &mut seeds::Rng) -> HintAction {
        let n = self.q_factor.len();
        if self.step == 0 {
            return HintAction::identity(n);
        }
        let eps = self.epsilon();
        let weight_order = [0, 1, 2, 3, 4];
        let choices = (0..n)
            .map(|i| {
                let f = if rng.random::<f64>() < eps {
                    rng.random_range(0..5)
                } else {
                    greedy(&self.q_factor[i], &self.n_factor[i], &FACTOR_PREFERENCE)
                };
                let w = if rng.random::<f64>() < eps {
                    rng.random_range(0..5)
                } else {
                    greedy(&self.q_weight[i], &self.n_weight[i], &weight_order)
                };
                (f, w)
            })
            .collect();
        HintAction { choices }
    }

    /// Credits `reward` to the chosen arms. Within a knob group each entry
    /// receives a share proportional to its weight, scaled so equal weights
    /// give every entry the full reward.
    pub fn update(&mut self, action: &HintAction, reward: f64) {
        let n = action.choices.len();
        let mut group_w: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for i in 0..n {
            let g = group_w.entry(self.groups[i]).or_insert((0.0, 0.0));
            g.0 += action.weight(i);
            g.1 += 1.0;
        }
        for i in 0..n {
            let (wsum, count) = group_w[&self.groups[i]];
            let credit = reward * action.weight(i) * count / wsum;
            let (f, w) = action.choices[i];
            self.n_factor[i][f] += 1;
            self.q_factor[i][f] += (credit - self.q_factor[i][f]) / f64::from(self.n_factor[i][f]);
            self.n_weight[i][w] += 1;
            self.q_weight[i][w] += (credit - self.q_weight[i][w]) / f64::from(self.n_weight[i][w]);
        }
        self.step += 1;
    }
}

/// Every action tried during a hint stage, for auditing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HintLog {
    pub actions: Vec<HintAction>,
}

/// Runs `budget` hint trials starting from `base` (whose measured fitness
/// is `base_fitness`). Failed trials consume budget and teach nothing.
pub fn hint_tune(
    ctx: &mut TrialContext<'_>,
    entries: &[HintEntry],
    budget: usize,
    base: &[f64],
    base_fitness: f64,
    seed: u64,
    log: &mut HintLog,
) -> Result<StageOutcome, Abort> {
    let mut outcome = StageOutcome::passthrough(base.to_vec(), base_fitness);
    if budget == 0 || entries.is_empty() {
        return Ok(outcome);
    }
    let catalog = ctx.catalog().clone();
    let hw = ctx.hardware.clone();
    let base_cfg = catalog.denormalize(base).map_err(|e| Abort::Pool(e.into()))?;
    let mut controller = HintController::new(entries);
    for t in 0..budget {
        let mut rng = seeds::derived_rng(seed, "hint-step", t as u64);
        let action = controller.choose(&mut rng);
        let cfg = compose_configuration(entries, &action, &base_cfg, &catalog, &hw)
            .expect("hinted knobs are numeric and in range after clamping");
        log.actions.push(action.clone());
        outcome.trials += 1;
        match ctx.run(Stage::Hint, &cfg.normalized)? {
            Some(sample) => {
                let reward = (sample.fitness - base_fitness) / base_fitness;
                controller.update(&action, reward);
                outcome.observe(&sample);
            }
            None => controller.step += 1,
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shipped;

    const GIB: f64 = 1073741824.0;

    fn entry(knob: &str, template: Template, base: f64) -> HintEntry {
        HintEntry {
            knob: knob.into(),
            template,
            base,
            suggested_values: vec![],
            min_value: None,
            max_value: None,
            special_value: None,
            provenance: String::new(),
        }
    }

    #[test]
    fn shipped_hint_files_parse() {
        assert_eq!(parse_hints(shipped::SYNTHETIC50_HINTS, &shipped::synthetic50()).unwrap().len(), 7);
        let demo = parse_hints(shipped::MYSQL_DEMO_HINTS, &shipped::mysql266()).unwrap();
        let bp = demo.iter().find(|e| e.knob == "innodb_buffer_pool_size").unwrap();
        let c = shipped::mysql266();
        let big = resolve_hint(bp, &shipped::hardware_12c_64g(), &c);
        let small = resolve_hint(bp, &shipped::hardware_12c_16g(), &c);
        assert_eq!(big, 48.0 * GIB);
        assert_eq!(small, 12.0 * GIB);
    }

    #[test]
    fn single_absolute_hint_and_unknown_knob() {
        let c = shipped::synthetic50();
        let one = r#"[{"knob":"innodb_io_capacity","template":"absolute","base":2000}]"#;
        assert_eq!(parse_hints(one, &c).unwrap().len(), 1);
        let bad = r#"[{"knob":"no_such_knob","template":"absolute","base":1}]"#;
        match parse_hints(bad, &c) {
            Err(HintError::UnknownKnobs(names)) => assert_eq!(names, vec!["no_such_knob".to_string()]),
            other => panic!("{other:?}"),
        }
        let ram = r#"[{"knob":"innodb_buffer_pool_size","template":"relative_to_ram","base":2.0}]"#;
        assert!(matches!(parse_hints(ram, &c), Err(HintError::Invalid { .. })));
        let enum_hint = r#"[{"knob":"innodb_flush_method","template":"absolute","base":1}]"#;
        assert!(matches!(parse_hints(enum_hint, &c), Err(HintError::Invalid { .. })));
    }

    #[test]
    fn resolution_examples() {
        let c = shipped::synthetic50();
        let hw = shipped::hardware_12c_64g();
        let bp = entry("innodb_buffer_pool_size", Template::RelativeToRam, 0.25);
        assert_eq!(resolve_hint(&bp, &hw, &c), 16.0 * GIB);
        let io = entry("innodb_io_capacity", Template::Absolute, 2000.0);
        assert_eq!(resolve_hint(&io, &hw, &c), 2000.0);
        // 2 per core on 12 cores = 24, inside [1, 256]
        let tc = entry("innodb_thread_concurrency", Template::RelativeToCpu, 2.0);
        assert_eq!(resolve_hint(&tc, &hw, &c), 24.0);
        // 32 per core = 384 clamps to the knob max of 256
        let tc = entry("innodb_thread_concurrency", Template::RelativeToCpu, 32.0);
        assert_eq!(resolve_hint(&tc, &hw, &c), 256.0);
    }

    fn physical(cfg: &Configuration, name: &str) -> f64 {
        cfg.physical[name].as_number().unwrap()
    }

    #[test]
    fn composition_examples() {
        let hw = shipped::hardware_12c_64g();
        let mut c = shipped::synthetic50();
        let base = c.default_configuration();

        let e = vec![entry("innodb_io_capacity", Template::Absolute, 3000.0)];
        let cfg = compose_configuration(&e, &HintAction::identity(1), &base, &c, &hw).unwrap();
        assert_eq!(physical(&cfg, "innodb_io_capacity"), 3000.0);
        for (k, v) in &cfg.physical {
            if k != "innodb_io_capacity" {
                assert_eq!(v, &base.physical[k]);
            }
        }

        // f=2 on 16 GiB against a 24 GiB max: 32 GiB clamps to 24 GiB
        let mut knobs = c.knobs().to_vec();
        knobs[3].max = Some(24.0 * GIB);
        c = KnobCatalog::new(knobs).unwrap();
        let base = c.default_configuration();
        let e = vec![entry("innodb_buffer_pool_size", Template::RelativeToRam, 0.25)];
        let a = HintAction { choices: vec![(3, 0)] };
        let cfg = compose_configuration(&e, &a, &base, &c, &hw).unwrap();
        assert_eq!(physical(&cfg, "innodb_buffer_pool_size"), 24.0 * GIB);

        // values 10 and 20 with weights 1 and 4: (10 + 80) / 5 = 18
        let c = shipped::synthetic50();
        let base = c.default_configuration();
        let e = vec![
            entry("innodb_read_io_threads", Template::Absolute, 10.0),
            entry("innodb_read_io_threads", Template::Absolute, 20.0),
        ];
        let a = HintAction { choices: vec![(2, 0), (2, 2)] };
        let cfg = compose_configuration(&e, &a, &base, &c, &hw).unwrap();
        assert_eq!(physical(&cfg, "innodb_read_io_threads"), 18.0);
    }

    #[test]
    fn controller_starts_with_identity_and_stays_on_grid() {
        let entries = parse_hints(shipped::SYNTHETIC50_HINTS, &shipped::synthetic50()).unwrap();
        let mut ctl = HintController::new(&entries);
        let mut rng = seeds::rng(3);
        assert_eq!(ctl.choose(&mut rng), HintAction::identity(entries.len()));
        ctl.update(&HintAction::identity(entries.len()), 0.1);
        assert!((ctl.epsilon() - 0.4).abs() < 1e-15);
        for step in 0..200 {
            let a = ctl.choose(&mut rng);
            for i in 0..entries.len() {
                assert!(FACTORS.contains(&a.factor(i)));
                assert!(WEIGHTS.contains(&a.weight(i)));
            }
            ctl.update(&a, (step % 7) as f64 / 10.0 - 0.3);
        }
    }

    #[test]
    fn greedy_follows_rewarded_factor() {
        let entries = vec![entry("innodb_io_capacity", Template::Absolute, 1000.0)];
        let mut ctl = HintController::new(&entries);
        ctl.epsilon0 = 0.0;
        ctl.update(&HintAction::identity(1), -0.2);
        ctl.update(&HintAction { choices: vec![(3, 0)] }, 0.3);
        let mut rng = seeds::rng(0);
        assert_eq!(ctl.choose(&mut rng).choices[0].0, 3);
    }
}
