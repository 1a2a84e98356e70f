//! The coarse surrogate backend: a tiny discrete candidate space per
//! hinted knob, a stratified seed design, then random-forest guided
//! proposals scored by mean plus tree spread.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::hints::HintEntry;
use crate::knobspace::{HardwareProfile, KnobCatalog, KnobValue};
use crate::models::{forest_fit, FeatureRule, ForestModel, ForestSpec};
use crate::samplepool::Stage;
use crate::sampling::{lhs_sample, LhsPlan};
use crate::seeds;
use crate::trial::{Abort, StageOutcome, TrialContext};

#[derive(Debug, thiserror::Error)]
pub enum CoarseError {
    #[error("no hint entries to build a candidate space from")]
    Empty,
    #[error("unknown knob `{0}`")]
    UnknownKnob(String),
}

/// Candidate physical values per selected knob, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSpace {
    pub knobs: Vec<usize>,
    pub names: Vec<String>,
    pub candidates: Vec<Vec<f64>>,
}

impl FeasibleSpace {
    /// Number of candidate tuples, saturating.
    pub fn size(&self) -> u128 {
        self.candidates.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    /// Writes the tuple's values into a copy of `base`.
    pub fn apply(&self, tuple: &[usize], base: &[f64], catalog: &KnobCatalog) -> Vec<f64> {
        let mut v = base.to_vec();
        for ((&k, cands), &i) in self.knobs.iter().zip(&self.candidates).zip(tuple) {
            v[k] = catalog.knobs()[k]
                .normalize(&KnobValue::Number(cands[i]))
                .expect("candidates lie inside catalog bounds");
        }
        v
    }

    fn features(&self, tuple: &[usize], catalog: &KnobCatalog) -> Vec<f64> {
        self.knobs
            .iter()
            .zip(&self.candidates)
            .zip(tuple)
            .map(|((&k, c), &i)| catalog.knobs()[k].normalize(&KnobValue::Number(c[i])).expect("in bounds"))
            .collect()
    }

    fn random_tuple(&self, rng: &mut seeds::Rng) -> Vec<usize> {
        self.candidates.iter().map(|c| rng.random_range(0..c.len())).collect()
    }

    fn tuple_at(&self, mut flat: u128) -> Vec<usize> {
        self.candidates
            .iter()
            .map(|c| {
                let n = c.len() as u128;
                let i = (flat % n) as usize;
                flat /= n;
                i
            })
            .collect()
    }
}

/// Per knob: resolved suggested values (or the base when none are given),
/// their 0.5x and 2x variants, the special value and the catalog default,
/// clamped, quantized and deduplicated.
pub fn build_feasible_space(
    entries: &[HintEntry],
    catalog: &KnobCatalog,
    hw: &HardwareProfile,
) -> Result<FeasibleSpace, CoarseError> {
    if entries.is_empty() {
        return Err(CoarseError::Empty);
    }
    let mut per_knob: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    for e in entries {
        let idx = catalog.index_of(&e.knob).ok_or_else(|| CoarseError::UnknownKnob(e.knob.clone()))?;
        let knob = &catalog.knobs()[idx];
        if !order.contains(&idx) {
            order.push(idx);
        }
        let values = per_knob.entry(idx).or_default();
        let suggested: Vec<f64> = if e.suggested_values.is_empty() { vec![e.base] } else { e.suggested_values.clone() };
        for s in suggested {
            for scale in [0.5, 1.0, 2.0] {
                values.push(e.resolve_value(s * scale, hw, catalog));
            }
        }
        if let Some(special) = e.special_value {
            values.push(knob.clamp_quantize(special));
        }
        if let Some(d) = knob.default.as_number() {
            values.push(knob.clamp_quantize(d));
        }
    }
    let mut knobs = Vec::new();
    let mut names = Vec::new();
    let mut candidates = Vec::new();
    for idx in order {
        let mut v = per_knob.remove(&idx).unwrap_or_default();
        v.sort_by(f64::total_cmp);
        v.dedup();
        knobs.push(idx);
        names.push(catalog.knobs()[idx].name.clone());
        candidates.push(v);
    }
    Ok(FeasibleSpace { knobs, names, candidates })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Next(Vec<usize>),
    /// Every tuple has been tried.
    Exhausted,
}

/// Search state: what was tried, what it scored, and the surrogate.
#[derive(Debug, Clone)]
pub struct CoarseState {
    pub history: Vec<(Vec<usize>, f64)>,
    tried: HashSet<Vec<usize>>,
    seed_design: VecDeque<Vec<usize>>,
    pub surrogate: Option<ForestModel>,
    pub iteration: usize,
    pub kappa: f64,
    pub candidate_pool: usize,
    pub n_trees: usize,
}

impl CoarseState {
    /// `seed_points` tuples of the stratified seed design come first.
    pub fn new(space: &FeasibleSpace, seed_points: usize, seed: u64) -> Self {
        let mut seed_design = VecDeque::new();
        if seed_points > 0 {
            let plan = LhsPlan::new(space.knobs.len(), seed_points, seeds::derive(seed, "coarse-seed", 0));
            for row in lhs_sample(&plan) {
                let t: Vec<usize> = row
                    .iter()
                    .zip(&space.candidates)
                    .map(|(v, c)| ((v * c.len() as f64) as usize).min(c.len() - 1))
                    .collect();
                seed_design.push_back(t);
            }
        }
        Self {
            history: Vec::new(),
            tried: HashSet::new(),
            seed_design,
            surrogate: None,
            iteration: 0,
            kappa: 1.0,
            candidate_pool: 1000,
            n_trees: 100,
        }
    }

    pub fn is_tried(&self, tuple: &[usize]) -> bool {
        self.tried.contains(tuple)
    }

    /// Records a trial; `fitness` is `None` when it failed.
    pub fn record(&mut self, tuple: Vec<usize>, fitness: Option<f64>) {
        self.tried.insert(tuple.clone());
        if let Some(f) = fitness {
            self.history.push((tuple, f));
        }
        self.iteration += 1;
    }

    pub fn incumbent(&self) -> Option<&(Vec<usize>, f64)> {
        let mut best: Option<&(Vec<usize>, f64)> = None;
        for h in &self.history {
            if best.map_or(true, |b| h.1 > b.1) {
                best = Some(h);
            }
        }
        best
    }

    fn random_untried(&self, space: &FeasibleSpace, rng: &mut seeds::Rng) -> Option<Vec<usize>> {
        let size = space.size();
        if (self.tried.len() as u128) >= size {
            return None;
        }
        if size <= 4 * self.candidate_pool as u128 {
            let open: Vec<u128> = (0..size).filter(|&f| !self.tried.contains(&space.tuple_at(f))).collect();
            return Some(space.tuple_at(open[rng.random_range(0..open.len())]));
        }
        loop {
            let t = space.random_tuple(rng);
            if !self.tried.contains(&t) {
                return Some(t);
            }
        }
    }

    fn candidates(&self, space: &FeasibleSpace, rng: &mut seeds::Rng) -> Vec<Vec<usize>> {
        let size = space.size();
        if size <= self.candidate_pool as u128 {
            return (0..size).map(|f| space.tuple_at(f)).filter(|t| !self.tried.contains(t)).collect();
        }
        let open = size - self.tried.len() as u128;
        let want = (self.candidate_pool as u128).min(open) as usize;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            let t = space.random_tuple(rng);
            if !self.tried.contains(&t) && seen.insert(t.clone()) {
                out.push(t);
            }
        }
        out
    }
}

/// Chooses the next tuple to evaluate. Seed-design points come first;
/// with fewer than two scored points an untried tuple is drawn at random.
pub fn propose_next(state: &mut CoarseState, space: &FeasibleSpace, catalog: &KnobCatalog, seed: u64) -> Proposal {
    let mut rng = seeds::derived_rng(seed, "coarse-propose", state.iteration as u64);
    while let Some(t) = state.seed_design.pop_front() {
        if !state.is_tried(&t) {
            return Proposal::Next(t);
        }
    }
    if state.history.len() < 2 {
        state.surrogate = None;
        return match state.random_untried(space, &mut rng) {
            Some(t) => Proposal::Next(t),
            None => Proposal::Exhausted,
        };
    }
    let x: Vec<Vec<f64>> = state.history.iter().map(|(t, _)| space.features(t, catalog)).collect();
    let y: Vec<f64> = state.history.iter().map(|h| h.1).collect();
    let spec = ForestSpec {
        n_trees: state.n_trees,
        features_per_split: FeatureRule::Sqrt,
        seed: seeds::derive(seed, "coarse-forest", state.iteration as u64),
        ..ForestSpec::default()
    };
    let model = forest_fit(&spec, &x, &y).expect("history rows are finite and consistent");
    let pool = state.candidates(space, &mut rng);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for t in pool {
        let (mean, spread) = model.predict_with_spread(&space.features(&t, catalog)).expect("dimension matches");
        let score = mean + state.kappa * spread;
        if best.as_ref().map_or(true, |b| score > b.0) {
            best = Some((score, t));
        }
    }
    state.surrogate = Some(model);
    match best {
        Some((_, t)) => Proposal::Next(t),
        None => Proposal::Exhausted,
    }
}

/// Every tuple tried during a coarse stage, for auditing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoarseLog {
    pub tuples: Vec<Vec<usize>>,
    pub exhausted: bool,
}

/// Runs up to `budget` coarse trials around `base`.
pub fn coarse_tune(
    ctx: &mut TrialContext<'_>,
    space: &FeasibleSpace,
    budget: usize,
    base: &[f64],
    base_fitness: f64,
    seed: u64,
    log: &mut CoarseLog,
) -> Result<StageOutcome, Abort> {
    let mut outcome = StageOutcome::passthrough(base.to_vec(), base_fitness);
    if budget == 0 {
        return Ok(outcome);
    }
    let catalog = ctx.catalog().clone();
    let mut state = CoarseState::new(space, budget.min(5), seed);
    for _ in 0..budget {
        let tuple = match propose_next(&mut state, space, &catalog, seed) {
            Proposal::Next(t) => t,
            Proposal::Exhausted => {
                log.exhausted = true;
                break;
            }
        };
        let action = space.apply(&tuple, base, &catalog);
        log.tuples.push(tuple.clone());
        outcome.trials += 1;
        let result = ctx.run(Stage::Coarse, &action)?;
        if let Some(s) = &result {
            outcome.observe(s);
        }
        state.record(tuple, result.map(|s| s.fitness));
    }
    Ok(outcome)
}
