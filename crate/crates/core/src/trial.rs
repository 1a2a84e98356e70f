//! Running one trial: evaluate, aggregate, append to the pool.
//!
//! Trials are numbered across the whole run and each draws its environment
//! seed from `(master, index)`. When a run is resumed, indices already in
//! the pool are answered from the pool instead of the environment, so the
//! stages replay exactly the decisions they made before the interruption.

use crate::environment::{Environment, WorkloadSpec};
use crate::knobspace::{Configuration, HardwareProfile, KnobCatalog};
use crate::metrics::{aggregate_frames, MetricSchema};
use crate::samplepool::{PoolError, Sample, SamplePool, Stage};
use crate::seeds;

/// Reasons a run (not just a trial) has to stop.
#[derive(Debug, thiserror::Error)]
pub enum Abort {
    #[error("stopped after trial {0} as requested")]
    Stopped(u64),
    #[error("resumed pool disagrees with the replayed run at trial {0}")]
    Diverged(u64),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

/// Environment seed for trial `index` of a run.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    seeds::derive(master, "trial", index)
}

pub struct TrialContext<'a> {
    pub env: &'a mut dyn Environment,
    pub schema: &'a MetricSchema,
    pub workload: &'a WorkloadSpec,
    pub pool: &'a mut SamplePool,
    pub hardware: HardwareProfile,
    pub master_seed: u64,
    cursor: u64,
    stop_after: Option<u64>,
    failures: Vec<(u64, String)>,
}

impl<'a> TrialContext<'a> {
    pub fn new(
        env: &'a mut dyn Environment,
        schema: &'a MetricSchema,
        workload: &'a WorkloadSpec,
        pool: &'a mut SamplePool,
        master_seed: u64,
    ) -> Self {
        let hardware = pool.hardware().clone();
        Self { env, schema, workload, pool, hardware, master_seed, cursor: 0, stop_after: None, failures: Vec::new() }
    }

    /// First trial index this context will issue.
    pub fn starting_at(mut self, cursor: u64) -> Self {
        self.cursor = cursor;
        self
    }

    /// Abort the run once trial `last` has completed.
    pub fn stop_after(mut self, last: Option<u64>) -> Self {
        self.stop_after = last;
        self
    }

    pub fn catalog(&self) -> &KnobCatalog {
        self.env.catalog()
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn failures(&self) -> &[(u64, String)] {
        &self.failures
    }

    /// Pool samples recorded before the current trial, i.e. what an
    /// uninterrupted run would have seen at this point.
    pub fn visible(&self) -> impl Iterator<Item = &Sample> {
        let cursor = self.cursor;
        self.pool.samples().iter().take_while(move |s| s.trial < cursor)
    }

    pub fn best_where(&self, keep: impl Fn(&Sample) -> bool) -> Option<&Sample> {
        let mut best: Option<&Sample> = None;
        for s in self.visible().filter(|s| keep(s)) {
            if best.map_or(true, |b| s.fitness > b.fitness) {
                best = Some(s);
            }
        }
        best
    }

    /// Runs the next trial. `Ok(None)` is a failed trial: it consumed its
    /// index but produced no sample.
    pub fn run(&mut self, stage: Stage, action: &[f64]) -> Result<Option<Sample>, Abort> {
        let index = self.cursor;
        if let Some(last) = self.stop_after {
            if index > last {
                return Err(Abort::Stopped(last));
            }
        }
        self.cursor += 1;

        if let Some(done) = self.pool.find_trial(index) {
            let same = done.stage == stage
                && done.action.len() == action.len()
                && done.action.iter().zip(action).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(Abort::Diverged(index));
            }
            return Ok(Some(done.clone()));
        }
        if self.pool.last_trial().is_some_and(|last| index < last) {
            // absent from a pool that continues past it: the trial failed
            return Ok(None);
        }

        match self.evaluate(stage, index, action) {
            Ok(sample) => {
                log::info!("trial {index} ({stage}) fitness {:.4}", sample.fitness);
                self.pool.append(sample.clone())?;
                Ok(Some(sample))
            }
            Err(reason) => {
                log::warn!("trial {index} ({stage}) failed: {reason}");
                self.failures.push((index, reason));
                Ok(None)
            }
        }
    }

    fn evaluate(&mut self, stage: Stage, index: u64, action: &[f64]) -> Result<Sample, String> {
        let config: Configuration = self.env.catalog().denormalize(action).map_err(|e| e.to_string())?;
        let seed = trial_seed(self.master_seed, index);
        let obs = self.env.evaluate(&config, self.workload, seed).map_err(|e| e.to_string())?;
        let state = aggregate_frames(self.schema, &obs.frames).map_err(|e| e.to_string())?;
        let mut sample = Sample::new(state, action.to_vec(), obs.perf, stage, index).map_err(|e| e.to_string())?;
        sample.wall_s = obs.wall_time_s;
        Ok(sample)
    }
}

/// What a stage reports back to the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub best_action: Vec<f64>,
    pub best_fitness: f64,
    /// Trial index of the best sample, `None` if the stage-start baseline
    /// was never beaten.
    pub best_trial: Option<u64>,
    pub trials: usize,
}

impl StageOutcome {
    pub fn passthrough(action: Vec<f64>, fitness: f64) -> Self {
        Self { best_action: action, best_fitness: fitness, best_trial: None, trials: 0 }
    }

    pub fn observe(&mut self, sample: &Sample) {
        if sample.fitness > self.best_fitness {
            self.best_fitness = sample.fitness;
            self.best_action = sample.action.clone();
            self.best_trial = Some(sample.trial);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{SyntheticEnv, SyntheticModelSpec};
    use crate::shipped;

    fn env() -> SyntheticEnv {
        let spec = SyntheticModelSpec::from_json(shipped::SYNTHETIC50_MODEL).unwrap();
        SyntheticEnv::from_spec(spec, shipped::synthetic50(), shipped::innodb63()).unwrap()
    }

    #[test]
    fn replay_returns_recorded_samples() {
        let mut e = env();
        let schema = shipped::innodb63();
        let w = WorkloadSpec::sysbench_read_only();
        let mut pool = SamplePool::new(e.catalog(), shipped::hardware_12c_64g());
        let actions: Vec<Vec<f64>> = (0..4).map(|i| vec![0.1 * i as f64; 50]).collect();
        {
            let mut ctx = TrialContext::new(&mut e, &schema, &w, &mut pool, 7);
            for a in &actions {
                ctx.run(Stage::Lhs, a).unwrap().unwrap();
            }
        }
        let recorded = pool.clone();
        let mut ctx = TrialContext::new(&mut e, &schema, &w, &mut pool, 7);
        for (i, a) in actions.iter().enumerate() {
            assert_eq!(ctx.visible().count(), i);
            let s = ctx.run(Stage::Lhs, a).unwrap().unwrap();
            assert_eq!(&s, &recorded.samples()[i]);
        }
        assert!(matches!(ctx.run(Stage::Lhs, &[0.3; 50]), Ok(Some(_))));
        assert_eq!(pool.len(), 5);
    }

    #[test]
    fn divergent_replay_is_detected() {
        let mut e = env();
        let schema = shipped::innodb63();
        let w = WorkloadSpec::sysbench_read_only();
        let mut pool = SamplePool::new(e.catalog(), shipped::hardware_12c_64g());
        TrialContext::new(&mut e, &schema, &w, &mut pool, 7).run(Stage::Lhs, &[0.5; 50]).unwrap();
        let mut ctx = TrialContext::new(&mut e, &schema, &w, &mut pool, 7);
        assert!(matches!(ctx.run(Stage::Lhs, &[0.4; 50]), Err(Abort::Diverged(0))));
    }

    #[test]
    fn stop_after_aborts_before_next_trial() {
        let mut e = env();
        let schema = shipped::innodb63();
        let w = WorkloadSpec::sysbench_read_only();
        let mut pool = SamplePool::new(e.catalog(), shipped::hardware_12c_64g());
        let mut ctx = TrialContext::new(&mut e, &schema, &w, &mut pool, 1).stop_after(Some(1));
        ctx.run(Stage::Lhs, &[0.5; 50]).unwrap();
        ctx.run(Stage::Lhs, &[0.5; 50]).unwrap();
        assert!(matches!(ctx.run(Stage::Lhs, &[0.5; 50]), Err(Abort::Stopped(1))));
        assert_eq!(pool.len(), 2);
    }
}
