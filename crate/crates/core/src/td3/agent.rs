//! Twin critics, delayed actor updates and target policy smoothing.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network, NetworkSpec, Sgd};
use super::Td3Error;
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub smoothing_sd: f64,
    pub smoothing_clip: f64,
    pub exploration_sd: f64,
    /// Exploration sd is multiplied by this after every environment step.
    pub exploration_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub momentum: f64,
    pub hidden: Vec<usize>,
    pub episode_len: usize,
    pub seed: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            smoothing_sd: 0.2,
            smoothing_clip: 0.5,
            exploration_sd: 0.1,
            exploration_decay: 0.95,
            batch_size: 32,
            buffer_capacity: 100_000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            momentum: 0.0,
            hidden: vec![64, 64],
            episode_len: 10,
            seed: 0,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), Td3Error> {
        let bad = |m: &str| Err(Td3Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.policy_delay < 1 {
            return bad("policy_delay must be >= 1");
        }
        if self.batch_size < 1 || self.buffer_capacity < self.batch_size {
            return bad("need 1 <= batch_size <= buffer_capacity");
        }
        if self.smoothing_sd < 0.0 || self.exploration_sd < 0.0 || self.smoothing_clip < 0.0 {
            return bad("noise parameters must be >= 0");
        }
        if self.episode_len < 1 {
            return bad("episode_len must be >= 1");
        }
        Ok(())
    }
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::new() }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, n: usize, rng: &mut seeds::Rng) -> Vec<Transition> {
        (0..n).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_updated: bool,
    /// Mean of Q1(s, actor(s)) before the actor step, when it happened.
    pub actor_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Agent {
    pub config: Td3Config,
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor: Network,
    pub critic1: Network,
    pub critic2: Network,
    pub actor_target: Network,
    pub critic1_target: Network,
    pub critic2_target: Network,
    actor_opt: Sgd,
    critic1_opt: Sgd,
    critic2_opt: Sgd,
    pub replay: ReplayBuffer,
    /// Number of `train_step` calls so far.
    pub updates: u64,
}

fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

impl Td3Agent {
    pub fn new(state_dim: usize, action_dim: usize, config: Td3Config) -> Result<Self, Td3Error> {
        config.validate()?;
        if state_dim == 0 || action_dim == 0 {
            return Err(Td3Error::Config("state and action widths must be positive".into()));
        }
        let mut rng = seeds::derived_rng(config.seed, "td3-init", 0);
        let actor = Network::new(NetworkSpec::actor(state_dim, action_dim, &config.hidden), &mut rng);
        let critic1 = Network::new(NetworkSpec::critic(state_dim, action_dim, &config.hidden), &mut rng);
        let critic2 = Network::new(NetworkSpec::critic(state_dim, action_dim, &config.hidden), &mut rng);
        Ok(Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            actor_opt: Sgd::new(config.actor_lr, config.momentum),
            critic1_opt: Sgd::new(config.critic_lr, config.momentum),
            critic2_opt: Sgd::new(config.critic_lr, config.momentum),
            replay: ReplayBuffer::new(config.buffer_capacity),
            updates: 0,
            state_dim,
            action_dim,
            config,
        })
    }

    /// Biases the actor so that it initially proposes `action` for every
    /// state: output weights shrink to near zero and output biases become
    /// the logits of `action`.
    pub fn anchor(&mut self, action: &[f64]) {
        assert_eq!(action.len(), self.action_dim, "anchor width");
        let last = self.actor.layers.last_mut().expect("actor has layers");
        last.w.iter_mut().for_each(|w| *w *= 1e-3);
        for (b, &a) in last.b.iter_mut().zip(action) {
            *b = logit(a.clamp(1e-3, 1.0 - 1e-3));
        }
        self.actor_target = self.actor.clone();
    }

    pub fn select_action(&self, s: &[f64], explore: bool, sd: f64, seed: u64) -> Vec<f64> {
        let a = self.actor.forward(s);
        if !explore || sd == 0.0 {
            return a;
        }
        let mut rng = seeds::rng(seed);
        let noise = Normal::new(0.0, sd).expect("sd is finite and >= 0");
        a.into_iter().map(|x| clip01(x + noise.sample(&mut rng))).collect()
    }

    /// Bootstrapped targets `r + gamma (1 - done) min(Q1', Q2')` at the
    /// smoothed target action.
    pub fn td3_target(&self, batch: &[Transition], rng: &mut seeds::Rng) -> Vec<f64> {
        let c = self.config.smoothing_clip;
        let noise = Normal::new(0.0, self.config.smoothing_sd).expect("sd is finite and >= 0");
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return t.r;
                }
                let mut a = self.actor_target.forward(&t.s_next);
                if self.config.smoothing_sd > 0.0 {
                    for x in a.iter_mut() {
                        *x = clip01(*x + noise.sample(rng).clamp(-c, c));
                    }
                }
                let input = concat(&t.s_next, &a);
                let q1 = self.critic1_target.forward(&input)[0];
                let q2 = self.critic2_target.forward(&input)[0];
                t.r + self.config.gamma * q1.min(q2)
            })
            .collect()
    }

    fn critic_step(net: &mut Network, opt: &mut Sgd, batch: &[Transition], y: &[f64]) -> f64 {
        let n = batch.len() as f64;
        let mut grads = Gradients::zeros(net);
        let mut loss = 0.0;
        for (t, &target) in batch.iter().zip(y) {
            let trace = net.forward_trace(&concat(&t.s, &t.a));
            let err = trace.output[0] - target;
            loss += err * err / n;
            let (g, _) = net.backward(&trace, &[2.0 * err / n]);
            grads.add(&g);
        }
        opt.step(net, &grads);
        loss
    }

    /// One update on `batch`: both critics step toward the TD3 target; on
    /// every `policy_delay`-th call the actor steps and the targets move.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<UpdateReport, Td3Error> {
        if batch.is_empty() {
            return Err(Td3Error::InsufficientReplay { have: 0, need: 1 });
        }
        self.updates += 1;
        let mut rng = seeds::derived_rng(self.config.seed, "td3-smoothing", self.updates);
        let y = self.td3_target(batch, &mut rng);
        let critic1_loss = Self::critic_step(&mut self.critic1, &mut self.critic1_opt, batch, &y);
        let critic2_loss = Self::critic_step(&mut self.critic2, &mut self.critic2_opt, batch, &y);

        let mut report = UpdateReport { critic1_loss, critic2_loss, actor_updated: false, actor_q: None };
        if self.updates % self.config.policy_delay == 0 {
            let n = batch.len() as f64;
            let mut grads = Gradients::zeros(&self.actor);
            let mut q_sum = 0.0;
            for t in batch {
                let at = self.actor.forward_trace(&t.s);
                let ct = self.critic1.forward_trace(&concat(&t.s, &at.output));
                q_sum += ct.output[0];
                let (_, dq_dinput) = self.critic1.backward(&ct, &[1.0]);
                // ascend Q: descend on -Q / n
                let upstream: Vec<f64> = dq_dinput[self.state_dim..].iter().map(|g| -g / n).collect();
                let (g, _) = self.actor.backward(&at, &upstream);
                grads.add(&g);
            }
            self.actor_opt.step(&mut self.actor, &grads);
            let tau = self.config.tau;
            self.actor_target.soft_update_from(&self.actor, tau);
            self.critic1_target.soft_update_from(&self.critic1, tau);
            self.critic2_target.soft_update_from(&self.critic2, tau);
            report.actor_updated = true;
            report.actor_q = Some(q_sum / n);
        }
        Ok(report)
    }

    /// Samples a batch from replay and trains on it.
    pub fn train_from_replay(&mut self, seed: u64) -> Result<UpdateReport, Td3Error> {
        let need = self.config.batch_size;
        if self.replay.len() < need {
            return Err(Td3Error::InsufficientReplay { have: self.replay.len(), need });
        }
        let batch = self.replay.sample(need, &mut seeds::rng(seed));
        self.train_step(&batch)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    agent: Td3Agent,
}

impl Td3Agent {
    /// JSON checkpoint: every parameter tensor, optimizer state, counters
    /// and, when `with_replay` is set, the replay buffer.
    pub fn save(&self, path: impl AsRef<Path>, with_replay: bool) -> Result<(), Td3Error> {
        let mut agent = self.clone();
        if !with_replay {
            agent.replay = ReplayBuffer::new(self.config.buffer_capacity);
        }
        let cp = Checkpoint { format_version: CHECKPOINT_VERSION, agent };
        fs::write(path, serde_json::to_string(&cp)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Td3Error> {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let version = v.get("format_version").and_then(|x| x.as_u64());
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Td3Error::Checkpoint(format!("unsupported format_version {version:?}")));
        }
        let cp: Checkpoint = serde_json::from_value(v)?;
        Ok(cp.agent)
    }
}
