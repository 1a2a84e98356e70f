//! TD3 fine-tuning over the reduced space: PCA-compressed state and the
//! top-K knobs chosen by forest importance.

mod agent;
mod network;

pub use agent::{ReplayBuffer, Td3Agent, Td3Config, Transition, UpdateReport, CHECKPOINT_VERSION};
pub use network::{sigmoid, Gradients, Layer, Network, NetworkSpec, OutputActivation, Sgd, Trace};

use crate::models::PcaModel;
use crate::samplepool::{Sample, Stage};
use crate::seeds;
use crate::trial::{Abort, StageOutcome, TrialContext};

#[derive(Debug, thiserror::Error)]
pub enum Td3Error {
    #[error("invalid TD3 configuration: {0}")]
    Config(String),
    #[error("replay holds {have} transitions, need {need}")]
    InsufficientReplay { have: usize, need: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Relative improvement over `f_ref`, clipped to `[-1, 5]`.
pub fn reward(fitness: f64, f_ref: f64) -> f64 {
    ((fitness - f_ref) / f_ref).clamp(-1.0, 5.0)
}

fn restrict(v: &[f64], topk: &[usize]) -> Vec<f64> {
    topk.iter().map(|&i| v[i]).collect()
}

/// Fine-tunes from `start` for `budget` trials and returns the agent with
/// the stage outcome.
///
/// Each trial keeps `start` off the selected knobs and takes the agent's
/// action on them. The replay buffer is pre-seeded with the visible,
/// non-stale pool samples as one-step terminal transitions.
pub fn td3_tune(
    ctx: &mut TrialContext<'_>,
    pca: &PcaModel,
    topk: &[usize],
    budget: usize,
    start: &Sample,
    f_ref: f64,
    config: Td3Config,
) -> Result<(StageOutcome, Option<Td3Agent>), Abort> {
    let mut outcome = StageOutcome::passthrough(start.action.clone(), start.fitness);
    if budget == 0 {
        return Ok((outcome, None));
    }
    assert!(!topk.is_empty(), "top-K selection must not be empty");
    let encode = |s: &Sample| pca.transform(&s.state.0).expect("states match the PCA input width");
    let seed = config.seed;
    let episode_len = config.episode_len;
    let mut agent = Td3Agent::new(pca.k(), topk.len(), config).expect("validated TD3 configuration");
    agent.anchor(&restrict(&start.action, topk));
    let seeded: Vec<Transition> = ctx
        .visible()
        .filter(|s| !s.stale)
        .map(|s| {
            let z = encode(s);
            Transition {
                s: z.clone(),
                a: restrict(&s.action, topk),
                r: reward(s.fitness, f_ref),
                s_next: z,
                done: true,
            }
        })
        .collect();
    for t in seeded {
        agent.replay.push(t);
    }

    let start_state = encode(start);
    let mut s_prev = start_state.clone();
    let mut sd = agent.config.exploration_sd;
    for t in 0..budget {
        let a = agent.select_action(&s_prev, true, sd, seeds::derive(seed, "td3-explore", t as u64));
        sd *= agent.config.exploration_decay;
        let mut full = start.action.clone();
        for (&i, &x) in topk.iter().zip(&a) {
            full[i] = x;
        }
        outcome.trials += 1;
        let done = (t + 1) % episode_len == 0;
        match ctx.run(Stage::Td3, &full)? {
            Some(sample) => {
                outcome.observe(&sample);
                let s_next = encode(&sample);
                agent.replay.push(Transition {
                    s: s_prev.clone(),
                    a,
                    r: reward(sample.fitness, f_ref),
                    s_next: s_next.clone(),
                    done,
                });
                if agent.replay.len() >= agent.config.batch_size {
                    agent.train_from_replay(seeds::derive(seed, "td3-batch", t as u64)).expect("replay checked");
                }
                s_prev = if done { start_state.clone() } else { s_next };
            }
            None => {
                if done {
                    s_prev = start_state.clone();
                }
            }
        }
    }
    Ok((outcome, Some(agent)))
}
