//! Approximate policy iteration: one-agent-at-a-time rollout decisions are
//! recorded as per-slot classification samples, a feedforward network is
//! trained on them, and the network becomes the next base policy.

mod buffer;
mod features;
mod network;
mod policy;
mod training;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use buffer::{BufferConfig, MemoryBuffer};
pub use features::{encode_features, encode_into, feature_dim};
pub use network::{random_batch, softmax, Mode, NetworkConfig, PolicyNetwork, Trace};
pub use policy::{infer_control, ClassScorer, ClassifierPolicy};
pub use training::{accuracy, train, TrainingReport, TrainingSample};

use crate::error::{Error, Result};
use crate::harness::{evaluate_policy, Instance};
use crate::par::map_indexed;
use crate::pomdp::{Policy, TerminalCost};
use crate::repair::RepairModel;
use crate::rng::{derive, purpose};
use crate::rollout::{AgentOrder, EvalCounter, Rollout, RolloutConfig};

/// Samples together with where they came from.
#[derive(Debug, Clone, Default)]
pub struct GeneratedSamples {
    pub samples: Vec<TrainingSample>,
    /// Buffer index of the belief behind each group of `m` samples.
    pub belief_indices: Vec<usize>,
    /// Rollout seed used at each drawn belief.
    pub stage_seeds: Vec<u64>,
}

/// Draws `q` beliefs from `buffer`, runs one-agent-at-a-time rollout at
/// each and emits one sample per agent slot, `q·m` in total.
pub fn generate_samples<P, T>(
    rollout: &Rollout<'_, RepairModel, P, T>,
    buffer: &MemoryBuffer,
    q: usize,
    seed: u64,
) -> Result<GeneratedSamples>
where
    P: Policy<RepairModel> + ?Sized,
    T: TerminalCost<RepairModel> + Sync + ?Sized,
{
    if q == 0 {
        return Err(Error::Config("sample budget must be at least one belief".into()));
    }
    if rollout.config.agent_order != AgentOrder::Natural {
        return Err(Error::Config("sample generation uses the natural agent order".into()));
    }
    let drawn = buffer.draw(q, seed)?;
    let seeds: Vec<u64> = (0..q).map(|s| derive(seed, &[purpose::SAMPLES, s as u64])).collect();
    let groups = map_indexed(q, |s| -> Result<Vec<TrainingSample>> {
        let b = &buffer.beliefs()[drawn[s]];
        let base = rollout.base.joint_control(rollout.model, b)?;
        let u = rollout.one_at_a_time_control(b, seeds[s], &EvalCounter::new())?;
        Ok((0..u.len())
            .map(|l| {
                let mut view = base.clone();
                view[..l].copy_from_slice(&u[..l]);
                TrainingSample {
                    features: encode_features(b, l, &view),
                    label: u[l].class_index(),
                }
            })
            .collect())
    });
    let mut samples = Vec::with_capacity(q * rollout.model.agents());
    for g in groups {
        samples.extend(g?);
    }
    Ok(GeneratedSamples {
        samples,
        belief_indices: drawn,
        stage_seeds: seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiConfig {
    pub iterations: usize,
    /// Beliefs drawn per iteration; each yields `m` samples.
    pub beliefs_per_iteration: usize,
    pub rollout: RolloutConfig,
    pub buffer: BufferConfig,
    pub network: NetworkConfig,
    pub evaluation_states: usize,
    pub horizon: usize,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            beliefs_per_iteration: 2000,
            rollout: RolloutConfig::default(),
            buffer: BufferConfig::default(),
            network: NetworkConfig::default(),
            evaluation_states: 100,
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PiResult {
    pub policies: Vec<Arc<ClassifierPolicy>>,
    /// Mean cost of the initial base followed by each iteration's policy.
    pub cost_trace: Vec<f64>,
    pub reports: Vec<TrainingReport>,
}

/// Runs `cfg.iterations` rounds of rollout-sample generation and training.
/// Every policy is scored on the same seeded initial-state suite.
pub fn pi_iterate<T>(
    instance: &Instance,
    base: Arc<dyn Policy<RepairModel>>,
    terminal: &T,
    cfg: &PiConfig,
    seed: u64,
) -> Result<PiResult>
where
    T: TerminalCost<RepairModel> + Sync + ?Sized,
{
    if cfg.iterations == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    cfg.network.validate()?;
    let model = &instance.model;
    let eval_root = derive(seed, &[purpose::EVALUATION]);
    let suite = instance.initial_suite(cfg.evaluation_states, eval_root);
    let score = |p: &dyn Policy<RepairModel>| -> Result<f64> {
        let costs = evaluate_policy(model, p, &suite, cfg.horizon, eval_root)?;
        Ok(crate::stats::mean(&costs))
    };
    let mut cost_trace = vec![score(base.as_ref())?];
    let mut policies = Vec::with_capacity(cfg.iterations);
    let mut reports = Vec::with_capacity(cfg.iterations);
    let mut current = base;
    for k in 0..cfg.iterations {
        let iter_seed = derive(seed, &[purpose::TRAINING, k as u64]);
        let buffer = MemoryBuffer::build(model, current.as_ref(), &instance.init, &cfg.buffer, iter_seed)?;
        let rollout = Rollout::new(model, current.as_ref(), terminal, cfg.rollout.clone())?;
        let generated = generate_samples(&rollout, &buffer, cfg.beliefs_per_iteration, iter_seed)?;
        let (net, report) = train(
            &generated.samples,
            model.graph().num_vertices() + 1,
            &cfg.network,
            iter_seed,
        )?;
        let next = Arc::new(ClassifierPolicy::new(Arc::new(net), current.clone(), model)?);
        cost_trace.push(score(next.as_ref())?);
        reports.push(report);
        policies.push(next.clone());
        current = next;
    }
    Ok(PiResult {
        policies,
        cost_trace,
        reports,
    })
}
