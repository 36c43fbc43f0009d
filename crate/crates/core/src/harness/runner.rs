use std::sync::Arc;

use serde::Serialize;

use super::config::{ExperimentConfig, PolicySpec};
use crate::approx_pi::{ClassifierPolicy, PolicyNetwork};
use crate::base_policy::{GreedyPolicy, ShortestPathTable};
use crate::comms::{
    amr_b_control, amr_ilc_control, amr_lc_control, amr_n_control, CommsArchitecture, LocalBeliefBank, OfflineMode,
};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::pomdp::{Model, Policy};
use crate::repair::{
    DamageObservation, FactoredBelief, HiddenRepairState, InitialDamage, RepairAction, RepairModel,
    SteadyStateTerminal,
};
use crate::rng::{derive, purpose, stream};
use crate::rollout::{EvalCounter, Rollout, RolloutConfig};
use crate::stats::{mean, paired_t, std_error, PairedTest};

/// A repair instance with the pieces every policy shares.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: RepairModel,
    pub paths: ShortestPathTable,
    pub greedy: Arc<GreedyPolicy>,
    pub init: InitialDamage,
}

impl Instance {
    pub fn new(model: RepairModel, init: InitialDamage) -> Result<Self> {
        let paths = ShortestPathTable::build(model.graph())?;
        Ok(Self {
            greedy: Arc::new(GreedyPolicy::new(paths.clone())),
            paths,
            model,
            init,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let model = cfg.instance.build(cfg.evaluation.discount, &cfg.base_dir)?;
        Self::new(model, cfg.instance.initial_damage)
    }

    /// Seeded `(hidden state, belief)` pairs shared by every policy.
    pub fn initial_suite(&self, n: usize, root: u64) -> Vec<(HiddenRepairState, FactoredBelief)> {
        (0..n)
            .map(|i| {
                self.model
                    .random_initial_state(&self.init, &mut stream(root, &[purpose::INITIAL_STATE, i as u64]))
            })
            .collect()
    }

    /// Loads a classifier chain; each network's base is the previous one,
    /// the first one's base is the greedy policy.
    pub fn classifier_chain(&self, nets: Vec<PolicyNetwork>) -> Result<Vec<Arc<ClassifierPolicy>>> {
        let mut prev: Arc<dyn Policy<RepairModel>> = self.greedy.clone();
        let mut chain = Vec::with_capacity(nets.len());
        for net in nets {
            let p = Arc::new(ClassifierPolicy::new(Arc::new(net), prev, &self.model)?);
            prev = p.clone();
            chain.push(p);
        }
        Ok(chain)
    }
}

/// One simulated episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub cost: f64,
    pub stages: usize,
    pub q_per_stage: Vec<u64>,
    pub trajectories: u64,
    pub slot_minimizations: u64,
    pub oscillations: usize,
    pub cloud_hits: usize,
    #[serde(skip)]
    pub controls: Vec<Vec<RepairAction>>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EpisodeRecord {
    pub fn mean_q_per_stage(&self) -> f64 {
        mean(&self.q_per_stage.iter().map(|&q| q as f64).collect::<Vec<_>>())
    }

    /// Back-and-forth moves `A → B → A` per agent-stage.
    pub fn oscillation_rate(&self, agents: usize) -> f64 {
        if self.stages < 2 {
            0.0
        } else {
            self.oscillations as f64 / (agents * (self.stages - 1)) as f64
        }
    }

    pub fn cloud_rate(&self) -> f64 {
        if self.stages == 0 {
            0.0
        } else {
            self.cloud_hits as f64 / self.stages as f64
        }
    }
}

/// Wall clock for the timing output; reads zero where the platform has no
/// monotonic clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

type Decide<'a> = dyn FnMut(&FactoredBelief, u64, &EvalCounter) -> Result<(Vec<RepairAction>, bool)> + 'a;
type Observe<'a> = dyn FnMut(&DamageObservation) -> Result<()> + 'a;

/// Closed-loop simulation. Environment noise at stage `τ` comes from
/// `(root, ENVIRONMENT, index, τ)` and the controller seed from
/// `(root, CONTROLLER, index, τ)`, so every policy sees the same noise.
#[allow(clippy::too_many_arguments)]
fn simulate(
    model: &RepairModel,
    s0: &HiddenRepairState,
    b0: &FactoredBelief,
    horizon: usize,
    root: u64,
    index: usize,
    record_controls: bool,
    decide: &mut Decide<'_>,
    observe: &mut Observe<'_>,
) -> Result<EpisodeRecord> {
    let start = Stopwatch::start();
    let counter = EvalCounter::new();
    let alpha = model.discount();
    let mut s = s0.clone();
    let mut b = b0.clone();
    let mut discount = 1.0;
    let mut rec = EpisodeRecord {
        index,
        cost: 0.0,
        stages: horizon,
        q_per_stage: Vec::with_capacity(horizon),
        trajectories: 0,
        slot_minimizations: 0,
        oscillations: 0,
        cloud_hits: 0,
        controls: Vec::new(),
        wall_seconds: 0.0,
    };
    let mut prev: Option<(Vec<usize>, Vec<RepairAction>)> = None;
    for tau in 0..horizon {
        let before = counter.snapshot();
        let seed = derive(root, &[purpose::CONTROLLER, index as u64, tau as u64]);
        let (u, cloud) = decide(&b, seed, &counter)?;
        rec.q_per_stage.push((counter.snapshot() - before).q_factor_evaluations);
        rec.cloud_hits += usize::from(cloud);
        if let Some((prev_locs, prev_u)) = &prev {
            for l in 0..u.len() {
                let moved_twice = matches!(prev_u[l], RepairAction::Move(_)) && matches!(u[l], RepairAction::Move(_));
                if moved_twice && u[l].destination(s.locations[l]) == prev_locs[l] {
                    rec.oscillations += 1;
                }
            }
        }
        let (next, z, cost) = model.env_step(&s, &u, &mut stream(root, &[purpose::ENVIRONMENT, index as u64, tau as u64]))?;
        rec.cost += discount * cost;
        discount *= alpha;
        b = model.belief_step(&b, &u, &z)?;
        observe(&z)?;
        prev = Some((s.locations.clone(), u.clone()));
        if record_controls {
            rec.controls.push(u);
        }
        s = next;
    }
    let total = counter.snapshot();
    rec.trajectories = total.trajectories_simulated;
    rec.slot_minimizations = total.slot_minimizations;
    rec.wall_seconds = start.seconds();
    Ok(rec)
}

/// Discounted cost of a plain policy on every state of `suite`.
pub fn evaluate_policy<P: Policy<RepairModel> + ?Sized>(
    model: &RepairModel,
    policy: &P,
    suite: &[(HiddenRepairState, FactoredBelief)],
    horizon: usize,
    root: u64,
) -> Result<Vec<f64>> {
    map_indexed(suite.len(), |i| {
        let (s0, b0) = &suite[i];
        let mut decide = |b: &FactoredBelief, _: u64, _: &EvalCounter| Ok((policy.joint_control(model, b)?, false));
        simulate(model, s0, b0, horizon, root, i, false, &mut decide, &mut |_| Ok(())).map(|r| r.cost)
    })
    .into_iter()
    .collect()
}

/// A policy spec bound to an instance, with any classifiers loaded.
pub struct PolicyRunner<'a> {
    instance: &'a Instance,
    spec: PolicySpec,
    chain: Vec<Arc<ClassifierPolicy>>,
    rollout: RolloutConfig,
    terminal: SteadyStateTerminal,
}

impl<'a> PolicyRunner<'a> {
    pub fn new(instance: &'a Instance, spec: PolicySpec, rollout: RolloutConfig, base_dir: &std::path::Path) -> Result<Self> {
        let files = match &spec {
            PolicySpec::Classifier { files } => files.clone(),
            PolicySpec::Comms { classifiers, .. } => classifiers.clone(),
            _ => Vec::new(),
        };
        let nets = files
            .iter()
            .map(|f| PolicyNetwork::load(base_dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        let chain = instance.classifier_chain(nets)?;
        Self::with_chain(instance, spec, chain, rollout)
    }

    /// Uses an in-memory classifier chain instead of files.
    pub fn with_chain(
        instance: &'a Instance,
        spec: PolicySpec,
        chain: Vec<Arc<ClassifierPolicy>>,
        rollout: RolloutConfig,
    ) -> Result<Self> {
        rollout.validate()?;
        let needed = match &spec {
            PolicySpec::Classifier { .. } => 1,
            PolicySpec::Comms {
                architecture: CommsArchitecture::AmrN,
                ..
            } => 1,
            PolicySpec::Comms {
                architecture: CommsArchitecture::AmrPi,
                ..
            } => 2,
            PolicySpec::Comms { architecture, .. } => {
                architecture.validate()?;
                0
            }
            _ => 0,
        };
        if chain.len() < needed {
            return Err(Error::Config(format!("{} needs {needed} classifier(s)", spec.label())));
        }
        Ok(Self {
            instance,
            spec,
            chain,
            rollout,
            terminal: SteadyStateTerminal,
        })
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn run_episode(
        &self,
        s0: &HiddenRepairState,
        b0: &FactoredBelief,
        horizon: usize,
        root: u64,
        index: usize,
        record_controls: bool,
    ) -> Result<EpisodeRecord> {
        let inst = self.instance;
        let model = &inst.model;
        let greedy: &dyn Policy<RepairModel> = inst.greedy.as_ref();
        let rollout = Rollout::new(model, greedy, &self.terminal, self.rollout.clone())?;
        let bank = std::cell::RefCell::new(LocalBeliefBank::new(b0, model.agents()));
        let last = self.chain.last().cloned();
        let pi_rollout = if self.chain.len() >= 2 {
            let base: &dyn Policy<RepairModel> = self.chain[self.chain.len() - 2].as_ref();
            Some(Rollout::new(model, base, &self.terminal, self.rollout.clone())?)
        } else {
            None
        };
        let mut decide = |b: &FactoredBelief, seed: u64, counter: &EvalCounter| -> Result<(Vec<RepairAction>, bool)> {
            let plain = |u: Vec<RepairAction>| Ok((u, false));
            match &self.spec {
                PolicySpec::Base => plain(greedy.joint_control(model, b)?),
                PolicySpec::Standard => plain(rollout.standard_control(b, seed, counter)?),
                PolicySpec::OneAtATime => plain(rollout.one_at_a_time_control(b, seed, counter)?),
                PolicySpec::OrderOptimized => plain(rollout.order_optimized_control(b, seed, counter)?.0),
                PolicySpec::Multistep => plain(rollout.multistep_control(b, seed, counter)?),
                PolicySpec::Classifier { .. } => plain(last.as_ref().expect("checked").joint_control(model, b)?),
                PolicySpec::Comms { architecture, .. } => match *architecture {
                    CommsArchitecture::PerfectShared => plain(rollout.one_at_a_time_control(b, seed, counter)?),
                    CommsArchitecture::AmrB => plain(amr_b_control(&rollout, b, seed, counter)?),
                    CommsArchitecture::AmrN => {
                        plain(amr_n_control(&rollout, last.as_deref().expect("checked"), b, seed, counter)?)
                    }
                    CommsArchitecture::AmrPi => plain(amr_n_control(
                        pi_rollout.as_ref().expect("checked"),
                        last.as_deref().expect("checked"),
                        b,
                        seed,
                        counter,
                    )?),
                    CommsArchitecture::AmrLc { radius } => {
                        plain(amr_lc_control(&rollout, &inst.paths, radius, b, seed, counter)?)
                    }
                    CommsArchitecture::AmrIlc { rho, radius } => {
                        amr_ilc_control(&rollout, &inst.paths, rho, radius, b, seed, counter)
                    }
                    CommsArchitecture::AmrIb1 { rho } => {
                        bank.borrow_mut().decide(&rollout, b, OfflineMode::Ib1, rho, seed, counter)
                    }
                    CommsArchitecture::AmrIb0 { rho } => {
                        bank.borrow_mut().decide(&rollout, b, OfflineMode::Ib0, rho, seed, counter)
                    }
                },
            }
        };
        let uses_bank = matches!(
            self.spec,
            PolicySpec::Comms {
                architecture: CommsArchitecture::AmrIb1 { .. } | CommsArchitecture::AmrIb0 { .. },
                ..
            }
        );
        let mut observe = |z: &DamageObservation| {
            if uses_bank {
                bank.borrow_mut().advance(model, z)?;
            }
            Ok(())
        };
        simulate(model, s0, b0, horizon, root, index, record_controls, &mut decide, &mut observe)
    }

    /// Runs every state of `suite` (in parallel when enabled); results are
    /// ordered by state index.
    pub fn evaluate(
        &self,
        suite: &[(HiddenRepairState, FactoredBelief)],
        horizon: usize,
        root: u64,
        record_controls: bool,
    ) -> Result<PolicyResult> {
        let episodes = map_indexed(suite.len(), |i| {
            self.run_episode(&suite[i].0, &suite[i].1, horizon, root, i, record_controls)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(PolicyResult {
            label: self.label(),
            agents: self.instance.model.agents(),
            episodes,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyResult {
    pub label: String,
    pub agents: usize,
    pub episodes: Vec<EpisodeRecord>,
}

impl PolicyResult {
    pub fn costs(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.cost).collect()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.costs())
    }

    pub fn stderr(&self) -> f64 {
        std_error(&self.costs())
    }

    pub fn min(&self) -> f64 {
        self.costs().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.costs().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_q_per_stage(&self) -> f64 {
        mean(&self.episodes.iter().map(EpisodeRecord::mean_q_per_stage).collect::<Vec<_>>())
    }

    pub fn oscillation_rate(&self) -> f64 {
        mean(&self.episodes.iter().map(|e| e.oscillation_rate(self.agents)).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub test: PairedTest,
}

impl Comparison {
    /// Ordering verdict at the given one-sided level.
    pub fn verdict(&self, level: f64) -> &'static str {
        if self.test.p_less < level {
            "a<b"
        } else if self.test.p_greater < level {
            "a>b"
        } else {
            "tie"
        }
    }
}

/// Paired comparisons for every pair of policies, in grid order.
pub fn compare(results: &[PolicyResult]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            out.push(Comparison {
                a: results[i].label.clone(),
                b: results[j].label.clone(),
                test: paired_t(&results[i].costs(), &results[j].costs()),
            });
        }
    }
    out
}
