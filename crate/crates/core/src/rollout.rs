//! Truncated multiagent rollout.
//!
//! A Q-factor at `(b, u)` is `ĝ(b,u) + α Σ_z p̂(z|b,u) J̃(F(b,u,z))`, where
//! `J̃` runs the base policy for `t` stages from the successor belief and adds
//! `α^t Ĵ` at the truncation point. The search routines here decide which
//! joint controls get scored: all of them (standard), one agent at a time, or
//! one agent at a time with a greedily optimized agent order.
//!
//! Within one decision every Q-factor reuses the same random streams (keyed by
//! stage seed, observation and trajectory index), so candidate controls are
//! compared under common random numbers and the scores do not depend on the
//! order in which candidates are evaluated.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::pomdp::{Model, Policy, TerminalCost};
use crate::rng::{derive, purpose, stream, SimRng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentOrder {
    /// Agents in index order.
    #[default]
    Natural,
    /// A fixed permutation of agent indices.
    Fixed(Vec<usize>),
    /// Greedy per-stage order construction.
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    /// Lookahead depth `l ≥ 1`.
    pub lookahead: usize,
    /// Base-policy stages `t` simulated before the terminal cost.
    pub truncation: usize,
    /// Monte Carlo trajectories per Q-factor (per observation branch when the
    /// first-step observation law is enumerated).
    pub n_traj: usize,
    /// Sampled observation branches per node of a multistep lookahead tree.
    pub obs_branch: usize,
    pub agent_order: AgentOrder,
    /// Largest first-step observation support that is enumerated exactly.
    pub obs_enum_cap: usize,
    /// Largest joint control set standard rollout will enumerate.
    pub joint_cap: usize,
    /// Largest multistep lookahead tree (estimated Q-factor count).
    pub tree_cap: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            lookahead: 1,
            truncation: 10,
            n_traj: 30,
            obs_branch: 4,
            agent_order: AgentOrder::Natural,
            obs_enum_cap: 4096,
            joint_cap: 100_000,
            tree_cap: 1_000_000,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookahead == 0 {
            return Err(Error::Config("lookahead must be at least 1".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::Config("need at least one trajectory per Q-factor".into()));
        }
        if self.lookahead > 1 && self.obs_branch == 0 {
            return Err(Error::Config("multistep lookahead needs obs_branch ≥ 1".into()));
        }
        Ok(())
    }

    fn order(&self, m: usize) -> Result<Vec<usize>> {
        match &self.agent_order {
            AgentOrder::Natural | AgentOrder::Optimized => Ok((0..m).collect()),
            AgentOrder::Fixed(order) => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..m).collect::<Vec<_>>() {
                    return Err(Error::Config(format!("{order:?} is not a permutation of 0..{m}")));
                }
                Ok(order.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QFactorEstimate<C> {
    pub control: Vec<C>,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Evaluation counters, shared across worker threads.
#[derive(Debug, Default)]
pub struct EvalCounter {
    q_factor_evaluations: AtomicU64,
    trajectories_simulated: AtomicU64,
    slot_minimizations: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CounterSnapshot {
    pub q_factor_evaluations: u64,
    pub trajectories_simulated: u64,
    pub slot_minimizations: u64,
}

impl std::ops::Sub for CounterSnapshot {
    type Output = CounterSnapshot;
    fn sub(self, rhs: Self) -> Self {
        CounterSnapshot {
            q_factor_evaluations: self.q_factor_evaluations - rhs.q_factor_evaluations,
            trajectories_simulated: self.trajectories_simulated - rhs.trajectories_simulated,
            slot_minimizations: self.slot_minimizations - rhs.slot_minimizations,
        }
    }
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            q_factor_evaluations: self.q_factor_evaluations.load(Ordering::Relaxed),
            trajectories_simulated: self.trajectories_simulated.load(Ordering::Relaxed),
            slot_minimizations: self.slot_minimizations.load(Ordering::Relaxed),
        }
    }

    fn add_q(&self, n: usize) {
        self.q_factor_evaluations.fetch_add(n as u64, Ordering::Relaxed);
    }

    fn add_trajectories(&self, n: usize) {
        self.trajectories_simulated.fetch_add(n as u64, Ordering::Relaxed);
    }

    fn add_slot(&self) {
        self.slot_minimizations.fetch_add(1, Ordering::Relaxed);
    }
}

/// Scores joint controls. Implemented by the Monte Carlo stage evaluator and,
/// in tests, by exact Q tables.
pub trait QSource<C> {
    fn evaluate(&self, controls: &[Vec<C>]) -> Result<Vec<f64>>;

    /// Called once per single-component minimization.
    fn note_minimization(&self) {}
}

impl<C, F> QSource<C> for F
where
    F: Fn(&[C]) -> Result<f64>,
{
    fn evaluate(&self, controls: &[Vec<C>]) -> Result<Vec<f64>> {
        controls.iter().map(|u| self(u)).collect()
    }
}

/// Minimizes over one agent's component with the rest of `current` held
/// fixed. Ties go to `preferred` when it is among the minimizers, then to the
/// smallest component.
pub fn minimize_component<C: Copy + Ord, Q: QSource<C> + ?Sized>(
    q: &Q,
    current: &[C],
    agent: usize,
    candidates: &[C],
    preferred: C,
) -> Result<(C, f64)> {
    q.note_minimization();
    let trials: Vec<Vec<C>> = candidates
        .iter()
        .map(|&c| {
            let mut u = current.to_vec();
            u[agent] = c;
            u
        })
        .collect();
    let scores = q.evaluate(&trials)?;
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tied = candidates.iter().zip(&scores).filter(|(_, s)| **s == best).map(|(c, _)| *c);
    let mut choice: Option<C> = None;
    for c in tied {
        if c == preferred {
            return Ok((c, best));
        }
        if choice.is_none_or(|cur| c < cur) {
            choice = Some(c);
        }
    }
    choice
        .map(|c| (c, best))
        .ok_or_else(|| Error::InfeasibleControl("empty or non-finite candidate set".into()))
}

/// One-agent-at-a-time minimization: agents earlier in `order` keep their
/// optimized components, later ones keep `base`.
pub fn sequential_minimize<C: Copy + Ord, Q: QSource<C> + ?Sized>(
    q: &Q,
    sets: &[Vec<C>],
    base: &[C],
    order: &[usize],
) -> Result<Vec<C>> {
    let mut current = base.to_vec();
    for &l in order {
        let (c, _) = minimize_component(q, &current, l, &sets[l], base[l])?;
        current[l] = c;
    }
    Ok(current)
}

/// Greedy order construction: at each slot every unplaced agent is minimized
/// and the one reaching the smallest Q is placed (ties to the lowest index).
pub fn order_optimized_minimize<C: Copy + Ord, Q: QSource<C> + ?Sized>(
    q: &Q,
    sets: &[Vec<C>],
    base: &[C],
) -> Result<(Vec<C>, Vec<usize>)> {
    let m = base.len();
    let mut current = base.to_vec();
    let mut placed = Vec::with_capacity(m);
    let mut unplaced: Vec<usize> = (0..m).collect();
    while !unplaced.is_empty() {
        let mut best: Option<(f64, usize, C)> = None;
        for &l in &unplaced {
            let (c, score) = minimize_component(q, &current, l, &sets[l], base[l])?;
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, l, c));
            }
        }
        let (_, l, c) = best.expect("at least one unplaced agent");
        current[l] = c;
        placed.push(l);
        unplaced.retain(|&a| a != l);
    }
    Ok((current, placed))
}

/// Every agent minimizes independently against `signal(agent)`, the joint
/// control it assumes for everybody else.
pub fn independent_minimize<C: Copy + Ord, Q: QSource<C> + ?Sized>(
    q: &Q,
    sets: &[Vec<C>],
    base: &[C],
    signal: impl Fn(usize) -> Vec<C>,
) -> Result<Vec<C>> {
    (0..base.len())
        .map(|l| minimize_component(q, &signal(l), l, &sets[l], base[l]).map(|(c, _)| c))
        .collect()
}

/// Exhaustive minimization over the joint control set, ties to the
/// lexicographically smallest control.
pub fn joint_minimize<C: Copy + Ord, Q: QSource<C> + ?Sized>(
    q: &Q,
    sets: &[Vec<C>],
    cap: usize,
) -> Result<Vec<C>> {
    let size: u128 = sets.iter().map(|s| s.len() as u128).product();
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            what: "standard rollout joint control set",
            size,
            cap: cap as u128,
        });
    }
    let joint = cartesian(sets);
    let scores = q.evaluate(&joint)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    joint
        .into_iter()
        .nth(best)
        .ok_or_else(|| Error::InfeasibleControl("empty joint control set".into()))
}

/// Lexicographic cartesian product (first agent most significant).
pub fn cartesian<C: Copy>(sets: &[Vec<C>]) -> Vec<Vec<C>> {
    let mut out: Vec<Vec<C>> = vec![Vec::with_capacity(sets.len())];
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |&c| {
                    let mut u = prefix.clone();
                    u.push(c);
                    u
                })
            })
            .collect();
    }
    out
}

/// Rollout planner bound to a model, base policy and terminal cost.
pub struct Rollout<'a, M: Model, P: ?Sized, T: ?Sized> {
    pub model: &'a M,
    pub base: &'a P,
    pub terminal: &'a T,
    pub config: RolloutConfig,
}

impl<M: Model, P: ?Sized, T: ?Sized> Clone for Rollout<'_, M, P, T> {
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            base: self.base,
            terminal: self.terminal,
            config: self.config.clone(),
        }
    }
}

impl<'a, M, P, T> Rollout<'a, M, P, T>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    pub fn new(model: &'a M, base: &'a P, terminal: &'a T, config: RolloutConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model,
            base,
            terminal,
            config,
        })
    }

    /// Same planner with a different base policy.
    pub fn with_base<'b, Q: Policy<M> + ?Sized>(&self, base: &'b Q) -> Rollout<'b, M, Q, T>
    where
        'a: 'b,
    {
        Rollout {
            model: self.model,
            base,
            terminal: self.terminal,
            config: self.config.clone(),
        }
    }

    pub fn control_sets(&self, b: &M::Belief) -> Vec<Vec<M::Component>> {
        (0..self.model.num_agents()).map(|l| self.model.controls(b, l)).collect()
    }

    /// Monte Carlo Q-factor under the random streams of `seed`.
    pub fn q_factor(
        &self,
        b: &M::Belief,
        u: &[M::Component],
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<QFactorEstimate<M::Component>> {
        if !self.model.is_feasible(b, u) {
            return Err(Error::InfeasibleControl(format!("{u:?}")));
        }
        let alpha = self.model.discount();
        let stage = self.model.expected_stage_cost(b, u)?;
        let n = self.config.n_traj;
        let (future, variance) = match self.model.observation_distribution(b, u, self.config.obs_enum_cap)? {
            Some(dist) => {
                let mut mean = 0.0;
                let mut var = 0.0;
                for (z, p) in dist {
                    let next = self.model.belief_update(b, u, &z)?;
                    let key = self.model.observation_key(&z);
                    let (m_z, v_z) = self.continuation_stats(&next, |j| {
                        stream(seed, &[purpose::Q_FACTOR, key, j as u64])
                    }, counter)?;
                    mean += p * m_z;
                    var += p * p * v_z / n as f64;
                }
                (mean, var)
            }
            None => {
                let mut values = Vec::with_capacity(n);
                for j in 0..n {
                    let mut rng = stream(seed, &[purpose::SAMPLED_BRANCH, j as u64]);
                    let z = self.model.sample_observation(b, u, &mut rng)?;
                    let next = self.model.belief_update(b, u, &z)?;
                    values.push(self.continuation(&next, &mut rng)?);
                }
                counter.add_trajectories(if self.config.truncation > 0 { n } else { 0 });
                let (m, v) = mean_var(&values);
                (m, v / n as f64)
            }
        };
        Ok(QFactorEstimate {
            control: u.to_vec(),
            mean: stage + alpha * future,
            stderr: alpha * variance.sqrt(),
            n,
        })
    }

    /// Sample mean and variance of `J̃` from `b` over `n_traj` trajectories.
    fn continuation_stats(
        &self,
        b: &M::Belief,
        rng_for: impl Fn(usize) -> SimRng,
        counter: &EvalCounter,
    ) -> Result<(f64, f64)> {
        if self.config.truncation == 0 {
            return Ok((self.terminal.terminal_cost(self.model, b), 0.0));
        }
        let values: Vec<f64> = (0..self.config.n_traj)
            .map(|j| self.continuation(b, &mut rng_for(j)))
            .collect::<Result<_>>()?;
        counter.add_trajectories(values.len());
        Ok(mean_var(&values))
    }

    /// One sample of `Σ_{τ<t} α^τ ĝ(b_τ, μ(b_τ)) + α^t Ĵ(b_t)`.
    pub fn continuation(&self, b: &M::Belief, rng: &mut SimRng) -> Result<f64> {
        let alpha = self.model.discount();
        let mut discount = 1.0;
        let mut total = 0.0;
        let mut b = b.clone();
        for _ in 0..self.config.truncation {
            let u = self.base.joint_control(self.model, &b)?;
            total += discount * self.model.expected_stage_cost(&b, &u)?;
            let z = self.model.sample_observation(&b, &u, rng)?;
            self.model.belief_update_in_place(&mut b, &u, &z)?;
            discount *= alpha;
        }
        Ok(total + discount * self.terminal.terminal_cost(self.model, &b))
    }

    pub fn stage_evaluator<'s>(
        &'s self,
        b: &'s M::Belief,
        seed: u64,
        counter: &'s EvalCounter,
    ) -> StageEvaluator<'s, 'a, M, P, T> {
        StageEvaluator {
            rollout: self,
            belief: b,
            seed,
            counter,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Minimum over the full joint control set.
    pub fn standard_control(
        &self,
        b: &M::Belief,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<Vec<M::Component>> {
        let q = self.stage_evaluator(b, seed, counter);
        joint_minimize(&q, &self.control_sets(b), self.config.joint_cap)
    }

    /// Agent-by-agent minimization in the configured order.
    pub fn one_at_a_time_control(
        &self,
        b: &M::Belief,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<Vec<M::Component>> {
        let base = self.base.joint_control(self.model, b)?;
        let order = self.config.order(self.model.num_agents())?;
        let q = self.stage_evaluator(b, seed, counter);
        sequential_minimize(&q, &self.control_sets(b), &base, &order)
    }

    /// Agent-by-agent minimization with a greedily optimized order; returns
    /// the controls and the order chosen.
    pub fn order_optimized_control(
        &self,
        b: &M::Belief,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<(Vec<M::Component>, Vec<usize>)> {
        let base = self.base.joint_control(self.model, b)?;
        let q = self.stage_evaluator(b, seed, counter);
        order_optimized_minimize(&q, &self.control_sets(b), &base)
    }

    /// Sampled multistep lookahead with one-agent-at-a-time minimization at
    /// every tree node. With `lookahead == 1` this is exactly
    /// [`Self::one_at_a_time_control`].
    pub fn multistep_control(
        &self,
        b: &M::Belief,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<Vec<M::Component>> {
        let depth = self.config.lookahead;
        if depth <= 1 {
            return self.one_at_a_time_control(b, seed, counter);
        }
        let width: u128 = (0..self.model.num_agents())
            .map(|l| self.model.controls(b, l).len() as u128)
            .sum();
        let per_level = width * self.config.obs_branch as u128;
        let estimate = per_level.saturating_pow(depth as u32 - 1).saturating_mul(width);
        if estimate > self.config.tree_cap as u128 {
            return Err(Error::CapExceeded {
                what: "multistep lookahead tree",
                size: estimate,
                cap: self.config.tree_cap as u128,
            });
        }
        let (u, _) = self.tree_node(b, depth, seed, counter)?;
        Ok(u)
    }

    fn tree_node(
        &self,
        b: &M::Belief,
        depth: usize,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<(Vec<M::Component>, f64)> {
        let base = self.base.joint_control(self.model, b)?;
        let order = self.config.order(self.model.num_agents())?;
        let sets = self.control_sets(b);
        if depth == 1 {
            let q = self.stage_evaluator(b, seed, counter);
            let u = sequential_minimize(&q, &sets, &base, &order)?;
            let value = q.evaluate(std::slice::from_ref(&u))?[0];
            return Ok((u, value));
        }
        let q = TreeQ {
            rollout: self,
            belief: b,
            depth,
            seed,
            counter,
            cache: Mutex::new(HashMap::new()),
        };
        let u = sequential_minimize(&q, &sets, &base, &order)?;
        let value = q.evaluate(std::slice::from_ref(&u))?[0];
        Ok((u, value))
    }
}

/// Monte Carlo Q-factors at one belief and stage seed, memoized per joint
/// control. Every request is counted, cached or not.
pub struct StageEvaluator<'s, 'a, M: Model, P: ?Sized, T: ?Sized> {
    rollout: &'s Rollout<'a, M, P, T>,
    belief: &'s M::Belief,
    seed: u64,
    counter: &'s EvalCounter,
    cache: Mutex<HashMap<Vec<M::Component>, QFactorEstimate<M::Component>>>,
}

impl<M, P, T> StageEvaluator<'_, '_, M, P, T>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    pub fn estimates(&self, controls: &[Vec<M::Component>]) -> Result<Vec<QFactorEstimate<M::Component>>> {
        self.counter.add_q(controls.len());
        let missing: Vec<Vec<M::Component>> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut missing: Vec<Vec<M::Component>> = Vec::new();
            for u in controls {
                if !cache.contains_key(u) && !missing.contains(u) {
                    missing.push(u.clone());
                }
            }
            missing
        };
        let fresh = map_indexed(missing.len(), |i| {
            self.rollout.q_factor(self.belief, &missing[i], self.seed, self.counter)
        });
        let mut cache = self.cache.lock().expect("cache lock");
        for est in fresh {
            let est = est?;
            cache.insert(est.control.clone(), est);
        }
        Ok(controls.iter().map(|u| cache[u].clone()).collect())
    }
}

impl<M, P, T> QSource<M::Component> for StageEvaluator<'_, '_, M, P, T>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    fn evaluate(&self, controls: &[Vec<M::Component>]) -> Result<Vec<f64>> {
        Ok(self.estimates(controls)?.into_iter().map(|e| e.mean).collect())
    }

    fn note_minimization(&self) {
        self.counter.add_slot();
    }
}

/// Q-factors at an interior node of a multistep lookahead tree: stage cost
/// plus the average over sampled observations of the optimized child value.
struct TreeQ<'s, 'a, M: Model, P: ?Sized, T: ?Sized> {
    rollout: &'s Rollout<'a, M, P, T>,
    belief: &'s M::Belief,
    depth: usize,
    seed: u64,
    counter: &'s EvalCounter,
    cache: Mutex<HashMap<Vec<M::Component>, f64>>,
}

impl<M, P, T> QSource<M::Component> for TreeQ<'_, '_, M, P, T>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    fn evaluate(&self, controls: &[Vec<M::Component>]) -> Result<Vec<f64>> {
        self.counter.add_q(controls.len());
        let model = self.rollout.model;
        let branches = self.rollout.config.obs_branch;
        let mut out = Vec::with_capacity(controls.len());
        for u in controls {
            if let Some(v) = self.cache.lock().expect("cache lock").get(u) {
                out.push(*v);
                continue;
            }
            let stage = model.expected_stage_cost(self.belief, u)?;
            let mut future = 0.0;
            for k in 0..branches {
                let mut rng = stream(self.seed, &[purpose::LOOKAHEAD, k as u64]);
                let z = model.sample_observation(self.belief, u, &mut rng)?;
                let next = model.belief_update(self.belief, u, &z)?;
                let child_seed = derive(self.seed, &[purpose::LOOKAHEAD, k as u64, self.depth as u64]);
                let (_, value) = self.rollout.tree_node(&next, self.depth - 1, child_seed, self.counter)?;
                future += value;
            }
            let value = stage + model.discount() * future / branches as f64;
            self.cache.lock().expect("cache lock").insert(u.clone(), value);
            out.push(value);
        }
        Ok(out)
    }

    fn note_minimization(&self) {
        self.counter.add_slot();
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
