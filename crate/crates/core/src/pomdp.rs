//! Finite POMDP abstractions in belief space.
//!
//! A [`Model`] exposes everything a belief-space planner needs: per-agent
//! control sets, the expected stage cost `ĝ(b,u)`, the observation law
//! `p̂(z|b,u)`, the belief estimator `F(b,u,z)` and a hidden-state simulator.
//! [`TabularPomdp`] is the explicit `p_ij(u)`, `p(z|j,u)`, `g(i,u,j)` backend
//! used for small instances and as a brute-force reference.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_index, SimRng};

pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the number of tree nodes visited by exact evaluation.
pub const DEFAULT_BRANCH_CAP: usize = 10_000_000;

pub trait Model: Sync {
    type Belief: Clone + Debug + Send + Sync;
    type Component: Copy + Ord + Eq + Hash + Debug + Send + Sync;
    type Observation: Clone + Debug + Send + Sync;
    type State: Clone + Debug + Send + Sync;

    fn num_agents(&self) -> usize;

    fn discount(&self) -> f64;

    /// Feasible control components of `agent` at `b`, in ascending order.
    fn controls(&self, b: &Self::Belief, agent: usize) -> Vec<Self::Component>;

    fn expected_stage_cost(&self, b: &Self::Belief, u: &[Self::Component]) -> Result<f64>;

    /// Full `p̂(z|b,u)` restricted to positive entries, or `None` when more
    /// than `cap` outcomes would have to be listed.
    fn observation_distribution(
        &self,
        b: &Self::Belief,
        u: &[Self::Component],
        cap: usize,
    ) -> Result<Option<Vec<(Self::Observation, f64)>>>;

    fn sample_observation(
        &self,
        b: &Self::Belief,
        u: &[Self::Component],
        rng: &mut SimRng,
    ) -> Result<Self::Observation>;

    /// The belief estimator `F(b,u,z)`.
    fn belief_update(
        &self,
        b: &Self::Belief,
        u: &[Self::Component],
        z: &Self::Observation,
    ) -> Result<Self::Belief>;

    /// `F(b,u,z)` written over `b`.
    fn belief_update_in_place(
        &self,
        b: &mut Self::Belief,
        u: &[Self::Component],
        z: &Self::Observation,
    ) -> Result<()> {
        *b = self.belief_update(b, u, z)?;
        Ok(())
    }

    /// Stable 64-bit key of an observation, used to address random streams.
    fn observation_key(&self, z: &Self::Observation) -> u64;

    fn sample_state(&self, b: &Self::Belief, rng: &mut SimRng) -> Self::State;

    /// One step of the hidden system: `(next state, observation, realized cost)`.
    fn step(
        &self,
        s: &Self::State,
        u: &[Self::Component],
        rng: &mut SimRng,
    ) -> Result<(Self::State, Self::Observation, f64)>;

    fn is_feasible(&self, b: &Self::Belief, u: &[Self::Component]) -> bool {
        u.len() == self.num_agents()
            && u.iter()
                .enumerate()
                .all(|(l, c)| self.controls(b, l).binary_search(c).is_ok())
    }
}

/// A policy maps a belief to a joint control.
pub trait Policy<M: Model>: Sync + Send {
    fn joint_control(&self, model: &M, b: &M::Belief) -> Result<Vec<M::Component>>;

    fn component(&self, model: &M, b: &M::Belief, agent: usize) -> Result<M::Component> {
        Ok(self.joint_control(model, b)?[agent])
    }
}

/// Terminal cost approximation `Ĵ` applied where a rollout is truncated.
pub trait TerminalCost<M: Model>: Sync + Send {
    fn terminal_cost(&self, model: &M, b: &M::Belief) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTerminal;

impl<M: Model> TerminalCost<M> for ZeroTerminal {
    fn terminal_cost(&self, _: &M, _: &M::Belief) -> f64 {
        0.0
    }
}

impl<M: Model, F> TerminalCost<M> for F
where
    F: Fn(&M, &M::Belief) -> f64 + Sync + Send,
{
    fn terminal_cost(&self, model: &M, b: &M::Belief) -> f64 {
        self(model, b)
    }
}

impl<M: Model, P: Policy<M> + ?Sized> Policy<M> for &P {
    fn joint_control(&self, model: &M, b: &M::Belief) -> Result<Vec<M::Component>> {
        (**self).joint_control(model, b)
    }
    fn component(&self, model: &M, b: &M::Belief, agent: usize) -> Result<M::Component> {
        (**self).component(model, b, agent)
    }
}

impl<M: Model, P: Policy<M> + ?Sized> Policy<M> for Box<P> {
    fn joint_control(&self, model: &M, b: &M::Belief) -> Result<Vec<M::Component>> {
        (**self).joint_control(model, b)
    }
    fn component(&self, model: &M, b: &M::Belief, agent: usize) -> Result<M::Component> {
        (**self).component(model, b, agent)
    }
}

impl<M: Model, P: Policy<M> + ?Sized> Policy<M> for std::sync::Arc<P> {
    fn joint_control(&self, model: &M, b: &M::Belief) -> Result<Vec<M::Component>> {
        (**self).joint_control(model, b)
    }
    fn component(&self, model: &M, b: &M::Belief, agent: usize) -> Result<M::Component> {
        (**self).component(model, b, agent)
    }
}

/// Policy defined by a closure; handy for fixed-control baselines and tests.
pub struct FnPolicy<F>(pub F);

impl<M: Model, F> Policy<M> for FnPolicy<F>
where
    F: Fn(&M, &M::Belief) -> Vec<M::Component> + Sync + Send,
{
    fn joint_control(&self, model: &M, b: &M::Belief) -> Result<Vec<M::Component>> {
        Ok((self.0)(model, b))
    }
}

/// Probability vector over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidBelief(format!("entry {p} outside [0,1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Renormalizes non-negative weights into a belief.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ImpossibleObservation);
        }
        for x in &mut w {
            *x = (*x / total).clamp(0.0, 1.0);
        }
        let again: f64 = w.iter().sum();
        for x in &mut w {
            *x /= again;
        }
        Ok(Self(w))
    }
}

/// Explicit multiagent POMDP with joint controls addressed by mixed radix.
#[derive(Debug, Clone)]
pub struct TabularPomdp {
    n: usize,
    n_obs: usize,
    control_sets: Vec<Vec<usize>>,
    /// Per joint control, row-major `n × n`.
    transition: Vec<Vec<f64>>,
    /// Per joint control, row-major `n × n_obs`, indexed by next state.
    obs: Vec<Vec<f64>>,
    /// Per joint control, row-major `n × n`: `g(i,u,j)`.
    cost: Vec<Vec<f64>>,
    discount: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularPomdpDoc {
    pub n: usize,
    pub controls: Vec<Vec<usize>>,
    pub transition: BTreeMap<String, Vec<Vec<f64>>>,
    pub obs: BTreeMap<String, Vec<Vec<f64>>>,
    pub cost: BTreeMap<String, Vec<Vec<f64>>>,
    pub discount: f64,
}

impl TabularPomdp {
    /// Builds and validates a model. Matrices are indexed by joint control in
    /// mixed-radix order over `control_sets` (first agent most significant).
    pub fn new(
        control_sets: Vec<Vec<usize>>,
        transition: Vec<Vec<Vec<f64>>>,
        obs: Vec<Vec<Vec<f64>>>,
        cost: Vec<Vec<Vec<f64>>>,
        discount: f64,
    ) -> Result<Self> {
        if control_sets.is_empty() || control_sets.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidModel("every agent needs a non-empty control set".into()));
        }
        let mut control_sets = control_sets;
        for s in &mut control_sets {
            s.sort_unstable();
            s.dedup();
        }
        let joint: usize = control_sets.iter().map(Vec::len).product();
        if transition.len() != joint || obs.len() != joint || cost.len() != joint {
            return Err(Error::InvalidModel(format!(
                "expected {joint} joint controls in every table"
            )));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidModel(format!("discount {discount} not in (0,1)")));
        }
        let n = transition[0].len();
        if n == 0 {
            return Err(Error::InvalidModel("no states".into()));
        }
        let n_obs = obs[0].first().map_or(0, Vec::len);
        if n_obs == 0 {
            return Err(Error::InvalidModel("no observations".into()));
        }
        let flatten = |m: &Vec<Vec<f64>>, cols: usize, what: &str| -> Result<Vec<f64>> {
            if m.len() != n || m.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidModel(format!("{what} matrix has the wrong shape")));
            }
            Ok(m.iter().flatten().copied().collect())
        };
        let mut t_flat = Vec::with_capacity(joint);
        let mut o_flat = Vec::with_capacity(joint);
        let mut c_flat = Vec::with_capacity(joint);
        for u in 0..joint {
            for (what, m) in [("transition", &transition[u]), ("observation", &obs[u])] {
                for (i, row) in m.iter().enumerate() {
                    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::InvalidModel(format!("{what} row {i} has entries outside [0,1]")));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > PROB_TOL {
                        return Err(Error::InvalidModel(format!(
                            "{what} row {i} for joint control {u} sums to {s}"
                        )));
                    }
                }
            }
            t_flat.push(flatten(&transition[u], n, "transition")?);
            o_flat.push(flatten(&obs[u], n_obs, "observation")?);
            c_flat.push(flatten(&cost[u], n, "cost")?);
        }
        Ok(Self {
            n,
            n_obs,
            control_sets,
            transition: t_flat,
            obs: o_flat,
            cost: c_flat,
            discount,
        })
    }

    pub fn from_doc(doc: TabularPomdpDoc) -> Result<Self> {
        let joint: usize = doc.controls.iter().map(Vec::len).product();
        let mut t = Vec::with_capacity(joint);
        let mut o = Vec::with_capacity(joint);
        let mut c = Vec::with_capacity(joint);
        let mut sets = doc.controls.clone();
        for s in &mut sets {
            s.sort_unstable();
        }
        for idx in 0..joint {
            let key = joint_key(&decode_joint(&sets, idx));
            let get = |m: &BTreeMap<String, Vec<Vec<f64>>>, what: &str| {
                m.get(&key)
                    .cloned()
                    .ok_or_else(|| Error::InvalidModel(format!("{what} missing joint control {key}")))
            };
            t.push(get(&doc.transition, "transition")?);
            o.push(get(&doc.obs, "obs")?);
            c.push(get(&doc.cost, "cost")?);
        }
        let model = Self::new(sets, t, o, c, doc.discount)?;
        if model.n != doc.n {
            return Err(Error::InvalidModel(format!(
                "declared n={} but matrices have {} states",
                doc.n, model.n
            )));
        }
        Ok(model)
    }

    pub fn to_doc(&self) -> TabularPomdpDoc {
        let mut transition = BTreeMap::new();
        let mut obs = BTreeMap::new();
        let mut cost = BTreeMap::new();
        let rows = |flat: &Vec<f64>, cols: usize| -> Vec<Vec<f64>> {
            flat.chunks(cols).map(<[f64]>::to_vec).collect()
        };
        for idx in 0..self.num_joint_controls() {
            let key = joint_key(&decode_joint(&self.control_sets, idx));
            transition.insert(key.clone(), rows(&self.transition[idx], self.n));
            obs.insert(key.clone(), rows(&self.obs[idx], self.n_obs));
            cost.insert(key, rows(&self.cost[idx], self.n));
        }
        TabularPomdpDoc {
            n: self.n,
            controls: self.control_sets.clone(),
            transition,
            obs,
            cost,
            discount: self.discount,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_doc(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_doc())?)?;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_observations(&self) -> usize {
        self.n_obs
    }

    pub fn control_sets(&self) -> &[Vec<usize>] {
        &self.control_sets
    }

    pub fn num_joint_controls(&self) -> usize {
        self.control_sets.iter().map(Vec::len).product()
    }

    /// Mixed-radix index of a joint control.
    pub fn joint_index(&self, u: &[usize]) -> Result<usize> {
        if u.len() != self.control_sets.len() {
            return Err(Error::InfeasibleControl(format!("{u:?} has the wrong arity")));
        }
        let mut idx = 0;
        for (set, c) in self.control_sets.iter().zip(u) {
            let pos = set
                .binary_search(c)
                .map_err(|_| Error::InfeasibleControl(format!("component {c} not in {set:?}")))?;
            idx = idx * set.len() + pos;
        }
        Ok(idx)
    }

    pub fn joint_control(&self, idx: usize) -> Vec<usize> {
        decode_joint(&self.control_sets, idx)
    }

    /// `p_ij(u)`
    pub fn p(&self, u: usize, i: usize, j: usize) -> f64 {
        self.transition[u][i * self.n + j]
    }

    /// `p(z|j,u)`
    pub fn p_obs(&self, u: usize, j: usize, z: usize) -> f64 {
        self.obs[u][j * self.n_obs + z]
    }

    /// `g(i,u,j)`
    pub fn g(&self, u: usize, i: usize, j: usize) -> f64 {
        self.cost[u][i * self.n + j]
    }

    pub fn max_stage_cost(&self) -> f64 {
        self.cost
            .iter()
            .flatten()
            .fold(0.0_f64, |a, &c| a.max(c.abs()))
    }

    fn check_belief(&self, b: &BeliefVector) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::InvalidBelief(format!(
                "belief has {} entries, model has {} states",
                b.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Predicted next-state distribution `Σ_i b(i) p_ij(u)`.
    pub fn predict(&self, b: &BeliefVector, u: usize) -> Vec<f64> {
        let mut pred = vec![0.0; self.n];
        for (i, &bi) in b.probs().iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            let row = &self.transition[u][i * self.n..(i + 1) * self.n];
            for (pj, &p) in pred.iter_mut().zip(row) {
                *pj += bi * p;
            }
        }
        pred
    }
}

pub fn joint_key(u: &[usize]) -> String {
    u.iter().map(usize::to_string).collect::<Vec<_>>().join("_")
}

fn decode_joint(sets: &[Vec<usize>], mut idx: usize) -> Vec<usize> {
    let mut u = vec![0; sets.len()];
    for (l, set) in sets.iter().enumerate().rev() {
        u[l] = set[idx % set.len()];
        idx /= set.len();
    }
    u
}

impl Model for TabularPomdp {
    type Belief = BeliefVector;
    type Component = usize;
    type Observation = usize;
    type State = usize;

    fn num_agents(&self) -> usize {
        self.control_sets.len()
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn controls(&self, _b: &BeliefVector, agent: usize) -> Vec<usize> {
        self.control_sets[agent].clone()
    }

    fn expected_stage_cost(&self, b: &BeliefVector, u: &[usize]) -> Result<f64> {
        self.check_belief(b)?;
        let u = self.joint_index(u)?;
        let mut total = 0.0;
        for (i, &bi) in b.probs().iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            let base = i * self.n;
            let inner: f64 = (0..self.n)
                .map(|j| self.transition[u][base + j] * self.cost[u][base + j])
                .sum();
            total += bi * inner;
        }
        Ok(total)
    }

    fn observation_distribution(
        &self,
        b: &BeliefVector,
        u: &[usize],
        cap: usize,
    ) -> Result<Option<Vec<(usize, f64)>>> {
        self.check_belief(b)?;
        let u = self.joint_index(u)?;
        let pred = self.predict(b, u);
        let mut dist = vec![0.0; self.n_obs];
        for (j, &pj) in pred.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for (z, d) in dist.iter_mut().enumerate() {
                *d += pj * self.obs[u][j * self.n_obs + z];
            }
        }
        let out: Vec<(usize, f64)> = dist.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect();
        Ok((out.len() <= cap).then_some(out))
    }

    fn sample_observation(&self, b: &BeliefVector, u: &[usize], rng: &mut SimRng) -> Result<usize> {
        let dist = self
            .observation_distribution(b, u, usize::MAX)?
            .expect("uncapped distribution");
        let probs: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
        Ok(dist[sample_index(&probs, rng)].0)
    }

    fn belief_update(&self, b: &BeliefVector, u: &[usize], z: &usize) -> Result<BeliefVector> {
        self.check_belief(b)?;
        if *z >= self.n_obs {
            return Err(Error::ImpossibleObservation);
        }
        let u = self.joint_index(u)?;
        let pred = self.predict(b, u);
        let weighted: Vec<f64> = pred
            .iter()
            .enumerate()
            .map(|(j, &pj)| pj * self.obs[u][j * self.n_obs + z])
            .collect();
        BeliefVector::from_weights(weighted)
    }

    fn observation_key(&self, z: &usize) -> u64 {
        *z as u64
    }

    fn sample_state(&self, b: &BeliefVector, rng: &mut SimRng) -> usize {
        sample_index(b.probs(), rng)
    }

    fn step(&self, s: &usize, u: &[usize], rng: &mut SimRng) -> Result<(usize, usize, f64)> {
        let u = self.joint_index(u)?;
        let row = &self.transition[u][s * self.n..(s + 1) * self.n];
        let j = sample_index(row, rng);
        let z = sample_index(&self.obs[u][j * self.n_obs..(j + 1) * self.n_obs], rng);
        Ok((j, z, self.cost[u][s * self.n + j]))
    }
}

/// Bayes-rule belief update `F(b,u,z)`.
pub fn belief_update<M: Model>(
    model: &M,
    b: &M::Belief,
    u: &[M::Component],
    z: &M::Observation,
) -> Result<M::Belief> {
    model.belief_update(b, u, z)
}

/// `ĝ(b,u)`
pub fn expected_stage_cost<M: Model>(model: &M, b: &M::Belief, u: &[M::Component]) -> Result<f64> {
    model.expected_stage_cost(b, u)
}

/// Full observation distribution `p̂(·|b,u)` over outcomes with positive mass.
pub fn observation_likelihood<M: Model>(
    model: &M,
    b: &M::Belief,
    u: &[M::Component],
) -> Result<Vec<(M::Observation, f64)>> {
    model
        .observation_distribution(b, u, usize::MAX)?
        .ok_or_else(|| Error::InvalidModel("observation distribution is not enumerable".into()))
}

#[derive(Debug, Clone)]
pub struct Trajectory<M: Model> {
    pub states: Vec<M::State>,
    pub controls: Vec<Vec<M::Component>>,
    pub observations: Vec<M::Observation>,
    pub costs: Vec<f64>,
    pub beliefs: Vec<M::Belief>,
}

/// Simulates the composite system: hidden state drawn from `b0`, the policy
/// acting on beliefs, and the belief estimator tracking observations.
pub fn simulate_trajectory<M: Model, P: Policy<M> + ?Sized>(
    model: &M,
    policy: &P,
    b0: &M::Belief,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<(f64, Trajectory<M>)> {
    let mut s = model.sample_state(b0, rng);
    let mut b = b0.clone();
    let mut traj = Trajectory {
        states: vec![s.clone()],
        controls: Vec::with_capacity(horizon),
        observations: Vec::with_capacity(horizon),
        costs: Vec::with_capacity(horizon),
        beliefs: vec![b.clone()],
    };
    let alpha = model.discount();
    let mut discount = 1.0;
    let mut total = 0.0;
    for _ in 0..horizon {
        let u = policy.joint_control(model, &b)?;
        let (next, z, cost) = model.step(&s, &u, rng)?;
        total += discount * cost;
        discount *= alpha;
        b = model.belief_update(&b, &u, &z)?;
        s = next;
        traj.states.push(s.clone());
        traj.controls.push(u);
        traj.observations.push(z);
        traj.costs.push(cost);
        traj.beliefs.push(b.clone());
    }
    Ok((total, traj))
}

/// Exact finite-horizon discounted cost of `policy` from `b0`, by full
/// expansion over observation sequences. Refuses (never truncates) when more
/// than `cap` tree nodes would be visited.
pub fn policy_cost_exact<M: Model, P: Policy<M> + ?Sized>(
    model: &M,
    policy: &P,
    b0: &M::Belief,
    horizon: usize,
    cap: usize,
) -> Result<f64> {
    policy_cost_exact_with_terminal(model, policy, b0, horizon, &ZeroTerminal, cap)
}

/// As [`policy_cost_exact`], plus `α^horizon · Ĵ(b_horizon)` at every leaf.
pub fn policy_cost_exact_with_terminal<M: Model, P: Policy<M> + ?Sized, T: TerminalCost<M> + ?Sized>(
    model: &M,
    policy: &P,
    b0: &M::Belief,
    horizon: usize,
    terminal: &T,
    cap: usize,
) -> Result<f64> {
    let mut visited = 0usize;
    expand(model, policy, b0, horizon, terminal, cap, &mut visited)
}

fn expand<M: Model, P: Policy<M> + ?Sized, T: TerminalCost<M> + ?Sized>(
    model: &M,
    policy: &P,
    b: &M::Belief,
    remaining: usize,
    terminal: &T,
    cap: usize,
    visited: &mut usize,
) -> Result<f64> {
    *visited += 1;
    if *visited > cap {
        return Err(Error::CapExceeded {
            what: "exact policy evaluation",
            size: *visited as u128,
            cap: cap as u128,
        });
    }
    if remaining == 0 {
        return Ok(terminal.terminal_cost(model, b));
    }
    let u = policy.joint_control(model, b)?;
    let mut value = model.expected_stage_cost(b, &u)?;
    let dist = observation_likelihood(model, b, &u)?;
    let mut future = 0.0;
    for (z, p) in dist {
        let next = model.belief_update(b, &u, &z)?;
        future += p * expand(model, policy, &next, remaining - 1, terminal, cap, visited)?;
    }
    value += model.discount() * future;
    Ok(value)
}

/// Tail bound `α^H · g_max / (1 − α)` for truncating an infinite-horizon sum.
pub fn truncation_tail_bound(alpha: f64, horizon: usize, g_max: f64) -> f64 {
    alpha.powi(horizon as i32) * g_max / (1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn two_state(transition: [[f64; 2]; 2], obs: Vec<Vec<f64>>, cost: [[f64; 2]; 2]) -> TabularPomdp {
        TabularPomdp::new(
            vec![vec![0]],
            vec![transition.iter().map(|r| r.to_vec()).collect()],
            vec![obs],
            vec![cost.iter().map(|r| r.to_vec()).collect()],
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn uninformative_self_loop_keeps_belief() {
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]], [[0.0; 2]; 2]);
        let b = BeliefVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(m.belief_update(&b, &[0], &0).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn perfect_observation_collapses_belief() {
        let m = two_state(
            [[1.0, 0.0], [0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            [[0.0; 2]; 2],
        );
        let b = BeliefVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(m.belief_update(&b, &[0], &0).unwrap().probs(), &[1.0, 0.0]);
        let b = BeliefVector::new(vec![0.3, 0.7]).unwrap();
        let dist = observation_likelihood(&m, &b, &[0]).unwrap();
        assert_eq!(dist, vec![(0, 0.3), (1, 0.7)]);
    }

    #[test]
    fn zero_likelihood_observation_is_an_error() {
        let m = two_state(
            [[1.0, 0.0], [0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            [[0.0; 2]; 2],
        );
        let b = BeliefVector::point_mass(2, 0);
        assert!(matches!(m.belief_update(&b, &[0], &1), Err(Error::ImpossibleObservation)));
    }

    #[test]
    fn stage_cost_trivial_cases() {
        let m = two_state([[0.5, 0.5], [0.2, 0.8]], vec![vec![1.0], vec![1.0]], [[1.0; 2]; 2]);
        let b = BeliefVector::new(vec![0.4, 0.6]).unwrap();
        assert!((m.expected_stage_cost(&b, &[0]).unwrap() - 1.0).abs() < 1e-15);
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]], [[7.0, 0.0], [0.0, 0.0]]);
        assert_eq!(m.expected_stage_cost(&BeliefVector::point_mass(2, 0), &[0]).unwrap(), 7.0);
    }

    #[test]
    fn geometric_sum_on_deterministic_model() {
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], vec![vec![1.0], vec![1.0]], [[1.0; 2]; 2]);
        let policy = FnPolicy(|_: &TabularPomdp, _: &BeliefVector| vec![0]);
        let b = BeliefVector::point_mass(2, 0);
        let (cost, traj) = simulate_trajectory(&m, &policy, &b, 3, &mut stream(1, &[])).unwrap();
        assert!((cost - 2.8525).abs() < 1e-12);
        assert_eq!(traj.costs.len(), 3);
        let (zero, _) = simulate_trajectory(&m, &policy, &b, 0, &mut stream(1, &[])).unwrap();
        assert_eq!(zero, 0.0);
        let exact = policy_cost_exact(&m, &policy, &b, 3, DEFAULT_BRANCH_CAP).unwrap();
        assert!((exact - cost).abs() < 1e-12);
        assert_eq!(policy_cost_exact(&m, &policy, &b, 0, DEFAULT_BRANCH_CAP).unwrap(), 0.0);
    }

    #[test]
    fn exact_evaluation_refuses_beyond_cap() {
        let m = two_state(
            [[0.5, 0.5], [0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            [[1.0; 2]; 2],
        );
        let policy = FnPolicy(|_: &TabularPomdp, _: &BeliefVector| vec![0]);
        let b = BeliefVector::uniform(2);
        let err = policy_cost_exact(&m, &policy, &b, 20, 1000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let bad = TabularPomdp::new(
            vec![vec![0]],
            vec![vec![vec![0.5, 0.4], vec![0.0, 1.0]]],
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![vec![0.0; 2]; 2]],
            0.9,
        );
        assert!(bad.is_err());
        let bad_alpha = TabularPomdp::new(
            vec![vec![0]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![vec![0.0; 2]; 2]],
            1.0,
        );
        assert!(bad_alpha.is_err());
    }

    #[test]
    fn json_round_trip_uses_joint_keys() {
        let m = TabularPomdp::new(
            vec![vec![0, 1], vec![0, 1]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 4],
            vec![vec![vec![1.0], vec![1.0]]; 4],
            vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]]; 4],
            0.9,
        )
        .unwrap();
        let doc = m.to_doc();
        assert!(doc.transition.contains_key("0_1"));
        let text = serde_json::to_string(&doc).unwrap();
        let back = TabularPomdp::from_doc(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.g(m.joint_index(&[1, 0]).unwrap(), 1, 0), 3.0);
    }
}
