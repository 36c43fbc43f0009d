//! Multi-robot repair on a location graph.
//!
//! Each vertex carries a hidden damage level that drifts upward along a
//! [`DamageChain`]. Agents observe the level at the vertex they stand on, and
//! each stage either fix their current vertex or move to a neighbour. The
//! shared belief is factored: known agent locations plus an independent level
//! distribution per vertex.

mod chain;
mod graph;
mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{Model, TerminalCost, PROB_TOL};
use crate::rng::{sample_index, SimRng};

pub use chain::DamageChain;
pub use graph::{GraphDoc, RepairGraph};
pub use tabular::{flatten_belief, tabular_component, to_tabular, TabularLayout, DEFAULT_STATE_CAP};

/// One agent's control component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    /// Stay and repair the current vertex.
    Fix,
    /// Move to an adjacent vertex.
    Move(usize),
}

impl RepairAction {
    /// Classifier class: `Fix` is 0, `Move(v)` is `v + 1`.
    pub fn class_index(self) -> usize {
        match self {
            RepairAction::Fix => 0,
            RepairAction::Move(v) => v + 1,
        }
    }

    pub fn from_class_index(k: usize) -> Self {
        if k == 0 {
            RepairAction::Fix
        } else {
            RepairAction::Move(k - 1)
        }
    }

    pub fn destination(self, from: usize) -> usize {
        match self {
            RepairAction::Fix => from,
            RepairAction::Move(v) => v,
        }
    }
}

/// Level observed by each agent at its post-move vertex.
pub type DamageObservation = Vec<u8>;

/// True system state: agent vertices and per-vertex damage levels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HiddenRepairState {
    pub locations: Vec<usize>,
    pub levels: Vec<u8>,
}

/// Agent locations plus a damage distribution `d^v` for every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredBelief {
    locations: Vec<usize>,
    levels: usize,
    /// Row-major `|V| × ν`.
    damage: Vec<f64>,
}

impl FactoredBelief {
    pub fn new(locations: Vec<usize>, damage: Vec<Vec<f64>>) -> Result<Self> {
        let levels = damage.first().map_or(0, Vec::len);
        if levels == 0 || damage.iter().any(|d| d.len() != levels) {
            return Err(Error::InvalidBelief("ragged damage distributions".into()));
        }
        let b = Self {
            locations,
            levels,
            damage: damage.into_iter().flatten().collect(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Belief that knows the state exactly.
    pub fn from_state(state: &HiddenRepairState, levels: usize) -> Self {
        let mut damage = vec![0.0; state.levels.len() * levels];
        for (v, &k) in state.levels.iter().enumerate() {
            damage[v * levels + k as usize] = 1.0;
        }
        Self {
            locations: state.locations.clone(),
            levels,
            damage,
        }
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn num_vertices(&self) -> usize {
        self.damage.len() / self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels
    }

    pub fn dist(&self, v: usize) -> &[f64] {
        &self.damage[v * self.levels..(v + 1) * self.levels]
    }

    pub fn damage_flat(&self) -> &[f64] {
        &self.damage
    }

    pub fn is_point_mass(&self, v: usize) -> bool {
        self.dist(v).iter().any(|&p| p == 1.0)
    }

    /// Distribution invariants: entries in [0,1] summing to one per vertex.
    pub fn validate(&self) -> Result<()> {
        for v in 0..self.num_vertices() {
            let d = self.dist(v);
            if d.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidBelief(format!("vertex {v} has entries outside [0,1]")));
            }
            let s: f64 = d.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidBelief(format!("vertex {v} distribution sums to {s}")));
            }
        }
        if self.locations.iter().any(|&l| l >= self.num_vertices()) {
            return Err(Error::InvalidBelief("agent location out of range".into()));
        }
        Ok(())
    }

    /// Checks that the vertices of `agents` hold point masses.
    pub fn validate_observed(&self, agents: impl IntoIterator<Item = usize>) -> Result<()> {
        for l in agents {
            let v = self.locations[l];
            if !self.is_point_mass(v) {
                return Err(Error::InvalidBelief(format!(
                    "agent {l} stands on vertex {v} whose damage is not known exactly"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn set_point_mass(&mut self, v: usize, level: usize) {
        let d = &mut self.damage[v * self.levels..(v + 1) * self.levels];
        d.fill(0.0);
        d[level] = 1.0;
    }
}

/// Initial-damage law: each vertex independently damaged with probability
/// `p_dmg`, the level then uniform over `1..ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDamage {
    pub p_dmg: f64,
}

impl Default for InitialDamage {
    fn default() -> Self {
        Self { p_dmg: 0.3 }
    }
}

impl InitialDamage {
    pub fn prior(&self, levels: usize) -> Vec<f64> {
        let mut d = vec![self.p_dmg / (levels - 1) as f64; levels];
        d[0] = 1.0 - self.p_dmg;
        d
    }
}

/// The repair POMDP.
#[derive(Debug, Clone)]
pub struct RepairModel {
    graph: RepairGraph,
    chain: DamageChain,
    agents: usize,
    discount: f64,
}

impl RepairModel {
    pub fn new(graph: RepairGraph, chain: DamageChain, agents: usize, discount: f64) -> Result<Self> {
        if agents == 0 {
            return Err(Error::InvalidModel("need at least one agent".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidModel(format!("discount {discount} not in (0,1)")));
        }
        if chain.levels() > u8::MAX as usize {
            return Err(Error::InvalidModel("too many damage levels".into()));
        }
        Ok(Self {
            graph,
            chain,
            agents,
            discount,
        })
    }

    pub fn graph(&self) -> &RepairGraph {
        &self.graph
    }

    pub fn chain(&self) -> &DamageChain {
        &self.chain
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn with_agents(&self, agents: usize) -> Result<Self> {
        Self::new(self.graph.clone(), self.chain.clone(), agents, self.discount)
    }

    /// `{Fix} ∪ {Move(w) : w adjacent}` for `agent` at `b`.
    pub fn control_set(&self, b: &FactoredBelief, agent: usize) -> Vec<RepairAction> {
        let v = b.locations[agent];
        std::iter::once(RepairAction::Fix)
            .chain(self.graph.neighbors(v).iter().map(|&w| RepairAction::Move(w)))
            .collect()
    }

    fn check_controls(&self, locations: &[usize], u: &[RepairAction]) -> Result<()> {
        if u.len() != locations.len() {
            return Err(Error::InfeasibleControl(format!(
                "expected {} components, got {}",
                locations.len(),
                u.len()
            )));
        }
        for (l, (&v, a)) in locations.iter().zip(u).enumerate() {
            if let RepairAction::Move(w) = *a {
                if w >= self.graph.num_vertices() || !self.graph.is_adjacent(v, w) {
                    return Err(Error::InfeasibleControl(format!(
                        "agent {l} at vertex {v} cannot move to {w}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn is_fixed(locations: &[usize], u: &[RepairAction], v: usize) -> bool {
        locations.iter().zip(u).any(|(&w, a)| w == v && *a == RepairAction::Fix)
    }

    fn fixed_mask(&self, locations: &[usize], u: &[RepairAction]) -> Vec<bool> {
        let mut fixed = vec![false; self.graph.num_vertices()];
        for (&v, a) in locations.iter().zip(u) {
            if *a == RepairAction::Fix {
                fixed[v] = true;
            }
        }
        fixed
    }

    /// `C_τ = Σ_v d^v · c`
    pub fn stage_cost(&self, b: &FactoredBelief) -> f64 {
        (0..b.num_vertices()).map(|v| self.chain.expected_cost(b.dist(v))).sum()
    }

    /// Steady-state cost with no further control: `C_τ / (1 − α)`.
    pub fn terminal_cost(&self, b: &FactoredBelief) -> f64 {
        self.stage_cost(b) / (1.0 - self.discount)
    }

    /// Advances the true state one stage: fixes, moves, cost, escalation,
    /// then each agent reads the level at its new vertex.
    pub fn env_step(
        &self,
        hidden: &HiddenRepairState,
        u: &[RepairAction],
        rng: &mut SimRng,
    ) -> Result<(HiddenRepairState, DamageObservation, f64)> {
        self.check_controls(&hidden.locations, u)?;
        let mut levels = hidden.levels.clone();
        let locations: Vec<usize> = hidden
            .locations
            .iter()
            .zip(u)
            .map(|(&v, a)| {
                if *a == RepairAction::Fix {
                    levels[v] = 0;
                }
                a.destination(v)
            })
            .collect();
        let cost: f64 = levels.iter().map(|&k| self.chain.cost()[k as usize]).sum();
        // One uniform per vertex regardless of level keeps noise aligned across policies.
        for level in levels.iter_mut() {
            let r: f64 = rng.random();
            if r < self.chain.escalation(*level as usize) {
                *level += 1;
            }
        }
        let z = locations.iter().map(|&v| levels[v]).collect();
        Ok((HiddenRepairState { locations, levels }, z, cost))
    }

    /// Belief estimator specialised to factored beliefs and perfect local
    /// observations.
    pub fn belief_step(
        &self,
        b: &FactoredBelief,
        u: &[RepairAction],
        z: &DamageObservation,
    ) -> Result<FactoredBelief> {
        if z.len() != self.agents {
            return Err(Error::ImpossibleObservation);
        }
        let observed: Vec<(usize, u8)> = z.iter().copied().enumerate().collect();
        self.belief_step_partial(b, u, &observed)
    }

    /// Belief step that applies only the listed `(agent, level)` readings.
    /// Locations of all agents still follow `u`.
    pub fn belief_step_partial(
        &self,
        b: &FactoredBelief,
        u: &[RepairAction],
        observed: &[(usize, u8)],
    ) -> Result<FactoredBelief> {
        let mut next = self.predict(b, u)?;
        for &(l, level) in observed {
            let v = next.locations[l];
            let level = level as usize;
            if level >= self.chain.levels() || next.dist(v)[level] <= 0.0 {
                return Err(Error::ImpossibleObservation);
            }
            next.set_point_mass(v, level);
        }
        Ok(next)
    }

    /// Fixes, moves, and one chain step at every vertex, without observations.
    pub fn predict(&self, b: &FactoredBelief, u: &[RepairAction]) -> Result<FactoredBelief> {
        self.check_controls(&b.locations, u)?;
        let fixed = self.fixed_mask(&b.locations, u);
        let nu = self.chain.levels();
        let mut damage = vec![0.0; b.damage.len()];
        for (v, out) in damage.chunks_mut(nu).enumerate() {
            self.chain.step_into(b.dist(v), fixed[v], out);
        }
        Ok(FactoredBelief {
            locations: b.locations.iter().zip(u).map(|(&v, a)| a.destination(v)).collect(),
            levels: nu,
            damage,
        })
    }

    /// Samples a starting state and the matching prior belief.
    pub fn random_initial_state(
        &self,
        init: &InitialDamage,
        rng: &mut SimRng,
    ) -> (HiddenRepairState, FactoredBelief) {
        let n = self.graph.num_vertices();
        let nu = self.chain.levels();
        let locations: Vec<usize> = (0..self.agents).map(|_| rng.random_range(0..n)).collect();
        let levels: Vec<u8> = (0..n)
            .map(|_| {
                let damaged = rng.random::<f64>() < init.p_dmg;
                if damaged {
                    rng.random_range(1..nu) as u8
                } else {
                    0
                }
            })
            .collect();
        let prior = init.prior(nu);
        let mut belief = FactoredBelief {
            locations: locations.clone(),
            levels: nu,
            damage: (0..n).flat_map(|_| prior.iter().copied()).collect(),
        };
        for &v in &locations {
            belief.set_point_mass(v, levels[v] as usize);
        }
        (HiddenRepairState { locations, levels }, belief)
    }

    /// Observation outcomes with positive mass; `None` past `cap`.
    fn enumerate_observations(
        &self,
        pred: &FactoredBelief,
        cap: usize,
    ) -> Option<Vec<(DamageObservation, f64)>> {
        let nu = self.chain.levels();
        let mut distinct: Vec<usize> = Vec::new();
        for &v in &pred.locations {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        let supports: Vec<Vec<(u8, f64)>> = distinct
            .iter()
            .map(|&v| {
                (0..nu)
                    .filter_map(|k| {
                        let p = pred.dist(v)[k];
                        (p > 0.0).then_some((k as u8, p))
                    })
                    .collect()
            })
            .collect();
        let mut count: usize = 1;
        for s in &supports {
            count = count.saturating_mul(s.len());
            if count > cap {
                return None;
            }
        }
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; supports.len()];
        loop {
            let mut p = 1.0;
            let mut per_vertex = vec![0u8; supports.len()];
            for (s, (&i, support)) in idx.iter().zip(&supports).enumerate() {
                per_vertex[s] = support[i].0;
                p *= support[i].1;
            }
            let z = pred
                .locations
                .iter()
                .map(|v| per_vertex[distinct.iter().position(|d| d == v).unwrap()])
                .collect();
            out.push((z, p));
            // odometer over supports, last distinct vertex fastest
            let mut k = supports.len();
            loop {
                if k == 0 {
                    return Some(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < supports[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

impl Model for RepairModel {
    type Belief = FactoredBelief;
    type Component = RepairAction;
    type Observation = DamageObservation;
    type State = HiddenRepairState;

    fn num_agents(&self) -> usize {
        self.agents
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn controls(&self, b: &FactoredBelief, agent: usize) -> Vec<RepairAction> {
        self.control_set(b, agent)
    }

    fn is_feasible(&self, b: &FactoredBelief, u: &[RepairAction]) -> bool {
        self.check_controls(&b.locations, u).is_ok()
    }

    /// Cost after this stage's fixes, before escalation.
    fn expected_stage_cost(&self, b: &FactoredBelief, u: &[RepairAction]) -> Result<f64> {
        self.check_controls(&b.locations, u)?;
        Ok((0..b.num_vertices())
            .filter(|&v| !Self::is_fixed(&b.locations, u, v))
            .map(|v| self.chain.expected_cost(b.dist(v)))
            .sum())
    }

    fn observation_distribution(
        &self,
        b: &FactoredBelief,
        u: &[RepairAction],
        cap: usize,
    ) -> Result<Option<Vec<(DamageObservation, f64)>>> {
        let pred = self.predict(b, u)?;
        Ok(self.enumerate_observations(&pred, cap))
    }

    fn sample_observation(
        &self,
        b: &FactoredBelief,
        u: &[RepairAction],
        rng: &mut SimRng,
    ) -> Result<DamageObservation> {
        self.check_controls(&b.locations, u)?;
        let nu = self.chain.levels();
        let mut buf = [0.0; 16];
        let mut heap = Vec::new();
        let scratch: &mut [f64] = if nu <= buf.len() {
            &mut buf[..nu]
        } else {
            heap.resize(nu, 0.0);
            &mut heap
        };
        let mut z: DamageObservation = vec![0; self.agents];
        for (l, (&v, a)) in b.locations.iter().zip(u).enumerate() {
            let w = a.destination(v);
            if let Some(prev) = (0..l).find(|&k| u[k].destination(b.locations[k]) == w) {
                z[l] = z[prev];
                continue;
            }
            self.chain.step_into(b.dist(w), Self::is_fixed(&b.locations, u, w), scratch);
            z[l] = sample_index(scratch, rng) as u8;
        }
        Ok(z)
    }

    fn belief_update(
        &self,
        b: &FactoredBelief,
        u: &[RepairAction],
        z: &DamageObservation,
    ) -> Result<FactoredBelief> {
        self.belief_step(b, u, z)
    }

    fn belief_update_in_place(
        &self,
        b: &mut FactoredBelief,
        u: &[RepairAction],
        z: &DamageObservation,
    ) -> Result<()> {
        self.check_controls(&b.locations, u)?;
        let nu = self.chain.levels();
        if z.len() != self.agents {
            return Err(Error::ImpossibleObservation);
        }
        for (l, (&v, a)) in b.locations.iter().zip(u).enumerate() {
            let w = a.destination(v);
            let k = z[l] as usize;
            let before = b.dist(w);
            let fixed = Self::is_fixed(&b.locations, u, w);
            // predicted mass of the reading at w
            let p = if fixed {
                if k == 0 { 1.0 - self.chain.gamma()[0] } else if k == 1 { self.chain.gamma()[0] } else { 0.0 }
            } else if k >= nu {
                0.0
            } else {
                let stay = if k + 1 < nu { 1.0 - self.chain.gamma()[k] } else { 1.0 };
                before[k] * stay + if k > 0 { before[k - 1] * self.chain.gamma()[k - 1] } else { 0.0 }
            };
            if p <= 0.0 {
                return Err(Error::ImpossibleObservation);
            }
        }
        let n = b.num_vertices();
        for v in 0..n {
            let repaired = Self::is_fixed(&b.locations, u, v);
            self.chain.step_in_place(&mut b.damage[v * nu..(v + 1) * nu], repaired);
        }
        for (v, a) in b.locations.iter_mut().zip(u) {
            *v = a.destination(*v);
        }
        for l in 0..self.agents {
            b.set_point_mass(b.locations[l], z[l] as usize);
        }
        Ok(())
    }

    fn observation_key(&self, z: &DamageObservation) -> u64 {
        z.iter()
            .fold(0u64, |acc, &k| acc.wrapping_mul(self.chain.levels() as u64 + 1).wrapping_add(k as u64 + 1))
    }

    fn sample_state(&self, b: &FactoredBelief, rng: &mut SimRng) -> HiddenRepairState {
        HiddenRepairState {
            locations: b.locations.clone(),
            levels: (0..b.num_vertices())
                .map(|v| sample_index(b.dist(v), rng) as u8)
                .collect(),
        }
    }

    fn step(
        &self,
        s: &HiddenRepairState,
        u: &[RepairAction],
        rng: &mut SimRng,
    ) -> Result<(HiddenRepairState, DamageObservation, f64)> {
        self.env_step(s, u, rng)
    }
}

/// `Ĵ(b) = C_τ(b) / (1 − α)`
#[derive(Debug, Clone, Copy, Default)]
pub struct SteadyStateTerminal;

impl TerminalCost<RepairModel> for SteadyStateTerminal {
    fn terminal_cost(&self, model: &RepairModel, b: &FactoredBelief) -> f64 {
        model.terminal_cost(b)
    }
}
