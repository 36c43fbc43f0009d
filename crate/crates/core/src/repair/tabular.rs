//! Exact flattening of small repair instances into a [`TabularPomdp`].
//!
//! Hidden states enumerate `(agent locations, damage levels)`: the location
//! tuple is the high-order digit (agent 0 most significant), then damage
//! levels with vertex 0 most significant. Every agent gets the `|V|+1`
//! components `{Fix, Move(0), …, Move(|V|−1)}`; a move to a non-adjacent
//! vertex leaves the agent in place without repairing. Observations are the
//! levels seen by each agent, agent 0 most significant.

use super::{DamageChain, FactoredBelief, RepairAction, RepairGraph, RepairModel};
use crate::error::{Error, Result};
use crate::pomdp::{BeliefVector, TabularPomdp};

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Dense tables are `joint × n × n`; past this the flattening is refused.
const DENSE_ENTRY_CAP: u128 = 1 << 27;

/// Index arithmetic of a flattened instance.
#[derive(Debug, Clone, Copy)]
pub struct TabularLayout {
    pub vertices: usize,
    pub levels: usize,
    pub agents: usize,
}

impl TabularLayout {
    pub fn damage_states(&self) -> usize {
        self.levels.pow(self.vertices as u32)
    }

    pub fn num_states(&self) -> usize {
        self.vertices.pow(self.agents as u32) * self.damage_states()
    }

    pub fn state_index(&self, locations: &[usize], levels: &[u8]) -> usize {
        let loc = locations.iter().fold(0, |acc, &v| acc * self.vertices + v);
        let dmg = levels.iter().fold(0, |acc, &k| acc * self.levels + k as usize);
        loc * self.damage_states() + dmg
    }

    pub fn decode_state(&self, idx: usize) -> (Vec<usize>, Vec<u8>) {
        let mut dmg = idx % self.damage_states();
        let mut loc = idx / self.damage_states();
        let mut levels = vec![0u8; self.vertices];
        for k in levels.iter_mut().rev() {
            *k = (dmg % self.levels) as u8;
            dmg /= self.levels;
        }
        let mut locations = vec![0usize; self.agents];
        for v in locations.iter_mut().rev() {
            *v = loc % self.vertices;
            loc /= self.vertices;
        }
        (locations, levels)
    }

    pub fn observation_index(&self, z: &[u8]) -> usize {
        z.iter().fold(0, |acc, &k| acc * self.levels + k as usize)
    }
}

/// Tabular control component of a repair action.
pub fn tabular_component(a: RepairAction) -> usize {
    a.class_index()
}

/// Flattens the repair instance. Refuses when the state count exceeds `cap`.
pub fn to_tabular(
    graph: &RepairGraph,
    chain: &DamageChain,
    agents: usize,
    discount: f64,
    cap: usize,
) -> Result<(TabularPomdp, TabularLayout)> {
    let layout = TabularLayout {
        vertices: graph.num_vertices(),
        levels: chain.levels(),
        agents,
    };
    let n = (layout.vertices as u128).pow(agents as u32) * (layout.levels as u128).pow(layout.vertices as u32);
    if n > cap as u128 {
        return Err(Error::CapExceeded {
            what: "tabular flattening",
            size: n,
            cap: cap as u128,
        });
    }
    let per_agent = layout.vertices + 1;
    let joint = (per_agent as u128).pow(agents as u32);
    if joint * n * n > DENSE_ENTRY_CAP {
        return Err(Error::CapExceeded {
            what: "dense tabular tables",
            size: joint * n * n,
            cap: DENSE_ENTRY_CAP,
        });
    }
    let n = n as usize;
    let joint = joint as usize;
    let n_obs = layout.levels.pow(agents as u32);
    let control_sets = vec![(0..per_agent).collect::<Vec<_>>(); agents];

    let mut transition = Vec::with_capacity(joint);
    let mut obs = Vec::with_capacity(joint);
    let mut cost = Vec::with_capacity(joint);

    // The observation law depends only on the next state.
    let mut obs_rows = vec![vec![0.0; n_obs]; n];
    for (j, row) in obs_rows.iter_mut().enumerate() {
        let (locs, levels) = layout.decode_state(j);
        let z: Vec<u8> = locs.iter().map(|&v| levels[v]).collect();
        row[layout.observation_index(&z)] = 1.0;
    }

    for ju in 0..joint {
        let mut comps = vec![0usize; agents];
        let mut rest = ju;
        for c in comps.iter_mut().rev() {
            *c = rest % per_agent;
            rest /= per_agent;
        }
        let mut t = vec![vec![0.0; n]; n];
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            let (locs, mut levels) = layout.decode_state(i);
            let mut next_locs = locs.clone();
            for (l, &c) in comps.iter().enumerate() {
                match RepairAction::from_class_index(c) {
                    RepairAction::Fix => levels[locs[l]] = 0,
                    RepairAction::Move(w) if graph.is_adjacent(locs[l], w) => next_locs[l] = w,
                    RepairAction::Move(_) => {}
                }
            }
            let stage: f64 = levels.iter().map(|&k| chain.cost()[k as usize]).sum();
            // Independent per-vertex escalation: enumerate which vertices step up.
            let movable: Vec<usize> = (0..layout.vertices)
                .filter(|&v| chain.escalation(levels[v] as usize) > 0.0)
                .collect();
            for mask in 0u64..(1u64 << movable.len()) {
                let mut p = 1.0;
                let mut next = levels.clone();
                for (bit, &v) in movable.iter().enumerate() {
                    let g_v = chain.escalation(levels[v] as usize);
                    if mask >> bit & 1 == 1 {
                        p *= g_v;
                        next[v] += 1;
                    } else {
                        p *= 1.0 - g_v;
                    }
                }
                let j = layout.state_index(&next_locs, &next);
                t[i][j] += p;
            }
            for gj in g[i].iter_mut() {
                *gj = stage;
            }
        }
        transition.push(t);
        obs.push(obs_rows.clone());
        cost.push(g);
    }
    let model = TabularPomdp::new(control_sets, transition, obs, cost, discount)?;
    Ok((model, layout))
}

/// Product-form belief expanded over the flattened state space.
pub fn flatten_belief(model: &RepairModel, layout: &TabularLayout, b: &FactoredBelief) -> BeliefVector {
    let n = layout.num_states();
    let mut probs = vec![0.0; n];
    let nv = model.graph().num_vertices();
    for d_idx in 0..layout.damage_states() {
        let mut rest = d_idx;
        let mut p = 1.0;
        for v in (0..nv).rev() {
            let k = rest % layout.levels;
            rest /= layout.levels;
            p *= b.dist(v)[k];
            if p == 0.0 {
                break;
            }
        }
        if p > 0.0 {
            let loc = b.locations().iter().fold(0, |acc, &v| acc * layout.vertices + v);
            probs[loc * layout.damage_states() + d_idx] = p;
        }
    }
    // Products of valid distributions sum to one up to rounding.
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    BeliefVector::new(probs).expect("product of valid distributions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_counts() {
        let chain = DamageChain::new(2, vec![0.1], vec![0.0, 1.0]).unwrap();
        let (m, _) = to_tabular(&RepairGraph::path(2).unwrap(), &chain, 1, 0.9, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(m.num_states(), 8);
        let (m, _) = to_tabular(&RepairGraph::path(3).unwrap(), &chain, 1, 0.9, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(m.num_states(), 24);
        for u in 0..m.num_joint_controls() {
            for i in 0..m.num_states() {
                let s: f64 = (0..m.num_states()).map(|j| m.p(u, i, j)).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refuses_past_cap() {
        let err = to_tabular(&RepairGraph::benchmark(), &DamageChain::benchmark(), 4, 0.95, DEFAULT_STATE_CAP)
            .unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn layout_round_trip() {
        let layout = TabularLayout { vertices: 3, levels: 2, agents: 2 };
        for i in 0..layout.num_states() {
            let (l, d) = layout.decode_state(i);
            assert_eq!(layout.state_index(&l, &d), i);
        }
    }
}
