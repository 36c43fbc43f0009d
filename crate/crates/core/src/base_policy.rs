//! Greedy repair policy: fix the current vertex if it looks damaged, otherwise
//! take one hop toward the nearest damaged vertex.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::pomdp::Policy;
use crate::repair::{FactoredBelief, RepairAction, RepairGraph, RepairModel};

/// All-pairs hop distances and first hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathTable {
    n: usize,
    dist: Vec<u32>,
    next_hop: Vec<u32>,
}

impl ShortestPathTable {
    /// Dijkstra from every source with unit edge weights. Next hops prefer the
    /// lowest-index neighbour among those on a shortest path.
    pub fn build(graph: &RepairGraph) -> Result<Self> {
        let n = graph.num_vertices();
        let mut dist = vec![u32::MAX; n * n];
        for s in 0..n {
            let row = &mut dist[s * n..(s + 1) * n];
            let mut heap = BinaryHeap::new();
            row[s] = 0;
            heap.push(Reverse((0u32, s)));
            while let Some(Reverse((d, v))) = heap.pop() {
                if d > row[v] {
                    continue;
                }
                for &w in graph.neighbors(v) {
                    let nd = d + 1;
                    if nd < row[w] {
                        row[w] = nd;
                        heap.push(Reverse((nd, w)));
                    }
                }
            }
            if row.contains(&u32::MAX) {
                return Err(Error::InvalidGraph("graph is not connected".into()));
            }
        }
        let mut next_hop = vec![0u32; n * n];
        for s in 0..n {
            for t in 0..n {
                next_hop[s * n + t] = if s == t {
                    s as u32
                } else {
                    let target = dist[s * n + t] - 1;
                    *graph
                        .neighbors(s)
                        .iter()
                        .find(|&&w| dist[w * n + t] == target)
                        .expect("a neighbour lies on every shortest path") as u32
                };
            }
        }
        Ok(Self { n, dist, next_hop })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn dist(&self, a: usize, b: usize) -> usize {
        self.dist[a * self.n + b] as usize
    }

    pub fn next_hop(&self, from: usize, to: usize) -> usize {
        self.next_hop[from * self.n + to] as usize
    }

    pub fn diameter(&self) -> usize {
        self.dist.iter().copied().max().unwrap_or(0) as usize
    }
}

/// The greedy base policy. A vertex counts as damaged when its expected
/// per-stage cost exceeds `threshold`.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    paths: ShortestPathTable,
    threshold: f64,
}

impl GreedyPolicy {
    pub fn new(paths: ShortestPathTable) -> Self {
        Self { paths, threshold: 0.0 }
    }

    pub fn for_graph(graph: &RepairGraph) -> Result<Self> {
        Ok(Self::new(ShortestPathTable::build(graph)?))
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn paths(&self) -> &ShortestPathTable {
        &self.paths
    }

    fn damaged_mask(&self, model: &RepairModel, b: &FactoredBelief) -> Vec<bool> {
        (0..b.num_vertices())
            .map(|v| model.chain().expected_cost(b.dist(v)) > self.threshold)
            .collect()
    }

    fn choose(&self, damaged: &[bool], at: usize) -> RepairAction {
        if damaged[at] {
            return RepairAction::Fix;
        }
        let mut best: Option<(usize, usize)> = None;
        for (v, _) in damaged.iter().enumerate().filter(|(_, d)| **d) {
            let d = self.paths.dist(at, v);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, v));
            }
        }
        match best {
            Some((_, target)) => RepairAction::Move(self.paths.next_hop(at, target)),
            None => RepairAction::Fix,
        }
    }

    pub fn greedy_control(&self, model: &RepairModel, b: &FactoredBelief, agent: usize) -> RepairAction {
        self.choose(&self.damaged_mask(model, b), b.locations()[agent])
    }
}

impl Policy<RepairModel> for GreedyPolicy {
    fn joint_control(&self, model: &RepairModel, b: &FactoredBelief) -> Result<Vec<RepairAction>> {
        let damaged = self.damaged_mask(model, b);
        Ok(b.locations().iter().map(|&v| self.choose(&damaged, v)).collect())
    }

    fn component(&self, model: &RepairModel, b: &FactoredBelief, agent: usize) -> Result<RepairAction> {
        Ok(self.greedy_control(model, b, agent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repair::DamageChain;

    fn belief_with(n: usize, locations: Vec<usize>, damaged: &[(usize, usize)]) -> FactoredBelief {
        let mut d = vec![vec![1.0, 0.0, 0.0]; n];
        for &(v, k) in damaged {
            d[v] = vec![0.0; 3];
            d[v][k] = 1.0;
        }
        FactoredBelief::new(locations, d).unwrap()
    }

    #[test]
    fn path_distances_and_hops() {
        let t = ShortestPathTable::build(&RepairGraph::path(3).unwrap()).unwrap();
        assert_eq!(t.dist(0, 2), 2);
        assert_eq!(t.next_hop(0, 2), 1);
        for v in 0..3 {
            assert_eq!(t.dist(v, v), 0);
        }
        assert_eq!(t.diameter(), 2);
    }

    #[test]
    fn greedy_cases() {
        let g = RepairGraph::path(3).unwrap();
        let model = RepairModel::new(g.clone(), DamageChain::desk(), 1, 0.95).unwrap();
        let pol = GreedyPolicy::for_graph(&g).unwrap();
        assert_eq!(pol.greedy_control(&model, &belief_with(3, vec![1], &[(1, 2)]), 0), RepairAction::Fix);
        assert_eq!(pol.greedy_control(&model, &belief_with(3, vec![0], &[]), 0), RepairAction::Fix);
        assert_eq!(pol.greedy_control(&model, &belief_with(3, vec![0], &[(2, 1)]), 0), RepairAction::Move(1));
    }

    #[test]
    fn equidistant_targets_pick_lower_index() {
        let g = RepairGraph::path(5).unwrap();
        let model = RepairModel::new(g.clone(), DamageChain::desk(), 1, 0.95).unwrap();
        let pol = GreedyPolicy::for_graph(&g).unwrap();
        let b = belief_with(5, vec![2], &[(0, 1), (4, 1)]);
        assert_eq!(pol.greedy_control(&model, &b, 0), RepairAction::Move(1));
    }

    #[test]
    fn threshold_ignores_small_expected_damage() {
        let g = RepairGraph::path(3).unwrap();
        let model = RepairModel::new(g.clone(), DamageChain::desk(), 1, 0.95).unwrap();
        let b = FactoredBelief::new(vec![0], vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.99, 0.01, 0.0]])
            .unwrap();
        let eager = GreedyPolicy::for_graph(&g).unwrap();
        assert_eq!(eager.greedy_control(&model, &b, 0), RepairAction::Move(1));
        let lazy = GreedyPolicy::for_graph(&g).unwrap().with_threshold(0.5);
        assert_eq!(lazy.greedy_control(&model, &b, 0), RepairAction::Fix);
    }
}
