//! Fixed-length encoding of a per-agent training tuple
//! `(b, ℓ, ũ_{1:ℓ−1}, u_{ℓ+1:m})`.
//!
//! Blocks, in order:
//! 1. `d^v` for every vertex (`|V|·ν`)
//! 2. one-hot location of every agent (`m·|V|`)
//! 3. one-hot index of the deciding agent (`m`)
//! 4. per agent: one-hot control class (`|V|+1`) and a predecessor flag
//!    (`m·(|V|+2)`); the deciding agent's own slot holds its base component

use crate::repair::{FactoredBelief, RepairAction};

pub fn feature_dim(vertices: usize, levels: usize, agents: usize) -> usize {
    vertices * levels + agents * vertices + agents + agents * (vertices + 2)
}

/// Encodes the tuple for `agent`. `controls[k]` is the assumed component of
/// agent `k`; entries with `k < agent` are predecessors. `controls[agent]`
/// is the base policy's component for the deciding agent.
pub fn encode_features(b: &FactoredBelief, agent: usize, controls: &[RepairAction]) -> Vec<f64> {
    let mut out = Vec::new();
    encode_into(b, agent, controls, &mut out);
    out
}

pub fn encode_into(b: &FactoredBelief, agent: usize, controls: &[RepairAction], out: &mut Vec<f64>) {
    let n = b.num_vertices();
    let m = b.locations().len();
    debug_assert_eq!(controls.len(), m);
    out.clear();
    out.reserve(feature_dim(n, b.num_levels(), m));
    out.extend_from_slice(b.damage_flat());
    for &loc in b.locations() {
        out.extend((0..n).map(|v| if v == loc { 1.0 } else { 0.0 }));
    }
    out.extend((0..m).map(|l| if l == agent { 1.0 } else { 0.0 }));
    for (k, c) in controls.iter().enumerate() {
        let start = out.len();
        out.resize(start + n + 2, 0.0);
        out[start + c.class_index()] = 1.0;
        if k < agent {
            out[start + n + 1] = 1.0;
        }
    }
}
