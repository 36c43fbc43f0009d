use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-location damage chain: level `k < ν−1` escalates to `k+1` with
/// probability `γ_k` each stage; the top level is absorbing until repaired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageChain {
    nu: usize,
    gamma: Vec<f64>,
    cost: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainDoc {
    nu: usize,
    gamma: Vec<f64>,
    cost: Vec<f64>,
}

impl DamageChain {
    pub fn new(nu: usize, gamma: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        if nu < 2 {
            return Err(Error::InvalidModel("damage chain needs at least two levels".into()));
        }
        if gamma.len() != nu - 1 {
            return Err(Error::InvalidModel(format!(
                "expected {} escalation probabilities, got {}",
                nu - 1,
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidModel("escalation probabilities must lie in [0,1]".into()));
        }
        if cost.len() != nu {
            return Err(Error::InvalidModel(format!("expected {nu} level costs, got {}", cost.len())));
        }
        if cost[0] != 0.0 {
            return Err(Error::InvalidModel("undamaged level must cost 0".into()));
        }
        if cost.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidModel("level costs must be non-decreasing".into()));
        }
        Ok(Self { nu, gamma, cost })
    }

    /// Five-level chain with `c = [0, 0.1, 1, 10, 100]`.
    pub fn benchmark() -> Self {
        Self::new(5, vec![0.01, 0.02, 0.03, 0.05], vec![0.0, 0.1, 1.0, 10.0, 100.0]).unwrap()
    }

    /// Three-level chain used for desk-scale experiments.
    pub fn desk() -> Self {
        Self::new(3, vec![0.02, 0.05], vec![0.0, 1.0, 10.0]).unwrap()
    }

    /// Same levels and costs, no escalation: repaired locations stay fixed.
    pub fn terminating(&self) -> Self {
        Self {
            nu: self.nu,
            gamma: vec![0.0; self.nu - 1],
            cost: self.cost.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: ChainDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(doc.nu, doc.gamma, doc.cost)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.nu
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn max_cost(&self) -> f64 {
        self.cost[self.nu - 1]
    }

    pub fn is_terminating(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }

    /// Probability of leaving level `k` upwards in one stage.
    pub fn escalation(&self, k: usize) -> f64 {
        if k + 1 < self.nu {
            self.gamma[k]
        } else {
            0.0
        }
    }

    /// One chain step of a level distribution; a repaired location restarts
    /// from level 0 before stepping.
    pub fn step(&self, d: &[f64], repaired: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.nu];
        self.step_into(d, repaired, &mut out);
        out
    }

    pub(crate) fn step_into(&self, d: &[f64], repaired: bool, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.nu);
        if repaired {
            out.fill(0.0);
            out[0] = 1.0 - self.gamma[0];
            out[1] = self.gamma[0];
            return;
        }
        out[0] = d[0] * (1.0 - self.gamma[0]);
        for k in 1..self.nu {
            let stay = if k + 1 < self.nu { 1.0 - self.gamma[k] } else { 1.0 };
            out[k] = d[k] * stay + d[k - 1] * self.gamma[k - 1];
        }
    }

    /// [`Self::step`] over `d` in place, with identical arithmetic.
    pub(crate) fn step_in_place(&self, d: &mut [f64], repaired: bool) {
        if repaired {
            d.fill(0.0);
            d[0] = 1.0 - self.gamma[0];
            d[1] = self.gamma[0];
            return;
        }
        for k in (1..self.nu).rev() {
            let stay = if k + 1 < self.nu { 1.0 - self.gamma[k] } else { 1.0 };
            d[k] = d[k] * stay + d[k - 1] * self.gamma[k - 1];
        }
        d[0] *= 1.0 - self.gamma[0];
    }

    /// Expected per-stage cost `d · c`.
    pub fn expected_cost(&self, d: &[f64]) -> f64 {
        d.iter().zip(&self.cost).map(|(p, c)| p * c).sum()
    }
}
