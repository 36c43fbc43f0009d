use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::Policy;
use crate::repair::{FactoredBelief, InitialDamage, RepairModel};
use crate::rng::{bernoulli, purpose, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BufferConfig {
    /// Number of walks, each from a fresh random initial state.
    pub walks: usize,
    pub walk_length: usize,
    /// Fraction of walks that follow the previous policy; the rest are
    /// ε-random.
    pub policy_fraction: f64,
    pub epsilon: f64,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            walks: 200,
            walk_length: 5,
            policy_fraction: 0.5,
            epsilon: 0.3,
        }
    }
}

/// Pool of beliefs from which training states are drawn.
#[derive(Debug, Clone, Default)]
pub struct MemoryBuffer {
    beliefs: Vec<FactoredBelief>,
}

impl MemoryBuffer {
    pub fn from_beliefs(beliefs: Vec<FactoredBelief>) -> Result<Self> {
        for b in &beliefs {
            b.validate()?;
        }
        Ok(Self { beliefs })
    }

    /// Walks from random initial states under `policy`, or under `policy`
    /// with each component replaced by a uniformly random feasible one with
    /// probability ε. Every belief along every walk is kept.
    pub fn build<P: Policy<RepairModel> + ?Sized>(
        model: &RepairModel,
        policy: &P,
        init: &InitialDamage,
        config: &BufferConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut beliefs = Vec::with_capacity(config.walks * (config.walk_length + 1));
        for w in 0..config.walks {
            let mut rng = stream(seed, &[purpose::BUFFER, w as u64]);
            let (mut s, mut b) = model.random_initial_state(init, &mut rng);
            let randomized = !bernoulli(config.policy_fraction, &mut rng);
            beliefs.push(b.clone());
            for _ in 0..config.walk_length {
                let mut u = policy.joint_control(model, &b)?;
                if randomized {
                    for (l, c) in u.iter_mut().enumerate() {
                        if bernoulli(config.epsilon, &mut rng) {
                            let set = model.control_set(&b, l);
                            *c = set[rng.random_range(0..set.len())];
                        }
                    }
                }
                let (next, z, _) = model.env_step(&s, &u, &mut rng)?;
                b = model.belief_step(&b, &u, &z)?;
                s = next;
                beliefs.push(b.clone());
            }
        }
        Ok(Self { beliefs })
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn beliefs(&self) -> &[FactoredBelief] {
        &self.beliefs
    }

    /// `q` indices drawn uniformly with replacement.
    pub fn draw(&self, q: usize, seed: u64) -> Result<Vec<usize>> {
        if self.beliefs.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut rng = stream(seed, &[purpose::SAMPLES]);
        Ok((0..q).map(|_| rng.random_range(0..self.beliefs.len())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_policy::GreedyPolicy;
    use crate::repair::{DamageChain, RepairGraph};

    #[test]
    fn walks_produce_valid_beliefs() {
        let g = RepairGraph::desk();
        let m = RepairModel::new(g.clone(), DamageChain::desk(), 2, 0.95).unwrap();
        let pol = GreedyPolicy::for_graph(&g).unwrap();
        let cfg = BufferConfig {
            walks: 6,
            ..Default::default()
        };
        let buf = MemoryBuffer::build(&m, &pol, &InitialDamage::default(), &cfg, 4).unwrap();
        assert_eq!(buf.len(), 36);
        for b in buf.beliefs() {
            b.validate().unwrap();
            b.validate_observed(0..2).unwrap();
        }
        assert_eq!(buf.draw(10, 1).unwrap(), buf.draw(10, 1).unwrap());
        assert!(matches!(MemoryBuffer::default().draw(1, 0), Err(Error::EmptyBuffer)));
    }
}
