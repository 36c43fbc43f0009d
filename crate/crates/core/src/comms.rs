//! Rollout under imperfect communication.
//!
//! Control-sharing architectures (shared belief, some predecessors' chosen
//! components unknown and replaced by a signal):
//!
//! * AMR-B: every other agent is assumed to play the base policy.
//! * AMR-N: predecessors are predicted by a learned policy.
//! * AMR-PI: as AMR-N, with a pair of consecutive policy-iteration networks.
//! * AMR-LC: predecessors within `r` hops share what they computed.
//! * AMR-ILC: a cloud link is up with probability `ρ` each stage; when up,
//!   full one-agent-at-a-time rollout, otherwise AMR-LC.
//!
//! Belief-sharing architectures keep one local belief per agent
//! ([`LocalBeliefBank`]) that is synchronized only when the cloud is up:
//!
//! * AMR-IB1: offline agents minimize their own component at their local belief.
//! * AMR-IB0: offline agents play the base policy at their local belief.

use serde::{Deserialize, Serialize};

use crate::base_policy::ShortestPathTable;
use crate::error::{Error, Result};
use crate::pomdp::{Model, Policy, TerminalCost};
use crate::repair::{DamageObservation, FactoredBelief, RepairAction, RepairModel};
use crate::rng::{bernoulli, purpose, stream};
use crate::rollout::{independent_minimize, minimize_component, EvalCounter, Rollout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CommsArchitecture {
    PerfectShared,
    AmrB,
    AmrN,
    AmrPi,
    AmrLc { radius: usize },
    AmrIlc { rho: f64, radius: usize },
    AmrIb1 { rho: f64 },
    AmrIb0 { rho: f64 },
}

impl CommsArchitecture {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CommsArchitecture::AmrIlc { rho, .. }
            | CommsArchitecture::AmrIb1 { rho }
            | CommsArchitecture::AmrIb0 { rho }
                if !(rho > 0.0 && rho <= 1.0) =>
            {
                Err(Error::Config(format!("cloud probability {rho} not in (0,1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CommsArchitecture::PerfectShared => "perfect".into(),
            CommsArchitecture::AmrB => "amr-b".into(),
            CommsArchitecture::AmrN => "amr-n".into(),
            CommsArchitecture::AmrPi => "amr-pi".into(),
            CommsArchitecture::AmrLc { radius } => format!("amr-lc(r={radius})"),
            CommsArchitecture::AmrIlc { rho, radius } => format!("amr-ilc(rho={rho},r={radius})"),
            CommsArchitecture::AmrIb1 { rho } => format!("amr-ib1(rho={rho})"),
            CommsArchitecture::AmrIb0 { rho } => format!("amr-ib0(rho={rho})"),
        }
    }
}

/// Whether the cloud is reachable at the stage with this seed. A single draw
/// shared by all agents.
pub fn cloud_available(rho: f64, stage_seed: u64) -> bool {
    bernoulli(rho, &mut stream(stage_seed, &[purpose::CLOUD]))
}

/// AMR-B: `m` independent minimizations, all other components at base.
pub fn amr_b_control<M, P, T>(
    rollout: &Rollout<'_, M, P, T>,
    b: &M::Belief,
    seed: u64,
    counter: &EvalCounter,
) -> Result<Vec<M::Component>>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    let base = rollout.base.joint_control(rollout.model, b)?;
    let q = rollout.stage_evaluator(b, seed, counter);
    independent_minimize(&q, &rollout.control_sets(b), &base, |_| base.clone())
}

/// AMR-N and AMR-PI: predecessors (agents with a lower index) are signaled by
/// `predictor`, successors by the rollout's base policy.
pub fn amr_n_control<M, P, T, S>(
    rollout: &Rollout<'_, M, P, T>,
    predictor: &S,
    b: &M::Belief,
    seed: u64,
    counter: &EvalCounter,
) -> Result<Vec<M::Component>>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
    S: Policy<M> + ?Sized,
{
    let base = rollout.base.joint_control(rollout.model, b)?;
    let predicted = predictor.joint_control(rollout.model, b)?;
    let q = rollout.stage_evaluator(b, seed, counter);
    independent_minimize(&q, &rollout.control_sets(b), &base, |l| {
        predicted[..l].iter().chain(&base[l..]).copied().collect()
    })
}

/// AMR-PI with a sequence of iteration policies: iteration `k` signals
/// predecessors, iteration `k − 1` is the base.
pub fn amr_pi_control<M, T, P>(
    model: &M,
    terminal: &T,
    config: &crate::rollout::RolloutConfig,
    policies: &[P],
    k: usize,
    b: &M::Belief,
    seed: u64,
    counter: &EvalCounter,
) -> Result<Vec<M::Component>>
where
    M: Model,
    T: TerminalCost<M> + ?Sized,
    P: Policy<M>,
{
    if policies.len() < 2 {
        return Err(Error::Config("AMR-PI needs at least two policy iterations".into()));
    }
    if k == 0 || k >= policies.len() {
        return Err(Error::Config(format!("iteration {k} has no predecessor among {}", policies.len())));
    }
    let rollout = Rollout::new(model, &policies[k - 1], terminal, config.clone())?;
    amr_n_control(&rollout, &policies[k], b, seed, counter)
}

/// Sequential minimization in which agent `l` sees predecessor `k`'s
/// computed component only when `linked(k, l)`; otherwise the base.
pub fn limited_sharing_control<M, P, T>(
    rollout: &Rollout<'_, M, P, T>,
    b: &M::Belief,
    seed: u64,
    counter: &EvalCounter,
    linked: impl Fn(usize, usize) -> bool,
) -> Result<Vec<M::Component>>
where
    M: Model,
    P: Policy<M> + ?Sized,
    T: TerminalCost<M> + ?Sized,
{
    let base = rollout.base.joint_control(rollout.model, b)?;
    let sets = rollout.control_sets(b);
    let q = rollout.stage_evaluator(b, seed, counter);
    let mut chosen = base.clone();
    for l in 0..base.len() {
        let mut view = base.clone();
        for k in 0..l {
            if linked(k, l) {
                view[k] = chosen[k];
            }
        }
        let (c, _) = minimize_component(&q, &view, l, &sets[l], base[l])?;
        chosen[l] = c;
    }
    Ok(chosen)
}

/// AMR-LC on the repair model. Agents share when `r > 0` and they are at
/// most `r` hops apart, so `r = 0` is AMR-B and `r ≥ diameter` is full
/// one-agent-at-a-time rollout.
pub fn amr_lc_control<P, T>(
    rollout: &Rollout<'_, RepairModel, P, T>,
    paths: &ShortestPathTable,
    radius: usize,
    b: &FactoredBelief,
    seed: u64,
    counter: &EvalCounter,
) -> Result<Vec<RepairAction>>
where
    P: Policy<RepairModel> + ?Sized,
    T: TerminalCost<RepairModel> + ?Sized,
{
    let locs = b.locations();
    limited_sharing_control(rollout, b, seed, counter, |k, l| {
        radius > 0 && paths.dist(locs[k], locs[l]) <= radius
    })
}

/// AMR-ILC: full rollout when the cloud is up, AMR-LC otherwise.
pub fn amr_ilc_control<P, T>(
    rollout: &Rollout<'_, RepairModel, P, T>,
    paths: &ShortestPathTable,
    rho: f64,
    radius: usize,
    b: &FactoredBelief,
    seed: u64,
    counter: &EvalCounter,
) -> Result<(Vec<RepairAction>, bool)>
where
    P: Policy<RepairModel> + ?Sized,
    T: TerminalCost<RepairModel> + ?Sized,
{
    if cloud_available(rho, seed) {
        Ok((rollout.one_at_a_time_control(b, seed, counter)?, true))
    } else {
        Ok((amr_lc_control(rollout, paths, radius, b, seed, counter)?, false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfflineMode {
    /// Minimize own component at the local belief.
    Ib1,
    /// Play the base policy at the local belief.
    Ib0,
}

/// One local belief per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBeliefBank {
    beliefs: Vec<FactoredBelief>,
    /// Joint control each agent assumes was played this stage.
    assumed: Vec<Vec<RepairAction>>,
}

impl LocalBeliefBank {
    /// Every agent starts from the shared initial belief.
    pub fn new(b0: &FactoredBelief, agents: usize) -> Self {
        Self {
            beliefs: vec![b0.clone(); agents],
            assumed: Vec::new(),
        }
    }

    pub fn beliefs(&self) -> &[FactoredBelief] {
        &self.beliefs
    }

    pub fn local(&self, agent: usize) -> &FactoredBelief {
        &self.beliefs[agent]
    }

    /// Replaces every local belief with the global one.
    pub fn sync(&mut self, global: &FactoredBelief) {
        for b in &mut self.beliefs {
            b.clone_from(global);
        }
    }

    /// Advances each local belief under the joint control that agent assumes
    /// was played, then applies the agent's own reading as a point mass.
    /// Readings of other agents are never applied.
    pub fn advance(&mut self, model: &RepairModel, z: &DamageObservation) -> Result<()> {
        if self.assumed.len() != self.beliefs.len() {
            return Err(Error::Config("bank advanced without a decision this stage".into()));
        }
        for (l, (b, u)) in self.beliefs.iter_mut().zip(&self.assumed).enumerate() {
            let mut next = model.predict(b, u)?;
            let v = next.locations()[l];
            let level = z[l] as usize;
            if level >= model.chain().levels() {
                return Err(Error::ImpossibleObservation);
            }
            next.set_point_mass(v, level);
            *b = next;
        }
        self.assumed.clear();
        Ok(())
    }

    /// Chooses this stage's executed joint control and records what each
    /// agent assumes was played. Returns the control and whether the cloud
    /// was reachable.
    pub fn decide<P, T>(
        &mut self,
        rollout: &Rollout<'_, RepairModel, P, T>,
        global: &FactoredBelief,
        mode: OfflineMode,
        rho: f64,
        seed: u64,
        counter: &EvalCounter,
    ) -> Result<(Vec<RepairAction>, bool)>
    where
        P: Policy<RepairModel> + ?Sized,
        T: TerminalCost<RepairModel> + ?Sized,
    {
        let m = self.beliefs.len();
        if cloud_available(rho, seed) {
            self.sync(global);
            let u = rollout.one_at_a_time_control(global, seed, counter)?;
            self.assumed = vec![u.clone(); m];
            return Ok((u, true));
        }
        let mut executed = Vec::with_capacity(m);
        let mut assumed = Vec::with_capacity(m);
        for (l, local) in self.beliefs.iter().enumerate() {
            let mut view = rollout.base.joint_control(rollout.model, local)?;
            if mode == OfflineMode::Ib1 {
                let q = rollout.stage_evaluator(local, seed, counter);
                let sets = rollout.model.control_set(local, l);
                let (c, _) = minimize_component(&q, &view, l, &sets, view[l])?;
                view[l] = c;
            }
            executed.push(view[l]);
            assumed.push(view);
        }
        self.assumed = assumed;
        Ok((executed, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_validation() {
        assert!(CommsArchitecture::AmrIlc { rho: 0.0, radius: 1 }.validate().is_err());
        assert!(CommsArchitecture::AmrIb1 { rho: 1.5 }.validate().is_err());
        assert!(CommsArchitecture::AmrIb0 { rho: 1.0 }.validate().is_ok());
        assert!(CommsArchitecture::AmrLc { radius: 0 }.validate().is_ok());
    }

    #[test]
    fn cloud_frequency_matches_rho() {
        let rho = 0.3;
        let n = 10_000;
        let hits = (0..n).filter(|&s| cloud_available(rho, crate::rng::derive(7, &[s]))).count();
        let sigma = (n as f64 * rho * (1.0 - rho)).sqrt();
        assert!((hits as f64 - n as f64 * rho).abs() < 3.0 * sigma, "{hits}");
        assert!((0..1000).all(|s| cloud_available(1.0, s)));
    }

    #[test]
    fn independent_choices_ignore_each_other() {
        // Q depends on agent 1's component only through agent 0's.
        let q = |u: &[usize]| Ok(if u[0] == 1 { (u[1] as f64 - 1.0).abs() } else { u[1] as f64 });
        let sets = vec![vec![0, 1], vec![0, 1]];
        let b = independent_minimize(&q, &sets, &[0, 0], |_| vec![0, 0]).unwrap();
        assert_eq!(b, vec![0, 0]);
    }
}
