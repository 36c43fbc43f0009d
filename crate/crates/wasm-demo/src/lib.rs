//! Browser bindings: step a desk-scale repair instance under the greedy or
//! the one-agent-at-a-time rollout policy, and run small paired comparisons.

use marollout::harness::{evaluate_policy, Instance, InstanceConfig};
use marollout::pomdp::{Model, Policy};
use marollout::repair::{FactoredBelief, HiddenRepairState, RepairModel, SteadyStateTerminal};
use marollout::rng::{derive, purpose, stream};
use marollout::rollout::{EvalCounter, Rollout, RolloutConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Frame<'a> {
    stage: usize,
    locations: &'a [usize],
    levels: &'a [u8],
    /// Expected damage cost per vertex under the shared belief.
    expected: Vec<f64>,
    stage_cost: f64,
    discounted_total: f64,
    q_factors: u64,
}

#[derive(Serialize)]
struct Layout {
    positions: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    levels: usize,
}

#[wasm_bindgen]
pub struct Demo {
    instance: Instance,
    rollout: RolloutConfig,
    seed: u64,
    episode: u64,
    state: HiddenRepairState,
    belief: FactoredBelief,
    stage: usize,
    total: f64,
    discount: f64,
    last_cost: f64,
    last_q: u64,
}

#[wasm_bindgen]
impl Demo {
    /// Desk-scale instance with `agents` robots.
    #[wasm_bindgen(constructor)]
    pub fn new(agents: usize, seed: u64) -> Result<Demo, JsValue> {
        Self::create(agents, seed).map_err(|e| JsValue::from_str(&e))
    }

    /// Advances one stage under `"base"` or `"rollout"` and returns the new
    /// frame as JSON.
    pub fn step(&mut self, policy: &str) -> Result<String, JsValue> {
        self.advance(policy).map_err(|e| JsValue::from_str(&e))
    }

    /// Mean discounted cost of the greedy and rollout policies over `states`
    /// shared initial states, as JSON `{base, rollout, states, horizon}`.
    pub fn compare(&self, states: usize, horizon: usize) -> Result<String, JsValue> {
        self.paired_means(states, horizon).map_err(|e| JsValue::from_str(&e))
    }

    /// Current frame as JSON.
    pub fn frame(&self) -> String {
        let model: &RepairModel = &self.instance.model;
        let costs = model.chain().cost();
        let expected = (0..model.graph().num_vertices())
            .map(|v| self.belief.dist(v).iter().zip(costs).map(|(p, c)| p * c).sum())
            .collect();
        serde_json::to_string(&Frame {
            stage: self.stage,
            locations: &self.state.locations,
            levels: &self.state.levels,
            expected,
            stage_cost: self.last_cost,
            discounted_total: self.total,
            q_factors: self.last_q,
        })
        .expect("plain data")
    }

    /// Vertex positions and edges as JSON.
    pub fn layout(&self) -> String {
        let g = self.instance.model.graph();
        let positions = g
            .layout()
            .map(<[_]>::to_vec)
            .unwrap_or_else(|| (0..g.num_vertices()).map(|v| [v as f64, 0.0]).collect());
        serde_json::to_string(&Layout {
            positions,
            edges: g.edges(),
            levels: self.instance.model.chain().levels(),
        })
        .expect("plain data")
    }

    /// Draws a fresh damage scenario.
    pub fn reset(&mut self) {
        self.episode += 1;
        let (s, b) = self.instance.model.random_initial_state(
            &self.instance.init,
            &mut stream(self.seed, &[purpose::INITIAL_STATE, self.episode]),
        );
        self.state = s;
        self.belief = b;
        self.stage = 0;
        self.total = 0.0;
        self.discount = 1.0;
        self.last_cost = 0.0;
        self.last_q = 0;
    }

}

impl Demo {
    pub fn create(agents: usize, seed: u64) -> Result<Demo, String> {
        let cfg = InstanceConfig {
            agents,
            ..Default::default()
        };
        let model = cfg.build(0.95, ".".as_ref()).map_err(err)?;
        let instance = Instance::new(model, cfg.initial_damage).map_err(err)?;
        let (state, belief) = instance
            .model
            .random_initial_state(&instance.init, &mut stream(seed, &[purpose::INITIAL_STATE, 0]));
        Ok(Demo {
            instance,
            rollout: RolloutConfig {
                n_traj: 10,
                ..Default::default()
            },
            seed,
            episode: 0,
            state,
            belief,
            stage: 0,
            total: 0.0,
            discount: 1.0,
            last_cost: 0.0,
            last_q: 0,
        })
    }

    pub fn advance(&mut self, policy: &str) -> Result<String, String> {
        let model = &self.instance.model;
        let greedy = self.instance.greedy.as_ref();
        let counter = EvalCounter::new();
        let stage_seed = derive(self.seed, &[purpose::CONTROLLER, self.episode, self.stage as u64]);
        let u = match policy {
            "base" => greedy.joint_control(model, &self.belief).map_err(err)?,
            "rollout" => Rollout::new(model, greedy, &SteadyStateTerminal, self.rollout.clone())
                .map_err(err)?
                .one_at_a_time_control(&self.belief, stage_seed, &counter)
                .map_err(err)?,
            other => return Err(err(format!("unknown policy {other:?}"))),
        };
        let mut rng = stream(self.seed, &[purpose::ENVIRONMENT, self.episode, self.stage as u64]);
        let (next, z, cost) = model.env_step(&self.state, &u, &mut rng).map_err(err)?;
        self.belief = model.belief_step(&self.belief, &u, &z).map_err(err)?;
        self.state = next;
        self.total += self.discount * cost;
        self.discount *= model.discount();
        self.stage += 1;
        self.last_cost = cost;
        self.last_q = counter.snapshot().q_factor_evaluations;
        Ok(self.frame())
    }


    pub fn paired_means(&self, states: usize, horizon: usize) -> Result<String, String> {
        let inst = &self.instance;
        let suite = inst.initial_suite(states, self.seed);
        let greedy = inst.greedy.as_ref();
        let base = evaluate_policy(&inst.model, greedy, &suite, horizon, self.seed).map_err(err)?;
        let rollout = Rollout::new(&inst.model, greedy, &SteadyStateTerminal, self.rollout.clone()).map_err(err)?;
        let planner = RolloutPolicy(rollout, self.seed);
        let rolled = evaluate_policy(&inst.model, &planner, &suite, horizon, self.seed).map_err(err)?;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        Ok(serde_json::json!({
            "base": mean(&base),
            "rollout": mean(&rolled),
            "states": states,
            "horizon": horizon,
        })
        .to_string())
    }
}

/// One-at-a-time rollout as a plain policy; the stage seed is derived from
/// the belief so repeated calls are reproducible.
struct RolloutPolicy<'a>(Rollout<'a, RepairModel, marollout::base_policy::GreedyPolicy, SteadyStateTerminal>, u64);

impl Policy<RepairModel> for RolloutPolicy<'_> {
    fn joint_control(
        &self,
        _: &RepairModel,
        b: &FactoredBelief,
    ) -> marollout::Result<Vec<marollout::repair::RepairAction>> {
        let key = b.damage_flat().iter().fold(0u64, |h, p| h.rotate_left(5) ^ p.to_bits());
        self.0.one_at_a_time_control(b, derive(self.1, &[key]), &EvalCounter::new())
    }
}
