use marollout::approx_pi::{infer_control, softmax};
use marollout::base_policy::GreedyPolicy;
use marollout::pomdp::Policy;
use marollout::repair::{DamageChain, InitialDamage, RepairAction, RepairGraph, RepairModel, SteadyStateTerminal};
use marollout::rng::stream;
use marollout::rollout::{EvalCounter, Rollout, RolloutConfig};
use proptest::prelude::*;
use rand::Rng;

fn instance(n: usize, extra: usize, agents: usize, seed: u64) -> RepairModel {
    let g = RepairGraph::random_connected(n, extra, seed).unwrap();
    RepairModel::new(g, DamageChain::desk(), agents, 0.95).unwrap()
}

fn random_controls(model: &RepairModel, b: &marollout::repair::FactoredBelief, rng: &mut impl Rng) -> Vec<RepairAction> {
    (0..model.agents())
        .map(|l| {
            let c = model.control_set(b, l);
            c[rng.random_range(0..c.len())]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn belief_steps_stay_valid(n in 2usize..9, extra in 0usize..4, agents in 1usize..4, seed in any::<u64>()) {
        let model = instance(n, extra, agents, seed);
        let mut rng = stream(seed, &[9]);
        let (mut s, mut b) = model.random_initial_state(&InitialDamage::default(), &mut rng);
        for _ in 0..15 {
            let u = random_controls(&model, &b, &mut rng);
            let (next, z, cost) = model.env_step(&s, &u, &mut rng).unwrap();
            prop_assert!(cost >= 0.0);
            b = model.belief_step(&b, &u, &z).unwrap();
            b.validate().unwrap();
            for (l, &v) in next.locations.iter().enumerate() {
                prop_assert_eq!(b.locations()[l], v);
                prop_assert!(b.is_point_mass(v));
                prop_assert_eq!(b.dist(v)[next.levels[v] as usize], 1.0);
            }
            s = next;
        }
    }

    #[test]
    fn inference_is_always_feasible(seed in any::<u64>(), agents in 1usize..4) {
        let model = instance(7, 3, agents, seed);
        let base = GreedyPolicy::for_graph(model.graph()).unwrap();
        let mut rng = stream(seed, &[]);
        let (_, b) = model.random_initial_state(&InitialDamage::default(), &mut rng);
        let logits: Vec<f64> = (0..8).map(|_| rng.random_range(-50.0..50.0)).collect();
        let probs = softmax(&logits);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let scorer = move |_: &[f64]| probs.clone();
        let u = infer_control(&scorer, &model, &b, &base.joint_control(&model, &b).unwrap()).unwrap();
        prop_assert!(marollout::pomdp::Model::is_feasible(&model, &b, &u));
    }

    #[test]
    fn search_counts_follow_the_complexity_law(seed in any::<u64>(), agents in 1usize..4) {
        let model = instance(8, 4, agents, seed);
        let base = GreedyPolicy::for_graph(model.graph()).unwrap();
        let cfg = RolloutConfig { truncation: 2, n_traj: 2, obs_enum_cap: 0, ..Default::default() };
        let r = Rollout::new(&model, &base, &SteadyStateTerminal, cfg).unwrap();
        let (_, b) = model.random_initial_state(&InitialDamage::default(), &mut stream(seed, &[1]));
        let sizes: Vec<u64> = (0..agents).map(|l| model.control_set(&b, l).len() as u64).collect();
        let c = EvalCounter::new();
        let u = r.standard_control(&b, 3, &c).unwrap();
        prop_assert!(marollout::pomdp::Model::is_feasible(&model, &b, &u));
        prop_assert_eq!(c.snapshot().q_factor_evaluations, sizes.iter().product::<u64>());
        let c = EvalCounter::new();
        r.one_at_a_time_control(&b, 3, &c).unwrap();
        prop_assert_eq!(c.snapshot().q_factor_evaluations, sizes.iter().sum::<u64>());
        prop_assert_eq!(c.snapshot().slot_minimizations, agents as u64);
        let c = EvalCounter::new();
        r.order_optimized_control(&b, 3, &c).unwrap();
        prop_assert_eq!(c.snapshot().slot_minimizations, (agents * (agents + 1) / 2) as u64);
    }
}
