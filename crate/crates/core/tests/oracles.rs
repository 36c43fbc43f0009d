use std::sync::Arc;

use marollout::approx_pi::{
    accuracy, generate_samples, pi_iterate, train, BufferConfig, MemoryBuffer, NetworkConfig, PiConfig,
    TrainingSample,
};
use marollout::harness::{
    compare_grid, evaluate_policy, run_experiment, ExperimentConfig, Instance, InstanceConfig, OutputConfig,
    PolicySpec, Source,
};
use marollout::pomdp::{policy_cost_exact, Policy};
use marollout::repair::{DamageChain, InitialDamage, RepairGraph, RepairModel, SteadyStateTerminal};
use marollout::rng::stream;
use marollout::rollout::{EvalCounter, Rollout, RolloutConfig};
use marollout::stats::{mean, std_error};
use rand::Rng;

fn tiny_instance() -> Instance {
    let model = RepairModel::new(
        RepairGraph::path(3).unwrap(),
        DamageChain::new(2, vec![0.2], vec![0.0, 1.0]).unwrap(),
        2,
        0.9,
    )
    .unwrap();
    Instance::new(model, InitialDamage { p_dmg: 0.5 }).unwrap()
}

#[test]
fn harness_base_cost_matches_exact_expansion() {
    let inst = tiny_instance();
    let horizon = 6;
    let suite = inst.initial_suite(1, 3);
    let b0 = suite[0].1.clone();
    // Many hidden states drawn from the same belief.
    let many: Vec<_> = (0..4000)
        .map(|i| {
            let s = marollout::pomdp::Model::sample_state(&inst.model, &b0, &mut stream(11, &[i]));
            (s, b0.clone())
        })
        .collect();
    let costs = evaluate_policy(&inst.model, inst.greedy.as_ref(), &many, horizon, 5).unwrap();
    let exact = policy_cost_exact(&inst.model, inst.greedy.as_ref(), &b0, horizon, 1_000_000).unwrap();
    let (m, se) = (mean(&costs), std_error(&costs));
    assert!((m - exact).abs() <= 3.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn zero_horizon_costs_nothing_and_identical_policies_tie() {
    let mut cfg = ExperimentConfig::new(InstanceConfig::default(), vec![PolicySpec::Base, PolicySpec::Base]);
    cfg.evaluation.initial_states = 1;
    cfg.evaluation.horizon = 0;
    let out = compare_grid(&cfg).unwrap();
    assert!(out.results.iter().all(|r| r.costs() == vec![0.0]));
    assert_eq!(out.results[1].label, "base#2");

    cfg.evaluation.initial_states = 5;
    cfg.evaluation.horizon = 20;
    let out = compare_grid(&cfg).unwrap();
    assert_eq!(out.comparisons[0].test.mean_diff, 0.0);
    assert!(compare_grid(&ExperimentConfig::new(InstanceConfig::default(), vec![PolicySpec::Base])).is_err());
}

#[test]
fn aggregate_rows_are_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut cfg = ExperimentConfig::new(
        InstanceConfig {
            graph: Source::Preset("desk".into()),
            ..Default::default()
        },
        vec![PolicySpec::Base, PolicySpec::parse("amr-ib0:0.5").unwrap()],
    );
    cfg.evaluation.initial_states = 6;
    cfg.evaluation.horizon = 30;
    cfg.output = OutputConfig {
        results_csv: Some(path.clone()),
        ..Default::default()
    };
    run_experiment(&cfg).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    for policy in ["base", "amr-ib0(rho=0.5)"] {
        let per: Vec<f64> = rows
            .iter()
            .filter(|r| &r[col("policy")] == policy && &r[col("row")] != "aggregate")
            .map(|r| r[col("discounted_cost")].parse().unwrap())
            .collect();
        assert_eq!(per.len(), 6);
        let agg = rows
            .iter()
            .find(|r| &r[col("policy")] == policy && &r[col("row")] == "aggregate")
            .unwrap();
        assert_eq!(agg[col("discounted_cost")], format!("{:.2}", mean(&per)));
        let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= mean(&per) && mean(&per) <= hi);
        assert!(rows.iter().all(|r| r[col("schema")] == *marollout::harness::RESULTS_SCHEMA));
    }
}

#[test]
fn sample_labels_are_rollout_components() {
    let inst = tiny_instance();
    let cfg = RolloutConfig {
        n_traj: 5,
        ..Default::default()
    };
    let r = Rollout::new(&inst.model, inst.greedy.as_ref(), &SteadyStateTerminal, cfg.clone()).unwrap();
    let buffer = MemoryBuffer::build(&inst.model, inst.greedy.as_ref(), &inst.init, &BufferConfig::default(), 1).unwrap();
    let q = 7;
    let g = generate_samples(&r, &buffer, q, 2).unwrap();
    assert_eq!(g.samples.len(), q * 2);
    for s in 0..q {
        let b = &buffer.beliefs()[g.belief_indices[s]];
        let u = r.one_at_a_time_control(b, g.stage_seeds[s], &EvalCounter::new()).unwrap();
        for l in 0..2 {
            assert_eq!(g.samples[s * 2 + l].label, u[l].class_index());
        }
    }
    assert!(generate_samples(&r, &buffer, 0, 2).is_err());
    assert!(generate_samples(&r, &MemoryBuffer::default(), 1, 2).is_err());
    let ordered = Rollout::new(
        &inst.model,
        inst.greedy.as_ref(),
        &SteadyStateTerminal,
        RolloutConfig {
            agent_order: marollout::rollout::AgentOrder::Optimized,
            ..cfg
        },
    )
    .unwrap();
    assert!(generate_samples(&ordered, &buffer, 1, 2).is_err());
}

#[test]
fn separable_classes_are_learned() {
    let mut rng = stream(4, &[]);
    let samples: Vec<TrainingSample> = (0..400)
        .map(|i| {
            let label = i % 2;
            let offset = if label == 0 { -2.0 } else { 2.0 };
            TrainingSample {
                features: (0..5).map(|_| offset + rng.random_range(-1.0..1.0)).collect(),
                label,
            }
        })
        .collect();
    let cfg = NetworkConfig {
        hidden: vec![16, 8],
        epochs: 30,
        batch_size: 32,
        learning_rate: 0.01,
        ..Default::default()
    };
    let (net, _) = train(&samples, 2, &cfg, 5).unwrap();
    assert!(accuracy(&net, &samples).unwrap() >= 0.99);
    // A single-class set trains without complaint.
    let one: Vec<_> = samples.iter().filter(|s| s.label == 1).cloned().collect();
    assert!(train(&one, 2, &cfg, 5).is_ok());
}

#[test]
fn pi_trace_has_one_entry_per_iteration_plus_base() {
    let inst = tiny_instance();
    let cfg = PiConfig {
        iterations: 2,
        beliefs_per_iteration: 30,
        rollout: RolloutConfig {
            n_traj: 3,
            truncation: 3,
            ..Default::default()
        },
        buffer: BufferConfig {
            walks: 10,
            ..Default::default()
        },
        network: NetworkConfig {
            hidden: vec![16, 8],
            epochs: 3,
            ..Default::default()
        },
        evaluation_states: 4,
        horizon: 10,
    };
    let base: Arc<dyn Policy<RepairModel>> = inst.greedy.clone();
    let a = pi_iterate(&inst, base.clone(), &SteadyStateTerminal, &cfg, 9).unwrap();
    assert_eq!(a.cost_trace.len(), 3);
    assert_eq!(a.policies.len(), 2);
    let b = pi_iterate(&inst, base, &SteadyStateTerminal, &cfg, 9).unwrap();
    assert_eq!(a.cost_trace, b.cost_trace);
}
