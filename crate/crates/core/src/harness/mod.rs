//! Seeded, paired experiment runner.
//!
//! Every policy in a grid is evaluated on the same initial states with the
//! same environment noise and the same per-stage controller seeds, so
//! per-state cost differences are paired.

mod config;
mod output;
mod runner;

use std::fs::File;
use std::io::BufWriter;

pub use config::{EvaluationConfig, ExperimentConfig, InstanceConfig, OutputConfig, PolicySpec, Source};
pub use output::{write_comparisons, write_manifest, write_results, write_timing, RESULTS_SCHEMA};
pub use runner::{compare, evaluate_policy, Comparison, EpisodeRecord, Instance, PolicyResult, PolicyRunner};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<PolicyResult>,
    pub comparisons: Vec<Comparison>,
}

/// Evaluates every policy of the grid and writes whichever outputs the
/// configuration names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let instance = Instance::from_config(config)?;
    let eval = &config.evaluation;
    let suite = instance.initial_suite(eval.initial_states, eval.root_seed);
    let mut results = Vec::with_capacity(config.policies.len());
    for spec in &config.policies {
        let runner = PolicyRunner::new(&instance, spec.clone(), config.rollout.clone(), &config.base_dir)?;
        results.push(runner.evaluate(&suite, eval.horizon, eval.root_seed, false)?);
    }
    dedupe_labels(&mut results);
    let comparisons = compare(&results);
    let out = &config.output;
    if let Some(p) = &out.results_csv {
        write_results(BufWriter::new(File::create(p)?), &results)?;
    }
    if let Some(p) = &out.comparison_csv {
        write_comparisons(BufWriter::new(File::create(p)?), &comparisons)?;
    }
    if let Some(p) = &out.timing_csv {
        write_timing(BufWriter::new(File::create(p)?), &results)?;
    }
    if let Some(p) = &out.manifest {
        write_manifest(p, config, &results)?;
    }
    Ok(ExperimentOutput { results, comparisons })
}

/// [`run_experiment`] for grids of at least two policies.
pub fn compare_grid(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.policies.len() < 2 {
        return Err(Error::Config("a comparison needs at least two policies".into()));
    }
    run_experiment(config)
}

fn dedupe_labels(results: &mut [PolicyResult]) {
    for i in 1..results.len() {
        let mut k = 2;
        let base = results[i].label.clone();
        while results[..i].iter().any(|r| r.label == results[i].label) {
            results[i].label = format!("{base}#{k}");
            k += 1;
        }
    }
}
