//! CSV and manifest writers. Every file written here is a pure function of
//! the configuration, so repeated runs produce identical bytes; wall-clock
//! times go to a separate timing file.

use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::runner::{Comparison, PolicyResult};
use crate::error::Result;

pub const RESULTS_SCHEMA: &str = "marollout-results/1";

#[derive(Serialize)]
struct ResultLine<'a> {
    schema: &'a str,
    policy: &'a str,
    row: String,
    discounted_cost: String,
    stderr: String,
    min: String,
    max: String,
    q_per_stage: String,
    trajectories_per_stage: String,
    slot_minimizations_per_stage: String,
    oscillation_rate: String,
    cloud_rate: String,
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::Format(format!("{other:?}")),
    }
}

/// One row per (policy, initial state) at full precision, then one
/// aggregate row per policy at two decimals.
pub fn write_results<W: std::io::Write>(w: W, results: &[PolicyResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        for e in &r.episodes {
            let stages = e.stages.max(1) as f64;
            out.serialize(ResultLine {
                schema: RESULTS_SCHEMA,
                policy: &r.label,
                row: e.index.to_string(),
                discounted_cost: format!("{}", e.cost),
                stderr: String::new(),
                min: String::new(),
                max: String::new(),
                q_per_stage: format!("{}", e.mean_q_per_stage()),
                trajectories_per_stage: format!("{}", e.trajectories as f64 / stages),
                slot_minimizations_per_stage: format!("{}", e.slot_minimizations as f64 / stages),
                oscillation_rate: format!("{}", e.oscillation_rate(r.agents)),
                cloud_rate: format!("{}", e.cloud_rate()),
            })
            .map_err(csv_error)?;
        }
        let n = r.episodes.len().max(1) as f64;
        let avg = |f: &dyn Fn(&super::runner::EpisodeRecord) -> f64| r.episodes.iter().map(f).sum::<f64>() / n;
        out.serialize(ResultLine {
            schema: RESULTS_SCHEMA,
            policy: &r.label,
            row: "aggregate".into(),
            discounted_cost: format!("{:.2}", r.mean()),
            stderr: format!("{:.2}", r.stderr()),
            min: format!("{:.2}", r.min()),
            max: format!("{:.2}", r.max()),
            q_per_stage: format!("{:.2}", r.mean_q_per_stage()),
            trajectories_per_stage: format!("{:.2}", avg(&|e| e.trajectories as f64 / e.stages.max(1) as f64)),
            slot_minimizations_per_stage: format!(
                "{:.2}",
                avg(&|e| e.slot_minimizations as f64 / e.stages.max(1) as f64)
            ),
            oscillation_rate: format!("{:.4}", r.oscillation_rate()),
            cloud_rate: format!("{:.4}", avg(&|e| e.cloud_rate())),
        })
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ComparisonLine<'a> {
    schema: &'a str,
    a: &'a str,
    b: &'a str,
    n: usize,
    mean_diff: String,
    stderr: String,
    t: String,
    p_a_lower: String,
    p_a_higher: String,
    verdict: &'a str,
}

pub fn write_comparisons<W: std::io::Write>(w: W, comparisons: &[Comparison]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in comparisons {
        out.serialize(ComparisonLine {
            schema: RESULTS_SCHEMA,
            a: &c.a,
            b: &c.b,
            n: c.test.n,
            mean_diff: format!("{:.4}", c.test.mean_diff),
            stderr: format!("{:.4}", c.test.stderr),
            t: format!("{:.4}", c.test.t),
            p_a_lower: format!("{:.6}", c.test.p_less),
            p_a_higher: format!("{:.6}", c.test.p_greater),
            verdict: c.verdict(0.05),
        })
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing<W: std::io::Write>(w: W, results: &[PolicyResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["policy", "row", "stages", "wall_seconds", "seconds_per_stage"])
        .map_err(csv_error)?;
    for r in results {
        for e in &r.episodes {
            out.write_record([
                r.label.clone(),
                e.index.to_string(),
                e.stages.to_string(),
                format!("{:.6}", e.wall_seconds),
                format!("{:.6}", e.wall_seconds / e.stages.max(1) as f64),
            ])
            .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'a str,
    package: &'a str,
    version: &'a str,
    policies: Vec<&'a str>,
    config: &'a ExperimentConfig,
}

pub fn write_manifest(path: &Path, config: &ExperimentConfig, results: &[PolicyResult]) -> Result<()> {
    let m = Manifest {
        schema: RESULTS_SCHEMA,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        policies: results.iter().map(|r| r.label.as_str()).collect(),
        config,
    };
    std::fs::write(path, serde_json::to_string_pretty(&m)?)?;
    Ok(())
}
