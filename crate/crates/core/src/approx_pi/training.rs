use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{Mode, NetworkConfig, PolicyNetwork};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

/// Encoded tuple and the rollout's chosen class for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub epochs_run: usize,
    pub loss_history: Vec<f64>,
    pub train_accuracy: f64,
}

fn batch_matrix(samples: &[TrainingSample], idx: &[usize], dim: usize) -> Array2<f64> {
    let mut x = Array2::zeros((idx.len(), dim));
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).assign(&ndarray::ArrayView1::from(&samples[i].features));
    }
    x
}

/// Trains a fresh network by mini-batch RMSProp on mean cross-entropy.
pub fn train(
    samples: &[TrainingSample],
    classes: usize,
    config: &NetworkConfig,
    seed: u64,
) -> Result<(PolicyNetwork, TrainingReport)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Classifier("cannot train on an empty sample set".into()))?;
    let dim = first.features.len();
    if let Some(s) = samples.iter().find(|s| s.features.len() != dim || s.label >= classes) {
        return Err(Error::Classifier(format!(
            "sample with {} features and label {} does not fit {dim} features / {classes} classes",
            s.features.len(),
            s.label
        )));
    }
    let mut rng = stream(seed, &[purpose::TRAINING]);
    let mut net = PolicyNetwork::new(dim, classes, config.clone(), &mut rng)?;
    let mut cache = net.zero_cache();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let x = batch_matrix(samples, idx, dim);
            let labels: Vec<usize> = idx.iter().map(|&i| samples[i].label).collect();
            let trace = net.forward(&x, Mode::Train)?;
            let (loss, grads) = net.loss_and_gradients(&x, &labels, Mode::Train)?;
            net.update_running_stats(&trace);
            net.rmsprop_step(&grads, &mut cache);
            total += loss * idx.len() as f64;
        }
        let epoch_loss = total / samples.len() as f64;
        history.push(epoch_loss);
        if epoch_loss < best * (1.0 - config.min_improvement) {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let train_accuracy = accuracy(&net, samples)?;
    net.train_accuracy = Some(train_accuracy);
    Ok((
        net,
        TrainingReport {
            epochs_run: history.len(),
            loss_history: history,
            train_accuracy,
        },
    ))
}

/// Fraction of samples whose unmasked argmax class equals the label.
pub fn accuracy(net: &PolicyNetwork, samples: &[TrainingSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let dim = net.input_dim();
    let mut hits = 0usize;
    let idx: Vec<usize> = (0..samples.len()).collect();
    for chunk in idx.chunks(1024) {
        let probs = net.predict_batch(&batch_matrix(samples, chunk, dim))?;
        for (row, &i) in probs.rows().into_iter().zip(chunk) {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            hits += usize::from(best == samples[i].label);
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}
