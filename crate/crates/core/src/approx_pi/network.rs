//! Feedforward softmax classifier: ReLU hidden layers, one batch
//! normalization layer after the last hidden layer, a dense output layer and
//! a softmax. Trained with cross-entropy and RMSProp.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

const MAGIC: &[u8; 8] = b"MRPNET\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without relative loss improvement of `min_improvement` before
    /// training stops early.
    pub patience: usize,
    pub min_improvement: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 64],
            learning_rate: 0.001,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            batch_size: 128,
            epochs: 20,
            patience: 3,
            min_improvement: 1e-4,
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("need at least one non-empty hidden layer".into()));
        }
        if self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(Error::Config("batch size and learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("decay rates must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// Batch statistics are used in `Train`, running statistics in `Infer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `inputs × outputs`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn he(inputs: usize, outputs: usize, rng: &mut SimRng) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
        Self {
            inputs,
            outputs,
            w: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            b: vec![0.0; outputs],
        }
    }

    fn weights(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.inputs, self.outputs), &self.w).expect("dense shape")
    }

    /// `x·W + b` for one row; zero inputs are skipped since encoded
    /// features are mostly one-hot.
    fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (xi, row) in x.iter().zip(self.w.chunks_exact(self.outputs)) {
            if *xi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
        }
        out
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights()) + &ArrayView1::from(&self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each hidden dense layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden dense layer.
    pre: Vec<Array2<f64>>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
    /// Normalized output fed to the output layer.
    normalized: Array2<f64>,
    pub probs: Array2<f64>,
    log_probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    input_dim: usize,
    classes: usize,
    hidden: Vec<Dense>,
    norm: BatchNorm,
    output: Dense,
    config: NetworkConfig,
    /// Training-set accuracy recorded at the end of training.
    pub train_accuracy: Option<f64>,
}

impl PolicyNetwork {
    pub fn new(input_dim: usize, classes: usize, config: NetworkConfig, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || classes == 0 {
            return Err(Error::Config("input and output dimensions must be positive".into()));
        }
        let mut hidden = Vec::with_capacity(config.hidden.len());
        let mut width = input_dim;
        for &h in &config.hidden {
            hidden.push(Dense::he(width, h, rng));
            width = h;
        }
        let output = Dense::he(width, classes, rng);
        Ok(Self {
            input_dim,
            classes,
            hidden,
            norm: BatchNorm {
                gamma: vec![1.0; width],
                beta: vec![0.0; width],
                running_mean: vec![0.0; width],
                running_var: vec![1.0; width],
            },
            output,
            config,
            train_accuracy: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Parameter blocks in a fixed order: each hidden layer's weights and
    /// biases, normalization scale and shift, output weights and biases.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in &self.hidden {
            out.push(&d.w);
            out.push(&d.b);
        }
        out.push(&self.norm.gamma);
        out.push(&self.norm.beta);
        out.push(&self.output.w);
        out.push(&self.output.b);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.hidden {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        out.push(&mut self.norm.gamma);
        out.push(&mut self.norm.beta);
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        out
    }

    /// Output layer biases, exposed for constructing test classifiers.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        &mut self.output.b
    }

    pub fn forward(&self, x: &Array2<f64>, mode: Mode) -> Result<Trace> {
        if x.ncols() != self.input_dim {
            return Err(Error::Classifier(format!(
                "expected {} features, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        let mut a = x.to_owned();
        let mut inputs = Vec::with_capacity(self.hidden.len());
        let mut pre = Vec::with_capacity(self.hidden.len());
        for d in &self.hidden {
            let z = d.apply(&a);
            inputs.push(a);
            a = z.mapv(|v| v.max(0.0));
            pre.push(z);
        }
        let n = a.nrows() as f64;
        let (batch_mean, batch_var) = match mode {
            Mode::Train => {
                let mean = a.sum_axis(Axis(0)) / n;
                let var = (&a - &mean).mapv(|v| v * v).sum_axis(Axis(0)) / n;
                (mean, var)
            }
            Mode::Infer => (
                Array1::from(self.norm.running_mean.clone()),
                Array1::from(self.norm.running_var.clone()),
            ),
        };
        let inv_std = batch_var.mapv(|v| 1.0 / (v + self.config.bn_epsilon).sqrt());
        let xhat = (&a - &batch_mean) * &inv_std;
        let normalized = &xhat * &ArrayView1::from(&self.norm.gamma) + &ArrayView1::from(&self.norm.beta);
        let logits = self.output.apply(&normalized);
        let mut log_probs = logits;
        for mut row in log_probs.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|v| v - lse);
        }
        let probs = log_probs.mapv(f64::exp);
        Ok(Trace {
            inputs,
            pre,
            xhat,
            inv_std,
            batch_mean,
            batch_var,
            normalized,
            probs,
            log_probs,
        })
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, x: &Array2<f64>, labels: &[usize], mode: Mode) -> Result<f64> {
        let trace = self.forward(x, mode)?;
        cross_entropy(&trace, labels)
    }

    /// Mean cross-entropy and its gradient, blocks ordered as
    /// [`Self::parameters`].
    pub fn loss_and_gradients(&self, x: &Array2<f64>, labels: &[usize], mode: Mode) -> Result<(f64, Vec<Vec<f64>>)> {
        let trace = self.forward(x, mode)?;
        let loss = cross_entropy(&trace, labels)?;
        Ok((loss, self.backward(&trace, labels, mode)))
    }

    fn backward(&self, trace: &Trace, labels: &[usize], mode: Mode) -> Vec<Vec<f64>> {
        let n = trace.probs.nrows() as f64;
        let mut dlogits = trace.probs.clone();
        for (i, &y) in labels.iter().enumerate() {
            dlogits[[i, y]] -= 1.0;
        }
        dlogits /= n;

        let d_out_w = trace.normalized.t().dot(&dlogits);
        let d_out_b = dlogits.sum_axis(Axis(0));
        let dy = dlogits.dot(&self.output.weights().t());

        let d_gamma = (&dy * &trace.xhat).sum_axis(Axis(0));
        let d_beta = dy.sum_axis(Axis(0));
        let dxhat = &dy * &ArrayView1::from(&self.norm.gamma);
        let mut dx = match mode {
            Mode::Train => {
                let sum = dxhat.sum_axis(Axis(0));
                let sum_x = (&dxhat * &trace.xhat).sum_axis(Axis(0));
                let centred = &dxhat * n - &sum - &trace.xhat * &sum_x;
                centred * &trace.inv_std / n
            }
            Mode::Infer => dxhat * &trace.inv_std,
        };

        let mut hidden_grads = Vec::with_capacity(self.hidden.len());
        for (k, d) in self.hidden.iter().enumerate().rev() {
            let dz = &dx * &trace.pre[k].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let dw = trace.inputs[k].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            if k > 0 {
                dx = dz.dot(&d.weights().t());
            }
            hidden_grads.push((dw, db));
        }
        hidden_grads.reverse();

        let mut grads = Vec::new();
        for (dw, db) in hidden_grads {
            grads.push(into_vec(dw));
            grads.push(db.to_vec());
        }
        grads.push(d_gamma.to_vec());
        grads.push(d_beta.to_vec());
        grads.push(into_vec(d_out_w));
        grads.push(d_out_b.to_vec());
        grads
    }

    /// Folds one training batch's statistics into the running statistics.
    pub fn update_running_stats(&mut self, trace: &Trace) {
        let mom = self.config.bn_momentum;
        for (r, &m) in self.norm.running_mean.iter_mut().zip(trace.batch_mean.iter()) {
            *r = mom * *r + (1.0 - mom) * m;
        }
        for (r, &v) in self.norm.running_var.iter_mut().zip(trace.batch_var.iter()) {
            *r = mom * *r + (1.0 - mom) * v;
        }
    }

    /// Class probabilities for one feature vector, inference mode.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim {
            return Err(Error::Classifier(format!(
                "expected {} features, got {}",
                self.input_dim,
                features.len()
            )));
        }
        let mut a = features.to_vec();
        for d in &self.hidden {
            a = d.apply_row(&a);
            a.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        for (i, v) in a.iter_mut().enumerate() {
            let inv = 1.0 / (self.norm.running_var[i] + self.config.bn_epsilon).sqrt();
            *v = (*v - self.norm.running_mean[i]) * inv * self.norm.gamma[i] + self.norm.beta[i];
        }
        Ok(softmax(&self.output.apply_row(&a)))
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, Mode::Infer)?.probs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        net.check_shapes()?;
        Ok(net)
    }

    fn check_shapes(&self) -> Result<()> {
        let mut width = self.input_dim;
        for d in self.hidden.iter().chain(std::iter::once(&self.output)) {
            if d.inputs != width || d.w.len() != d.inputs * d.outputs || d.b.len() != d.outputs {
                return Err(Error::Format("inconsistent layer dimensions".into()));
            }
            width = d.outputs;
        }
        let h = self.output.inputs;
        if self.output.outputs != self.classes
            || [&self.norm.gamma, &self.norm.beta, &self.norm.running_mean, &self.norm.running_var]
                .iter()
                .any(|v| v.len() != h)
        {
            return Err(Error::Format("inconsistent output or normalization dimensions".into()));
        }
        Ok(())
    }

    /// Versioned little-endian binary: magic, version, config as JSON,
    /// dimensions, then row-major weight blocks and normalization statistics.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let config = serde_json::to_vec(&self.config)?;
        write_u64(&mut w, config.len() as u64)?;
        w.write_all(&config)?;
        write_u64(&mut w, self.input_dim as u64)?;
        write_u64(&mut w, self.classes as u64)?;
        write_u64(&mut w, self.hidden.len() as u64)?;
        for d in self.hidden.iter().chain(std::iter::once(&self.output)) {
            write_u64(&mut w, d.inputs as u64)?;
            write_u64(&mut w, d.outputs as u64)?;
            write_f64s(&mut w, &d.w)?;
            write_f64s(&mut w, &d.b)?;
        }
        for v in [&self.norm.gamma, &self.norm.beta, &self.norm.running_mean, &self.norm.running_var] {
            write_f64s(&mut w, v)?;
        }
        write_f64s(&mut w, &[self.train_accuracy.unwrap_or(f64::NAN)])?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a policy network file".into()));
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported network format version {version}")));
        }
        let len = read_usize(&mut r)?;
        let mut config = vec![0u8; len];
        r.read_exact(&mut config)?;
        let config: NetworkConfig = serde_json::from_slice(&config)?;
        let input_dim = read_usize(&mut r)?;
        let classes = read_usize(&mut r)?;
        let n_hidden = read_usize(&mut r)?;
        let mut layers = Vec::with_capacity(n_hidden + 1);
        for _ in 0..=n_hidden {
            let inputs = read_usize(&mut r)?;
            let outputs = read_usize(&mut r)?;
            let w = read_f64s(&mut r, inputs.checked_mul(outputs).ok_or_else(|| Error::Format("layer too large".into()))?)?;
            let b = read_f64s(&mut r, outputs)?;
            layers.push(Dense { inputs, outputs, w, b });
        }
        let output = layers.pop().expect("output layer");
        let h = output.inputs;
        let norm = BatchNorm {
            gamma: read_f64s(&mut r, h)?,
            beta: read_f64s(&mut r, h)?,
            running_mean: read_f64s(&mut r, h)?,
            running_var: read_f64s(&mut r, h)?,
        };
        let acc = read_f64s(&mut r, 1)?[0];
        let net = Self {
            input_dim,
            classes,
            hidden: layers,
            norm,
            output,
            config,
            train_accuracy: (!acc.is_nan()).then_some(acc),
        };
        net.check_shapes()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "json") {
            std::fs::write(path, self.to_json()?)?;
        } else {
            self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&std::fs::read_to_string(path)?)
        } else {
            Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
        }
    }

    /// Applies one RMSProp step.
    pub fn rmsprop_step(&mut self, grads: &[Vec<f64>], cache: &mut [Vec<f64>]) {
        let (lr, decay, eps) = (self.config.learning_rate, self.config.rms_decay, self.config.rms_epsilon);
        for ((p, g), c) in self.parameters_mut().into_iter().zip(grads).zip(cache.iter_mut()) {
            for ((p, &g), c) in p.iter_mut().zip(g).zip(c.iter_mut()) {
                *c = decay * *c + (1.0 - decay) * g * g;
                *p -= lr * g / (c.sqrt() + eps);
            }
        }
    }

    pub fn zero_cache(&self) -> Vec<Vec<f64>> {
        self.parameters().iter().map(|p| vec![0.0; p.len()]).collect()
    }
}

/// Draws a random feature batch; used by gradient checks and tests.
pub fn random_batch(rows: usize, cols: usize, rng: &mut SimRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn cross_entropy(trace: &Trace, labels: &[usize]) -> Result<f64> {
    let n = trace.probs.nrows();
    if labels.len() != n {
        return Err(Error::Classifier(format!("{n} rows but {} labels", labels.len())));
    }
    let classes = trace.probs.ncols();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Classifier(format!("label {y} out of range for {classes} classes")));
        }
        total -= trace.log_probs[[i, y]];
    }
    Ok(total / n as f64)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn into_vec(a: Array2<f64>) -> Vec<f64> {
    if a.is_standard_layout() {
        a.into_raw_vec_and_offset().0
    } else {
        a.iter().copied().collect()
    }
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    usize::try_from(u64::from_le_bytes(buf)).map_err(|_| Error::Format("length overflows".into()))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| Error::Format("block too large".into()))?];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}
