//! Denoising MLP trained with Adam.
//!
//! The network takes the `2n` real inputs `[Re u, Im u]`, has one `tanh`
//! hidden layer of `2n` units and a linear output: `d` values for the decode
//! task or `2n` components for the cleanup task. Cleanup outputs are
//! projected back to unit modulus.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corruption::{corrupt_with, NoiseModel};
use crate::error::{check_dim, Error, Result};
use crate::fhrr::{encode, EncodingMatrix, SspVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserTask {
    Decode,
    Cleanup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment accumulators for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: Adam,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(hyper: Adam, len: usize) -> Self {
        Self { hyper, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    /// One descent step on `params` given the loss gradient `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        let Adam { learning_rate, beta1, beta2, epsilon } = self.hyper;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub task: DenoiserTask,
    pub sigma: f64,
    pub n_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: Adam,
    /// Values are drawn uniformly from the ball of this radius.
    pub radius: f64,
    pub seed: u64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            task: DenoiserTask::Decode,
            sigma: 0.0,
            n_samples: 10_000,
            epochs: 50,
            batch_size: 100,
            adam: Adam::default(),
            radius: 5.0,
            seed: 0,
        }
    }
}

/// Shape-tagged dense array for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    task: DenoiserTask,
    n: usize,
    d: usize,
    target_scale: f64,
    w1: TaggedArray,
    b1: TaggedArray,
    w2: TaggedArray,
    b2: TaggedArray,
    initial_loss: Option<f64>,
    loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Snapshot", into = "Snapshot")]
pub struct MlpDenoiser {
    task: DenoiserTask,
    n: usize,
    d: usize,
    /// Decode targets are `x / target_scale`.
    target_scale: f64,
    /// Flat `[w1 (h×in), b1 (h), w2 (out×h), b2 (out)]`.
    params: Vec<f64>,
    pub initial_loss: Option<f64>,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiseOutput {
    Value(Vec<f64>),
    Ssp(SspVector),
}

impl MlpDenoiser {
    /// Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(task: DenoiserTask, n: usize, d: usize, target_scale: f64, rng: &mut R) -> Result<Self> {
        if n == 0 || d == 0 || !(target_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("denoiser needs n, d >= 1 and a positive scale, got n={n} d={d}")));
        }
        let mut net =
            Self { task, n, d, target_scale, params: Vec::new(), initial_loss: None, loss_history: Vec::new() };
        let (input, hidden, output) = net.sizes();
        net.params = vec![0.0; net.param_count()];
        let glorot = |fan_in: usize, fan_out: usize, r: &mut R| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            r.random_range(-limit..limit)
        };
        let (w1, rest) = net.params.split_at_mut(hidden * input);
        w1.iter_mut().for_each(|w| *w = glorot(input, hidden, rng));
        let w2 = &mut rest[hidden..hidden + output * hidden];
        w2.iter_mut().for_each(|w| *w = glorot(hidden, output, rng));
        Ok(net)
    }

    pub fn task(&self) -> DenoiserTask {
        self.task
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(inputs, hidden units, outputs)`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        let out = match self.task {
            DenoiserTask::Decode => self.d,
            DenoiserTask::Cleanup => 2 * self.n,
        };
        (2 * self.n, 2 * self.n, out)
    }

    pub fn param_count(&self) -> usize {
        let (i, h, o) = self.sizes();
        h * i + h + o * h + o
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (i, h, o) = self.sizes();
        let (w1, rest) = self.params.split_at(h * i);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(o * h);
        (
            ArrayView2::from_shape((h, i), w1).expect("w1 shape"),
            ArrayView1::from(b1),
            ArrayView2::from_shape((o, h), w2).expect("w2 shape"),
            ArrayView1::from(b2),
        )
    }

    /// `[Re u, Im u]` for a batch of vectors.
    pub fn features(&self, batch: &[SspVector]) -> Result<Array2<f64>> {
        let mut x = Array2::zeros((batch.len(), 2 * self.n));
        for (mut row, u) in x.rows_mut().into_iter().zip(batch) {
            check_dim(self.n, u.dim())?;
            for (k, &p) in u.phases().iter().enumerate() {
                let (s, c) = p.sin_cos();
                row[k] = c;
                row[self.n + k] = s;
            }
        }
        Ok(x)
    }

    fn targets(&self, values: &[Vec<f64>], clean: &[SspVector]) -> Result<Array2<f64>> {
        match self.task {
            DenoiserTask::Cleanup => self.features(clean),
            DenoiserTask::Decode => {
                let mut t = Array2::zeros((values.len(), self.d));
                for (mut row, x) in t.rows_mut().into_iter().zip(values) {
                    check_dim(self.d, x.len())?;
                    row.iter_mut().zip(x).for_each(|(r, v)| *r = v / self.target_scale);
                }
                Ok(t)
            }
        }
    }

    /// Raw network outputs, one row per input row.
    pub fn forward(&self, inputs: &Array2<f64>) -> Array2<f64> {
        let (w1, b1, w2, b2) = self.layers();
        let hidden = (inputs.dot(&w1.t()) + b1).mapv(f64::tanh);
        hidden.dot(&w2.t()) + b2
    }

    /// Mean squared error over all outputs, and its gradient in parameter order.
    pub fn loss_and_gradient(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> (f64, Vec<f64>) {
        let (w1, b1, w2, b2) = self.layers();
        let hidden = (inputs.dot(&w1.t()) + b1).mapv(f64::tanh);
        let out = hidden.dot(&w2.t()) + b2;
        let diff = out - targets;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|e| e * e).sum::<f64>() / count;

        let d_out = diff * (2.0 / count);
        let g_w2 = d_out.t().dot(&hidden);
        let g_b2 = d_out.sum_axis(Axis(0));
        let mut d_hidden = d_out.dot(&w2);
        d_hidden.zip_mut_with(&hidden, |g, h| *g *= 1.0 - h * h);
        let g_w1 = d_hidden.t().dot(inputs);
        let g_b1 = d_hidden.sum_axis(Axis(0));

        let mut grad = Vec::with_capacity(self.param_count());
        grad.extend(g_w1.iter());
        grad.extend(g_b1.iter());
        grad.extend(g_w2.iter());
        grad.extend(g_b2.iter());
        (loss, grad)
    }

    pub fn loss(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
        let diff = self.forward(inputs) - targets;
        diff.iter().map(|e| e * e).sum::<f64>() / diff.len() as f64
    }

    fn interpret(&self, row: ArrayView1<'_, f64>) -> Result<DenoiseOutput> {
        match self.task {
            DenoiserTask::Decode => Ok(DenoiseOutput::Value(row.iter().map(|v| v * self.target_scale).collect())),
            DenoiserTask::Cleanup => {
                let phases = (0..self.n).map(|k| row[self.n + k].atan2(row[k])).collect();
                Ok(DenoiseOutput::Ssp(SspVector::from_phases(phases)?))
            }
        }
    }

    pub fn denoise(&self, u: &SspVector) -> Result<DenoiseOutput> {
        let out = self.forward(&self.features(std::slice::from_ref(u))?);
        self.interpret(out.row(0))
    }

    pub fn denoise_batch(&self, batch: &[SspVector]) -> Result<Vec<DenoiseOutput>> {
        let out = self.forward(&self.features(batch)?);
        out.rows().into_iter().map(|row| self.interpret(row)).collect()
    }

    fn check_finite(&self) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("denoiser parameters must be finite".into()))
        }
    }

    fn tagged(&self) -> [TaggedArray; 4] {
        let (w1, b1, w2, b2) = self.layers();
        let tag2 = |a: ArrayView2<'_, f64>| TaggedArray { shape: a.shape().to_vec(), data: a.iter().copied().collect() };
        let tag1 = |a: ArrayView1<'_, f64>| TaggedArray { shape: a.shape().to_vec(), data: a.to_vec() };
        [tag2(w1), tag1(b1), tag2(w2), tag1(b2)]
    }
}

impl From<MlpDenoiser> for Snapshot {
    fn from(net: MlpDenoiser) -> Self {
        let [w1, b1, w2, b2] = net.tagged();
        Snapshot {
            task: net.task,
            n: net.n,
            d: net.d,
            target_scale: net.target_scale,
            w1,
            b1,
            w2,
            b2,
            initial_loss: net.initial_loss,
            loss_history: net.loss_history,
        }
    }
}

impl TryFrom<Snapshot> for MlpDenoiser {
    type Error = Error;

    fn try_from(s: Snapshot) -> Result<Self> {
        let mut net = MlpDenoiser {
            task: s.task,
            n: s.n,
            d: s.d,
            target_scale: s.target_scale,
            params: Vec::new(),
            initial_loss: s.initial_loss,
            loss_history: s.loss_history,
        };
        let (i, h, o) = net.sizes();
        let expected: [Vec<usize>; 4] = [vec![h, i], vec![h], vec![o, h], vec![o]];
        for (arr, shape) in [&s.w1, &s.b1, &s.w2, &s.b2].into_iter().zip(&expected) {
            if &arr.shape != shape || arr.data.len() != shape.iter().product::<usize>() {
                return Err(Error::InvalidParameter(format!(
                    "layer shape {:?} does not match expected {shape:?}",
                    arr.shape
                )));
            }
            net.params.extend_from_slice(&arr.data);
        }
        net.check_finite()?;
        Ok(net)
    }
}

impl std::fmt::Display for DenoiserTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenoiserTask::Decode => "decode",
            DenoiserTask::Cleanup => "cleanup",
        })
    }
}

/// Noisy samples and their clean values, drawn as in training.
pub struct SampleSet {
    pub values: Vec<Vec<f64>>,
    pub clean: Vec<SspVector>,
    pub noisy: Vec<SspVector>,
}

pub fn sample_set(a: &EncodingMatrix, sigma: f64, radius: f64, count: usize, seed: u64) -> Result<SampleSet> {
    let mut r = rng::seeded(seed);
    let model = NoiseModel::ComponentGaussian { sigma };
    let mut set = SampleSet { values: Vec::with_capacity(count), clean: Vec::new(), noisy: Vec::new() };
    for _ in 0..count {
        let x = rng::sample_ball(a.d(), radius, &mut r);
        let clean = encode(a, &x)?;
        set.noisy.push(corrupt_with(&clean, &model, &mut r)?);
        set.clean.push(clean);
        set.values.push(x);
    }
    Ok(set)
}

pub fn train_denoiser(a: &EncodingMatrix, cfg: &DenoiserConfig) -> Result<MlpDenoiser> {
    if cfg.n_samples == 0 || cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidParameter("denoiser training needs samples, epochs and batch size >= 1".into()));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {}", cfg.sigma)));
    }
    let mut r = rng::seeded(rng::derive_seed(cfg.seed, &[0]));
    let mut net = MlpDenoiser::new(cfg.task, a.n(), a.d(), cfg.radius, &mut r)?;
    let data = sample_set(a, cfg.sigma, cfg.radius, cfg.n_samples, rng::derive_seed(cfg.seed, &[1]))?;
    let inputs = net.features(&data.noisy)?;
    let targets = net.targets(&data.values, &data.clean)?;

    let initial = net.loss(&inputs, &targets);
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    net.initial_loss = Some(initial);

    let mut adam = AdamState::new(cfg.adam, net.param_count());
    let mut order: Vec<usize> = (0..cfg.n_samples).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = inputs.select(Axis(0), idx);
            let t = targets.select(Axis(0), idx);
            let (loss, grad) = net.loss_and_gradient(&x, &t);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            adam.update(&mut net.params, &grad);
            total += loss * idx.len() as f64;
        }
        net.loss_history.push(total / cfg.n_samples as f64);
    }
    Ok(net)
}

pub fn denoise(net: &MlpDenoiser, u: &SspVector) -> Result<DenoiseOutput> {
    net.denoise(u)
}
