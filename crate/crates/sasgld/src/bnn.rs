//! A small fully connected classifier with hand-written forward/backward
//! passes, two log-priors, and the glue that turns dataset + prior into a
//! minibatch gradient oracle.
//!
//! Parameters live in one flat vector: for each layer, the weight matrix
//! (output × input, row-major) followed by its bias vector. The backward
//! pass is exact backprop of the batch-mean softmax cross-entropy; relu
//! derivative at 0 is taken as 0.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{Error, Result};
use crate::data_io::LabeledImageSet;
use crate::gradient::{BatchModel, GradientEstimate, GradientOracle, PosteriorTarget};

/// Fully connected architecture: sizes of input, hidden layers, output.
/// All hidden activations are relu; the output layer is linear (logits).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Shape(
                "network needs at least input and output layers".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Shape("zero-width layer".into()));
        }
        Ok(Self { layer_sizes })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total flat parameter count P.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// (weight view, bias view) of layer `l` inside a flat parameter slice.
    fn layer_views<'a>(&self, theta: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let mut offset = 0;
        for k in 0..l {
            offset += self.layer_sizes[k] * self.layer_sizes[k + 1] + self.layer_sizes[k + 1];
        }
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let w = ArrayView2::from_shape((n_out, n_in), &theta[offset..offset + n_out * n_in])
            .expect("layer shape");
        let b = ArrayView1::from_shape(n_out, &theta[offset + n_out * n_in..offset + n_out * n_in + n_out])
            .expect("bias shape");
        (w, b)
    }

    fn check_theta(&self, theta: &[f64]) {
        assert_eq!(
            theta.len(),
            self.param_count(),
            "flat parameter vector has {} entries, spec needs {}",
            theta.len(),
            self.param_count()
        );
    }
}

/// Forward pass: returns the logits batch (rows = examples).
pub fn mlp_forward(spec: &MlpSpec, theta: &[f64], x: &Array2<f64>) -> Array2<f64> {
    spec.check_theta(theta);
    assert_eq!(x.ncols(), spec.input_dim(), "input width mismatch");
    let n_layers = spec.layer_sizes.len() - 1;
    let mut a = x.clone();
    for l in 0..n_layers {
        let (w, b) = spec.layer_views(theta, l);
        let mut z = a.dot(&w.t());
        z += &b;
        a = if l + 1 < n_layers {
            z.mapv(|v| v.max(0.0))
        } else {
            z
        };
    }
    a
}

/// Row-wise softmax with the max-shift trick.
fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Softmax predictive probabilities for an input batch.
pub fn mlp_predict_probs(spec: &MlpSpec, theta: &[f64], x: &Array2<f64>) -> Array2<f64> {
    softmax(&mlp_forward(spec, theta, x))
}

/// Backward pass: batch-mean softmax cross-entropy and its exact gradient
/// with respect to the flat parameters.
pub fn mlp_backward(
    spec: &MlpSpec,
    theta: &[f64],
    x: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Vec<f64>)> {
    spec.check_theta(theta);
    assert_eq!(x.nrows(), labels.len(), "batch size mismatch");
    let n_layers = spec.layer_sizes.len() - 1;
    let n_classes = spec.n_classes();
    for &y in labels {
        if y >= n_classes {
            return Err(Error::Check(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
    }
    let batch = x.nrows() as f64;

    // Forward, keeping every post-activation (activations[0] is the input).
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
    activations.push(x.clone());
    for l in 0..n_layers {
        let (w, b) = spec.layer_views(theta, l);
        let mut z = activations[l].dot(&w.t());
        z += &b;
        if l + 1 < n_layers {
            z.mapv_inplace(|v| v.max(0.0));
        }
        activations.push(z);
    }

    let logits = &activations[n_layers];
    let probs = softmax(logits);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_sum: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[y] - max - log_sum;
    }
    loss /= batch;

    // delta for the output layer: (softmax − onehot)/batch.
    let mut delta = probs;
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y]] -= 1.0;
    }
    delta /= batch;

    let mut grad = vec![0.0; spec.param_count()];
    let mut offset_end = spec.param_count();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let gw = delta.t().dot(&activations[l]);
        let gb = delta.sum_axis(Axis(0));
        let w_start = offset_end - n_out - n_out * n_in;
        grad[w_start..w_start + n_out * n_in].copy_from_slice(gw.as_slice().expect("contiguous"));
        grad[w_start + n_out * n_in..offset_end]
            .copy_from_slice(gb.as_slice().expect("contiguous"));
        if l > 0 {
            let (w, _) = spec.layer_views(theta, l);
            let mut upstream = delta.dot(&w);
            // relu gate: activations[l] is the post-relu value, so the mask
            // "output > 0" is exactly "pre-activation > 0" (relu'(0) = 0).
            upstream.zip_mut_with(&activations[l], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = upstream;
        }
        offset_end = w_start;
    }
    Ok((loss, grad))
}

/// Which log-prior the posterior uses over the flat parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Gaussian { sigma_p: f64 },
    /// Surrogate for the Horseshoe: p(θᵢ) ∝ log(1 + 2τ²/θᵢ²). Keeps the
    /// spike at zero and Cauchy-like tails without auxiliary scale
    /// variables.
    Horseshoe { tau: f64 },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PriorSpec::Gaussian { sigma_p } => *sigma_p > 0.0,
            PriorSpec::Horseshoe { tau } => *tau > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(vec!["prior scale must be positive".into()]))
        }
    }
}

/// `(log p(θ), ∇ log p(θ))` up to an additive constant in the log-density.
/// Horseshoe coordinates are floored at |θᵢ| ≥ 1e-12 because the surrogate
/// density is unbounded at 0.
pub fn log_prior_and_grad(prior: &PriorSpec, theta: &[f64]) -> (f64, Vec<f64>) {
    match prior {
        PriorSpec::Gaussian { sigma_p } => {
            let var = sigma_p * sigma_p;
            let logp = -theta.iter().map(|t| t * t).sum::<f64>() / (2.0 * var);
            let grad = theta.iter().map(|t| -t / var).collect();
            (logp, grad)
        }
        PriorSpec::Horseshoe { tau } => {
            let t2 = 2.0 * tau * tau;
            let mut logp = 0.0;
            let mut grad = vec![0.0; theta.len()];
            for (g, &raw) in grad.iter_mut().zip(theta) {
                let t = raw.signum() * raw.abs().max(1e-12);
                let u = t2 / (t * t);
                let log1pu = u.ln_1p();
                logp += log1pu.ln();
                *g = -2.0 * t2 / (t * (t * t + t2) * log1pu);
            }
            (logp, grad)
        }
    }
}

/// The classifier as a subsampled posterior: minus-log-likelihood sums over
/// batch indices, minus-log-prior over the flat parameters.
pub struct MlpModel {
    pub spec: MlpSpec,
    pub prior: PriorSpec,
    /// Inputs scaled to [0,1], one row per example.
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

impl MlpModel {
    pub fn new(spec: MlpSpec, prior: PriorSpec, x: Array2<f64>, y: Vec<usize>) -> Result<Self> {
        prior.validate()?;
        if x.ncols() != spec.input_dim() {
            return Err(Error::Shape(format!(
                "{}-wide inputs for a {}-input network",
                x.ncols(),
                spec.input_dim()
            )));
        }
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Shape("image/label count mismatch".into()));
        }
        let n_classes = spec.n_classes();
        if y.iter().any(|&l| l >= n_classes) {
            return Err(Error::Check("label out of range".into()));
        }
        Ok(Self { spec, prior, x, y })
    }

    /// Normalizes raw byte images by 1/255 and wires them in.
    pub fn from_image_set(spec: MlpSpec, prior: PriorSpec, data: &LabeledImageSet) -> Result<Self> {
        let x = data.images.mapv(|b| b as f64 / 255.0);
        let y = data.labels.iter().map(|&l| l as usize).collect();
        Self::new(spec, prior, x, y)
    }

    fn gather(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let x = self.x.select(Axis(0), indices);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        (x, y)
    }

    /// Predictive class probabilities at θ for arbitrary inputs.
    pub fn predict(&self, theta: &[f64], x: &Array2<f64>) -> Array2<f64> {
        mlp_predict_probs(&self.spec, theta, x)
    }
}

impl BatchModel for MlpModel {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn minus_log_lik_grad(&self, theta: &[f64], indices: &[usize]) -> (f64, Vec<f64>) {
        let (x, y) = self.gather(indices);
        let (mean_loss, mut grad) =
            mlp_backward(&self.spec, theta, &x, &y).expect("labels validated at construction");
        let b = indices.len() as f64;
        for g in &mut grad {
            *g *= b;
        }
        (mean_loss * b, grad)
    }

    fn minus_log_prior_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (logp, grad) = log_prior_and_grad(&self.prior, theta);
        (-logp, grad.iter().map(|g| -g).collect())
    }
}

/// He-scaled Gaussian weights (std √(2/fan_in)) with zero biases.
pub fn he_init(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = vec![0.0; spec.param_count()];
    let mut offset = 0;
    for w in spec.layer_sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let std = (2.0 / n_in as f64).sqrt();
        for v in &mut theta[offset..offset + n_out * n_in] {
            let z: f64 = StandardNormal.sample(rng);
            *v = std * z;
        }
        offset += n_out * n_in;
        // Biases get a whisper of noise instead of exact zeros: priors with a
        // density spike at the origin have unbounded gradients there, and a
        // start exactly on the spike would turn the first update into a kick
        // of order 1/(floor · h) on every bias coordinate.
        for v in &mut theta[offset..offset + n_out] {
            let z: f64 = StandardNormal.sample(rng);
            *v = 0.01 * z;
        }
        offset += n_out;
    }
    theta
}

/// Uniform without-replacement minibatch oracle over the model.
pub fn make_posterior_target(
    spec: MlpSpec,
    prior: PriorSpec,
    data: &LabeledImageSet,
    batch_size: usize,
) -> Result<PosteriorTarget<MlpModel>> {
    let model = MlpModel::from_image_set(spec, prior, data)?;
    if batch_size == 0 || batch_size > model.n() {
        return Err(Error::Config(vec![format!(
            "batch size {batch_size} must lie in 1..={}",
            model.n()
        )]));
    }
    Ok(PosteriorTarget::new(model, batch_size))
}

/// Epoch-style minibatch oracle: reshuffles the dataset at every epoch
/// boundary (drawing from the chain's rng) and walks ⌊N/B⌋ contiguous
/// batches of exactly B examples; the tail shorter than B is dropped for
/// that epoch. Gradients and potential are scaled by N/B like the uniform
/// oracle.
pub struct EpochMinibatchOracle<Mo: BatchModel> {
    pub model: Mo,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl<Mo: BatchModel> EpochMinibatchOracle<Mo> {
    pub fn new(model: Mo, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > model.n() {
            return Err(Error::Config(vec![format!(
                "batch size {batch_size} must lie in 1..={}",
                model.n()
            )]));
        }
        Ok(Self {
            model,
            batch_size,
            order: Vec::new(),
            cursor: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.model.n() / self.batch_size
    }
}

impl<Mo: BatchModel> GradientOracle for EpochMinibatchOracle<Mo> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn estimate(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) -> GradientEstimate {
        if self.order.is_empty() || self.cursor + self.batch_size > self.order.len() {
            if self.order.is_empty() {
                self.order = (0..self.model.n()).collect();
            }
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let batch = &self.order[self.cursor..self.cursor + self.batch_size];
        self.cursor += self.batch_size;
        let (lik_value, lik_grad) = self.model.minus_log_lik_grad(theta, batch);
        let scale = self.model.n() as f64 / self.batch_size as f64;
        let (prior_value, prior_grad) = self.model.minus_log_prior_grad(theta);
        GradientEstimate {
            grad: lik_grad
                .iter()
                .zip(&prior_grad)
                .map(|(l, p)| scale * l + p)
                .collect(),
            potential: scale * lik_value + prior_value,
        }
    }
}
