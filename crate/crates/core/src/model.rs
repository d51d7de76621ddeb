//! Baseline classifier: fixed colour statistics fed to a multinomial
//! logistic regression, trained with class-weighted cross-entropy and Adam.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageops::ImageTensor;
use crate::keyed;
use crate::metrics::ConfusionMatrix;

pub const HIST_BINS: usize = 8;
/// 3 means, 3 standard deviations, 3 x 8 histogram fractions.
pub const FEATURE_DIM: usize = 6 + 3 * HIST_BINS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-channel mean, population standard deviation, and 8-bin histogram
/// fractions (bin width 32). Order: means RGB, stds RGB, hist R, G, B.
pub fn extract_features(img: &ImageTensor) -> FeatureVector {
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];
    let mut hist = [[0u64; HIST_BINS]; 3];
    for px in img.pixels() {
        for c in 0..3 {
            let v = px[c] as u64;
            sum[c] += v;
            sum_sq[c] += v * v;
            hist[c][px[c] as usize / (256 / HIST_BINS)] += 1;
        }
    }
    let n = img.width() as f64 * img.height() as f64;
    let mut out = Vec::with_capacity(FEATURE_DIM);
    let means = sum.map(|s| s as f64 / n);
    out.extend_from_slice(&means);
    for c in 0..3 {
        let var = (sum_sq[c] as f64 / n - means[c] * means[c]).max(0.0);
        out.push(var.sqrt());
    }
    for h in &hist {
        out.extend(h.iter().map(|&k| k as f64 / n));
    }
    FeatureVector(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Per-class weights in class order; `None` means uniform.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 64,
            seed: 0,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("Adam betas must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid("class weights must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// z-score normalizer fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(d: usize) -> Self {
        Normalizer {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn fit(features: &[&FeatureVector]) -> Result<Self> {
        let Some(first) = features.first() else {
            return Err(Error::invalid("cannot fit a normalizer on zero samples"));
        };
        let d = first.0.len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; d];
        for f in features {
            for (m, v) in mean.iter_mut().zip(&f.0) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for f in features {
            for ((s, v), m) in var.iter_mut().zip(&f.0).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        // constant features get unit scale
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, scale })
    }

    /// Normalized features with a trailing bias input of 1.
    pub fn apply(&self, f: &FeatureVector) -> Vec<f64> {
        f.0.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .chain(std::iter::once(1.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub class_names: Vec<String>,
    pub d: usize,
    /// C x (d + 1), row-major; last column is the bias.
    pub weights: Vec<f64>,
    pub normalizer: Normalizer,
}

impl ModelParams {
    pub fn zeros(class_names: Vec<String>, d: usize) -> Self {
        let c = class_names.len();
        ModelParams {
            class_names,
            d,
            weights: vec![0.0; c * (d + 1)],
            normalizer: Normalizer::identity(d),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn check_dim(&self, f: &FeatureVector) -> Result<()> {
        if f.0.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: format!("{} features", self.d),
                actual: format!("{} features", f.0.len()),
            });
        }
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.d + 1)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn predict_proba(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        Ok(softmax(&self.logits(&self.normalizer.apply(f))))
    }

    pub fn predict(&self, f: &FeatureVector) -> Result<usize> {
        let p = self.predict_proba(f)?;
        Ok(argmax(&p))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Weighted mean cross-entropy and its exact gradient w.r.t. the weights.
/// Features are normalized with the model's normalizer.
pub fn loss_and_gradient(
    params: &ModelParams,
    batch: &[(&FeatureVector, usize)],
    class_weights: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let c = params.num_classes();
    let cols = params.d + 1;
    let mut grad = vec![0.0; params.weights.len()];
    let mut loss = 0.0;
    let mut total_w = 0.0;
    for &(f, y) in batch {
        params.check_dim(f)?;
        if y >= c {
            return Err(Error::invalid(format!("class index {y} outside {c} classes")));
        }
        let w = class_weights.map_or(1.0, |cw| cw[y]);
        let x = params.normalizer.apply(f);
        let logp = log_softmax(&params.logits(&x));
        loss -= w * logp[y];
        total_w += w;
        for (k, lp) in logp.iter().enumerate() {
            let coef = w * (lp.exp() - if k == y { 1.0 } else { 0.0 });
            for (g, xv) in grad[k * cols..(k + 1) * cols].iter_mut().zip(&x) {
                *g += coef * xv;
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= total_w);
    Ok((loss / total_w, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(
    state: &mut AdamState,
    weights: &mut [f64],
    gradient: &[f64],
    config: &TrainConfig,
) -> Result<()> {
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged);
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..weights.len() {
        let g = gradient[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        weights[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
    pub final_train_loss: f64,
}

/// Fits the normalizer on the training features, then runs `epochs` passes
/// of mini-batch Adam over a per-epoch permutation keyed by `(seed, epoch)`.
pub fn train(
    samples: &[(FeatureVector, usize)],
    class_names: &[String],
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let c = class_names.len();
    if c == 0 {
        return Err(Error::invalid("training needs at least one class"));
    }
    for (k, name) in class_names.iter().enumerate() {
        if !samples.iter().any(|(_, y)| *y == k) {
            return Err(Error::EmptyClass(name.clone()));
        }
    }
    if let Some(w) = &config.class_weights {
        if w.len() != c {
            return Err(Error::DimensionMismatch {
                expected: format!("{c} class weights"),
                actual: format!("{}", w.len()),
            });
        }
    }
    let d = samples[0].0 .0.len();
    let mut params = ModelParams::zeros(class_names.to_vec(), d);
    params.normalizer = Normalizer::fit(&samples.iter().map(|(f, _)| f).collect::<Vec<_>>())?;
    let weights = config.class_weights.as_deref();

    let mut state = AdamState::new(params.weights.len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = keyed::rng(&[config.seed, epoch as u64, 0xe90c]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&FeatureVector, usize)> =
                chunk.iter().map(|&i| (&samples[i].0, samples[i].1)).collect();
            let (loss, grad) = loss_and_gradient(&params, &batch, weights)?;
            adam_step(&mut state, &mut params.weights, &grad, config)?;
            epoch_loss += loss;
            batches += 1;
        }
        loss_curve.push(epoch_loss / batches as f64);
    }
    let all: Vec<(&FeatureVector, usize)> = samples.iter().map(|(f, y)| (f, *y)).collect();
    let (final_train_loss, _) = loss_and_gradient(&params, &all, weights)?;
    Ok(TrainedModel {
        params,
        loss_curve,
        final_train_loss,
    })
}

/// Argmax predictions accumulated into a confusion matrix over the model's
/// classes.
pub fn evaluate(params: &ModelParams, samples: &[(&FeatureVector, &str)]) -> Result<ConfusionMatrix> {
    if samples.is_empty() {
        return Err(Error::invalid("evaluation split is empty"));
    }
    let mut cm = ConfusionMatrix::new(params.class_names.clone());
    for (f, label) in samples {
        let truth = params
            .class_names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        cm.accumulate_index(truth, params.predict(f)?)?;
    }
    Ok(cm)
}

/// Serialized model: `{class_names, d, weights, normalizer_mean,
/// normalizer_scale, train_config, final_train_loss}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub class_names: Vec<String>,
    pub d: usize,
    pub weights: Vec<f64>,
    pub normalizer_mean: Vec<f64>,
    pub normalizer_scale: Vec<f64>,
    pub train_config: TrainConfig,
    pub final_train_loss: f64,
}

impl ModelFile {
    pub fn new(model: &TrainedModel, config: &TrainConfig) -> Self {
        let p = &model.params;
        ModelFile {
            class_names: p.class_names.clone(),
            d: p.d,
            weights: p.weights.clone(),
            normalizer_mean: p.normalizer.mean.clone(),
            normalizer_scale: p.normalizer.scale.clone(),
            train_config: config.clone(),
            final_train_loss: model.final_train_loss,
        }
    }

    pub fn into_params(self) -> Result<ModelParams> {
        let c = self.class_names.len();
        if self.weights.len() != c * (self.d + 1)
            || self.normalizer_mean.len() != self.d
            || self.normalizer_scale.len() != self.d
        {
            return Err(Error::DimensionMismatch {
                expected: format!("{c}x{} weights and {} normalizer entries", self.d + 1, self.d),
                actual: format!(
                    "{} weights, {} means, {} scales",
                    self.weights.len(),
                    self.normalizer_mean.len(),
                    self.normalizer_scale.len()
                ),
            });
        }
        if self.normalizer_scale.iter().any(|s| s.is_nan() || *s <= 0.0) || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("model file has non-finite weights or non-positive scales"));
        }
        Ok(ModelParams {
            class_names: self.class_names,
            d: self.d,
            weights: self.weights,
            normalizer: Normalizer {
                mean: self.normalizer_mean,
                scale: self.normalizer_scale,
            },
        })
    }
}
