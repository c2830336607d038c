//! Softmax regression and one-hidden-layer ReLU MLP with hand-derived
//! gradients, trained by SGD with momentum.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schedule::{MiniBatch, SampleId};

/// Layer sizes. `hidden_dim = None` is softmax regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub feature_dim: usize,
    pub hidden_dim: Option<usize>,
    pub num_classes: usize,
}

impl Architecture {
    pub fn softmax(feature_dim: usize, num_classes: usize) -> Self {
        Architecture { feature_dim, hidden_dim: None, num_classes }
    }

    pub fn mlp(feature_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Architecture { feature_dim, hidden_dim: Some(hidden_dim), num_classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::param("feature_dim", "must be at least 1"));
        }
        if self.num_classes == 0 {
            return Err(Error::param("num_classes", "must be at least 1"));
        }
        if self.hidden_dim == Some(0) {
            return Err(Error::param("hidden_dim", "must be at least 1 when present"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        let (d, c) = (self.feature_dim, self.num_classes);
        match self.hidden_dim {
            None => d * c + c,
            Some(h) => d * h + h + h * c + c,
        }
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.feature_dim() != self.feature_dim || data.num_classes() != self.num_classes {
            return Err(Error::Dimension(format!(
                "model expects {} features / {} classes, dataset has {} / {}",
                self.feature_dim,
                self.num_classes,
                data.feature_dim(),
                data.num_classes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    arch: Architecture,
    weights: Vec<f64>,
    momentum: Vec<f64>,
    step: u64,
}

impl ModelState {
    pub fn from_parts(arch: Architecture, weights: Vec<f64>, momentum: Vec<f64>, step: u64) -> Result<Self> {
        arch.validate()?;
        let n = arch.num_params();
        if weights.len() != n || momentum.len() != n {
            return Err(Error::Dimension(format!(
                "architecture needs {n} parameters, got {} weights and {} momenta",
                weights.len(),
                momentum.len()
            )));
        }
        Ok(ModelState { arch, weights, momentum, step })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    /// Number of `train_step` calls applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Logits for a single feature row.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::new(&self.arch);
        forward(&self.arch, &self.weights, x, &mut scratch);
        scratch.logits
    }

    /// Class probabilities for a single feature row.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.logits(x);
        softmax(&logits)
    }
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero,
/// momentum zero, step 0.
pub fn init_model<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<ModelState> {
    arch.validate()?;
    let mut weights = Vec::with_capacity(arch.num_params());
    let layer = |fan_in: usize, fan_out: usize, weights: &mut Vec<f64>, rng: &mut R| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        weights.extend((0..fan_in * fan_out).map(|_| dist.sample(rng)));
        weights.extend(std::iter::repeat_n(0.0, fan_out));
    };
    match arch.hidden_dim {
        None => layer(arch.feature_dim, arch.num_classes, &mut weights, rng),
        Some(h) => {
            layer(arch.feature_dim, h, &mut weights, rng);
            layer(h, arch.num_classes, &mut weights, rng);
        }
    }
    let n = weights.len();
    Ok(ModelState { arch, weights, momentum: vec![0.0; n], step: 0 })
}

/// Learning-rate multiplier as a function of the global step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Multiply by `factor` once for every boundary `<= step`.
    StepDecay {
        factor: f64,
        boundaries: Vec<u64>,
    },
    /// Half-cosine from the base rate down to `min_lr` over `total_steps`.
    Cosine {
        total_steps: u64,
        min_lr: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub base_lr: f64,
    pub momentum: f64,
    pub schedule: LrSchedule,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper { base_lr: 0.1, momentum: 0.9, schedule: LrSchedule::Constant }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::param("base_lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        match &self.schedule {
            LrSchedule::Constant => {}
            LrSchedule::StepDecay { factor, boundaries } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(Error::param("lr_decay_factor", "must be positive"));
                }
                if boundaries.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::param("lr_boundaries", "must be non-decreasing"));
                }
            }
            LrSchedule::Cosine { total_steps, min_lr } => {
                if *total_steps == 0 {
                    return Err(Error::param("lr_total_steps", "must be at least 1"));
                }
                if !(min_lr.is_finite() && *min_lr > 0.0 && *min_lr <= self.base_lr) {
                    return Err(Error::param("lr_min", "must lie in (0, base_lr]"));
                }
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        match &self.schedule {
            LrSchedule::Constant => self.base_lr,
            LrSchedule::StepDecay { factor, boundaries } => {
                let k = boundaries.iter().filter(|&&b| b <= step).count() as i32;
                self.base_lr * factor.powi(k)
            }
            LrSchedule::Cosine { total_steps, min_lr } => {
                let t = step.min(*total_steps) as f64 / *total_steps as f64;
                min_lr + (self.base_lr - min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Top-1 accuracy, `correct / num_eval_samples`.
    pub metric: f64,
    /// Mean cross-entropy.
    pub loss: f64,
    pub correct: usize,
    pub num_eval_samples: usize,
}

struct Scratch {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Scratch {
    fn new(arch: &Architecture) -> Self {
        let h = arch.hidden_dim.unwrap_or(0);
        Scratch {
            hidden_pre: vec![0.0; h],
            hidden: vec![0.0; h],
            logits: vec![0.0; arch.num_classes],
            probs: vec![0.0; arch.num_classes],
            dhidden: vec![0.0; h],
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * d..(k + 1) * d];
        *o = b[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn forward(arch: &Architecture, w: &[f64], x: &[f64], s: &mut Scratch) {
    let (d, c) = (arch.feature_dim, arch.num_classes);
    match arch.hidden_dim {
        None => affine(&w[..d * c], &w[d * c..d * c + c], x, &mut s.logits),
        Some(h) => {
            let (w1, rest) = w.split_at(d * h);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h * c);
            affine(w1, b1, x, &mut s.hidden_pre);
            for (a, &z) in s.hidden.iter_mut().zip(&s.hidden_pre) {
                *a = z.max(0.0);
            }
            affine(w2, b2, &s.hidden, &mut s.logits);
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(v);
    v.iter().map(|x| (x - lse).exp()).collect()
}

fn cross_entropy(logits: &[f64], label: u32) -> f64 {
    // clamp tiny negative rounding so losses are never below zero
    (log_sum_exp(logits) - logits[label as usize]).max(0.0)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `ids` and its gradient with respect to the flat
/// weight vector.
pub fn loss_and_gradient(model: &ModelState, ids: &[SampleId], data: &Dataset) -> Result<(f64, Vec<f64>)> {
    let arch = model.arch;
    arch.check_dataset(data)?;
    let (d, c) = (arch.feature_dim, arch.num_classes);
    let w = &model.weights;
    let mut grad = vec![0.0; w.len()];
    let mut s = Scratch::new(&arch);
    let mut total = 0.0;
    for id in ids {
        let i = id.index();
        if i >= data.num_samples() {
            return Err(Error::IdOutOfRange { id: id.0, dataset_size: data.num_samples() });
        }
        let x = data.train_row(i);
        let y = data.train_label(i) as usize;
        forward(&arch, w, x, &mut s);
        let lse = log_sum_exp(&s.logits);
        total += (lse - s.logits[y]).max(0.0);
        for (p, &l) in s.probs.iter_mut().zip(&s.logits) {
            *p = (l - lse).exp();
        }
        s.probs[y] -= 1.0;
        let dlogits = &s.probs;
        match arch.hidden_dim {
            None => {
                let (gw, gb) = grad.split_at_mut(d * c);
                for k in 0..c {
                    let g = dlogits[k];
                    for (gj, xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gj += g * xj;
                    }
                    gb[k] += g;
                }
            }
            Some(h) => {
                let w2 = &w[d * h + h..d * h + h + h * c];
                let (gw1, rest) = grad.split_at_mut(d * h);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h * c);
                s.dhidden.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..c {
                    let g = dlogits[k];
                    let row = &w2[k * h..(k + 1) * h];
                    for m in 0..h {
                        gw2[k * h + m] += g * s.hidden[m];
                        s.dhidden[m] += row[m] * g;
                    }
                    gb2[k] += g;
                }
                for m in 0..h {
                    if s.hidden_pre[m] <= 0.0 {
                        continue;
                    }
                    let g = s.dhidden[m];
                    for (gj, xj) in gw1[m * d..(m + 1) * d].iter_mut().zip(x) {
                        *gj += g * xj;
                    }
                    gb1[m] += g;
                }
            }
        }
    }
    let n = ids.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean cross-entropy over training samples `ids` without gradients.
pub fn batch_loss(model: &ModelState, ids: &[SampleId], data: &Dataset) -> Result<f64> {
    model.arch.check_dataset(data)?;
    let mut s = Scratch::new(&model.arch);
    let mut total = 0.0;
    for id in ids {
        let i = id.index();
        forward(&model.arch, &model.weights, data.train_row(i), &mut s);
        total += cross_entropy(&s.logits, data.train_label(i));
    }
    Ok(total / ids.len().max(1) as f64)
}

/// One SGD-with-momentum update on the batch's mean cross-entropy. The
/// learning rate is read at the pre-update step counter. Returns the batch
/// loss. On error the model is left untouched.
pub fn train_step(model: &mut ModelState, batch: &MiniBatch, data: &Dataset, hyper: &TrainHyper) -> Result<f64> {
    let (loss, grad) = loss_and_gradient(model, batch.ids(), data)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "loss", step: model.step });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: "gradient", step: model.step });
    }
    let lr = hyper.lr_at(model.step);
    let mu = hyper.momentum;
    for ((w, v), g) in model.weights.iter_mut().zip(model.momentum.iter_mut()).zip(&grad) {
        *v = mu * *v + g;
        *w -= lr * *v;
    }
    model.step += 1;
    Ok(loss)
}

/// Accuracy and mean loss on the validation rows `indices` (all rows when
/// `None`).
pub fn evaluate_indices(model: &ModelState, data: &Dataset, indices: Option<&[usize]>) -> Result<EvalResult> {
    model.arch.check_dataset(data)?;
    if data.num_val() == 0 {
        return Err(Error::EmptyValidation);
    }
    let mut s = Scratch::new(&model.arch);
    let mut correct = 0usize;
    let mut loss = 0.0;
    let mut visit = |i: usize| {
        forward(&model.arch, &model.weights, data.val_row(i), &mut s);
        let y = data.val_label(i);
        loss += cross_entropy(&s.logits, y);
        if argmax(&s.logits) == y as usize {
            correct += 1;
        }
    };
    let n = match indices {
        None => {
            (0..data.num_val()).for_each(&mut visit);
            data.num_val()
        }
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::EmptyValidation);
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= data.num_val()) {
                return Err(Error::Dimension(format!("validation index {bad} out of range")));
            }
            idx.iter().copied().for_each(&mut visit);
            idx.len()
        }
    };
    Ok(EvalResult { metric: correct as f64 / n as f64, loss: loss / n as f64, correct, num_eval_samples: n })
}

/// Sorted random subset of validation rows, or `None` when `eval_subset`
/// covers the whole split.
pub fn eval_subset_indices<R: Rng + ?Sized>(
    num_val: usize,
    eval_subset: Option<usize>,
    rng: &mut R,
) -> Option<Vec<usize>> {
    match eval_subset {
        Some(k) if k < num_val => {
            let mut v = index::sample(rng, num_val, k).into_vec();
            v.sort_unstable();
            Some(v)
        }
        _ => None,
    }
}

/// Evaluates on the full validation split or on a seeded subsample of size
/// `eval_subset`.
pub fn evaluate<R: Rng + ?Sized>(
    model: &ModelState,
    data: &Dataset,
    eval_subset: Option<usize>,
    rng: Option<&mut R>,
) -> Result<EvalResult> {
    let subset = match (eval_subset, rng) {
        (Some(k), _) if k >= data.num_val() => None,
        (Some(k), Some(rng)) => eval_subset_indices(data.num_val(), Some(k), rng),
        (Some(_), None) => return Err(Error::param("eval_subset", "a subsample needs an rng")),
        (None, _) => None,
    };
    evaluate_indices(model, data, subset.as_deref())
}

/// Cross-entropy of every training sample, in id order.
pub fn per_sample_losses(model: &ModelState, data: &Dataset) -> Result<Vec<f64>> {
    model.arch.check_dataset(data)?;
    let mut s = Scratch::new(&model.arch);
    Ok((0..data.num_samples())
        .map(|i| {
            forward(&model.arch, &model.weights, data.train_row(i), &mut s);
            cross_entropy(&s.logits, data.train_label(i))
        })
        .collect())
}
