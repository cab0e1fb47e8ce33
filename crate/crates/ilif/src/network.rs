//! Dense spiking layers, the rate loss, SGD and the train/evaluate loops.

use crate::bptt::{backward, GradientReport};
use crate::data::SpikeBatch;
use crate::linalg::Matrix;
use crate::neuron::{sigma, sigma_prime, step, NeuronError, NeuronParams, NeuronState};
use crate::tape::{LayerTape, TapeError};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target must be one-hot, got {0:?}")]
    BadTarget(Vec<f64>),
    #[error("non-finite gradient in layer {layer}; update aborted")]
    NonFiniteGradient { layer: usize },
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

/// One dense spiking layer: weights plus neuron constants. The decay of
/// PLIF/IPLIF layers is trained through an unconstrained logit mapped by the
/// logistic function into (0, 1).
#[derive(Clone, Debug)]
pub struct DenseSpikingLayer {
    pub weights: Matrix,
    pub params: NeuronParams,
    pub decay_logit: Option<f64>,
}

impl DenseSpikingLayer {
    pub fn new(in_size: usize, out_size: usize, params: NeuronParams, rng: &mut ChaCha8Rng) -> Self {
        // Uniform in +/- sqrt(6 / (fan_in + fan_out)).
        let bound = (6.0 / (in_size + out_size) as f64).sqrt();
        let weights = Matrix::from_vec(
            out_size,
            in_size,
            (0..in_size * out_size)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect(),
        );
        let decay_logit = if params.lambda_learnable {
            let l = params.lambda;
            Some((l / (1.0 - l)).ln())
        } else {
            None
        };
        DenseSpikingLayer {
            weights,
            params,
            decay_logit,
        }
    }

    /// Parameters with the trained decay substituted in.
    pub fn effective_params(&self) -> NeuronParams {
        match self.decay_logit {
            Some(logit) => self.params.with_lambda(sigma(logit)),
            None => self.params,
        }
    }

    pub fn out_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn in_size(&self) -> usize {
        self.weights.cols()
    }
}

/// A feed-forward stack of dense spiking layers.
#[derive(Clone, Debug)]
pub struct SpikingNetwork {
    pub layers: Vec<DenseSpikingLayer>,
}

impl SpikingNetwork {
    /// Build a network with the given layer output sizes, all sharing one
    /// parameter set. Weight initialization draws from the seeded generator
    /// in layer order.
    pub fn new(
        input_size: usize,
        layer_sizes: &[usize],
        params: NeuronParams,
        seed: u64,
    ) -> Result<Self, NetworkError> {
        params.validate()?;
        if layer_sizes.is_empty() {
            return Err(NetworkError::ShapeMismatch("no layers requested".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut in_size = input_size;
        for &out_size in layer_sizes {
            layers.push(DenseSpikingLayer::new(in_size, out_size, params, &mut rng));
            in_size = out_size;
        }
        Ok(SpikingNetwork { layers })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].in_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().out_size()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.out_size()).collect()
    }

    pub fn weight_norms(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.weights.frobenius_norm()).collect()
    }

    /// Run one sequence through every layer, starting from zero state, and
    /// record a tape per layer. Returns the output spike trains and tapes.
    pub fn forward_sequence(
        &self,
        input_seq: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, Vec<LayerTape>), NetworkError> {
        let t_len = input_seq.len();
        if let Some(first) = input_seq.first() {
            if first.len() != self.input_size() {
                return Err(NetworkError::ShapeMismatch(format!(
                    "input has {} features, network expects {}",
                    first.len(),
                    self.input_size()
                )));
            }
        }
        let mut tapes = Vec::with_capacity(self.layers.len());
        let mut below: Vec<Vec<f64>> = input_seq.to_vec();
        for layer in &self.layers {
            let params = layer.effective_params();
            let mut state = NeuronState::zeros(layer.out_size());
            let mut steps = Vec::with_capacity(t_len);
            let mut outputs = Vec::with_capacity(t_len);
            for input in &below {
                let current = layer.weights.matvec(input);
                let (rec, next) = step(&state, &current, &params)?;
                outputs.push(rec.spikes.clone());
                steps.push(rec);
                state = next;
            }
            tapes.push(LayerTape {
                inputs: below,
                steps,
                weights_snapshot: layer.weights.clone(),
                params,
            });
            below = outputs;
        }
        Ok((below, tapes))
    }

    /// Backward over one recorded sequence, chaining the inter-layer
    /// gradient from the top down.
    pub fn backward_sequence(
        &self,
        tapes: &[LayerTape],
        ds_top: &[Vec<f64>],
    ) -> Result<GradientReport, NetworkError> {
        let mut layers = vec![None; tapes.len()];
        let mut ds = ds_top.to_vec();
        for (l, tape) in tapes.iter().enumerate().rev() {
            let grads = backward(tape, &ds)?;
            ds = grads.ds_in.clone();
            layers[l] = Some(grads);
        }
        Ok(GradientReport {
            layers: layers.into_iter().map(|g| g.unwrap()).collect(),
        })
    }
}

/// Mean-rate readout of a recorded output train.
pub fn mean_rate(outputs: &[Vec<f64>]) -> Vec<f64> {
    let t_len = outputs.len();
    let n = outputs.first().map(|o| o.len()).unwrap_or(0);
    let mut mean = vec![0.0; n];
    for step in outputs {
        for (m, s) in mean.iter_mut().zip(step) {
            *m += s;
        }
    }
    for m in &mut mean {
        *m /= t_len as f64;
    }
    mean
}

/// Predicted class: argmax of the mean rate, ties broken by the lowest
/// class index.
pub fn predict(outputs: &[Vec<f64>]) -> usize {
    let mean = mean_rate(outputs);
    let mut best = 0;
    for (i, v) in mean.iter().enumerate() {
        if *v > mean[best] {
            best = i;
        }
    }
    best
}

/// The mean-rate loss pieces for one sequence.
#[derive(Clone, Debug)]
pub struct RateLoss {
    pub target: Vec<f64>,
    pub mean_output: Vec<f64>,
}

impl RateLoss {
    pub fn new(outputs: &[Vec<f64>], target: &[f64]) -> Result<Self, NetworkError> {
        let ones = target.iter().filter(|v| **v == 1.0).count();
        if ones != 1 || target.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(NetworkError::BadTarget(target.to_vec()));
        }
        let mean_output = mean_rate(outputs);
        if mean_output.len() != target.len() {
            return Err(NetworkError::ShapeMismatch(format!(
                "{} outputs vs {} target entries",
                mean_output.len(),
                target.len()
            )));
        }
        Ok(RateLoss {
            target: target.to_vec(),
            mean_output,
        })
    }
}

/// Squared-error loss over mean firing rates, scaled by T/2 so the per-step
/// output gradient is exactly `mean - target`.
pub fn rate_mse_loss(
    outputs: &[Vec<f64>],
    target: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), NetworkError> {
    let pieces = RateLoss::new(outputs, target)?;
    let t_len = outputs.len();
    let sq: f64 = pieces
        .mean_output
        .iter()
        .zip(&pieces.target)
        .map(|(m, y)| (m - y) * (m - y))
        .sum();
    let loss = t_len as f64 / 2.0 * sq;
    let ds_step: Vec<f64> = pieces
        .mean_output
        .iter()
        .zip(&pieces.target)
        .map(|(m, y)| m - y)
        .collect();
    Ok((loss, vec![ds_step; t_len]))
}

/// Softmax cross-entropy over mean rates. Offered as a config option; the
/// rate-MSE above is the default readout.
pub fn rate_cross_entropy_loss(
    outputs: &[Vec<f64>],
    target: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), NetworkError> {
    let pieces = RateLoss::new(outputs, target)?;
    let t_len = outputs.len();
    let max = pieces
        .mean_output
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = pieces.mean_output.iter().map(|m| (m - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let mut loss = 0.0;
    for (p, y) in probs.iter().zip(&pieces.target) {
        if *y == 1.0 {
            loss = -p.ln();
        }
    }
    let ds_step: Vec<f64> = probs
        .iter()
        .zip(&pieces.target)
        .map(|(p, y)| (p - y) / t_len as f64)
        .collect();
    Ok((loss, vec![ds_step; t_len]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    RateMse,
    RateCrossEntropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    Cosine,
}

pub fn compute_loss(
    kind: LossKind,
    outputs: &[Vec<f64>],
    target: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), NetworkError> {
    match kind {
        LossKind::RateMse => rate_mse_loss(outputs, target),
        LossKind::RateCrossEntropy => rate_cross_entropy_loss(outputs, target),
    }
}

/// One SGD update: `W <- W - lr * (dW + weight_decay * W)`. Learnable decays
/// step through their logit with the same learning rate. Non-finite
/// gradients abort the whole step, leaving the network untouched.
pub fn sgd_step(
    net: &mut SpikingNetwork,
    grads: &GradientReport,
    lr: f64,
    weight_decay: f64,
) -> Result<(), NetworkError> {
    if grads.layers.len() != net.layers.len() {
        return Err(NetworkError::ShapeMismatch(format!(
            "{} gradient layers vs {} network layers",
            grads.layers.len(),
            net.layers.len()
        )));
    }
    for (l, g) in grads.layers.iter().enumerate() {
        if g.weight_grad.iter().any(|v| !v.is_finite())
            || g.lambda_grad.map_or(false, |v| !v.is_finite())
        {
            return Err(NetworkError::NonFiniteGradient { layer: l });
        }
    }
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        for (w, dw) in layer.weights.iter_mut().zip(g.weight_grad.iter()) {
            *w -= lr * (dw + weight_decay * *w);
        }
        if let (Some(logit), Some(dl)) = (layer.decay_logit.as_mut(), g.lambda_grad) {
            *logit -= lr * dl * sigma_prime(*logit);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            lr: 0.1,
            weight_decay: 5e-5,
            batch_size: 32,
            seed: 1234,
            lr_schedule: LrSchedule::Constant,
            loss: LossKind::RateMse,
        }
    }
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub firing_rate_per_layer: Vec<f64>,
    pub weight_norm_per_layer: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

fn one_hot(class: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[class] = 1.0;
    v
}

/// Train in place. Deterministic given the seed: batch order comes from one
/// seeded generator, sequences inside a batch are reduced in fixed order.
pub fn train(
    net: &mut SpikingNetwork,
    data: &SpikeBatch,
    cfg: &TrainConfig,
) -> Result<TrainLog, NetworkError> {
    if data.features() != net.input_size() {
        return Err(NetworkError::ShapeMismatch(format!(
            "dataset has {} features, network expects {}",
            data.features(),
            net.input_size()
        )));
    }
    if data.num_classes() != net.output_size() {
        return Err(NetworkError::ShapeMismatch(format!(
            "dataset has {} classes, network outputs {}",
            data.num_classes(),
            net.output_size()
        )));
    }
    let mut log = TrainLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_layers = net.layers.len();
    for epoch in 0..cfg.epochs {
        let lr = match cfg.lr_schedule {
            LrSchedule::Constant => cfg.lr,
            LrSchedule::Cosine => {
                let progress = epoch as f64 / cfg.epochs.max(1) as f64;
                cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        };
        let mut order: Vec<usize> = (0..data.n_sequences()).collect();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        let mut spike_sums = vec![0.0; n_layers];
        let mut spike_counts = vec![0usize; n_layers];

        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut batch_grads: Option<GradientReport> = None;
            for &seq in chunk {
                let input = data.sequence(seq);
                let (outputs, tapes) = net.forward_sequence(&input)?;
                let target = one_hot(data.labels()[seq], data.num_classes());
                let (loss, ds_top) = compute_loss(cfg.loss, &outputs, &target)?;
                epoch_loss += loss;
                if predict(&outputs) == data.labels()[seq] {
                    correct += 1;
                }
                for (l, tape) in tapes.iter().enumerate() {
                    for rec in &tape.steps {
                        spike_sums[l] += rec.spikes.iter().sum::<f64>();
                        spike_counts[l] += rec.spikes.len();
                    }
                }
                let grads = net.backward_sequence(&tapes, &ds_top)?;
                match batch_grads.as_mut() {
                    None => batch_grads = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.layers.iter_mut().zip(&grads.layers) {
                            for (x, y) in a.weight_grad.iter_mut().zip(g.weight_grad.iter()) {
                                *x += y;
                            }
                            if let (Some(al), Some(gl)) = (a.lambda_grad.as_mut(), g.lambda_grad) {
                                *al += gl;
                            }
                        }
                    }
                }
            }
            if let Some(mut grads) = batch_grads {
                let scale = 1.0 / chunk.len() as f64;
                for layer in &mut grads.layers {
                    for v in layer.weight_grad.iter_mut() {
                        *v *= scale;
                    }
                    if let Some(l) = layer.lambda_grad.as_mut() {
                        *l *= scale;
                    }
                }
                sgd_step(net, &grads, lr, cfg.weight_decay)?;
            }
        }

        log.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / data.n_sequences() as f64,
            accuracy: correct as f64 / data.n_sequences() as f64,
            firing_rate_per_layer: spike_sums
                .iter()
                .zip(&spike_counts)
                .map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 })
                .collect(),
            weight_norm_per_layer: net.weight_norms(),
        });
    }
    Ok(log)
}

/// Evaluation result: accuracy, mean loss and all recorded tapes so the
/// metrics layer can aggregate firing statistics.
#[derive(Clone, Debug)]
pub struct EvalResult {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub tapes: Vec<Vec<LayerTape>>,
}

pub fn evaluate(
    net: &SpikingNetwork,
    data: &SpikeBatch,
    loss_kind: LossKind,
) -> Result<EvalResult, NetworkError> {
    let mut correct = 0usize;
    let mut total_loss = 0.0;
    let mut all_tapes = Vec::with_capacity(data.n_sequences());
    for seq in 0..data.n_sequences() {
        let input = data.sequence(seq);
        let (outputs, tapes) = net.forward_sequence(&input)?;
        let target = one_hot(data.labels()[seq], data.num_classes());
        let (loss, _) = compute_loss(loss_kind, &outputs, &target)?;
        total_loss += loss;
        if predict(&outputs) == data.labels()[seq] {
            correct += 1;
        }
        all_tapes.push(tapes);
    }
    Ok(EvalResult {
        accuracy: correct as f64 / data.n_sequences() as f64,
        mean_loss: total_loss / data.n_sequences() as f64,
        tapes: all_tapes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_task, SyntheticKind};
    use crate::neuron::NeuronVariant;

    #[test]
    fn all_zero_input_gives_all_zero_output() {
        let net = SpikingNetwork::new(3, &[4, 2], NeuronParams::lif(), 1).unwrap();
        let input = vec![vec![0.0; 3]; 5];
        let (outputs, _) = net.forward_sequence(&input).unwrap();
        assert!(outputs.iter().all(|o| o.iter().all(|s| *s == 0.0)));
    }

    #[test]
    fn identity_like_layer_fires_immediately() {
        let mut net = SpikingNetwork::new(1, &[1], NeuronParams::lif(), 1).unwrap();
        net.layers[0].weights = Matrix::from_vec(1, 1, vec![2.0]);
        let (outputs, _) = net.forward_sequence(&[vec![1.0]]).unwrap();
        assert_eq!(outputs, vec![vec![1.0]]);
    }

    #[test]
    fn forward_is_deterministic_and_stateless() {
        let net = SpikingNetwork::new(4, &[5, 3], NeuronParams::ilif(), 1234).unwrap();
        let data = synthetic_task(SyntheticKind::rate_pair(), 3, 6, 4, 9).unwrap();
        let a = net.forward_sequence(&data.sequence(0)).unwrap();
        // Run another sequence in between; state must not leak.
        let _ = net.forward_sequence(&data.sequence(1)).unwrap();
        let b = net.forward_sequence(&data.sequence(0)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn rate_mse_loss_values() {
        // T = 2 with mean (1, 0) and target (0, 1): loss = (2/2) * 2 = 2,
        // per-step gradient (1, -1).
        let outputs = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let (loss, ds) = rate_mse_loss(&outputs, &[0.0, 1.0]).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(ds, vec![vec![1.0, -1.0], vec![1.0, -1.0]]);
    }

    #[test]
    fn rate_mse_zero_at_match() {
        let outputs = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let (loss, ds) = rate_mse_loss(&outputs, &[1.0, 0.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(ds.iter().all(|row| row.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn non_one_hot_target_rejected() {
        let outputs = vec![vec![1.0, 0.0]];
        assert!(matches!(
            rate_mse_loss(&outputs, &[1.0, 1.0]),
            Err(NetworkError::BadTarget(_))
        ));
        assert!(matches!(
            rate_mse_loss(&outputs, &[0.5, 0.5]),
            Err(NetworkError::BadTarget(_))
        ));
    }

    #[test]
    fn loss_gradient_matches_finite_difference_on_relaxed_rate() {
        // Perturb the mean rate through one output spike value and compare
        // the analytic per-step gradient against finite differences of the
        // loss formula.
        let t_len = 4;
        let target = [0.0, 1.0];
        let base = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        ];
        let (_, ds) = rate_mse_loss(&base, &target).unwrap();
        let eps = 1e-6;
        for j in 0..2 {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[2][j] += eps;
            minus[2][j] -= eps;
            let lp = {
                let mean = mean_rate(&plus);
                t_len as f64 / 2.0
                    * mean
                        .iter()
                        .zip(&target)
                        .map(|(m, y)| (m - y) * (m - y))
                        .sum::<f64>()
            };
            let lm = {
                let mean = mean_rate(&minus);
                t_len as f64 / 2.0
                    * mean
                        .iter()
                        .zip(&target)
                        .map(|(m, y)| (m - y) * (m - y))
                        .sum::<f64>()
            };
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - ds[2][j]).abs() < 1e-8, "class {j}: fd {fd} vs {}", ds[2][j]);
        }
    }

    #[test]
    fn sgd_step_basic_updates() {
        let mut net = SpikingNetwork::new(1, &[1], NeuronParams::lif(), 1).unwrap();
        net.layers[0].weights = Matrix::from_vec(1, 1, vec![1.0]);
        let grads = GradientReport {
            layers: vec![crate::bptt::LayerGradients {
                weight_grad: Matrix::from_vec(1, 1, vec![1.0]),
                du_trace: vec![],
                phi_trace: vec![],
                ds_in: vec![],
                lambda_grad: None,
            }],
        };
        sgd_step(&mut net, &grads, 0.1, 0.0).unwrap();
        assert!((net.layers[0].weights.get(0, 0) - 0.9).abs() < 1e-15);

        // Decay-only step: W = 1, dW = 0, wd = 5e-4, lr = 0.1 -> 0.99995.
        let mut net2 = SpikingNetwork::new(1, &[1], NeuronParams::lif(), 1).unwrap();
        net2.layers[0].weights = Matrix::from_vec(1, 1, vec![1.0]);
        let zero = GradientReport {
            layers: vec![crate::bptt::LayerGradients {
                weight_grad: Matrix::from_vec(1, 1, vec![0.0]),
                du_trace: vec![],
                phi_trace: vec![],
                ds_in: vec![],
                lambda_grad: None,
            }],
        };
        sgd_step(&mut net2, &zero, 0.1, 5e-4).unwrap();
        assert!((net2.layers[0].weights.get(0, 0) - 0.99995).abs() < 1e-15);
        // Zero grads and zero decay leave weights untouched.
        let before = net2.layers[0].weights.clone();
        sgd_step(&mut net2, &zero, 0.1, 0.0).unwrap();
        assert_eq!(net2.layers[0].weights, before);
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let mut net = SpikingNetwork::new(1, &[1], NeuronParams::lif(), 1).unwrap();
        let before = net.layers[0].weights.clone();
        let grads = GradientReport {
            layers: vec![crate::bptt::LayerGradients {
                weight_grad: Matrix::from_vec(1, 1, vec![f64::NAN]),
                du_trace: vec![],
                phi_trace: vec![],
                ds_in: vec![],
                lambda_grad: None,
            }],
        };
        assert!(matches!(
            sgd_step(&mut net, &grads, 0.1, 0.0),
            Err(NetworkError::NonFiniteGradient { layer: 0 })
        ));
        assert_eq!(net.layers[0].weights, before);
    }

    #[test]
    fn zero_epochs_returns_empty_log_and_untouched_network() {
        let mut net = SpikingNetwork::new(4, &[3, 2], NeuronParams::lif(), 5).unwrap();
        let weights_before: Vec<Matrix> =
            net.layers.iter().map(|l| l.weights.clone()).collect();
        let data = synthetic_task(SyntheticKind::rate_pair(), 8, 4, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let log = train(&mut net, &data, &cfg).unwrap();
        assert!(log.epochs.is_empty());
        for (l, before) in net.layers.iter().zip(&weights_before) {
            assert_eq!(l.weights, *before);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synthetic_task(SyntheticKind::rate_pair(), 32, 6, 8, 11).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let mut net_a = SpikingNetwork::new(8, &[6, 2], NeuronParams::ilif(), 1234).unwrap();
        let log_a = train(&mut net_a, &data, &cfg).unwrap();
        let mut net_b = SpikingNetwork::new(8, &[6, 2], NeuronParams::ilif(), 1234).unwrap();
        let log_b = train(&mut net_b, &data, &cfg).unwrap();
        assert_eq!(log_a, log_b);
        for (a, b) in net_a.layers.iter().zip(&net_b.layers) {
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn rate_pair_task_is_learnable() {
        let data = synthetic_task(SyntheticKind::rate_pair(), 128, 8, 8, 42).unwrap();
        let mut net = SpikingNetwork::new(8, &[8, 2], NeuronParams::lif(), 1234).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let log = train(&mut net, &data, &cfg).unwrap();
        let final_acc = log.epochs.last().unwrap().accuracy;
        assert!(final_acc >= 0.9, "only reached {final_acc}");
    }

    #[test]
    fn plif_decay_moves_during_training() {
        let mut params = NeuronParams::lif().with_lambda(0.5);
        params.variant = NeuronVariant::Plif;
        params.lambda_learnable = true;
        let data = synthetic_task(SyntheticKind::rate_pair(), 32, 6, 8, 13).unwrap();
        let mut net = SpikingNetwork::new(8, &[6, 2], params, 1234).unwrap();
        let before: Vec<f64> = net.layers.iter().map(|l| l.decay_logit.unwrap()).collect();
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        train(&mut net, &data, &cfg).unwrap();
        let after: Vec<f64> = net.layers.iter().map(|l| l.decay_logit.unwrap()).collect();
        assert_ne!(before, after);
    }
}
