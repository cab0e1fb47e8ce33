//! Differentiable twin networks for finite-difference validation.
//!
//! The twin replaces the Heaviside spike with the piecewise-linear ramp
//! `clamp((u - v_th)/gamma + 1/2, 0, 1)`, whose true derivative is exactly
//! the rectangular surrogate. On a twin the BPTT recursion is the exact
//! gradient of the loss, so central finite differences over the weights
//! give an independent check of the whole backward path (recursion, weight
//! accumulation, inter-layer routing).
//!
//! Weights whose perturbed forward passes land a membrane potential on a
//! different piece of the ramp than the opposite perturbation are excluded:
//! the loss is not differentiable across a kink, so the comparison is
//! meaningless there.

use crate::bptt::backward_lif;
use crate::linalg::Matrix;
use crate::neuron::{NeuronParams, NeuronVariant, StepRecord};
use crate::tape::LayerTape;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("twin mode supports only non-inhibitory variants, got {0:?}")]
    UnsupportedVariant(NeuronVariant),
    #[error("finite-difference loss is not finite")]
    NonFiniteLoss,
    #[error("epsilon {0} outside the supported [1e-6, 1e-3] range")]
    BadEpsilon(f64),
}

/// A stack of dense layers run in ramp mode. Weights are indexed from the
/// input side.
#[derive(Clone, Debug)]
pub struct TwinNetwork {
    pub weights: Vec<Matrix>,
    pub params: Vec<NeuronParams>,
}

/// Which piece of the ramp a potential landed on.
fn ramp_region(u: f64, p: &NeuronParams) -> i8 {
    let x = (u - p.v_th) / p.gamma + 0.5;
    if x <= 0.0 {
        0
    } else if x >= 1.0 {
        2
    } else {
        1
    }
}

fn ramp(u: f64, p: &NeuronParams) -> f64 {
    ((u - p.v_th) / p.gamma + 0.5).clamp(0.0, 1.0)
}

/// Forward pass of the twin: identical membrane and soft-reset dynamics,
/// real-valued ramp outputs instead of spikes. Returns per-layer tapes and
/// the region code of every potential for kink detection.
fn twin_forward(
    net: &TwinNetwork,
    input_seq: &[Vec<f64>],
) -> Result<(Vec<LayerTape>, Vec<i8>), TwinError> {
    let t_len = input_seq.len();
    let mut tapes = Vec::with_capacity(net.weights.len());
    let mut regions = Vec::new();
    let mut below: Vec<Vec<f64>> = input_seq.to_vec();
    for (weights, params) in net.weights.iter().zip(&net.params) {
        if params.variant.is_inhibitory() {
            return Err(TwinError::UnsupportedVariant(params.variant));
        }
        let n = weights.rows();
        let mut m = vec![0.0; n];
        let mut steps = Vec::with_capacity(t_len);
        let mut outputs = Vec::with_capacity(t_len);
        for input in &below {
            let current = weights.matvec(input);
            let mut potential = vec![0.0; n];
            let mut spikes = vec![0.0; n];
            let mut m_bar = vec![0.0; n];
            for i in 0..n {
                let u = params.lambda * m[i] + current[i];
                let s = ramp(u, params);
                potential[i] = u;
                spikes[i] = s;
                m_bar[i] = u - s * params.v_th;
                regions.push(ramp_region(u, params));
            }
            m = m_bar.clone();
            outputs.push(spikes.clone());
            steps.push(StepRecord {
                current,
                potential,
                spikes,
                m_post: m_bar.clone(),
                m_bar,
                u_inhib_post: vec![0.0; n],
                i_inhib_post: vec![0.0; n],
            });
        }
        tapes.push(LayerTape {
            inputs: below,
            steps,
            weights_snapshot: weights.clone(),
            params: *params,
        });
        below = outputs;
    }
    Ok((tapes, regions))
}

/// Rate-MSE loss of the twin on one sequence: `(T/2) * ||mean(out) - target||^2`.
fn twin_loss(net: &TwinNetwork, input_seq: &[Vec<f64>], target: &[f64]) -> Result<f64, TwinError> {
    let (tapes, _) = twin_forward(net, input_seq)?;
    Ok(loss_from_tapes(&tapes, target))
}

fn loss_from_tapes(tapes: &[LayerTape], target: &[f64]) -> f64 {
    let top = tapes.last().expect("twin has at least one layer");
    let t_len = top.num_steps();
    let n = top.num_neurons();
    let mut mean = vec![0.0; n];
    for step in &top.steps {
        for (m, s) in mean.iter_mut().zip(&step.spikes) {
            *m += s;
        }
    }
    for m in &mut mean {
        *m /= t_len as f64;
    }
    let mut sq = 0.0;
    for (m, y) in mean.iter().zip(target) {
        sq += (m - y) * (m - y);
    }
    t_len as f64 / 2.0 * sq
}

/// Exact BPTT gradients of the twin loss, via the shared LIF recursion.
pub fn twin_gradients(
    net: &TwinNetwork,
    input_seq: &[Vec<f64>],
    target: &[f64],
) -> Result<Vec<Matrix>, TwinError> {
    let (tapes, _) = twin_forward(net, input_seq)?;
    let top = tapes.last().unwrap();
    let t_len = top.num_steps();
    let n = top.num_neurons();
    let mut mean = vec![0.0; n];
    for step in &top.steps {
        for (m, s) in mean.iter_mut().zip(&step.spikes) {
            *m += s;
        }
    }
    for m in &mut mean {
        *m /= t_len as f64;
    }
    // d loss / d out[t] = mean - target at every step, matching the T/2 scale.
    let ds_top: Vec<Vec<f64>> = (0..t_len)
        .map(|_| mean.iter().zip(target).map(|(m, y)| m - y).collect())
        .collect();
    let mut grads = vec![Matrix::zeros(1, 1); tapes.len()];
    let mut ds = ds_top;
    for (l, tape) in tapes.iter().enumerate().rev() {
        let layer = backward_lif(tape, &ds).expect("twin tape is non-inhibitory");
        ds = layer.ds_in.clone();
        grads[l] = layer.weight_grad;
    }
    Ok(grads)
}

/// Result of one finite-difference sweep.
#[derive(Clone, Debug)]
pub struct FdReport {
    /// Worst relative error over all compared weights (absolute error is
    /// used when both gradients are below 1e-8 in magnitude).
    pub max_relative_error: f64,
    /// Number of weights compared.
    pub compared: usize,
    /// Weights skipped because a perturbation crossed a ramp kink.
    pub excluded: usize,
    /// Flat index of the worst offender, as (layer, row, col).
    pub worst_index: Option<(usize, usize, usize)>,
}

/// Central finite differences of the twin loss w.r.t. every weight,
/// compared against the twin's BPTT gradients.
pub fn finite_difference_check(
    net: &TwinNetwork,
    input_seq: &[Vec<f64>],
    target: &[f64],
    eps: f64,
) -> Result<FdReport, TwinError> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(TwinError::BadEpsilon(eps));
    }
    let analytic = twin_gradients(net, input_seq, target)?;
    let mut report = FdReport {
        max_relative_error: 0.0,
        compared: 0,
        excluded: 0,
        worst_index: None,
    };
    for l in 0..net.weights.len() {
        for r in 0..net.weights[l].rows() {
            for c in 0..net.weights[l].cols() {
                let base = net.weights[l].get(r, c);
                let mut plus = net.clone();
                plus.weights[l].set(r, c, base + eps);
                let mut minus = net.clone();
                minus.weights[l].set(r, c, base - eps);
                let (_, regions_plus) = twin_forward(&plus, input_seq)?;
                let (_, regions_minus) = twin_forward(&minus, input_seq)?;
                if regions_plus != regions_minus {
                    // The two perturbations straddle a kink; the loss is not
                    // differentiable there.
                    report.excluded += 1;
                    continue;
                }
                let loss_plus = twin_loss(&plus, input_seq, target)?;
                let loss_minus = twin_loss(&minus, input_seq, target)?;
                if !loss_plus.is_finite() || !loss_minus.is_finite() {
                    return Err(TwinError::NonFiniteLoss);
                }
                let fd = (loss_plus - loss_minus) / (2.0 * eps);
                let an = analytic[l].get(r, c);
                let scale = fd.abs().max(an.abs());
                let err = if scale < 1e-8 {
                    (fd - an).abs()
                } else {
                    (fd - an).abs() / scale
                };
                report.compared += 1;
                if err > report.max_relative_error {
                    report.max_relative_error = err;
                    report.worst_index = Some((l, r, c));
                }
            }
        }
    }
    Ok(report)
}
