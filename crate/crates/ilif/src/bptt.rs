//! Reverse-mode backpropagation through time over recorded layer tapes.
//!
//! The recursive engine walks each tape once from the last step to the
//! first. For a plain LIF layer the per-neuron recursion is
//!
//! ```text
//! dU[T] = ds[T] * H'(U[T])
//! dU[t] = ds[t] * H'(U[t]) + lambda * eps[t] * dU[t+1]
//! ```
//!
//! with `eps[t] = 1 - v_th * H'(U[t])`. Inhibitory layers add a third term
//! `phi[t]` that routes gradient through the two inhibitory units:
//!
//! ```text
//! phi[t]  = dUu[t] * xi[t] + dIu[t] * delta[t]
//! xi[t]   = lambda_u * (S[t] * eps[t] + m_bar[t] * H'(U[t]))
//! delta[t] = lambda_i * I[t] * H'(U[t])
//! ```
//!
//! where `dUu` and `dIu` are backward accumulators for the MPIU and CIU with
//! their own short recursions:
//!
//! ```text
//! dUu[t] = ds[t+1] * H'(U[t+1]) * lambda * dm_dUu[t] + theta[t] * dUu[t+1]
//! theta[t] = lambda_u + xi[t+1] * lambda * dm_dUu[t]
//! dm_dUu[t] = -S[t] * sigma'(Uu[t])
//!
//! dIu[t] = ds[t+1] * H'(U[t+1]) * dI_dIu[t] + rho[t] * dIu[t+1]
//! rho[t] = lambda_i * (1 + S[t+1] * dI_dIu[t])
//! dI_dIu[t] = -1 if Iu[t] > 0 else 0
//! ```
//!
//! Both accumulators start at zero for the final step: the inhibition
//! written at `t = T` acts only after the last spike, so it cannot reach the
//! loss. The spike values entering `xi`, `delta`, `theta` and `rho` are the
//! recorded constants; the only spike derivative anywhere is the surrogate
//! `H'` substitution.
//!
//! [`unrolled_gradient_oracle`] evaluates the same gradients as literal
//! double sums over `(t, t')` pairs with freshly multiplied-out product
//! chains and no accumulator reuse. It exists purely as a correctness
//! reference for the recursive engine and is quadratic in `T`.

use crate::linalg::Matrix;
use crate::neuron::{epsilon_term, sigma_prime, surrogate_grad, NeuronError};
use crate::tape::{LayerTape, TapeError};

/// Gradients produced by one backward pass over one layer tape.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    /// d loss / d W, same shape as the layer's weights.
    pub weight_grad: Matrix,
    /// d loss / d U[t] per time step, the diagnostic trace of the recursion.
    pub du_trace: Vec<Vec<f64>>,
    /// The inhibitory extra term per time step; identically zero for LIF.
    pub phi_trace: Vec<Vec<f64>>,
    /// Gradient handed to the layer below: `W^T dU[t]` per time step.
    pub ds_in: Vec<Vec<f64>>,
    /// d loss / d lambda for learnable-decay variants, summed over the layer.
    pub lambda_grad: Option<f64>,
}

/// Per-layer gradients for a whole network, ordered layer 0 (input side)
/// upward, plus the loss seen at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub layers: Vec<LayerGradients>,
}

impl GradientReport {
    pub fn weight_grads(&self) -> Vec<&Matrix> {
        self.layers.iter().map(|l| &l.weight_grad).collect()
    }
}

fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_lengths(tape: &LayerTape, ds_out: &[Vec<f64>]) -> Result<(), TapeError> {
    if tape.num_steps() != ds_out.len() {
        return Err(TapeError::LengthMismatch {
            tape: tape.num_steps(),
            other: ds_out.len(),
        });
    }
    Ok(())
}

/// `xi[t]`: sensitivity of the MPIU accumulator to the membrane potential
/// at the same step, through both the residual and the spike.
fn xi_term(tape: &LayerTape, t: usize, i: usize) -> f64 {
    let p = &tape.params;
    let rec = &tape.steps[t];
    let hp = surrogate_grad(rec.potential[i], p);
    let eps = epsilon_term(rec.potential[i], p);
    p.lambda_u * (rec.spikes[i] * eps + rec.m_bar[i] * hp)
}

/// `delta[t]`: sensitivity of the CIU accumulator to the membrane potential
/// through the spike gate.
fn delta_term(tape: &LayerTape, t: usize, i: usize) -> f64 {
    let p = &tape.params;
    let rec = &tape.steps[t];
    p.lambda_i * rec.current[i] * surrogate_grad(rec.potential[i], p)
}

/// Shared recursive backward pass. The inhibitory accumulators are only
/// touched when the corresponding unit is active, so an inhibitory tape with
/// both decays zero runs the exact same float operations as a LIF tape.
fn backward_pass(tape: &LayerTape, ds_out: &[Vec<f64>]) -> Result<LayerGradients, TapeError> {
    check_lengths(tape, ds_out)?;
    let p = tape.params;
    let t_len = tape.num_steps();
    let n = tape.num_neurons();
    let mpiu = p.mpiu_active();
    let ciu = p.ciu_active();

    let mut du_trace = vec![vec![0.0; n]; t_len];
    let mut phi_trace = vec![vec![0.0; n]; t_len];
    let mut du_next = vec![0.0; n];
    let mut d_uu_next = vec![0.0; n];
    let mut d_iu_next = vec![0.0; n];

    for t in (0..t_len).rev() {
        let rec = &tape.steps[t];
        let last = t + 1 == t_len;
        let mut du = vec![0.0; n];
        let mut d_uu = vec![0.0; n];
        let mut d_iu = vec![0.0; n];
        for i in 0..n {
            let hp = surrogate_grad(rec.potential[i], &p);
            let mut g = ds_out[t][i] * hp;
            if !last {
                let eps = epsilon_term(rec.potential[i], &p);
                g += p.lambda * eps * du_next[i];
            }
            if mpiu {
                if !last {
                    let next_rec = &tape.steps[t + 1];
                    let hp_next = surrogate_grad(next_rec.potential[i], &p);
                    let dm_duu = -rec.spikes[i] * sigma_prime(rec.u_inhib_post[i]);
                    let head = ds_out[t + 1][i] * hp_next * p.lambda * dm_duu;
                    let theta = p.lambda_u + xi_term(tape, t + 1, i) * p.lambda * dm_duu;
                    d_uu[i] = head + theta * d_uu_next[i];
                }
                let phi_u = d_uu[i] * xi_term(tape, t, i);
                phi_trace[t][i] += phi_u;
                g += phi_u;
            }
            if ciu {
                if !last {
                    let next_rec = &tape.steps[t + 1];
                    let hp_next = surrogate_grad(next_rec.potential[i], &p);
                    let di_diu = -relu_prime(rec.i_inhib_post[i]);
                    let head = ds_out[t + 1][i] * hp_next * di_diu;
                    let rho = p.lambda_i * (1.0 + next_rec.spikes[i] * di_diu);
                    d_iu[i] = head + rho * d_iu_next[i];
                }
                let phi_i = d_iu[i] * delta_term(tape, t, i);
                phi_trace[t][i] += phi_i;
                g += phi_i;
            }
            du[i] = g;
        }
        du_trace[t] = du;
        du_next = du_trace[t].clone();
        d_uu_next = d_uu;
        d_iu_next = d_iu;
    }

    Ok(assemble_gradients(tape, du_trace, phi_trace))
}

/// Turn a finished `dU` trace into weight, input and decay gradients.
/// Weight gradients accumulate in fixed time order `t = T..1` so repeated
/// runs are bit-identical.
fn assemble_gradients(
    tape: &LayerTape,
    du_trace: Vec<Vec<f64>>,
    phi_trace: Vec<Vec<f64>>,
) -> LayerGradients {
    let t_len = tape.num_steps();
    let mut weight_grad = Matrix::zeros(tape.weights_snapshot.rows(), tape.weights_snapshot.cols());
    let mut ds_in = vec![Vec::new(); t_len];
    for t in (0..t_len).rev() {
        weight_grad.add_outer(&du_trace[t], &tape.inputs[t], 1.0);
        ds_in[t] = tape.weights_snapshot.matvec_transposed(&du_trace[t]);
    }
    let lambda_grad = if tape.params.lambda_learnable {
        let mut acc = 0.0;
        for t in (0..t_len).rev() {
            // dU[t]/d lambda = m[t-1]; the first step sees zero state.
            if t > 0 {
                let m_prev = &tape.steps[t - 1].m_post;
                for (g, m) in du_trace[t].iter().zip(m_prev) {
                    acc += g * m;
                }
            }
        }
        Some(acc)
    } else {
        None
    };
    LayerGradients {
        weight_grad,
        du_trace,
        phi_trace,
        ds_in,
        lambda_grad,
    }
}

/// Recursive backward pass for a LIF or PLIF tape.
pub fn backward_lif(tape: &LayerTape, ds_out: &[Vec<f64>]) -> Result<LayerGradients, TapeError> {
    if tape.params.variant.is_inhibitory() {
        return Err(NeuronError::VariantMismatch(tape.params.variant).into());
    }
    backward_pass(tape, ds_out)
}

/// Recursive backward pass for an ILIF or IPLIF tape, including the
/// inhibitory gradient pathways.
pub fn backward_ilif(tape: &LayerTape, ds_out: &[Vec<f64>]) -> Result<LayerGradients, TapeError> {
    if !tape.params.variant.is_inhibitory() {
        return Err(NeuronError::VariantMismatch(tape.params.variant).into());
    }
    backward_pass(tape, ds_out)
}

/// Backward pass dispatching on the tape's variant.
pub fn backward(tape: &LayerTape, ds_out: &[Vec<f64>]) -> Result<LayerGradients, TapeError> {
    backward_pass(tape, ds_out)
}

/// Options for the literal-summation oracle.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleOptions {
    /// Reproduce the small-decay shortcut for the CIU chain: keep only the
    /// head term of the `dIu` expansion and drop its self-recursion. Off by
    /// default; the full chain is the reference.
    pub approximate_ciu: bool,
}

const ORACLE_MAX_STEPS: usize = 16;
const ORACLE_MAX_NEURONS: usize = 64;

/// Literal-summation gradient oracle.
///
/// Evaluates the closed-form double sums directly: for every `(t, t')` pair
/// the product chains `prod lambda*eps`, `prod theta` and `prod rho` are
/// multiplied out from scratch. No recursion, no accumulator reuse; it is
/// O(T^2) per neuron and intended only as a correctness reference on small
/// instances.
pub fn unrolled_gradient_oracle(
    tape: &LayerTape,
    ds_out: &[Vec<f64>],
    options: OracleOptions,
) -> Result<LayerGradients, TapeError> {
    check_lengths(tape, ds_out)?;
    if tape.num_steps() > ORACLE_MAX_STEPS || tape.num_neurons() > ORACLE_MAX_NEURONS {
        return Err(TapeError::IndexOutOfRange {
            index: tape.num_steps().max(tape.num_neurons()),
            len: ORACLE_MAX_STEPS,
        });
    }
    let p = tape.params;
    let t_len = tape.num_steps();
    let n = tape.num_neurons();
    let mpiu = p.mpiu_active();
    let ciu = p.ciu_active();

    let hp = |t: usize, i: usize| surrogate_grad(tape.steps[t].potential[i], &p);
    let eps = |t: usize, i: usize| epsilon_term(tape.steps[t].potential[i], &p);
    let dm_duu = |t: usize, i: usize| {
        -tape.steps[t].spikes[i] * sigma_prime(tape.steps[t].u_inhib_post[i])
    };
    let di_diu = |t: usize, i: usize| -relu_prime(tape.steps[t].i_inhib_post[i]);
    let theta = |t: usize, i: usize| p.lambda_u + xi_term(tape, t + 1, i) * p.lambda * dm_duu(t, i);
    let rho = |t: usize, i: usize| p.lambda_i * (1.0 + tape.steps[t + 1].spikes[i] * di_diu(t, i));

    // dUu[t] as a literal sum over the future step t' that the chain ends on.
    let d_uu_lit = |t: usize, i: usize| -> f64 {
        let mut total = 0.0;
        for t_end in t..t_len.saturating_sub(1) {
            let mut chain = 1.0;
            for j in t..t_end {
                chain *= theta(j, i);
            }
            total += ds_out[t_end + 1][i] * hp(t_end + 1, i) * p.lambda * dm_duu(t_end, i) * chain;
        }
        total
    };
    let d_iu_lit = |t: usize, i: usize| -> f64 {
        if options.approximate_ciu {
            if t + 1 < t_len {
                return ds_out[t + 1][i] * hp(t + 1, i) * di_diu(t, i);
            }
            return 0.0;
        }
        let mut total = 0.0;
        for t_end in t..t_len.saturating_sub(1) {
            let mut chain = 1.0;
            for j in t..t_end {
                chain *= rho(j, i);
            }
            total += ds_out[t_end + 1][i] * hp(t_end + 1, i) * di_diu(t_end, i) * chain;
        }
        total
    };
    let phi_lit = |t: usize, i: usize| -> f64 {
        let mut v = 0.0;
        if mpiu {
            v += d_uu_lit(t, i) * xi_term(tape, t, i);
        }
        if ciu {
            v += d_iu_lit(t, i) * delta_term(tape, t, i);
        }
        v
    };

    let mut du_trace = vec![vec![0.0; n]; t_len];
    let mut phi_trace = vec![vec![0.0; n]; t_len];
    for t in 0..t_len {
        for i in 0..n {
            // Blue part: spatial head at every future step times the decay
            // chain back to t.
            let mut total = 0.0;
            for t_end in t..t_len {
                let mut chain = 1.0;
                for j in t..t_end {
                    chain *= p.lambda * eps(j, i);
                }
                total += ds_out[t_end][i] * hp(t_end, i) * chain;
            }
            // Red part: the inhibitory extra terms ride the same chain.
            if mpiu || ciu {
                for t_end in t + 1..t_len {
                    let mut chain = 1.0;
                    for j in t..t_end {
                        chain *= p.lambda * eps(j, i);
                    }
                    total += phi_lit(t_end, i) * chain;
                }
                let own = phi_lit(t, i);
                phi_trace[t][i] = own;
                total += own;
            }
            du_trace[t][i] = total;
        }
    }

    Ok(assemble_gradients(tape, du_trace, phi_trace))
}

/// Product of the MPIU chain factors `dUu[t+1]/dUu[t]` from `from_t` down to
/// `to_t`. Each factor is the MPIU decay, so the product over a span of `k`
/// steps is `lambda_u^k`; with decay 1 it is exactly 1 over any span.
pub fn shortcut_attenuation(
    tape: &LayerTape,
    from_t: usize,
    to_t: usize,
) -> Result<f64, TapeError> {
    if !tape.params.variant.is_inhibitory() {
        return Err(NeuronError::VariantMismatch(tape.params.variant).into());
    }
    let t_len = tape.num_steps();
    if from_t >= t_len || to_t > from_t {
        return Err(TapeError::IndexOutOfRange {
            index: from_t.max(to_t),
            len: t_len,
        });
    }
    let mut product = 1.0;
    for _ in to_t..from_t {
        product *= tape.params.lambda_u;
    }
    Ok(product)
}

/// Largest relative elementwise difference between two gradient sets.
/// Exactly equal entries (including both zero) count as zero difference.
pub fn max_relative_diff(a: &LayerGradients, b: &LayerGradients) -> f64 {
    max_relative_diff_located(a, b).0
}

/// As [`max_relative_diff`], also naming the worst offending tensor entry.
pub fn max_relative_diff_located(a: &LayerGradients, b: &LayerGradients) -> (f64, String) {
    fn rel(x: f64, y: f64) -> f64 {
        if x == y {
            0.0
        } else {
            (x - y).abs() / x.abs().max(y.abs())
        }
    }
    let mut worst: f64 = 0.0;
    let mut at = String::from("-");
    let mut consider = |v: f64, label: String| {
        if v > worst {
            worst = v;
            at = label;
        }
    };
    let cols = a.weight_grad.cols().max(1);
    for (k, (x, y)) in a.weight_grad.iter().zip(b.weight_grad.iter()).enumerate() {
        consider(rel(*x, *y), format!("weight_grad[{},{}]", k / cols, k % cols));
    }
    for (t, (row_a, row_b)) in a.du_trace.iter().zip(&b.du_trace).enumerate() {
        for (i, (x, y)) in row_a.iter().zip(row_b).enumerate() {
            consider(rel(*x, *y), format!("du_trace[t={t}][{i}]"));
        }
    }
    for (t, (row_a, row_b)) in a.phi_trace.iter().zip(&b.phi_trace).enumerate() {
        for (i, (x, y)) in row_a.iter().zip(row_b).enumerate() {
            consider(rel(*x, *y), format!("phi_trace[t={t}][{i}]"));
        }
    }
    for (t, (row_a, row_b)) in a.ds_in.iter().zip(&b.ds_in).enumerate() {
        for (i, (x, y)) in row_a.iter().zip(row_b).enumerate() {
            consider(rel(*x, *y), format!("ds_in[t={t}][{i}]"));
        }
    }
    if let (Some(x), Some(y)) = (a.lambda_grad, b.lambda_grad) {
        consider(rel(x, y), "lambda_grad".to_string());
    }
    (worst, at)
}
