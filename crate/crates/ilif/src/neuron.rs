//! Neuron dynamics: LIF, ILIF and their learnable-decay variants.
//!
//! All step functions are pure: they take the previous state plus the input
//! current for one time step and return a [`StepRecord`] (everything the
//! backward pass needs) together with the next state. The LIF update is
//!
//! ```text
//! U[t] = lambda * m[t-1] + I[t]
//! S[t] = 1 if U[t] >= v_th else 0
//! m[t] = U[t] - S[t] * v_th          (soft reset)
//! ```
//!
//! The inhibitory variant adds two accumulators. The membrane-potential
//! inhibitory unit (MPIU) integrates post-spike residuals and is subtracted
//! through a bounded sigmoid after each spike; the current inhibitory unit
//! (CIU) integrates spike-gated currents and is rectified off the next
//! step's input. One ILIF step executes, in this order:
//!
//! ```text
//! I[t] = c[t] - max(Iu[t-1], 0)           (c = raw synaptic current)
//! U[t] = lambda * m[t-1] + I[t]
//! S[t] = 1 if U[t] >= v_th else 0
//! mb[t] = U[t] - S[t] * v_th
//! Uu[t] = lambda_u * (Uu[t-1] + S[t] * mb[t])
//! m[t]  = mb[t] - S[t] * sigma(Uu[t])
//! Iu[t] = lambda_i * (Iu[t-1] + S[t] * I[t])
//! ```
//!
//! With `lambda_u = lambda_i = 0` both units are inert and the step is
//! bit-identical to the plain LIF step (the sigmoid subtraction is gated on
//! the unit being active, since `sigma(0) = 1/2` would otherwise leak in).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuronError {
    #[error("layer misconfigured: state has {state} neurons but current has {current}")]
    DimensionMismatch { state: usize, current: usize },
    #[error("step function does not apply to variant {0:?}")]
    VariantMismatch(NeuronVariant),
    #[error("invalid neuron parameter {field}: {message}")]
    InvalidParam {
        field: &'static str,
        message: String,
    },
}

/// Which neuron model a layer runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronVariant {
    Lif,
    Ilif,
    Plif,
    Iplif,
}

impl NeuronVariant {
    /// True for the variants that carry the inhibitory units.
    pub fn is_inhibitory(self) -> bool {
        matches!(self, NeuronVariant::Ilif | NeuronVariant::Iplif)
    }

    /// True for the variants whose decay is a trained parameter.
    pub fn is_learnable_decay(self) -> bool {
        matches!(self, NeuronVariant::Plif | NeuronVariant::Iplif)
    }
}

/// Per-layer neuron constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Membrane decay, in (0, 1].
    pub lambda: f64,
    /// MPIU decay, in [0, 1]. Zero disables the unit.
    pub lambda_u: f64,
    /// CIU decay, in [0, 1]. Zero disables the unit.
    pub lambda_i: f64,
    /// Firing threshold, positive.
    pub v_th: f64,
    /// Surrogate support width, positive.
    pub gamma: f64,
    pub variant: NeuronVariant,
    /// True for PLIF/IPLIF: `lambda` is the initial value of a trained
    /// parameter (stored logit-reparameterized on the layer).
    pub lambda_learnable: bool,
}

impl NeuronParams {
    pub fn lif() -> Self {
        NeuronParams {
            lambda: 1.0,
            lambda_u: 0.0,
            lambda_i: 0.0,
            v_th: 1.0,
            gamma: 1.0,
            variant: NeuronVariant::Lif,
            lambda_learnable: false,
        }
    }

    /// ILIF defaults: slow MPIU (decay 1) and fast CIU (decay 0.03).
    pub fn ilif() -> Self {
        NeuronParams {
            lambda: 1.0,
            lambda_u: 1.0,
            lambda_i: 0.03,
            v_th: 1.0,
            gamma: 1.0,
            variant: NeuronVariant::Ilif,
            lambda_learnable: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// MPIU participates in the dynamics only when its decay is nonzero.
    pub fn mpiu_active(&self) -> bool {
        self.variant.is_inhibitory() && self.lambda_u > 0.0
    }

    /// CIU participates in the dynamics only when its decay is nonzero.
    pub fn ciu_active(&self) -> bool {
        self.variant.is_inhibitory() && self.lambda_i > 0.0
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        let check = |ok: bool, field: &'static str, message: String| {
            if ok {
                Ok(())
            } else {
                Err(NeuronError::InvalidParam { field, message })
            }
        };
        check(
            self.gamma > 0.0 && self.gamma.is_finite(),
            "gamma",
            format!("must be positive, got {}", self.gamma),
        )?;
        check(
            self.v_th > 0.0 && self.v_th.is_finite(),
            "v_th",
            format!("must be positive, got {}", self.v_th),
        )?;
        check(
            self.lambda > 0.0 && self.lambda <= 1.0,
            "lambda",
            format!("must be in (0, 1], got {}", self.lambda),
        )?;
        check(
            (0.0..=1.0).contains(&self.lambda_u),
            "lambda_u",
            format!("must be in [0, 1], got {}", self.lambda_u),
        )?;
        check(
            (0.0..=1.0).contains(&self.lambda_i),
            "lambda_i",
            format!("must be in [0, 1], got {}", self.lambda_i),
        )?;
        if !self.variant.is_inhibitory() {
            check(
                self.lambda_u == 0.0 && self.lambda_i == 0.0,
                "lambda_u",
                format!("{:?} neurons must have zero inhibitory decays", self.variant),
            )?;
        }
        check(
            self.lambda_learnable == self.variant.is_learnable_decay(),
            "lambda_learnable",
            format!(
                "must be {} for variant {:?}",
                self.variant.is_learnable_decay(),
                self.variant
            ),
        )?;
        if self.lambda_learnable {
            // The learnable decay is trained through a logit, so it must
            // start strictly inside (0, 1).
            check(
                self.lambda < 1.0,
                "lambda",
                format!("learnable decay must start in (0, 1), got {}", self.lambda),
            )?;
        }
        Ok(())
    }
}

/// Per-layer neuron state carried between time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronState {
    /// Residual membrane potential after reset (and inhibition).
    pub m: Vec<f64>,
    /// MPIU accumulator. Stays zero for LIF/PLIF.
    pub u_inhib: Vec<f64>,
    /// CIU accumulator. Stays zero for LIF/PLIF.
    pub i_inhib: Vec<f64>,
}

impl NeuronState {
    pub fn zeros(n: usize) -> Self {
        NeuronState {
            m: vec![0.0; n],
            u_inhib: vec![0.0; n],
            i_inhib: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Everything recorded for one forward step of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Adjusted input current I[t] (raw current minus rectified CIU for ILIF).
    pub current: Vec<f64>,
    /// Pre-spike membrane potential U[t].
    pub potential: Vec<f64>,
    /// Binary spike outputs S[t].
    pub spikes: Vec<f64>,
    /// Soft-reset potential, `potential - spikes * v_th` exactly.
    pub m_bar: Vec<f64>,
    /// Residual potential after the inhibitory reset.
    pub m_post: Vec<f64>,
    /// MPIU accumulator after this step.
    pub u_inhib_post: Vec<f64>,
    /// CIU accumulator after this step.
    pub i_inhib_post: Vec<f64>,
}

/// Logistic function, the bounded sigmoid used by the MPIU reset.
pub fn sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of [`sigma`].
pub fn sigma_prime(x: f64) -> f64 {
    let s = sigma(x);
    s * (1.0 - s)
}

/// Rectangular surrogate derivative of the spike function:
/// `1/gamma` on the open band `|u - v_th| < gamma/2`, zero elsewhere
/// (the boundary itself is outside the band).
pub fn surrogate_grad(u: f64, params: &NeuronParams) -> f64 {
    if (u - params.v_th).abs() < params.gamma / 2.0 {
        1.0 / params.gamma
    } else {
        0.0
    }
}

/// The per-step temporal factor `1 - v_th * H'(U)`. Inside the band this is
/// `1 - v_th/gamma`, which is exactly zero when `gamma = v_th`.
pub fn epsilon_term(u: f64, params: &NeuronParams) -> f64 {
    1.0 - params.v_th * surrogate_grad(u, params)
}

fn heaviside_spike(u: f64, v_th: f64) -> f64 {
    // Fires on the tie: U = v_th spikes.
    if u >= v_th {
        1.0
    } else {
        0.0
    }
}

fn check_dims(state: &NeuronState, current: &[f64]) -> Result<(), NeuronError> {
    if state.len() != current.len() {
        return Err(NeuronError::DimensionMismatch {
            state: state.len(),
            current: current.len(),
        });
    }
    Ok(())
}

/// One LIF (or PLIF) step. The inhibitory state fields are untouched.
pub fn lif_step(
    state: &NeuronState,
    current: &[f64],
    params: &NeuronParams,
) -> Result<(StepRecord, NeuronState), NeuronError> {
    if params.variant.is_inhibitory() {
        return Err(NeuronError::VariantMismatch(params.variant));
    }
    check_dims(state, current)?;
    let n = current.len();
    let mut potential = vec![0.0; n];
    let mut spikes = vec![0.0; n];
    let mut m_bar = vec![0.0; n];
    for i in 0..n {
        let u = params.lambda * state.m[i] + current[i];
        let s = heaviside_spike(u, params.v_th);
        potential[i] = u;
        spikes[i] = s;
        m_bar[i] = u - s * params.v_th;
    }
    let next = NeuronState {
        m: m_bar.clone(),
        u_inhib: state.u_inhib.clone(),
        i_inhib: state.i_inhib.clone(),
    };
    let record = StepRecord {
        current: current.to_vec(),
        potential,
        spikes,
        m_post: m_bar.clone(),
        m_bar,
        u_inhib_post: next.u_inhib.clone(),
        i_inhib_post: next.i_inhib.clone(),
    };
    Ok((record, next))
}

/// One ILIF (or IPLIF) step, following the fire-procedure order: the CIU
/// adjusts the current using the *previous* step's accumulator and is itself
/// updated last, after the spike.
pub fn ilif_step(
    state: &NeuronState,
    raw_current: &[f64],
    params: &NeuronParams,
) -> Result<(StepRecord, NeuronState), NeuronError> {
    if !params.variant.is_inhibitory() {
        return Err(NeuronError::VariantMismatch(params.variant));
    }
    check_dims(state, raw_current)?;
    let n = raw_current.len();
    let mpiu = params.mpiu_active();
    let ciu = params.ciu_active();

    let mut current = vec![0.0; n];
    let mut potential = vec![0.0; n];
    let mut spikes = vec![0.0; n];
    let mut m_bar = vec![0.0; n];
    let mut m_post = vec![0.0; n];
    let mut u_next = vec![0.0; n];
    let mut i_next = vec![0.0; n];

    for i in 0..n {
        let c = if ciu {
            raw_current[i] - state.i_inhib[i].max(0.0)
        } else {
            raw_current[i]
        };
        let u = params.lambda * state.m[i] + c;
        let s = heaviside_spike(u, params.v_th);
        let mb = u - s * params.v_th;
        current[i] = c;
        potential[i] = u;
        spikes[i] = s;
        m_bar[i] = mb;
        if mpiu {
            let uu = params.lambda_u * (state.u_inhib[i] + s * mb);
            u_next[i] = uu;
            m_post[i] = mb - s * sigma(uu);
        } else {
            m_post[i] = mb;
        }
        if ciu {
            i_next[i] = params.lambda_i * (state.i_inhib[i] + s * c);
        }
    }

    let next = NeuronState {
        m: m_post.clone(),
        u_inhib: u_next.clone(),
        i_inhib: i_next.clone(),
    };
    let record = StepRecord {
        current,
        potential,
        spikes,
        m_bar,
        m_post,
        u_inhib_post: u_next,
        i_inhib_post: i_next,
    };
    Ok((record, next))
}

/// Dispatch on the variant.
pub fn step(
    state: &NeuronState,
    raw_current: &[f64],
    params: &NeuronParams,
) -> Result<(StepRecord, NeuronState), NeuronError> {
    if params.variant.is_inhibitory() {
        ilif_step(state, raw_current, params)
    } else {
        lif_step(state, raw_current, params)
    }
}
