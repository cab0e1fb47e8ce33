//! Forward-pass tapes consumed by the backward pass.

use crate::linalg::Matrix;
use crate::neuron::{step, NeuronError, NeuronParams, NeuronState, StepRecord};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("tape covers {tape} steps but got {other} upstream gradient vectors")]
    LengthMismatch { tape: usize, other: usize },
    #[error("time index {index} out of range for a {len}-step tape")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Neuron(#[from] NeuronError),
}

/// Everything one layer recorded during one forward sequence: the inputs it
/// received, the per-step records, and a snapshot of the weights used.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTape {
    /// Input vector per time step (spikes from the layer below, or the
    /// encoded input for the first layer).
    pub inputs: Vec<Vec<f64>>,
    /// One record per time step, in forward order.
    pub steps: Vec<StepRecord>,
    /// The weight matrix used in this forward pass.
    pub weights_snapshot: Matrix,
    pub params: NeuronParams,
}

impl LayerTape {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn num_neurons(&self) -> usize {
        self.weights_snapshot.rows()
    }

    /// Re-run the forward pass from the recorded inputs and check that every
    /// recorded field is reproduced bit-exactly. Returns false on any
    /// divergence; this is the tape determinism contract.
    pub fn replay_matches(&self) -> Result<bool, TapeError> {
        let mut state = NeuronState::zeros(self.num_neurons());
        for (t, input) in self.inputs.iter().enumerate() {
            let current = self.weights_snapshot.matvec(input);
            let (rec, next) = step(&state, &current, &self.params)?;
            if rec != self.steps[t] {
                return Ok(false);
            }
            state = next;
        }
        Ok(true)
    }
}
