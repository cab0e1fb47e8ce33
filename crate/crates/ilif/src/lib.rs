//! Spiking neural network training with inhibitory leaky integrate-and-fire
//! neurons.
//!
//! The crate implements LIF and ILIF neuron dynamics (plus their
//! learnable-decay variants), hand-rolled backpropagation through time under
//! a rectangular surrogate gradient, dense spiking networks with a mean-rate
//! loss, firing and energy metrics, and an experiment layer for gamma
//! sweeps, ablations and gradient checks.
//!
//! Start with the runnable examples (`cargo run --example <name>`); the
//! `ilif` binary exposes the same experiments as subcommands.

pub mod bptt;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod energy;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod tape;
pub mod twin;

pub use bptt::{
    backward, backward_ilif, backward_lif, max_relative_diff, shortcut_attenuation,
    unrolled_gradient_oracle, GradientReport, LayerGradients, OracleOptions,
};
pub use data::{direct_encode, synthetic_task, SpikeBatch, SyntheticKind};
pub use energy::{count_ac, count_mac, sop_energy, MacMode, MacPolicy, E_AC_PJ, E_MAC_PJ};
pub use linalg::Matrix;
pub use metrics::{
    continuous_firing_rate, firing_rates, spike_map, MetricsRecord, SpikeMap, SpikeMapCell,
};
pub use network::{
    evaluate, predict, rate_mse_loss, sgd_step, train, DenseSpikingLayer, LossKind, LrSchedule,
    NetworkError, RateLoss, SpikingNetwork, TrainConfig, TrainLog,
};
pub use neuron::{
    epsilon_term, ilif_step, lif_step, sigma, sigma_prime, surrogate_grad, NeuronParams,
    NeuronState, NeuronVariant, StepRecord,
};
pub use tape::LayerTape;
pub use twin::{finite_difference_check, twin_gradients, FdReport, TwinNetwork};
