//! Firing statistics, weight norms and spike-map comparisons.

use crate::tape::LayerTape;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no tapes to aggregate")]
    Empty,
    #[error("tape sets have mismatched shapes: {0}")]
    ShapeMismatch(String),
}

/// Aggregated statistics for one evaluation pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub firing_rate_per_layer: Vec<f64>,
    pub continuous_firing_rate_per_layer: Vec<f64>,
    pub weight_norm_per_layer: Vec<f64>,
    pub ac_count: u64,
    pub mac_count: u64,
    pub sop_energy_pj: f64,
}

fn check_nonempty(tapes: &[Vec<LayerTape>]) -> Result<usize, MetricsError> {
    let layers = tapes.first().map(|seq| seq.len()).unwrap_or(0);
    if layers == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(layers)
}

/// Mean spike value per layer over all sequences, steps and neurons.
pub fn firing_rates(tapes: &[Vec<LayerTape>]) -> Result<Vec<f64>, MetricsError> {
    let layers = check_nonempty(tapes)?;
    let mut sums = vec![0.0; layers];
    let mut counts = vec![0usize; layers];
    for seq in tapes {
        for (l, tape) in seq.iter().enumerate() {
            for rec in &tape.steps {
                sums[l] += rec.spikes.iter().sum::<f64>();
                counts[l] += rec.spikes.len();
            }
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 })
        .collect())
}

/// Fraction of neuron instances spiking in more than `threshold_fraction`
/// of the sequence's steps (strict inequality). Each (sequence, neuron)
/// pair counts as one instance.
pub fn continuous_firing_rate_with_threshold(
    tapes: &[Vec<LayerTape>],
    threshold_fraction: f64,
) -> Result<Vec<f64>, MetricsError> {
    let layers = check_nonempty(tapes)?;
    let mut hot = vec![0usize; layers];
    let mut total = vec![0usize; layers];
    for seq in tapes {
        for (l, tape) in seq.iter().enumerate() {
            let t_len = tape.num_steps();
            let n = tape.num_neurons();
            let cutoff = threshold_fraction * t_len as f64;
            for i in 0..n {
                let spikes: f64 = tape.steps.iter().map(|rec| rec.spikes[i]).sum();
                if spikes > cutoff {
                    hot[l] += 1;
                }
                total[l] += 1;
            }
        }
    }
    Ok(hot
        .iter()
        .zip(&total)
        .map(|(h, t)| if *t == 0 { 0.0 } else { *h as f64 / *t as f64 })
        .collect())
}

/// The paper-style continuous firing rate: active in more than half the
/// steps.
pub fn continuous_firing_rate(tapes: &[Vec<LayerTape>]) -> Result<Vec<f64>, MetricsError> {
    continuous_firing_rate_with_threshold(tapes, 0.5)
}

/// Per-(layer, step) classification of spikes from two runs over the same
/// inputs and architecture.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeMapCell {
    pub a_only: u64,
    pub b_only: u64,
    pub both: u64,
    pub neither: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeMap {
    /// Indexed [layer][time step].
    pub cells: Vec<Vec<SpikeMapCell>>,
}

/// Compare two tape sets neuron by neuron. Both must come from the same
/// architecture and inputs.
pub fn spike_map(
    tapes_a: &[Vec<LayerTape>],
    tapes_b: &[Vec<LayerTape>],
) -> Result<SpikeMap, MetricsError> {
    let layers = check_nonempty(tapes_a)?;
    if tapes_a.len() != tapes_b.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} vs {} sequences",
            tapes_a.len(),
            tapes_b.len()
        )));
    }
    let t_len = tapes_a[0][0].num_steps();
    let mut cells = vec![vec![SpikeMapCell::default(); t_len]; layers];
    for (seq_a, seq_b) in tapes_a.iter().zip(tapes_b) {
        if seq_a.len() != layers || seq_b.len() != layers {
            return Err(MetricsError::ShapeMismatch("layer count differs".into()));
        }
        for l in 0..layers {
            let (ta, tb) = (&seq_a[l], &seq_b[l]);
            if ta.num_steps() != t_len || tb.num_steps() != t_len || ta.num_neurons() != tb.num_neurons()
            {
                return Err(MetricsError::ShapeMismatch(format!(
                    "layer {l}: {}x{} vs {}x{}",
                    ta.num_steps(),
                    ta.num_neurons(),
                    tb.num_steps(),
                    tb.num_neurons()
                )));
            }
            for t in 0..t_len {
                for i in 0..ta.num_neurons() {
                    let a = ta.steps[t].spikes[i] == 1.0;
                    let b = tb.steps[t].spikes[i] == 1.0;
                    let cell = &mut cells[l][t];
                    match (a, b) {
                        (true, true) => cell.both += 1,
                        (true, false) => cell.a_only += 1,
                        (false, true) => cell.b_only += 1,
                        (false, false) => cell.neither += 1,
                    }
                }
            }
        }
    }
    Ok(SpikeMap { cells })
}
