//! Dataset ingestion and encoding.
//!
//! Inputs reach the network as [`SpikeBatch`] tensors shaped
//! `(sequence, time, feature)` with values in [0, 1]: binary for spike
//! inputs, real for direct-encoded images. Sources: IDX image files
//! ([`idx`]), event streams ([`events`]) and the synthetic desk-scale tasks
//! below.

pub mod events;
pub mod idx;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("invalid {what}: {message}")]
    Invalid {
        what: &'static str,
        message: String,
    },
}

fn invalid(what: &'static str, message: String) -> DataError {
    DataError::Invalid { what, message }
}

/// A batch of input sequences shaped (sequence, time, feature), values in
/// [0, 1], plus integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeBatch {
    n_sequences: usize,
    t_steps: usize,
    features: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl SpikeBatch {
    pub fn new(
        n_sequences: usize,
        t_steps: usize,
        features: usize,
        data: Vec<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, DataError> {
        if data.len() != n_sequences * t_steps * features {
            return Err(invalid(
                "batch shape",
                format!(
                    "{} values cannot fill {} x {} x {}",
                    data.len(),
                    n_sequences,
                    t_steps,
                    features
                ),
            ));
        }
        if labels.len() != n_sequences {
            return Err(invalid(
                "labels",
                format!("{} labels for {} sequences", labels.len(), n_sequences),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid("batch values", format!("{bad} outside [0, 1]")));
        }
        if let Some(bad) = labels.iter().find(|l| **l >= num_classes) {
            return Err(invalid(
                "labels",
                format!("label {bad} >= num_classes {num_classes}"),
            ));
        }
        Ok(SpikeBatch {
            n_sequences,
            t_steps,
            features,
            data,
            labels,
            num_classes,
        })
    }

    pub fn n_sequences(&self) -> usize {
        self.n_sequences
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Input vector for one sequence at one time step.
    pub fn step(&self, seq: usize, t: usize) -> &[f64] {
        let base = (seq * self.t_steps + t) * self.features;
        &self.data[base..base + self.features]
    }

    /// The whole sequence as per-step vectors (copied).
    pub fn sequence(&self, seq: usize) -> Vec<Vec<f64>> {
        (0..self.t_steps).map(|t| self.step(seq, t).to_vec()).collect()
    }

    /// Select a contiguous range of sequences.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SpikeBatch {
        let start = range.start * self.t_steps * self.features;
        let end = range.end * self.t_steps * self.features;
        SpikeBatch {
            n_sequences: range.len(),
            t_steps: self.t_steps,
            features: self.features,
            data: self.data[start..end].to_vec(),
            labels: self.labels[range].to_vec(),
            num_classes: self.num_classes,
        }
    }
}

/// Repeat each image along a new time axis: direct encoding feeds the
/// normalized pixel values into the first layer identically at every step.
pub fn direct_encode(
    images: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    t_steps: usize,
) -> Result<SpikeBatch, DataError> {
    if t_steps < 1 {
        return Err(invalid("t_steps", "direct encoding needs T >= 1".into()));
    }
    let features = images.first().map(|im| im.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(images.len() * t_steps * features);
    for image in images {
        if image.len() != features {
            return Err(invalid(
                "images",
                format!("ragged image: {} vs {features} pixels", image.len()),
            ));
        }
        for _ in 0..t_steps {
            data.extend_from_slice(image);
        }
    }
    SpikeBatch::new(images.len(), t_steps, features, data, labels.to_vec(), num_classes)
}

/// Which synthetic task to generate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticKind {
    /// Two classes separated by Bernoulli firing rates on two disjoint
    /// feature groups.
    RatePair { rate_hi: f64, rate_lo: f64 },
    /// Two classes separated by which feature group fires first. Solving it
    /// requires temporal credit assignment.
    TemporalOrder { rate_active: f64, rate_quiet: f64 },
}

impl SyntheticKind {
    pub fn rate_pair() -> Self {
        SyntheticKind::RatePair {
            rate_hi: 0.8,
            rate_lo: 0.2,
        }
    }

    pub fn temporal_order() -> Self {
        SyntheticKind::TemporalOrder {
            rate_active: 0.9,
            rate_quiet: 0.05,
        }
    }
}

/// Generate a two-class synthetic spike task. Labels alternate 0/1 so every
/// prefix is balanced; all draws come from one seeded generator.
pub fn synthetic_task(
    kind: SyntheticKind,
    n_samples: usize,
    t_steps: usize,
    features: usize,
    seed: u64,
) -> Result<SpikeBatch, DataError> {
    if features < 2 {
        return Err(invalid("features", "need at least 2 features".into()));
    }
    if n_samples == 0 {
        return Err(invalid("n_samples", "need at least one sample".into()));
    }
    let rates_ok = |r: f64| (0.0..=1.0).contains(&r);
    match kind {
        SyntheticKind::RatePair { rate_hi, rate_lo } => {
            if t_steps < 1 {
                return Err(invalid("t_steps", "rate-pair needs T >= 1".into()));
            }
            if !rates_ok(rate_hi) || !rates_ok(rate_lo) {
                return Err(invalid("rates", "rates must lie in [0, 1]".into()));
            }
        }
        SyntheticKind::TemporalOrder { rate_active, rate_quiet } => {
            if t_steps < 4 {
                return Err(invalid(
                    "t_steps",
                    format!("temporal-order is degenerate below T = 4, got {t_steps}"),
                ));
            }
            if !rates_ok(rate_active) || !rates_ok(rate_quiet) {
                return Err(invalid("rates", "rates must lie in [0, 1]".into()));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_a = features / 2;
    let half_t = t_steps / 2;
    let mut data = Vec::with_capacity(n_samples * t_steps * features);
    let mut labels = Vec::with_capacity(n_samples);
    for sample in 0..n_samples {
        let label = sample % 2;
        labels.push(label);
        for t in 0..t_steps {
            for f in 0..features {
                let in_group_a = f < group_a;
                let rate = match kind {
                    SyntheticKind::RatePair { rate_hi, rate_lo } => {
                        let hot = (label == 0) == in_group_a;
                        if hot {
                            rate_hi
                        } else {
                            rate_lo
                        }
                    }
                    SyntheticKind::TemporalOrder { rate_active, rate_quiet } => {
                        let first_half = t < half_t;
                        // Class 0: group A leads; class 1: group B leads.
                        let active = if label == 0 {
                            in_group_a == first_half
                        } else {
                            in_group_a != first_half
                        };
                        if active {
                            rate_active
                        } else {
                            rate_quiet
                        }
                    }
                };
                data.push(if rng.gen_bool(rate) { 1.0 } else { 0.0 });
            }
        }
    }
    SpikeBatch::new(n_samples, t_steps, features, data, labels, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_encode_repeats_pixels_exactly() {
        let images = vec![vec![0.5, 0.25], vec![1.0, 0.0]];
        let batch = direct_encode(&images, &[0, 1], 2, 4).unwrap();
        assert_eq!(batch.t_steps(), 4);
        for t in 0..4 {
            assert_eq!(batch.step(0, t), &[0.5, 0.25]);
            assert_eq!(batch.step(1, t), &[1.0, 0.0]);
        }
    }

    #[test]
    fn direct_encode_single_step() {
        let images = vec![vec![0.3]];
        let batch = direct_encode(&images, &[0], 1, 1).unwrap();
        assert_eq!(batch.step(0, 0), &[0.3]);
    }

    #[test]
    fn direct_encode_rejects_zero_steps() {
        assert!(direct_encode(&[vec![0.1]], &[0], 1, 0).is_err());
    }

    #[test]
    fn rate_pair_is_rate_separable() {
        // A plain rate-threshold classifier (compare mean rate of group A
        // vs group B) must solve the task almost perfectly.
        let batch =
            synthetic_task(SyntheticKind::rate_pair(), 1000, 8, 16, 42).unwrap();
        let mut correct = 0;
        for s in 0..batch.n_sequences() {
            let mut sum_a = 0.0;
            let mut sum_b = 0.0;
            for t in 0..batch.t_steps() {
                let row = batch.step(s, t);
                for (f, v) in row.iter().enumerate() {
                    if f < batch.features() / 2 {
                        sum_a += v;
                    } else {
                        sum_b += v;
                    }
                }
            }
            let predicted = if sum_a >= sum_b { 0 } else { 1 };
            if predicted == batch.labels()[s] {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / batch.n_sequences() as f64;
        assert!(accuracy >= 0.99, "rate classifier got {accuracy}");
    }

    #[test]
    fn temporal_order_rejects_short_sequences() {
        let err = synthetic_task(SyntheticKind::temporal_order(), 10, 2, 8, 1).unwrap_err();
        assert!(matches!(err, DataError::Invalid { what: "t_steps", .. }));
    }

    #[test]
    fn same_seed_same_batch() {
        let a = synthetic_task(SyntheticKind::rate_pair(), 50, 6, 10, 7).unwrap();
        let b = synthetic_task(SyntheticKind::rate_pair(), 50, 6, 10, 7).unwrap();
        assert_eq!(a, b);
        let c = synthetic_task(SyntheticKind::rate_pair(), 50, 6, 10, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn temporal_order_groups_lead_by_class() {
        let batch = synthetic_task(SyntheticKind::temporal_order(), 100, 8, 12, 3).unwrap();
        // For class 0 the first half of time steps should be dominated by
        // group A activity, for class 1 by group B.
        for s in 0..batch.n_sequences() {
            let mut early_a = 0.0;
            let mut early_b = 0.0;
            for t in 0..4 {
                let row = batch.step(s, t);
                for (f, v) in row.iter().enumerate() {
                    if f < 6 {
                        early_a += v;
                    } else {
                        early_b += v;
                    }
                }
            }
            if batch.labels()[s] == 0 {
                assert!(early_a > early_b);
            } else {
                assert!(early_b > early_a);
            }
        }
    }

    #[test]
    fn batch_validates_range_and_labels() {
        assert!(SpikeBatch::new(1, 1, 1, vec![1.5], vec![0], 2).is_err());
        assert!(SpikeBatch::new(1, 1, 1, vec![0.5], vec![2], 2).is_err());
        assert!(SpikeBatch::new(1, 1, 2, vec![0.5], vec![0], 2).is_err());
    }
}
