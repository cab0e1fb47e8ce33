//! Experiment configuration: a TOML file of `key = value` sections.
//!
//! The full schema (version 1):
//!
//! ```toml
//! schema_version = 1
//!
//! [neuron]
//! variant = "ilif"        # lif | ilif | plif | iplif
//! lambda = 1.0            # membrane decay in (0, 1]
//! # tau = 1.1             # optional; overrides lambda via lambda = 1 - 1/tau
//! lambda_u = 1.0          # MPIU decay (ignored for lif/plif)
//! lambda_i = 0.03         # CIU decay (ignored for lif/plif)
//! v_th = 1.0
//! gamma = 1.0
//! mpiu_enabled = true     # false forces lambda_u to 0
//! ciu_enabled = true      # false forces lambda_i to 0
//!
//! [architecture]
//! layer_sizes = [16, 2]   # outputs of each spiking layer; input size comes
//!                         # from the data, the last entry is the class count
//!
//! [training]
//! epochs = 30
//! lr = 0.1
//! weight_decay = 5e-5
//! batch_size = 32
//! seed = 1234
//! optimizer = "sgd"
//! lr_schedule = "constant"   # constant | cosine
//! loss = "rate-mse"          # rate-mse | rate-cross-entropy
//!
//! [data]
//! source = "synthetic-rate-pair"  # synthetic-rate-pair | synthetic-temporal-order
//!                                 # | idx | event-csv
//! t_steps = 8
//! n_samples = 256         # synthetic sources
//! features = 16           # synthetic sources
//! rate_hi = 0.8           # synthetic-rate-pair
//! rate_lo = 0.2
//! rate_active = 0.9       # synthetic-temporal-order
//! rate_quiet = 0.05
//! # images_path = "train-images.idx3-ubyte"   # idx
//! # labels_path = "train-labels.idx1-ubyte"
//! # num_classes = 10
//! # events_path = "events.csv"                # event-csv
//! # height = 8
//! # width = 8
//!
//! [outputs]
//! dir = "out"             # overridable with the ILIF_OUT_DIR env variable
//! formats = ["csv", "json"]
//! ```
//!
//! Validation failures name the offending field path, e.g. `neuron.gamma`.

use crate::data::events::{bin_events, load_event_csv, BinMode};
use crate::data::idx::load_idx_pair;
use crate::data::{direct_encode, synthetic_task, DataError, SpikeBatch, SyntheticKind};
use crate::network::{LossKind, LrSchedule, TrainConfig};
use crate::neuron::{NeuronParams, NeuronVariant};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("dataset error: {0}")]
    Data(#[from] DataError),
    #[error("dataset error: {0}")]
    Events(#[from] crate::data::events::EventError),
    #[error("dataset error: {0}")]
    Idx(#[from] crate::data::idx::IdxError),
}

fn field_err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronSection {
    pub variant: NeuronVariant,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Optional time constant; when set, the decay becomes `1 - 1/tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_lambda_u")]
    pub lambda_u: f64,
    #[serde(default = "default_lambda_i")]
    pub lambda_i: f64,
    #[serde(default = "default_v_th")]
    pub v_th: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_true")]
    pub mpiu_enabled: bool,
    #[serde(default = "default_true")]
    pub ciu_enabled: bool,
}

fn default_lambda() -> f64 {
    1.0
}
fn default_lambda_u() -> f64 {
    1.0
}
fn default_lambda_i() -> f64 {
    0.03
}
fn default_v_th() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl NeuronSection {
    /// Resolve the section into neuron parameters: the optional tau
    /// overrides lambda, disabled units force their decay to zero, and
    /// non-inhibitory variants ignore the inhibitory fields entirely.
    pub fn to_params(&self) -> Result<NeuronParams, ConfigError> {
        let lambda = match self.tau {
            Some(tau) => {
                if tau <= 1.0 {
                    return Err(field_err("neuron.tau", format!("must exceed 1, got {tau}")));
                }
                1.0 - 1.0 / tau
            }
            None => self.lambda,
        };
        let inhibitory = self.variant.is_inhibitory();
        let params = NeuronParams {
            lambda,
            lambda_u: if inhibitory && self.mpiu_enabled {
                self.lambda_u
            } else {
                0.0
            },
            lambda_i: if inhibitory && self.ciu_enabled {
                self.lambda_i
            } else {
                0.0
            },
            v_th: self.v_th,
            gamma: self.gamma,
            variant: self.variant,
            lambda_learnable: self.variant.is_learnable_decay(),
        };
        params.validate().map_err(|e| match e {
            crate::neuron::NeuronError::InvalidParam { field, message } => {
                field_err(&format!("neuron.{field}"), message)
            }
            other => field_err("neuron", other.to_string()),
        })?;
        Ok(params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    pub layer_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub batch_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_schedule")]
    pub lr_schedule: LrSchedule,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_seed() -> u64 {
    1234
}
fn default_optimizer() -> String {
    "sgd".to_string()
}
fn default_schedule() -> LrSchedule {
    LrSchedule::Constant
}
fn default_loss() -> LossKind {
    LossKind::RateMse
}

impl TrainingSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            seed: self.seed,
            lr_schedule: self.lr_schedule,
            loss: self.loss,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    SyntheticRatePair,
    SyntheticTemporalOrder,
    Idx,
    EventCsv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub t_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_active: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_quiet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    /// Dataset seed; defaults to the training seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DataSection {
    /// Materialize the dataset this section describes.
    pub fn load(&self, default_seed: u64) -> Result<SpikeBatch, ConfigError> {
        let seed = self.seed.unwrap_or(default_seed);
        match self.source {
            DataSource::SyntheticRatePair => {
                let kind = SyntheticKind::RatePair {
                    rate_hi: self.rate_hi.unwrap_or(0.8),
                    rate_lo: self.rate_lo.unwrap_or(0.2),
                };
                Ok(synthetic_task(
                    kind,
                    self.require(self.n_samples, "data.n_samples")?,
                    self.t_steps,
                    self.require(self.features, "data.features")?,
                    seed,
                )?)
            }
            DataSource::SyntheticTemporalOrder => {
                let kind = SyntheticKind::TemporalOrder {
                    rate_active: self.rate_active.unwrap_or(0.9),
                    rate_quiet: self.rate_quiet.unwrap_or(0.05),
                };
                Ok(synthetic_task(
                    kind,
                    self.require(self.n_samples, "data.n_samples")?,
                    self.t_steps,
                    self.require(self.features, "data.features")?,
                    seed,
                )?)
            }
            DataSource::Idx => {
                let images_path = self.require_str(&self.images_path, "data.images_path")?;
                let labels_path = self.require_str(&self.labels_path, "data.labels_path")?;
                let (images, labels) = load_idx_pair(images_path, labels_path)?;
                let num_classes = self
                    .num_classes
                    .unwrap_or_else(|| labels.iter().copied().max().map_or(1, |m| m + 1));
                Ok(direct_encode(
                    &images.images,
                    &labels,
                    num_classes,
                    self.t_steps,
                )?)
            }
            DataSource::EventCsv => {
                let path = self.require_str(&self.events_path, "data.events_path")?;
                let height = self.require(self.height, "data.height")?;
                let width = self.require(self.width, "data.width")?;
                let stream = load_event_csv(path)?;
                let binned = bin_events(&stream, self.t_steps, height, width, BinMode::Or)?;
                Ok(binned.batch)
            }
        }
    }

    fn require<T: Copy>(&self, value: Option<T>, path: &str) -> Result<T, ConfigError> {
        value.ok_or_else(|| field_err(path, format!("required for source {:?}", self.source)))
    }

    fn require_str<'a>(&self, value: &'a Option<String>, path: &str) -> Result<&'a str, ConfigError> {
        value
            .as_deref()
            .ok_or_else(|| field_err(path, format!("required for source {:?}", self.source)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_out_dir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string()]
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub neuron: NeuronSection,
    pub architecture: ArchitectureSection,
    pub training: TrainingSection,
    pub data: DataSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!(
                    "unsupported version {} (this build reads {})",
                    self.schema_version, CONFIG_SCHEMA_VERSION
                ),
            ));
        }
        self.neuron.to_params()?;
        if self.architecture.layer_sizes.is_empty() {
            return Err(field_err("architecture.layer_sizes", "must not be empty"));
        }
        if self.architecture.layer_sizes.iter().any(|s| *s == 0) {
            return Err(field_err("architecture.layer_sizes", "sizes must be positive"));
        }
        if self.training.lr <= 0.0 || !self.training.lr.is_finite() {
            return Err(field_err("training.lr", "must be positive"));
        }
        if self.training.weight_decay < 0.0 {
            return Err(field_err("training.weight_decay", "must be nonnegative"));
        }
        if self.training.batch_size == 0 {
            return Err(field_err("training.batch_size", "must be at least 1"));
        }
        if self.training.optimizer != "sgd" {
            return Err(field_err(
                "training.optimizer",
                format!("only \"sgd\" is supported, got {:?}", self.training.optimizer),
            ));
        }
        if self.data.t_steps == 0 {
            return Err(field_err("data.t_steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Resolved neuron parameters (tau override and ablation toggles applied).
    pub fn neuron_params(&self) -> Result<NeuronParams, ConfigError> {
        self.neuron.to_params()
    }

    /// A copy with a different surrogate width.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut cfg = self.clone();
        cfg.neuron.gamma = gamma;
        cfg
    }

    /// A copy switched to the given variant, toggles untouched.
    pub fn with_variant(&self, variant: NeuronVariant) -> Self {
        let mut cfg = self.clone();
        cfg.neuron.variant = variant;
        cfg
    }

    /// A copy with the ablation toggles set.
    pub fn with_toggles(&self, mpiu: bool, ciu: bool) -> Self {
        let mut cfg = self.clone();
        cfg.neuron.mpiu_enabled = mpiu;
        cfg.neuron.ciu_enabled = ciu;
        cfg
    }
}

/// A ready-to-edit starter config for the synthetic rate-pair task.
pub fn example_config() -> ExperimentConfig {
    ExperimentConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        neuron: NeuronSection {
            variant: NeuronVariant::Ilif,
            lambda: 1.0,
            tau: None,
            lambda_u: 1.0,
            lambda_i: 0.03,
            v_th: 1.0,
            gamma: 1.0,
            mpiu_enabled: true,
            ciu_enabled: true,
        },
        architecture: ArchitectureSection {
            layer_sizes: vec![16, 2],
        },
        training: TrainingSection {
            epochs: 30,
            lr: 0.1,
            weight_decay: 5e-5,
            batch_size: 32,
            seed: 1234,
            optimizer: "sgd".to_string(),
            lr_schedule: LrSchedule::Constant,
            loss: LossKind::RateMse,
        },
        data: DataSection {
            source: DataSource::SyntheticRatePair,
            t_steps: 8,
            n_samples: Some(256),
            features: Some(16),
            rate_hi: Some(0.8),
            rate_lo: Some(0.2),
            rate_active: None,
            rate_quiet: None,
            images_path: None,
            labels_path: None,
            events_path: None,
            num_classes: None,
            height: None,
            width: None,
            seed: None,
        },
        outputs: OutputsSection::default(),
    }
}
