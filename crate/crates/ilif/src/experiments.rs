//! Experiment drivers behind the CLI subcommands.
//!
//! Each driver is an ordinary library function taking a parsed
//! [`ExperimentConfig`] and an output directory; the binary is a thin
//! dispatcher over these. All drivers are deterministic under a fixed seed
//! and write schema-versioned CSV/JSON outputs, so a rerun with the same
//! config produces byte-identical files.

use crate::bptt::{
    backward, max_relative_diff_located, shortcut_attenuation, unrolled_gradient_oracle,
    OracleOptions,
};
use crate::checkpoint::{self, CheckpointError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::data::SpikeBatch;
use crate::energy::{
    count_ac, count_mac, dense_fan_outs, sop_energy, EnergyError, MacMode, MacPolicy, E_AC_PJ,
    E_MAC_PJ,
};
use crate::linalg::Matrix;
use crate::metrics::{
    continuous_firing_rate, firing_rates, MetricsError, MetricsRecord,
};
use crate::network::{
    evaluate, train, EvalResult, NetworkError, SpikingNetwork, TrainLog,
};
use crate::neuron::{
    epsilon_term, step, NeuronParams, NeuronState, NeuronVariant,
};
use crate::tape::{LayerTape, TapeError};
use crate::twin::{finite_difference_check, TwinError, TwinNetwork};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RESULT_SCHEMA_VERSION: u32 = 1;
/// Recursive backward and literal-summation oracle must agree to this
/// relative tolerance.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
/// Twin finite differences must agree with BPTT to this relative tolerance.
pub const FD_TOLERANCE: f64 = 1e-4;

pub const TRAIN_LOG_CSV: &str = "train_log.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";
pub const SWEEP_CSV: &str = "sweep_gamma.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_JSON: &str = "ablation.json";
pub const GRADCHECK_JSON: &str = "gradcheck.json";
pub const ENERGY_JSON: &str = "energy.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("io error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("sweep failed at gamma = {gamma}: {source}")]
    SweepCell {
        gamma: f64,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("tolerance violated: {0}")]
    Tolerance(String),
}

impl ExperimentError {
    /// Process exit code: 2 for validation problems, 4 for tolerance
    /// violations, 3 for everything else (runtime failures).
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Invalid(_) => 2,
            ExperimentError::Tolerance(_) => 4,
            ExperimentError::SweepCell { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    })?;
    let emit = |e: csv::Error| ExperimentError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    };
    writer.write_record(header).map_err(emit)?;
    for row in rows {
        writer.write_record(row).map_err(emit)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("result serializes");
    text.push('\n');
    text
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn mac_mode_for(variant: NeuronVariant) -> MacMode {
    if variant.is_inhibitory() {
        MacMode::SnnIlif
    } else {
        MacMode::SnnLif
    }
}

fn layer_dims(input_size: usize, layer_sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(layer_sizes.len());
    let mut prev = input_size;
    for &s in layer_sizes {
        dims.push((prev, s));
        prev = s;
    }
    dims
}

/// Overall firing rate: total spikes over total neuron-steps.
fn overall_firing_rate(tapes: &[Vec<LayerTape>]) -> f64 {
    let mut spikes = 0.0;
    let mut sites = 0usize;
    for seq in tapes {
        for tape in seq {
            for rec in &tape.steps {
                spikes += rec.spikes.iter().sum::<f64>();
                sites += rec.spikes.len();
            }
        }
    }
    if sites == 0 {
        0.0
    } else {
        spikes / sites as f64
    }
}

fn collect_metrics(
    net: &SpikingNetwork,
    eval: &EvalResult,
    t_steps: usize,
    n_sequences: usize,
) -> Result<MetricsRecord, ExperimentError> {
    let fan_outs = dense_fan_outs(&net.layer_sizes());
    let ac = count_ac(&eval.tapes, &fan_outs)?;
    let dims = layer_dims(net.input_size(), &net.layer_sizes());
    let variant = net.layers[0].params.variant;
    let mac = count_mac(&dims, t_steps, mac_mode_for(variant), MacPolicy::default())
        * n_sequences as u64;
    Ok(MetricsRecord {
        firing_rate_per_layer: firing_rates(&eval.tapes)?,
        continuous_firing_rate_per_layer: continuous_firing_rate(&eval.tapes)?,
        weight_norm_per_layer: net.weight_norms(),
        ac_count: ac,
        mac_count: mac,
        sop_energy_pj: sop_energy(ac, mac, E_AC_PJ, E_MAC_PJ),
    })
}

// ---------------------------------------------------------------------------
// train

#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub schema_version: u32,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub metrics: MetricsRecord,
    #[serde(skip)]
    pub log: TrainLog,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn train_log_csv(log: &TrainLog, n_layers: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["epoch".to_string(), "loss".to_string(), "accuracy".to_string()];
    for l in 0..n_layers {
        header.push(format!("firing_rate_l{l}"));
    }
    for l in 0..n_layers {
        header.push(format!("weight_norm_l{l}"));
    }
    let rows = log
        .epochs
        .iter()
        .map(|e| {
            let mut row = vec![e.epoch.to_string(), e.loss.to_string(), e.accuracy.to_string()];
            row.extend(e.firing_rate_per_layer.iter().map(|v| v.to_string()));
            row.extend(e.weight_norm_per_layer.iter().map(|v| v.to_string()));
            row
        })
        .collect();
    (header, rows)
}

/// Train per the config; write the per-epoch CSV, final metrics JSON and a
/// checkpoint into `out_dir`.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutcome, ExperimentError> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let data = cfg.data.load(cfg.training.seed)?;
    let (net, log, eval) = run_training(cfg, &data)?;
    let metrics = collect_metrics(&net, &eval, data.t_steps(), data.n_sequences())?;

    let mut files = Vec::new();
    let csv_path = out_dir.join(TRAIN_LOG_CSV);
    let (header, rows) = train_log_csv(&log, net.layers.len());
    write_csv(&csv_path, &header, &rows)?;
    files.push(csv_path);

    let outcome = TrainOutcome {
        schema_version: RESULT_SCHEMA_VERSION,
        final_accuracy: eval.accuracy,
        final_loss: eval.mean_loss,
        metrics: metrics.clone(),
        log,
        files: Vec::new(),
    };
    let metrics_path = out_dir.join(METRICS_JSON);
    write_text(&metrics_path, &json_line(&outcome))?;
    files.push(metrics_path);

    let ckpt_path = out_dir.join(CHECKPOINT_JSON);
    write_text(&ckpt_path, &checkpoint::to_json(&net, cfg.training.seed))?;
    files.push(ckpt_path);

    Ok(TrainOutcome { files, ..outcome })
}

/// Build the network from the config, train it on `data`, and evaluate.
pub fn run_training(
    cfg: &ExperimentConfig,
    data: &SpikeBatch,
) -> Result<(SpikingNetwork, TrainLog, EvalResult), ExperimentError> {
    let params = cfg.neuron_params()?;
    let sizes = &cfg.architecture.layer_sizes;
    if *sizes.last().unwrap() != data.num_classes() {
        return Err(ExperimentError::Invalid(format!(
            "architecture.layer_sizes ends at {} but the dataset has {} classes",
            sizes.last().unwrap(),
            data.num_classes()
        )));
    }
    let mut net = SpikingNetwork::new(data.features(), sizes, params, cfg.training.seed)?;
    let log = train(&mut net, data, &cfg.training.to_train_config())?;
    let eval = evaluate(&net, data, cfg.training.loss)?;
    Ok((net, log, eval))
}

// ---------------------------------------------------------------------------
// sweep-gamma

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub variant: NeuronVariant,
    pub accuracy: f64,
    pub mean_firing_rate: f64,
    pub mean_weight_norm: f64,
    pub firing_rate_per_layer: Vec<f64>,
    pub continuous_rate_per_layer: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub schema_version: u32,
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Train one model per gamma per variant (the plain neuron and its
/// inhibitory counterpart) on the same dataset and seed; one CSV row per
/// (gamma, variant) cell.
pub fn cmd_sweep_gamma(
    cfg: &ExperimentConfig,
    gammas: &[f64],
    out_dir: &Path,
) -> Result<SweepOutcome, ExperimentError> {
    cfg.validate()?;
    if gammas.len() < 2 {
        return Err(ExperimentError::Invalid(format!(
            "a sweep needs at least 2 gamma values, got {}",
            gammas.len()
        )));
    }
    ensure_dir(out_dir)?;
    let data = cfg.data.load(cfg.training.seed)?;
    let variants = if cfg.neuron.variant.is_learnable_decay() {
        [NeuronVariant::Plif, NeuronVariant::Iplif]
    } else {
        [NeuronVariant::Lif, NeuronVariant::Ilif]
    };
    let mut rows = Vec::with_capacity(gammas.len() * 2);
    for &gamma in gammas {
        for variant in variants {
            let cell_cfg = cfg.with_gamma(gamma).with_variant(variant);
            let row = (|| -> Result<SweepRow, ExperimentError> {
                let (net, _, eval) = run_training(&cell_cfg, &data)?;
                let norms = net.weight_norms();
                Ok(SweepRow {
                    gamma,
                    variant,
                    accuracy: eval.accuracy,
                    mean_firing_rate: overall_firing_rate(&eval.tapes),
                    mean_weight_norm: norms.iter().sum::<f64>() / norms.len() as f64,
                    firing_rate_per_layer: firing_rates(&eval.tapes)?,
                    continuous_rate_per_layer: continuous_firing_rate(&eval.tapes)?,
                })
            })()
            .map_err(|source| ExperimentError::SweepCell {
                gamma,
                source: Box::new(source),
            })?;
            rows.push(row);
        }
    }

    let n_layers = cfg.architecture.layer_sizes.len();
    let mut header = vec![
        "gamma".to_string(),
        "variant".to_string(),
        "accuracy".to_string(),
        "mean_firing_rate".to_string(),
        "mean_weight_norm".to_string(),
    ];
    for l in 0..n_layers {
        header.push(format!("firing_rate_l{l}"));
    }
    for l in 0..n_layers {
        header.push(format!("continuous_rate_l{l}"));
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.gamma.to_string(),
                format!("{:?}", r.variant).to_lowercase(),
                r.accuracy.to_string(),
                r.mean_firing_rate.to_string(),
                r.mean_weight_norm.to_string(),
            ];
            row.extend(r.firing_rate_per_layer.iter().map(|v| v.to_string()));
            row.extend(r.continuous_rate_per_layer.iter().map(|v| v.to_string()));
            row
        })
        .collect();
    let csv_path = out_dir.join(SWEEP_CSV);
    write_csv(&csv_path, &header, &csv_rows)?;

    Ok(SweepOutcome {
        schema_version: RESULT_SCHEMA_VERSION,
        rows,
        files: vec![csv_path],
    })
}

// ---------------------------------------------------------------------------
// ablate

#[derive(Clone, Debug, Serialize)]
pub struct AblateCell {
    pub mpiu: bool,
    pub ciu: bool,
    pub accuracy: f64,
    pub mean_firing_rate: f64,
    pub mean_weight_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblateOutcome {
    pub schema_version: u32,
    pub cells: Vec<AblateCell>,
    /// The no-units cell must reproduce an explicit LIF run bit-exactly.
    pub neither_equals_lif: bool,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Run the 2x2 MPIU/CIU grid with a shared seed, plus an explicit LIF run
/// to confirm the no-units cell reduces to it exactly.
pub fn cmd_ablate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<AblateOutcome, ExperimentError> {
    cfg.validate()?;
    if !cfg.neuron.variant.is_inhibitory() {
        return Err(ExperimentError::Invalid(format!(
            "ablation needs an inhibitory base variant, got {:?}",
            cfg.neuron.variant
        )));
    }
    ensure_dir(out_dir)?;
    let data = cfg.data.load(cfg.training.seed)?;
    let grid = [(true, true), (true, false), (false, true), (false, false)];
    let mut cells = Vec::with_capacity(4);
    let mut neither_log: Option<TrainLog> = None;
    for (mpiu, ciu) in grid {
        let cell_cfg = cfg.with_toggles(mpiu, ciu);
        let (net, log, eval) = run_training(&cell_cfg, &data)?;
        let norms = net.weight_norms();
        cells.push(AblateCell {
            mpiu,
            ciu,
            accuracy: eval.accuracy,
            mean_firing_rate: overall_firing_rate(&eval.tapes),
            mean_weight_norm: norms.iter().sum::<f64>() / norms.len() as f64,
        });
        if !mpiu && !ciu {
            neither_log = Some(log);
        }
    }

    let lif_variant = if cfg.neuron.variant.is_learnable_decay() {
        NeuronVariant::Plif
    } else {
        NeuronVariant::Lif
    };
    let (_, lif_log, _) = run_training(&cfg.with_variant(lif_variant), &data)?;
    let neither_equals_lif = neither_log.as_ref() == Some(&lif_log);

    let header: Vec<String> = ["mpiu", "ciu", "accuracy", "mean_firing_rate", "mean_weight_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.mpiu.to_string(),
                c.ciu.to_string(),
                c.accuracy.to_string(),
                c.mean_firing_rate.to_string(),
                c.mean_weight_norm.to_string(),
            ]
        })
        .collect();
    let csv_path = out_dir.join(ABLATION_CSV);
    write_csv(&csv_path, &header, &rows)?;

    let outcome = AblateOutcome {
        schema_version: RESULT_SCHEMA_VERSION,
        cells,
        neither_equals_lif,
        files: Vec::new(),
    };
    let json_path = out_dir.join(ABLATION_JSON);
    write_text(&json_path, &json_line(&outcome))?;

    Ok(AblateOutcome {
        files: vec![csv_path, json_path],
        ..outcome
    })
}

// ---------------------------------------------------------------------------
// gradcheck

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckOutcome {
    pub schema_version: u32,
    pub oracle_max_rel_error: f64,
    pub oracle_worst_case: String,
    pub oracle_instances: usize,
    pub fd_max_error: f64,
    pub fd_compared: usize,
    pub fd_excluded: usize,
    pub cutoff_lif_temporal_zero: bool,
    pub cutoff_ilif_phi_nonzero: bool,
    pub shortcut_unit_product: f64,
    pub pass: bool,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn record_tape(params: NeuronParams, inputs: Vec<Vec<f64>>, weights: Matrix) -> LayerTape {
    let mut state = NeuronState::zeros(weights.rows());
    let mut steps = Vec::new();
    for input in &inputs {
        let current = weights.matvec(input);
        let (rec, next) = step(&state, &current, &params).expect("consistent dimensions");
        steps.push(rec);
        state = next;
    }
    LayerTape {
        inputs,
        steps,
        weights_snapshot: weights,
        params,
    }
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    params: NeuronParams,
) -> (LayerTape, Vec<Vec<f64>>) {
    let t_len = rng.gen_range(1..=6);
    let n_in = rng.gen_range(1..=5);
    let n_out = rng.gen_range(1..=5);
    let weights = Matrix::from_vec(
        n_out,
        n_in,
        (0..n_out * n_in).map(|_| rng.gen_range(-1.5..1.5)).collect(),
    );
    let inputs: Vec<Vec<f64>> = (0..t_len)
        .map(|_| {
            (0..n_in)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let ds_out: Vec<Vec<f64>> = (0..t_len)
        .map(|_| (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (record_tape(params, inputs, weights), ds_out)
}

/// An in-band LIF instance for the cutoff check: with gamma = v_th every
/// potential stays inside the surrogate band, so all temporal factors are
/// exactly zero.
fn cutoff_lif_check() -> bool {
    let params = NeuronParams::lif();
    let weights = Matrix::from_vec(1, 1, vec![1.0]);
    // U: 0.8 (no spike), 1.1 (spike), 1.2 (spike), 0.9 (no spike) - all in
    // the (0.5, 1.5) band.
    let inputs = vec![vec![0.8], vec![0.3], vec![1.1], vec![0.7]];
    let tape = record_tape(params, inputs, weights);
    // Premise: every potential in band.
    for rec in &tape.steps {
        if (rec.potential[0] - params.v_th).abs() >= params.gamma / 2.0 {
            return false;
        }
        // The temporal factor is exactly zero in band at gamma = v_th.
        if epsilon_term(rec.potential[0], &params) != 0.0 {
            return false;
        }
    }
    let ds: Vec<Vec<f64>> = vec![vec![0.4], vec![-0.6], vec![0.8], vec![0.5]];
    let grads = backward(&tape, &ds).expect("lif backward");
    // Every multi-step product is dead, so dU[t] is the bare spatial term.
    for (t, du) in grads.du_trace.iter().enumerate() {
        let spatial = ds[t][0] / params.gamma;
        if du[0] != spatial {
            return false;
        }
    }
    true
}

/// An in-band ILIF instance with an early spike: the inhibitory pathway
/// must carry nonzero gradient to some step before T even though the
/// epsilon chain is cut.
fn cutoff_ilif_check() -> bool {
    let mut params = NeuronParams::ilif();
    params.lambda_i = 0.0; // isolate the MPIU shortcut
    let weights = Matrix::from_vec(1, 1, vec![1.0]);
    // U[0] = 1.2 (spike, in band), then stay in band without spiking.
    let inputs = vec![vec![1.2], vec![0.9], vec![0.6]];
    let tape = record_tape(params, inputs, weights);
    if tape.steps[0].spikes[0] != 1.0 {
        return false;
    }
    for rec in &tape.steps {
        if (rec.potential[0] - params.v_th).abs() >= params.gamma / 2.0 {
            return false;
        }
    }
    let ds: Vec<Vec<f64>> = vec![vec![0.5], vec![0.5], vec![0.5]];
    let grads = backward(&tape, &ds).expect("ilif backward");
    grads
        .phi_trace
        .iter()
        .take(tape.num_steps() - 1)
        .any(|row| row[0] != 0.0)
}

/// Run the full verification battery: oracle equivalence on random small
/// instances for both variants across several gammas, the twin
/// finite-difference check, the gamma = v_th cutoff construction, and the
/// no-attenuation shortcut product. Fails with a tolerance error (exit
/// code 4) if any bound is violated.
pub fn cmd_gradcheck(seed: u64, out_dir: &Path) -> Result<GradcheckOutcome, ExperimentError> {
    ensure_dir(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Oracle equivalence.
    let mut oracle_max = 0.0f64;
    let mut oracle_worst = String::from("-");
    let mut instances = 0usize;
    for inhibitory in [false, true] {
        for gamma in [0.5, 1.0, 2.0] {
            for _ in 0..35 {
                let params = if inhibitory {
                    let mut p = NeuronParams::ilif().with_gamma(gamma);
                    p.lambda = rng.gen_range(0.2..=1.0);
                    p.lambda_u = rng.gen_range(0.1..=1.0);
                    p.lambda_i = rng.gen_range(0.01..=0.2);
                    p
                } else {
                    NeuronParams::lif()
                        .with_gamma(gamma)
                        .with_lambda(rng.gen_range(0.2..=1.0))
                };
                let (tape, ds) = random_instance(&mut rng, params);
                let recursive = backward(&tape, &ds)?;
                let literal = unrolled_gradient_oracle(&tape, &ds, OracleOptions::default())?;
                let (diff, at) = max_relative_diff_located(&recursive, &literal);
                if diff > oracle_max {
                    oracle_max = diff;
                    oracle_worst = format!(
                        "variant={:?} gamma={gamma} instance={instances} entry={at}",
                        params.variant
                    );
                }
                instances += 1;
            }
        }
    }

    // Twin finite differences.
    let mut fd_max = 0.0f64;
    let mut fd_compared = 0usize;
    let mut fd_excluded = 0usize;
    for _ in 0..12 {
        let n_layers = rng.gen_range(2..=3);
        let mut sizes = vec![rng.gen_range(2..=3usize)];
        for _ in 0..n_layers {
            sizes.push(rng.gen_range(2..=3));
        }
        let mut weights = Vec::new();
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            weights.push(Matrix::from_vec(
                w[1],
                w[0],
                (0..w[0] * w[1]).map(|_| rng.gen_range(-1.0..1.5)).collect(),
            ));
            params.push(NeuronParams::lif().with_lambda(rng.gen_range(0.3..=1.0)));
        }
        let net = TwinNetwork { weights, params };
        let t_len = rng.gen_range(2..=4);
        let input: Vec<Vec<f64>> = (0..t_len)
            .map(|_| (0..sizes[0]).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let mut target = vec![0.0; *sizes.last().unwrap()];
        target[0] = 1.0;
        let report = finite_difference_check(&net, &input, &target, 1e-5)?;
        fd_max = fd_max.max(report.max_relative_error);
        fd_compared += report.compared;
        fd_excluded += report.excluded;
    }

    // Cutoff construction and shortcut product.
    let cutoff_lif = cutoff_lif_check();
    let cutoff_ilif = cutoff_ilif_check();
    let mut unit = NeuronParams::ilif();
    unit.lambda_u = 1.0;
    let tape = record_tape(
        unit,
        vec![vec![1.2], vec![0.4], vec![0.9], vec![0.7], vec![1.1]],
        Matrix::from_vec(1, 1, vec![1.0]),
    );
    let shortcut = shortcut_attenuation(&tape, tape.num_steps() - 1, 0)?;

    let pass = oracle_max <= ORACLE_TOLERANCE
        && fd_max < FD_TOLERANCE
        && cutoff_lif
        && cutoff_ilif
        && shortcut == 1.0;

    let outcome = GradcheckOutcome {
        schema_version: RESULT_SCHEMA_VERSION,
        oracle_max_rel_error: oracle_max,
        oracle_worst_case: oracle_worst,
        oracle_instances: instances,
        fd_max_error: fd_max,
        fd_compared,
        fd_excluded,
        cutoff_lif_temporal_zero: cutoff_lif,
        cutoff_ilif_phi_nonzero: cutoff_ilif,
        shortcut_unit_product: shortcut,
        pass,
        files: Vec::new(),
    };
    let json_path = out_dir.join(GRADCHECK_JSON);
    write_text(&json_path, &json_line(&outcome))?;
    if !pass {
        return Err(ExperimentError::Tolerance(format!(
            "oracle={oracle_max:e} (worst {}) fd={fd_max:e} cutoff_lif={cutoff_lif} \
             cutoff_ilif={cutoff_ilif} shortcut={shortcut}",
            outcome.oracle_worst_case
        )));
    }
    Ok(GradcheckOutcome {
        files: vec![json_path],
        ..outcome
    })
}

// ---------------------------------------------------------------------------
// energy

#[derive(Clone, Debug, Serialize)]
pub struct EnergyModelReport {
    pub checkpoint: String,
    pub variant: NeuronVariant,
    pub accuracy: f64,
    pub ac_count: u64,
    pub mac_count: u64,
    pub sop_energy_pj: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyOutcome {
    pub schema_version: u32,
    pub e_ac_pj: f64,
    pub e_mac_pj: f64,
    pub models: Vec<EnergyModelReport>,
    /// Present when exactly one of the two models is inhibitory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mac_ratio_ilif_over_lif: Option<f64>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn energy_report(
    path: &Path,
    cfg: &ExperimentConfig,
    data: &SpikeBatch,
) -> Result<EnergyModelReport, ExperimentError> {
    let (net, _) = checkpoint::load(path)?;
    if net.input_size() != data.features() {
        return Err(ExperimentError::Invalid(format!(
            "checkpoint {} expects {} input features but the dataset has {}",
            path.display(),
            net.input_size(),
            data.features()
        )));
    }
    if net.output_size() != data.num_classes() {
        return Err(ExperimentError::Invalid(format!(
            "checkpoint {} outputs {} classes but the dataset has {}",
            path.display(),
            net.output_size(),
            data.num_classes()
        )));
    }
    let eval = evaluate(&net, data, cfg.training.loss)?;
    let fan_outs = dense_fan_outs(&net.layer_sizes());
    let ac = count_ac(&eval.tapes, &fan_outs)?;
    let variant = net.layers[0].params.variant;
    let dims = layer_dims(net.input_size(), &net.layer_sizes());
    let mac = count_mac(&dims, data.t_steps(), mac_mode_for(variant), MacPolicy::default())
        * data.n_sequences() as u64;
    Ok(EnergyModelReport {
        checkpoint: path.display().to_string(),
        variant,
        accuracy: eval.accuracy,
        ac_count: ac,
        mac_count: mac,
        sop_energy_pj: sop_energy(ac, mac, E_AC_PJ, E_MAC_PJ),
    })
}

/// Evaluate one or two checkpoints on the config's dataset and report
/// synaptic-operation counts and energy. With a matched LIF/ILIF pair the
/// MAC ratio is included.
pub fn cmd_energy(
    cfg: &ExperimentConfig,
    checkpoint_a: &Path,
    checkpoint_b: Option<&Path>,
    out_dir: &Path,
) -> Result<EnergyOutcome, ExperimentError> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let data = cfg.data.load(cfg.training.seed)?;
    let mut models = vec![energy_report(checkpoint_a, cfg, &data)?];
    if let Some(b) = checkpoint_b {
        models.push(energy_report(b, cfg, &data)?);
    }
    let mac_ratio_ilif_over_lif = match models.as_slice() {
        [a, b] => match (a.variant.is_inhibitory(), b.variant.is_inhibitory()) {
            (true, false) => Some(a.mac_count as f64 / b.mac_count as f64),
            (false, true) => Some(b.mac_count as f64 / a.mac_count as f64),
            _ => None,
        },
        _ => None,
    };
    let outcome = EnergyOutcome {
        schema_version: RESULT_SCHEMA_VERSION,
        e_ac_pj: E_AC_PJ,
        e_mac_pj: E_MAC_PJ,
        models,
        mac_ratio_ilif_over_lif,
        files: Vec::new(),
    };
    let json_path = out_dir.join(ENERGY_JSON);
    write_text(&json_path, &json_line(&outcome))?;
    Ok(EnergyOutcome {
        files: vec![json_path],
        ..outcome
    })
}

// ---------------------------------------------------------------------------
// helpers shared with the acceptance suite

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Average rank over the tie run (1-based ranks).
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[order[k]] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
