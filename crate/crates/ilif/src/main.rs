//! Thin CLI over the experiment drivers.
//!
//! Exit codes: 0 success, 2 config/validation error, 3 runtime error,
//! 4 tolerance violation in `gradcheck`.

use clap::{Args, Parser, Subcommand};
use ilif::config::ExperimentConfig;
use ilif::experiments::{
    cmd_ablate, cmd_energy, cmd_gradcheck, cmd_sweep_gamma, cmd_train, ExperimentError,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ilif",
    about = "Spiking-network training and analysis with inhibitory LIF neurons",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `outputs.dir`. The
    /// ILIF_OUT_DIR environment variable overrides both.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the per-epoch log, metrics and checkpoint.
    Train(CommonArgs),
    /// Train one model per gamma per variant and tabulate the sweep.
    SweepGamma {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated surrogate widths, e.g. 0.5,1,2,4.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
    },
    /// Run the 2x2 MPIU/CIU ablation grid with a shared seed.
    Ablate(CommonArgs),
    /// Verify the gradient engine: oracle equivalence, finite differences,
    /// the gamma = v_th cutoff and the no-attenuation shortcut.
    Gradcheck {
        /// Optional config; only its training seed is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate checkpoints on the config's dataset and report AC/MAC/SOP.
    Energy {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Optional second checkpoint for a LIF-vs-ILIF comparison.
        #[arg(long)]
        checkpoint_b: Option<PathBuf>,
    },
}

fn load_config(args: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    let out = resolve_out_dir(args.out.clone(), &cfg);
    Ok((cfg, out))
}

fn resolve_out_dir(cli_out: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    if let Ok(dir) = std::env::var("ILIF_OUT_DIR") {
        return PathBuf::from(dir);
    }
    cli_out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir))
}

fn run() -> Result<(), ExperimentError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let (cfg, out) = load_config(&args)?;
            let outcome = cmd_train(&cfg, &out)?;
            println!(
                "train: accuracy {:.4}, loss {:.6}, outputs in {}",
                outcome.final_accuracy,
                outcome.final_loss,
                out.display()
            );
        }
        Command::SweepGamma { common, gammas } => {
            let (cfg, out) = load_config(&common)?;
            let outcome = cmd_sweep_gamma(&cfg, &gammas, &out)?;
            for row in &outcome.rows {
                println!(
                    "sweep: gamma {:>5} {:?}: accuracy {:.4}, firing rate {:.4}, weight norm {:.4}",
                    row.gamma, row.variant, row.accuracy, row.mean_firing_rate, row.mean_weight_norm
                );
            }
            println!("sweep: table in {}", out.display());
        }
        Command::Ablate(args) => {
            let (cfg, out) = load_config(&args)?;
            let outcome = cmd_ablate(&cfg, &out)?;
            for cell in &outcome.cells {
                println!(
                    "ablate: mpiu={} ciu={}: accuracy {:.4}, firing rate {:.4}",
                    cell.mpiu, cell.ciu, cell.accuracy, cell.mean_firing_rate
                );
            }
            println!(
                "ablate: no-units cell reproduces LIF exactly: {}",
                outcome.neither_equals_lif
            );
        }
        Command::Gradcheck { config, out, seed } => {
            let cfg = config
                .map(|p| ExperimentConfig::from_path(&p))
                .transpose()?;
            let seed = seed
                .or_else(|| cfg.as_ref().map(|c| c.training.seed))
                .unwrap_or(1234);
            let out = match (out, &cfg) {
                (Some(o), _) => o,
                (None, Some(c)) => resolve_out_dir(None, c),
                (None, None) => std::env::var("ILIF_OUT_DIR")
                    .map(PathBuf::from)
                    .unwrap_or_else(|_| PathBuf::from("out")),
            };
            let outcome = cmd_gradcheck(seed, &out)?;
            println!(
                "gradcheck: oracle {:e} over {} instances, fd {:e} over {} weights \
                 ({} kink-excluded), cutoff lif={} ilif={}, shortcut {}",
                outcome.oracle_max_rel_error,
                outcome.oracle_instances,
                outcome.fd_max_error,
                outcome.fd_compared,
                outcome.fd_excluded,
                outcome.cutoff_lif_temporal_zero,
                outcome.cutoff_ilif_phi_nonzero,
                outcome.shortcut_unit_product
            );
        }
        Command::Energy {
            common,
            checkpoint,
            checkpoint_b,
        } => {
            let (cfg, out) = load_config(&common)?;
            let outcome = cmd_energy(&cfg, &checkpoint, checkpoint_b.as_deref(), &out)?;
            for model in &outcome.models {
                println!(
                    "energy: {:?} ac={} mac={} sop={:.1} pJ (accuracy {:.4})",
                    model.variant, model.ac_count, model.mac_count, model.sop_energy_pj, model.accuracy
                );
            }
            if let Some(ratio) = outcome.mac_ratio_ilif_over_lif {
                println!("energy: ILIF/LIF MAC ratio = {ratio}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
