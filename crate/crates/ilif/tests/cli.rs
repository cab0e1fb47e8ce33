//! Integration tests driving the compiled binary: flag parsing, exit codes
//! and byte-level determinism of the emitted files.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ilif"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn small_config(out_dir: &Path) -> String {
    format!(
        r#"
schema_version = 1

[neuron]
variant = "ilif"
lambda = 1.0
lambda_u = 1.0
lambda_i = 0.03
v_th = 1.0
gamma = 1.0

[architecture]
layer_sizes = [8, 2]

[training]
epochs = 3
lr = 0.1
weight_decay = 5e-5
batch_size = 16
seed = 1234

[data]
source = "synthetic-rate-pair"
t_steps = 6
n_samples = 48
features = 8

[outputs]
dir = "{}"
"#,
        out_dir.display()
    )
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("ILIF_OUT_DIR").output().expect("binary runs")
}

#[test]
fn train_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &small_config(&out));
    let result = run(bin().arg("train").arg("--config").arg(&config));
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("train_log.csv").exists());
    assert!(out.join("metrics.json").exists());
    assert!(out.join("checkpoint.json").exists());
    // Row count equals the epoch count (plus the header).
    let csv = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config = write_config(dir.path(), &small_config(&out_a));
    assert!(run(bin().arg("train").arg("--config").arg(&config)).status.success());
    assert!(run(bin()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_b))
    .status
    .success());
    for name in ["train_log.csv", "metrics.json", "checkpoint.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn invalid_gamma_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = small_config(&out).replace("gamma = 1.0", "gamma = -0.5");
    let config = write_config(dir.path(), &body);
    let result = run(bin().arg("train").arg("--config").arg(&config));
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("neuron.gamma"), "stderr: {stderr}");
}

#[test]
fn sweep_requires_gammas_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &small_config(&out));
    let result = run(bin().arg("sweep-gamma").arg("--config").arg(&config));
    // clap usage errors exit with 2, same class as config validation.
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn sweep_single_gamma_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &small_config(&out));
    let result = run(bin()
        .arg("sweep-gamma")
        .arg("--config")
        .arg(&config)
        .arg("--gammas")
        .arg("1.0"));
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_with_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run(bin().arg("gradcheck").arg("--out").arg(&out));
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("gradcheck.json").exists());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("shortcut 1"), "stdout: {stdout}");
}

#[test]
fn energy_reports_mac_ratio_for_matched_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &small_config(&out));
    assert!(run(bin().arg("train").arg("--config").arg(&config)).status.success());
    // Train a LIF counterpart into a second directory.
    let out_lif = dir.path().join("out_lif");
    let body = small_config(&out_lif).replace("variant = \"ilif\"", "variant = \"lif\"");
    let config_lif = write_config(&dir.path().join("."), &body);
    assert!(run(bin().arg("train").arg("--config").arg(&config_lif)).status.success());

    let result = run(bin()
        .arg("energy")
        .arg("--config")
        .arg(&config)
        .arg("--checkpoint")
        .arg(out.join("checkpoint.json"))
        .arg("--checkpoint-b")
        .arg(out_lif.join("checkpoint.json")));
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("MAC ratio = 2"), "stdout: {stdout}");
}

#[test]
fn env_var_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let ignored = dir.path().join("ignored");
    let forced = dir.path().join("forced");
    let config = write_config(dir.path(), &small_config(&ignored));
    let result = bin()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .env("ILIF_OUT_DIR", &forced)
        .output()
        .unwrap();
    assert!(result.status.success());
    assert!(forced.join("train_log.csv").exists());
    assert!(!ignored.exists());
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let result = run(bin().arg("train").arg("--config").arg("/nonexistent.toml"));
    assert_eq!(result.status.code(), Some(2));
}
