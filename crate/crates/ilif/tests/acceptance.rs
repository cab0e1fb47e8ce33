//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines
//! (add `--release` for speed; the trend criteria train real models).

use ilif::bptt::{backward, max_relative_diff_located};
use ilif::config::{example_config, DataSource, ExperimentConfig};
use ilif::experiments::{
    cmd_ablate, cmd_energy, cmd_gradcheck, cmd_sweep_gamma, cmd_train, spearman, SweepRow,
    FD_TOLERANCE, ORACLE_TOLERANCE,
};
use ilif::network::{rate_mse_loss, SpikingNetwork};
use ilif::neuron::{NeuronParams, NeuronVariant};
use ilif::{
    checkpoint, count_ac, shortcut_attenuation, sop_energy, Matrix, E_AC_PJ, E_MAC_PJ,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use ilif::energy::dense_fan_outs;

fn check(n: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {n:02} {name}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

/// Criterion 1: with both inhibitory decays at zero, ILIF forward tapes and
/// backward gradients are bit-identical to LIF over 100 random
/// configurations, in under 10 seconds.
#[test]
fn c01_reduction_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for case in 0..100 {
        let n_layers = rng.gen_range(1..=3);
        let mut sizes = Vec::new();
        for _ in 0..n_layers {
            sizes.push(rng.gen_range(1..=6));
        }
        let input_size = rng.gen_range(1..=6);
        let t_len = rng.gen_range(1..=8);
        let lambda = rng.gen_range(0.2..=1.0);
        let gamma = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let lif = NeuronParams::lif().with_lambda(lambda).with_gamma(gamma);
        let mut inert = NeuronParams::ilif().with_lambda(lambda).with_gamma(gamma);
        inert.lambda_u = 0.0;
        inert.lambda_i = 0.0;
        let seed = rng.gen();
        // Same seed and shapes: identical initial weights for both nets.
        let net_lif = SpikingNetwork::new(input_size, &sizes, lif, seed).unwrap();
        let net_inert = SpikingNetwork::new(input_size, &sizes, inert, seed).unwrap();
        let input: Vec<Vec<f64>> = (0..t_len)
            .map(|_| (0..input_size).map(|_| rng.gen_range(0.0..1.5)).collect())
            .collect();
        let (out_a, tapes_a) = net_lif.forward_sequence(&input).unwrap();
        let (out_b, tapes_b) = net_inert.forward_sequence(&input).unwrap();
        assert_eq!(out_a, out_b, "case {case}: outputs diverged");
        for (ta, tb) in tapes_a.iter().zip(&tapes_b) {
            assert_eq!(ta.steps, tb.steps, "case {case}: tapes diverged");
            assert_eq!(ta.inputs, tb.inputs);
        }
        // Backward with a shared upstream gradient.
        let classes = *sizes.last().unwrap();
        let mut target = vec![0.0; classes];
        target[rng.gen_range(0..classes)] = 1.0;
        let (_, ds_a) = rate_mse_loss(&out_a, &target).unwrap();
        let grads_a = net_lif.backward_sequence(&tapes_a, &ds_a).unwrap();
        let grads_b = net_inert.backward_sequence(&tapes_b, &ds_a).unwrap();
        assert_eq!(
            grads_a.layers, grads_b.layers,
            "case {case}: gradients diverged"
        );
    }
    let elapsed = start.elapsed();
    check(
        1,
        "reduction-identity",
        elapsed.as_secs() < 10,
        &format!("took {elapsed:?}, budget 10 s"),
    );
}

/// Criteria 2-5 share one gradcheck run: oracle equivalence, the twin
/// finite-difference check, the gamma = v_th cutoff and the shortcut
/// product are all produced by the same battery.
fn gradcheck_outcome() -> ilif::experiments::GradcheckOutcome {
    let dir = tempfile::tempdir().unwrap();
    cmd_gradcheck(1234, dir.path()).expect("gradcheck battery passes")
}

/// Criterion 2: recursive backward vs literal-summation oracle to relative
/// 1e-10 on >= 100 random small instances per variant across
/// gamma in {0.5, 1, 2}, in under 60 seconds.
#[test]
fn c02_gradient_oracle_equivalence() {
    let start = Instant::now();
    let outcome = gradcheck_outcome();
    check(
        2,
        "oracle-equivalence",
        outcome.oracle_instances >= 200
            && outcome.oracle_max_rel_error <= ORACLE_TOLERANCE
            && start.elapsed().as_secs() < 60,
        &format!(
            "instances {} max rel {} (worst {}) in {:?}",
            outcome.oracle_instances,
            outcome.oracle_max_rel_error,
            outcome.oracle_worst_case,
            start.elapsed()
        ),
    );
}

/// Criterion 3: twin finite differences agree with BPTT to better than
/// 1e-4 relative (kink-straddling weights excluded), in under 60 seconds.
#[test]
fn c03_twin_finite_difference() {
    let start = Instant::now();
    let outcome = gradcheck_outcome();
    check(
        3,
        "twin-finite-difference",
        outcome.fd_compared > 0
            && outcome.fd_max_error < FD_TOLERANCE
            && start.elapsed().as_secs() < 60,
        &format!(
            "fd max {} over {} weights ({} excluded) in {:?}",
            outcome.fd_max_error,
            outcome.fd_compared,
            outcome.fd_excluded,
            start.elapsed()
        ),
    );
}

/// Criterion 4: with gamma = v_th and all potentials in band, every LIF
/// temporal product term is exactly zero while the ILIF inhibitory trace
/// stays nonzero before the final step. Exact assertions, no tolerance.
#[test]
fn c04_gamma_cutoff() {
    let outcome = gradcheck_outcome();
    check(
        4,
        "gamma-vth-cutoff",
        outcome.cutoff_lif_temporal_zero && outcome.cutoff_ilif_phi_nonzero,
        &format!(
            "lif temporal zero: {}, ilif phi nonzero: {}",
            outcome.cutoff_lif_temporal_zero, outcome.cutoff_ilif_phi_nonzero
        ),
    );
}

/// Criterion 5: with MPIU decay 1 the backward chain product over any span
/// equals 1.0 exactly.
#[test]
fn c05_shortcut_attenuation() {
    let outcome = gradcheck_outcome();
    let mut ok = outcome.shortcut_unit_product == 1.0;
    // Spot-check arbitrary spans directly.
    let mut params = NeuronParams::ilif();
    params.lambda_u = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let net = SpikingNetwork::new(2, &[2], params, 7).unwrap();
    let input: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..2).map(|_| rng.gen_range(0.0..1.5)).collect())
        .collect();
    let (_, tapes) = net.forward_sequence(&input).unwrap();
    for from_t in 0..8 {
        for to_t in 0..=from_t {
            ok &= shortcut_attenuation(&tapes[0], from_t, to_t).unwrap() == 1.0;
        }
    }
    check(
        5,
        "shortcut-attenuation",
        ok,
        &format!("unit product {}", outcome.shortcut_unit_product),
    );
}

/// Criterion 6: at the output layer under the mean-rate loss, the
/// inhibitory extra gradient is >= 0 for target-1 classes and <= 0 for
/// target-0 classes (zeros allowed), over 50 randomized instances in the
/// reference regime (gamma = v_th, nonnegative currents).
#[test]
fn c06_phi_sign_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut checked = 0usize;
    for instance in 0..50 {
        let classes = rng.gen_range(2..=4);
        let n_in = rng.gen_range(2..=5);
        let t_len = rng.gen_range(3..=6);
        let params = NeuronParams::ilif();
        let weights = Matrix::from_vec(
            classes,
            n_in,
            (0..classes * n_in).map(|_| rng.gen_range(0.3..1.2)).collect(),
        );
        let layer = ilif::DenseSpikingLayer {
            weights,
            params,
            decay_logit: None,
        };
        let net = SpikingNetwork { layers: vec![layer] };
        let input: Vec<Vec<f64>> = (0..t_len)
            .map(|_| (0..n_in).map(|_| rng.gen_range(0.4..1.0)).collect())
            .collect();
        let (outputs, tapes) = net.forward_sequence(&input).unwrap();
        // Premise of the sign analysis: adjusted currents stay nonnegative.
        for rec in &tapes[0].steps {
            for c in &rec.current {
                assert!(*c >= 0.0, "instance {instance}: negative current");
            }
        }
        let target_class = rng.gen_range(0..classes);
        let mut target = vec![0.0; classes];
        target[target_class] = 1.0;
        let (_, ds) = rate_mse_loss(&outputs, &target).unwrap();
        let grads = backward(&tapes[0], &ds).unwrap();
        for row in &grads.phi_trace {
            for (j, phi) in row.iter().enumerate() {
                if j == target_class {
                    assert!(
                        *phi >= 0.0,
                        "instance {instance}: phi {phi} < 0 for target-1 class"
                    );
                } else {
                    assert!(
                        *phi <= 0.0,
                        "instance {instance}: phi {phi} > 0 for target-0 class"
                    );
                }
                checked += 1;
            }
        }
    }
    check(
        6,
        "phi-sign-property",
        checked > 0,
        &format!("checked {checked} entries"),
    );
}

fn sweep_config_small_net() -> ExperimentConfig {
    // Reference desk-scale configuration for the gamma-dilemma trend: a
    // small net whose weight growth tracks the surrogate width cleanly.
    let mut cfg = example_config();
    cfg.architecture.layer_sizes = vec![24, 2];
    cfg.training.epochs = 60;
    cfg.training.seed = 1234;
    cfg.data.source = DataSource::SyntheticRatePair;
    cfg.data.t_steps = 8;
    cfg.data.n_samples = Some(256);
    cfg.data.features = Some(16);
    cfg.data.rate_hi = Some(0.8);
    cfg.data.rate_lo = Some(0.2);
    cfg
}

fn sweep_config_strong_drive() -> ExperimentConfig {
    // Reference configuration for the inhibition effect: stronger drive and
    // a wider hidden layer, where the plain LIF overactivates.
    let mut cfg = sweep_config_small_net();
    cfg.architecture.layer_sizes = vec![48, 2];
    cfg.training.epochs = 30;
    cfg.data.rate_hi = Some(0.9);
    cfg
}

const SWEEP_GAMMAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

fn rows_for<'a>(rows: &'a [SweepRow], variant: NeuronVariant) -> Vec<&'a SweepRow> {
    rows.iter().filter(|r| r.variant == variant).collect()
}

/// Criterion 7: LIF sweep over gamma in {0.5, 1, 2, 4} on the rate-pair
/// task - Spearman correlation of (gamma, firing rate) and (gamma, weight
/// norm) both at least 0.8. Budget 15 minutes.
#[test]
fn c07_gamma_dilemma_trend() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let outcome = cmd_sweep_gamma(&sweep_config_small_net(), &SWEEP_GAMMAS, dir.path()).unwrap();
    let lif = rows_for(&outcome.rows, NeuronVariant::Lif);
    let gammas: Vec<f64> = lif.iter().map(|r| r.gamma).collect();
    let rates: Vec<f64> = lif.iter().map(|r| r.mean_firing_rate).collect();
    let norms: Vec<f64> = lif.iter().map(|r| r.mean_weight_norm).collect();
    let s_rate = spearman(&gammas, &rates);
    let s_norm = spearman(&gammas, &norms);
    check(
        7,
        "gamma-dilemma-trend",
        s_rate >= 0.8 && s_norm >= 0.8 && start.elapsed().as_secs() < 900,
        &format!(
            "spearman(gamma, rate) = {s_rate:.3}, spearman(gamma, norm) = {s_norm:.3}, \
             rates {rates:?}, norms {norms:?}, in {:?}",
            start.elapsed()
        ),
    );
}

/// Criterion 8: at every swept gamma, ILIF mean firing rate <= LIF's;
/// ILIF continuous firing rate <= LIF's in at least 75% of layer
/// instances; ILIF accuracy spread over gamma <= LIF's. Budget 15 minutes.
#[test]
fn c08_ilif_inhibition_effect() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let outcome = cmd_sweep_gamma(&sweep_config_strong_drive(), &SWEEP_GAMMAS, dir.path()).unwrap();
    let lif = rows_for(&outcome.rows, NeuronVariant::Lif);
    let inhib = rows_for(&outcome.rows, NeuronVariant::Ilif);
    assert_eq!(lif.len(), inhib.len());

    let mut dominance = true;
    let mut cfr_le = 0usize;
    let mut cfr_total = 0usize;
    for (a, b) in lif.iter().zip(&inhib) {
        assert_eq!(a.gamma, b.gamma);
        dominance &= b.mean_firing_rate <= a.mean_firing_rate;
        for (ca, cb) in a
            .continuous_rate_per_layer
            .iter()
            .zip(&b.continuous_rate_per_layer)
        {
            cfr_total += 1;
            if cb <= ca {
                cfr_le += 1;
            }
        }
    }
    let spread = |rows: &[&SweepRow]| {
        let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
        accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - accs.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let lif_spread = spread(&lif);
    let ilif_spread = spread(&inhib);
    check(
        8,
        "ilif-inhibition-effect",
        dominance
            && cfr_le * 4 >= cfr_total * 3
            && ilif_spread <= lif_spread
            && start.elapsed().as_secs() < 900,
        &format!(
            "dominance {dominance}, cfr {cfr_le}/{cfr_total}, spread ilif {ilif_spread} vs \
             lif {lif_spread}, lif rates {:?}, ilif rates {:?}, in {:?}",
            lif.iter().map(|r| r.mean_firing_rate).collect::<Vec<_>>(),
            inhib.iter().map(|r| r.mean_firing_rate).collect::<Vec<_>>(),
            start.elapsed()
        ),
    );
}

/// Criterion 9: ablation ordering on the temporal-order task with a shared
/// seed - both units >= MPIU-only >= none and both >= CIU-only >= none in
/// final accuracy (ties allowed), and the no-units cell reproduces an
/// explicit LIF run bit-exactly. Budget 20 minutes.
#[test]
fn c09_ablation_direction() {
    let start = Instant::now();
    let mut cfg = example_config();
    cfg.architecture.layer_sizes = vec![24, 2];
    cfg.training.epochs = 40;
    cfg.training.seed = 1234;
    cfg.data.source = DataSource::SyntheticTemporalOrder;
    cfg.data.t_steps = 10;
    cfg.data.n_samples = Some(256);
    cfg.data.features = Some(16);
    cfg.data.rate_active = Some(0.7);
    cfg.data.rate_quiet = Some(0.15);
    let dir = tempfile::tempdir().unwrap();
    let outcome = cmd_ablate(&cfg, dir.path()).unwrap();
    let acc = |mpiu: bool, ciu: bool| {
        outcome
            .cells
            .iter()
            .find(|c| c.mpiu == mpiu && c.ciu == ciu)
            .expect("cell present")
            .accuracy
    };
    let both = acc(true, true);
    let mpiu_only = acc(true, false);
    let ciu_only = acc(false, true);
    let none = acc(false, false);
    let ordering = both >= mpiu_only && mpiu_only >= none && both >= ciu_only && ciu_only >= none;
    check(
        9,
        "ablation-direction",
        ordering && outcome.neither_equals_lif && start.elapsed().as_secs() < 1200,
        &format!(
            "both {both} mpiu {mpiu_only} ciu {ciu_only} none {none}, \
             neither==lif {} in {:?}",
            outcome.neither_equals_lif,
            start.elapsed()
        ),
    );
}

/// Criterion 10: AC counting matches a per-spike enumeration oracle
/// exactly; the ILIF/LIF MAC ratio on matched architectures is exactly 2;
/// the energy constants reproduce the reference arithmetic exactly.
#[test]
fn c10_energy_model() {
    // AC oracle equivalence on random instances.
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..25 {
        let sizes = vec![rng.gen_range(2..=5), rng.gen_range(2..=4)];
        let input_size = rng.gen_range(2..=5);
        let net = SpikingNetwork::new(input_size, &sizes, NeuronParams::ilif(), rng.gen()).unwrap();
        let t_len = rng.gen_range(1..=6);
        let mut all_tapes = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let input: Vec<Vec<f64>> = (0..t_len)
                .map(|_| (0..input_size).map(|_| rng.gen_range(0.0..1.5)).collect())
                .collect();
            let (_, tapes) = net.forward_sequence(&input).unwrap();
            all_tapes.push(tapes);
        }
        let fan_outs = dense_fan_outs(&net.layer_sizes());
        let fast = count_ac(&all_tapes, &fan_outs).unwrap();
        let mut slow = 0u64;
        for seq in &all_tapes {
            for (l, tape) in seq.iter().enumerate() {
                for rec in &tape.steps {
                    for s in &rec.spikes {
                        if *s == 1.0 {
                            slow += fan_outs[l] as u64;
                        }
                    }
                }
            }
        }
        assert_eq!(fast, slow, "AC count diverged from the per-spike oracle");
    }

    // MAC ratio on matched checkpoints through the energy command.
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_config();
    cfg.architecture.layer_sizes = vec![8, 2];
    cfg.data.n_samples = Some(16);
    cfg.data.features = Some(16);
    let lif_net = SpikingNetwork::new(16, &[8, 2], NeuronParams::lif(), 1234).unwrap();
    let ilif_net = SpikingNetwork::new(16, &[8, 2], NeuronParams::ilif(), 1234).unwrap();
    let lif_path = dir.path().join("lif.json");
    let ilif_path = dir.path().join("ilif.json");
    checkpoint::save(&lif_net, 1234, &lif_path).unwrap();
    checkpoint::save(&ilif_net, 1234, &ilif_path).unwrap();
    let outcome = cmd_energy(&cfg, &ilif_path, Some(&lif_path), dir.path()).unwrap();
    let ratio = outcome.mac_ratio_ilif_over_lif.expect("matched pair");

    let arithmetic_ok = sop_energy(6, 0, E_AC_PJ, E_MAC_PJ) == 5.4
        && sop_energy(0, 1, E_AC_PJ, E_MAC_PJ) == 4.6
        && sop_energy(0, 0, E_AC_PJ, E_MAC_PJ) == 0.0;
    check(
        10,
        "energy-model",
        ratio == 2.0 && arithmetic_ok,
        &format!("mac ratio {ratio}, arithmetic ok {arithmetic_ok}"),
    );
}

/// Criterion 11: every subcommand rerun with the same config and seed
/// produces byte-identical CSV/JSON outputs.
#[test]
fn c11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_config();
    cfg.architecture.layer_sizes = vec![8, 2];
    cfg.training.epochs = 3;
    cfg.training.seed = 1234;
    cfg.data.n_samples = Some(48);
    cfg.data.features = Some(8);

    let compare_dirs = |a: &std::path::Path, b: &std::path::Path| {
        let mut names: Vec<String> = std::fs::read_dir(a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in &names {
            let x = std::fs::read(a.join(name)).unwrap();
            let y = std::fs::read(b.join(name)).unwrap();
            assert_eq!(x, y, "output {name} differs between reruns");
        }
        names.len()
    };

    let mut files = 0usize;

    let (ta, tb) = (dir.path().join("train_a"), dir.path().join("train_b"));
    cmd_train(&cfg, &ta).unwrap();
    cmd_train(&cfg, &tb).unwrap();
    files += compare_dirs(&ta, &tb);

    let (sa, sb) = (dir.path().join("sweep_a"), dir.path().join("sweep_b"));
    cmd_sweep_gamma(&cfg, &[1.0, 2.0], &sa).unwrap();
    cmd_sweep_gamma(&cfg, &[1.0, 2.0], &sb).unwrap();
    files += compare_dirs(&sa, &sb);

    let (aa, ab) = (dir.path().join("ablate_a"), dir.path().join("ablate_b"));
    cmd_ablate(&cfg, &aa).unwrap();
    cmd_ablate(&cfg, &ab).unwrap();
    files += compare_dirs(&aa, &ab);

    let (ga, gb) = (dir.path().join("grad_a"), dir.path().join("grad_b"));
    cmd_gradcheck(1234, &ga).unwrap();
    cmd_gradcheck(1234, &gb).unwrap();
    files += compare_dirs(&ga, &gb);

    let ckpt = dir.path().join("model.json");
    let net = SpikingNetwork::new(8, &[8, 2], NeuronParams::ilif(), 1234).unwrap();
    checkpoint::save(&net, 1234, &ckpt).unwrap();
    let (ea, eb) = (dir.path().join("energy_a"), dir.path().join("energy_b"));
    cmd_energy(&cfg, &ckpt, None, &ea).unwrap();
    cmd_energy(&cfg, &ckpt, None, &eb).unwrap();
    files += compare_dirs(&ea, &eb);

    check(
        11,
        "determinism",
        files >= 8,
        &format!("compared {files} output files"),
    );
}

/// Sanity guard used by the negative-control tests in the CLI suite: a
/// corrupted gradient must be detected by the located comparator.
#[test]
fn corrupted_gradient_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let net = SpikingNetwork::new(3, &[3], NeuronParams::ilif(), 5).unwrap();
    let input: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.5)).collect())
        .collect();
    let (outputs, tapes) = net.forward_sequence(&input).unwrap();
    let (_, ds) = rate_mse_loss(&outputs, &[1.0, 0.0, 0.0]).unwrap();
    let good = backward(&tapes[0], &ds).unwrap();
    let mut bad = good.clone();
    let v = bad.du_trace[0][0];
    bad.du_trace[0][0] = v + 1e-6;
    let (diff, at) = max_relative_diff_located(&good, &bad);
    assert!(diff > ORACLE_TOLERANCE, "diff {diff} at {at}");
    assert!(at.starts_with("du_trace"));
}
