use std::path::Path;
use std::process::Command;

use hybrid_qkd::cli::{hbt, keygen, qber_sweep, tomography, HbtConfig, KeygenConfig, NoiseConfig, SweepConfig, TomographyConfig};
use hybrid_qkd::protocol::Encoding;
use hybrid_qkd::source::SourceParams;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-qkd"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

fn ideal_sweep() -> SweepConfig {
    SweepConfig {
        n_rounds: 40_000,
        source: SourceParams::ideal(),
        noise: NoiseConfig::noiseless(),
        sample_fraction: 1.0,
        ..SweepConfig::default()
    }
}

#[test]
fn default_sweep_has_twelve_rows() {
    let rows = qber_sweep(&SweepConfig { n_rounds: 20_000, ..SweepConfig::default() }, 1).unwrap();
    assert_eq!(rows.len(), 12);
    let csv = hybrid_qkd::cli::sweep_csv(&rows).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("theta_deg,encoding,qber,std_err,theory_polarization,key_fraction\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn ideal_sweep_matches_theory() {
    for row in qber_sweep(&ideal_sweep(), 2).unwrap() {
        match row.encoding {
            Encoding::Hybrid => assert_eq!(row.qber, 0.0, "{row:?}"),
            Encoding::PolarizationOnly => {
                // About 20000 sifted bits per point, all of them sampled.
                let theory = row.theory_polarization;
                let se = (theory * (1.0 - theory) / 19_000.0).sqrt();
                assert!((row.qber - theory).abs() <= 3.0 * se, "{row:?}");
            }
        }
    }
}

#[test]
fn tomography_hybrid_fidelity_is_constant_and_polarization_decays() {
    let cfg = TomographyConfig {
        states: vec!["+L".into()],
        shots_per_setting: 20_000,
        noise: NoiseConfig::default(),
        ..TomographyConfig::default()
    };
    let report = tomography(&cfg, 3).unwrap();
    let hybrid: Vec<f64> = report
        .reconstructions
        .iter()
        .filter(|r| r.encoding == Encoding::Hybrid)
        .map(|r| r.fidelity)
        .collect();
    assert_eq!(hybrid.len(), 6);
    // Fidelity 1 - p/2 = 0.9596; binomial spread at 2e4 shots is ~1.4e-3.
    for f in &hybrid {
        assert!((f - 0.9596).abs() < 5e-3, "{hybrid:?}");
    }
    for r in report.reconstructions.iter().filter(|r| r.encoding == Encoding::PolarizationOnly) {
        let expected = 0.0404 + (1.0 - 0.0808) * r.theta_deg.to_radians().cos().powi(2);
        assert!((r.fidelity - expected).abs() < 5e-3, "{r:?}");
    }
    assert!(report.predicted_qber.is_empty());
}

#[test]
fn four_state_tomography_predicts_the_calibrated_qber() {
    let cfg = TomographyConfig {
        theta_deg: vec![50.0],
        encodings: vec![Encoding::Hybrid],
        shots_per_setting: 200_000,
        ..TomographyConfig::default()
    };
    let report = tomography(&cfg, 4).unwrap();
    assert_eq!(report.predicted_qber.len(), 1);
    assert!((report.predicted_qber[0].qber - 0.0404).abs() < 2e-3);
}

#[test]
fn keygen_with_calibrated_noise_keeps_the_key() {
    let cfg = KeygenConfig {
        n_rounds: 400_000,
        source: SourceParams::ideal(),
        sample_fraction: 0.5,
        ..KeygenConfig::default()
    };
    let report = keygen(&cfg, 5).unwrap();
    assert!(!report.abort);
    assert!((report.qber.qber - 0.0404).abs() < 3.0 * report.qber.std_error);
    assert!((report.key_fraction - 0.514).abs() < 0.03);
    assert_eq!(report.raw_rounds, 400_000);
    assert_eq!(report.sifted_length, report.remaining_length + report.qber.sample_size as usize);
}

#[test]
fn keygen_fully_depolarized_aborts() {
    let cfg = KeygenConfig {
        n_rounds: 100_000,
        source: SourceParams::ideal(),
        noise: NoiseConfig { depolarizing_p: Some(1.0), target_qber: None },
        ..KeygenConfig::default()
    };
    let report = keygen(&cfg, 6).unwrap();
    assert!(report.abort);
    assert_eq!(report.key_fraction, 0.0);
    assert!((report.qber.qber - 0.5).abs() < 3.0 * report.qber.std_error);
}

#[test]
fn doubling_rounds_shrinks_std_error_by_root_two() {
    let base = KeygenConfig {
        n_rounds: 200_000,
        source: SourceParams::ideal(),
        sample_fraction: 1.0,
        ..KeygenConfig::default()
    };
    let small = keygen(&base, 7).unwrap();
    let large = keygen(&KeygenConfig { n_rounds: 400_000, ..base }, 7).unwrap();
    let ratio = large.qber.std_error / small.qber.std_error;
    // Sampling noise in the QBER itself moves the ratio by about 3%.
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1, "{ratio}");
}

#[test]
fn hbt_examples() {
    let ideal = HbtConfig {
        n_pulses: 200_000_000,
        source: SourceParams { g2: 0.0, ..SourceParams::default() },
    };
    assert!(hbt(&ideal, 8).unwrap().g2_estimate < 0.005);
    let a = hbt(&HbtConfig { n_pulses: 50_000_000, ..HbtConfig::default() }, 9).unwrap();
    let b = hbt(&HbtConfig { n_pulses: 50_000_000, ..HbtConfig::default() }, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn binary_outputs_are_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"qber_sweep": {"n_rounds": 30000, "theta_deg": [0, 45]},
            "tomography": {"states": ["H", "0L"], "theta_deg": [0, 90], "shots_per_setting": 5000}}"#,
    );
    for command in ["qber-sweep", "tomography"] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = dir.path().join(format!("{command}-{threads}.csv"));
            let status = bin()
                .args([command, "--config"])
                .arg(&config)
                .args(["--seed", "11", "--threads", threads, "--out"])
                .arg(&out)
                .status()
                .unwrap();
            assert!(status.success());
            let mut bytes = std::fs::read(&out).unwrap();
            if command == "tomography" {
                let json = std::fs::read_to_string(out.with_extension("json")).unwrap();
                assert!(json.contains("\"rho_re\""));
                bytes.extend(json.into_bytes());
            }
            outputs.push(bytes);
        }
        assert_eq!(outputs[0], outputs[1], "{command}");
    }
}

#[test]
fn config_errors_exit_one_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.csv");
    for bad in [
        r#"{"qber_sweep": {"thetas": [1]}}"#,
        r#"{"qber_sweep": {"theta_deg": []}}"#,
        r#"{"qber_sweep": {"n_rounds": 0}}"#,
        r#"{"keygen": {"noise": {"depolarizing_p": 2.0}}}"#,
        "not json",
    ] {
        let config = write_config(dir.path(), bad);
        let command = if bad.contains("keygen") { "keygen" } else { "qber-sweep" };
        let status = bin().arg(command).arg("--config").arg(&config).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(1), "{bad}");
        assert!(!out.exists(), "{bad}");
    }
    let status = bin().args(["qber-sweep", "--config"]).arg(dir.path().join("missing.json")).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn insufficient_statistics_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("hbt.json");
    let config = write_config(dir.path(), r#"{"hbt": {"n_pulses": 1000}}"#);
    let status = bin().args(["hbt", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn keygen_writes_json_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("nested").join("key.json");
    let config = write_config(dir.path(), r#"{"keygen": {"n_rounds": 50000}}"#);
    let status = bin().args(["keygen", "--seed", "3", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    for key in ["raw_rounds", "detected", "sifted_length", "qber", "key_fraction", "abort"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["seed"], 3);
}
