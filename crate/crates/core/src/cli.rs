//! Command-line front end: config loading, experiment orchestration and
//! CSV/JSON artifacts.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::QkdError;
use crate::optics::NoiseParams;
use crate::protocol::{
    calibrate_depolarizing, estimate_qber, run_sifted, secret_key_fraction, theoretical_qber, Basis,
    Encoding, Optics, ProtocolConfig, QberReport, SECURITY_THRESHOLD,
};
use crate::rng::{derive_seed, domain, stream_rng};
use crate::source::{hbt_g2_estimate, SourceParams};
use crate::tomography::{
    analysis_target, mle_reconstruct, received_state, simulate_counts, state_fidelity_report,
    tomography_settings, MleOptions,
};

/// Angles of the canonical rotation sweep, in degrees.
pub const DEFAULT_ANGLES_DEG: [f64; 6] = [0.0, 12.5, 25.0, 50.0, 75.0, 90.0];

/// QBER reproduced by the default noise setting.
pub const DEFAULT_TARGET_QBER: f64 = 0.0404;

#[derive(Debug, Parser)]
#[command(name = "hybrid-qkd", version, about = "Rotation-invariant BB84 simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path (CSV or JSON depending on the command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// QBER against platform rotation for both encodings.
    QberSweep,
    /// Density-matrix reconstruction of the received states.
    Tomography,
    /// One full key exchange.
    Keygen,
    /// Hanbury-Brown-Twiss estimate of g2(0).
    Hbt,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    InsufficientStatistics(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
            Self::InsufficientStatistics(_) => 3,
        }
    }

    fn config(e: impl fmt::Display) -> Self {
        Self::Config(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
            Self::InsufficientStatistics(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QkdError> for CliError {
    fn from(e: QkdError) -> Self {
        match e {
            QkdError::InsufficientStatistics { .. } => Self::InsufficientStatistics(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

/// Depolarizing noise, given directly or as the QBER it should produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub depolarizing_p: Option<f64>,
    pub target_qber: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            depolarizing_p: None,
            target_qber: Some(DEFAULT_TARGET_QBER),
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            depolarizing_p: Some(0.0),
            target_qber: None,
        }
    }

    pub fn resolve(&self) -> Result<NoiseParams, CliError> {
        let p = match (self.depolarizing_p, self.target_qber) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("noise: give depolarizing_p or target_qber, not both"))
            }
            (Some(p), None) => p,
            (None, Some(q)) => calibrate_depolarizing(q).map_err(CliError::config)?,
            (None, None) => 0.0,
        };
        NoiseParams::new(p).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub theta_deg: Vec<f64>,
    pub encodings: Vec<Encoding>,
    /// Rounds per (angle, encoding) point.
    pub n_rounds: u64,
    pub source: SourceParams,
    pub noise: NoiseConfig,
    pub basis_bias: f64,
    pub sample_fraction: f64,
    pub discard_multiphoton: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_deg: DEFAULT_ANGLES_DEG.to_vec(),
            encodings: vec![Encoding::PolarizationOnly, Encoding::Hybrid],
            n_rounds: 2_000_000,
            source: SourceParams::default(),
            noise: NoiseConfig::default(),
            basis_bias: 0.5,
            sample_fraction: 0.5,
            discard_multiphoton: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    /// Prepared states: H, V, R, L or equivalently +L, -L, 0L, 1L.
    pub states: Vec<String>,
    pub theta_deg: Vec<f64>,
    pub encodings: Vec<Encoding>,
    pub shots_per_setting: u64,
    pub noise: NoiseConfig,
    pub mle: MleOptions,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            states: ["H", "V", "R", "L"].map(String::from).to_vec(),
            theta_deg: DEFAULT_ANGLES_DEG.to_vec(),
            encodings: vec![Encoding::PolarizationOnly, Encoding::Hybrid],
            shots_per_setting: 100_000,
            noise: NoiseConfig::default(),
            mle: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeygenConfig {
    pub n_rounds: u64,
    pub encoding: Encoding,
    pub theta_deg: f64,
    pub source: SourceParams,
    pub noise: NoiseConfig,
    pub basis_bias: f64,
    pub sample_fraction: f64,
    pub discard_multiphoton: bool,
}

impl Default for KeygenConfig {
    fn default() -> Self {
        Self {
            n_rounds: 10_000_000,
            encoding: Encoding::Hybrid,
            theta_deg: 0.0,
            source: SourceParams::default(),
            noise: NoiseConfig::default(),
            basis_bias: 0.5,
            sample_fraction: 0.1,
            discard_multiphoton: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbtConfig {
    pub n_pulses: u64,
    pub source: SourceParams,
}

impl Default for HbtConfig {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000_000,
            source: SourceParams::default(),
        }
    }
}

/// Top-level configuration document, one section per command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub qber_sweep: SweepConfig,
    pub tomography: TomographyConfig,
    pub keygen: KeygenConfig,
    pub hbt: HbtConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(CliError::config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn finite_angles(angles: &[f64]) -> Result<(), CliError> {
    if angles.is_empty() {
        return Err(CliError::config("theta_deg must list at least one angle"));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(CliError::Config(format!("angle {a} is not finite")));
    }
    Ok(())
}

fn non_empty_encodings(encodings: &[Encoding]) -> Result<(), CliError> {
    if encodings.is_empty() {
        return Err(CliError::config("encodings must not be empty"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn protocol_config(
    n_rounds: u64,
    encoding: Encoding,
    theta_deg: f64,
    source: &SourceParams,
    noise: NoiseParams,
    basis_bias: f64,
    sample_fraction: f64,
    discard_multiphoton: bool,
    seed: u64,
) -> Result<ProtocolConfig, CliError> {
    let cfg = ProtocolConfig {
        n_rounds,
        encoding,
        theta: theta_deg.to_radians(),
        source: *source,
        noise,
        basis_bias,
        sample_fraction,
        seed,
        discard_multiphoton,
        optics: Optics::default(),
    };
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub encoding: Encoding,
    pub qber: f64,
    pub std_err: f64,
    pub theory_polarization: f64,
    pub key_fraction: f64,
}

fn key_fraction_of(qber: f64) -> f64 {
    secret_key_fraction(qber.clamp(0.0, 0.5)).unwrap_or(0.0)
}

/// Simulated and sampled QBER for one protocol configuration.
fn sampled_qber(cfg: &ProtocolConfig) -> Result<(crate::protocol::SessionTally, usize, QberReport, usize), CliError> {
    let (tally, key) = run_sifted(cfg)?;
    let mut rng = stream_rng(cfg.seed, domain::QBER_SAMPLE, 0);
    let (report, remaining) = estimate_qber(&key, cfg.sample_fraction, &mut rng)?;
    Ok((tally, key.len(), report, remaining.len()))
}

pub fn qber_sweep(cfg: &SweepConfig, seed: u64) -> Result<Vec<SweepRow>, CliError> {
    finite_angles(&cfg.theta_deg)?;
    non_empty_encodings(&cfg.encodings)?;
    let noise = cfg.noise.resolve()?;
    let mut points = Vec::new();
    for &theta in &cfg.theta_deg {
        for &encoding in &cfg.encodings {
            let index = points.len() as u64;
            points.push(protocol_config(
                cfg.n_rounds,
                encoding,
                theta,
                &cfg.source,
                noise,
                cfg.basis_bias,
                cfg.sample_fraction,
                cfg.discard_multiphoton,
                derive_seed(seed, domain::SWEEP_POINT, index),
            )?);
        }
    }
    points
        .iter()
        .zip(cfg.theta_deg.iter().flat_map(|&t| cfg.encodings.iter().map(move |_| t)))
        .map(|(p, theta_deg)| {
            let (_, _, report, _) = sampled_qber(p)?;
            Ok(SweepRow {
                theta_deg,
                encoding: p.encoding,
                qber: report.qber,
                std_err: report.std_error,
                theory_polarization: theoretical_qber(p.theta),
                key_fraction: key_fraction_of(report.qber),
            })
        })
        .collect()
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    to_csv(rows)
}

fn parse_state(label: &str) -> Result<(bool, Basis), CliError> {
    match label {
        "H" | "+L" => Ok((false, Basis::Z)),
        "V" | "-L" => Ok((true, Basis::Z)),
        "R" | "0L" => Ok((false, Basis::Y)),
        "L" | "1L" => Ok((true, Basis::Y)),
        other => Err(CliError::Config(format!("unknown prepared state {other:?}"))),
    }
}

/// Name of the prepared state as it travels in `encoding`.
pub fn state_name(bit: bool, basis: Basis, encoding: Encoding) -> &'static str {
    match (encoding, basis, bit) {
        (Encoding::PolarizationOnly, Basis::Z, false) => "H",
        (Encoding::PolarizationOnly, Basis::Z, true) => "V",
        (Encoding::PolarizationOnly, Basis::Y, false) => "R",
        (Encoding::PolarizationOnly, Basis::Y, true) => "L",
        (Encoding::Hybrid, Basis::Z, false) => "+L",
        (Encoding::Hybrid, Basis::Z, true) => "-L",
        (Encoding::Hybrid, Basis::Y, false) => "0L",
        (Encoding::Hybrid, Basis::Y, true) => "1L",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRow {
    pub state: &'static str,
    pub theta_deg: f64,
    pub encoding: Encoding,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub state: &'static str,
    pub theta_deg: f64,
    pub encoding: Encoding,
    pub fidelity: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Row-major, (|H>, |V>) basis.
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedQber {
    pub theta_deg: f64,
    pub encoding: Encoding,
    pub qber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    pub seed: u64,
    pub shots_per_setting: u64,
    pub depolarizing_p: f64,
    pub reconstructions: Vec<Reconstruction>,
    /// Present for each (angle, encoding) when all four states were run.
    pub predicted_qber: Vec<PredictedQber>,
}

impl TomographyReport {
    pub fn fidelity_rows(&self) -> Vec<FidelityRow> {
        self.reconstructions
            .iter()
            .map(|r| FidelityRow {
                state: r.state,
                theta_deg: r.theta_deg,
                encoding: r.encoding,
                fidelity: r.fidelity,
            })
            .collect()
    }
}

pub fn tomography(cfg: &TomographyConfig, seed: u64) -> Result<TomographyReport, CliError> {
    if cfg.states.is_empty() {
        return Err(CliError::config("states must list at least one prepared state"));
    }
    finite_angles(&cfg.theta_deg)?;
    non_empty_encodings(&cfg.encodings)?;
    if cfg.shots_per_setting == 0 {
        return Err(CliError::config("shots_per_setting must be at least 1"));
    }
    if cfg.mle.max_iters == 0 || cfg.mle.tol.is_nan() || cfg.mle.tol < 0.0 {
        return Err(CliError::config("mle needs max_iters >= 1 and tol >= 0"));
    }
    let states = cfg
        .states
        .iter()
        .map(|s| parse_state(s))
        .collect::<Result<Vec<_>, _>>()?;
    let noise = cfg.noise.resolve()?;

    let mut jobs = Vec::new();
    for &theta_deg in &cfg.theta_deg {
        for &encoding in &cfg.encodings {
            for &(bit, basis) in &states {
                jobs.push((theta_deg, encoding, bit, basis));
            }
        }
    }
    let optics = Optics::default();
    let settings = tomography_settings();
    let reconstructions = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(theta_deg, encoding, bit, basis))| {
            let rho = received_state(&optics, bit, basis, encoding, theta_deg.to_radians(), &noise)?;
            let mut rng = stream_rng(seed, domain::TOMOGRAPHY, i as u64);
            let counts = simulate_counts(&rho, &settings, cfg.shots_per_setting, &mut rng)?;
            let opts = MleOptions {
                seed: derive_seed(seed, domain::MLE_RESTART, i as u64),
                ..cfg.mle
            };
            let result = mle_reconstruct(&counts, &opts)?;
            let fidelity = result
                .rho
                .fidelity_to_ket(&analysis_target(bit, basis))?
                .clamp(0.0, 1.0);
            let m = result.rho.matrix();
            Ok(Reconstruction {
                state: state_name(bit, basis, encoding),
                theta_deg,
                encoding,
                fidelity,
                log_likelihood: result.log_likelihood,
                iterations: result.iterations,
                converged: result.converged,
                rho_re: (0..2).map(|r| (0..2).map(|c| m[(r, c)].re).collect()).collect(),
                rho_im: (0..2).map(|r| (0..2).map(|c| m[(r, c)].im).collect()).collect(),
            })
        })
        .collect::<Result<Vec<_>, QkdError>>()?;

    let mut predicted_qber = Vec::new();
    let all_four = [(false, Basis::Z), (true, Basis::Z), (false, Basis::Y), (true, Basis::Y)]
        .iter()
        .all(|s| states.contains(s));
    if all_four {
        for (group, chunk) in reconstructions.chunks(states.len()).enumerate() {
            let pick = |want: (bool, Basis)| {
                let k = states.iter().position(|&s| s == want).unwrap();
                let r = &chunk[k];
                crate::spinorbit::DensityMatrix::new(nalgebra::DMatrix::from_fn(2, 2, |i, j| {
                    num_complex::Complex64::new(r.rho_re[i][j], r.rho_im[i][j])
                }))
            };
            let order = [(false, Basis::Z), (true, Basis::Z), (false, Basis::Y), (true, Basis::Y)];
            let rhos = order.iter().map(|&s| pick(s)).collect::<Result<Vec<_>, _>>()?;
            let targets: Vec<_> = order.iter().map(|&(b, basis)| analysis_target(b, basis)).collect();
            let report = state_fidelity_report(&rhos, &targets)?;
            let (theta_deg, encoding, _, _) = jobs[group * states.len()];
            predicted_qber.push(PredictedQber {
                theta_deg,
                encoding,
                qber: report.predicted_qber,
            });
        }
    }

    Ok(TomographyReport {
        seed,
        shots_per_setting: cfg.shots_per_setting,
        depolarizing_p: noise.depolarizing_p(),
        reconstructions,
        predicted_qber,
    })
}

pub fn fidelity_csv(report: &TomographyReport) -> Result<Vec<u8>, CliError> {
    to_csv(&report.fidelity_rows())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeygenReport {
    pub seed: u64,
    pub encoding: Encoding,
    pub theta_deg: f64,
    pub depolarizing_p: f64,
    pub raw_rounds: u64,
    pub detected: u64,
    pub multiphoton: u64,
    pub sifted_length: usize,
    pub qber: QberReport,
    /// Sifted bits left after the QBER sample is discarded.
    pub remaining_length: usize,
    pub key_fraction: f64,
    pub secret_key_bits: u64,
    pub abort: bool,
}

pub fn keygen(cfg: &KeygenConfig, seed: u64) -> Result<KeygenReport, CliError> {
    if !cfg.theta_deg.is_finite() {
        return Err(CliError::config("theta_deg must be finite"));
    }
    let noise = cfg.noise.resolve()?;
    let protocol = protocol_config(
        cfg.n_rounds,
        cfg.encoding,
        cfg.theta_deg,
        &cfg.source,
        noise,
        cfg.basis_bias,
        cfg.sample_fraction,
        cfg.discard_multiphoton,
        seed,
    )?;
    let (tally, sifted_length, qber, remaining_length) = sampled_qber(&protocol)?;
    let abort = qber.qber >= SECURITY_THRESHOLD;
    let key_fraction = if abort { 0.0 } else { key_fraction_of(qber.qber) };
    Ok(KeygenReport {
        seed,
        encoding: cfg.encoding,
        theta_deg: cfg.theta_deg,
        depolarizing_p: noise.depolarizing_p(),
        raw_rounds: tally.rounds,
        detected: tally.detected,
        multiphoton: tally.multiphoton,
        sifted_length,
        qber,
        remaining_length,
        key_fraction,
        secret_key_bits: (key_fraction * remaining_length as f64).floor() as u64,
        abort,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HbtReport {
    pub seed: u64,
    pub g2_source: f64,
    pub g2_estimate: f64,
    pub n_pulses: u64,
    pub zero_delay_coincidences: u64,
    pub adjacent_coincidences: u64,
}

pub fn hbt(cfg: &HbtConfig, seed: u64) -> Result<HbtReport, CliError> {
    cfg.source.validate().map_err(CliError::config)?;
    let mut rng = stream_rng(seed, domain::HBT_CHUNK, u64::MAX);
    let est = hbt_g2_estimate(cfg.n_pulses, &cfg.source, &mut rng)?;
    Ok(HbtReport {
        seed,
        g2_source: cfg.source.g2,
        g2_estimate: est.g2,
        n_pulses: est.n_pulses,
        zero_delay_coincidences: est.zero_delay,
        adjacent_coincidences: est.adjacent,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Output files for one command, fully rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

fn default_out(command: Command) -> PathBuf {
    PathBuf::from(match command {
        Command::QberSweep => "qber_sweep.csv",
        Command::Tomography => "tomography.csv",
        Command::Keygen => "keygen.json",
        Command::Hbt => "hbt.json",
    })
}

/// Runs `command` and renders its artifacts without touching the disk.
pub fn render(
    command: Command,
    config: &ExperimentConfig,
    seed: u64,
    out: &Path,
) -> Result<Artifacts, CliError> {
    let files = match command {
        Command::QberSweep => vec![(out.to_path_buf(), sweep_csv(&qber_sweep(&config.qber_sweep, seed)?)?)],
        Command::Tomography => {
            let report = tomography(&config.tomography, seed)?;
            vec![
                (out.to_path_buf(), fidelity_csv(&report)?),
                (out.with_extension("json"), to_json(&report)?),
            ]
        }
        Command::Keygen => vec![(out.to_path_buf(), to_json(&keygen(&config.keygen, seed)?)?)],
        Command::Hbt => vec![(out.to_path_buf(), to_json(&hbt(&config.hbt, seed)?)?)],
    };
    Ok(Artifacts { files })
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    let out = cli.out.clone().unwrap_or_else(|| default_out(cli.command));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let artifacts = pool.install(|| render(cli.command, &config, seed, &out))?;
    let mut written = Vec::new();
    for (path, bytes) in artifacts.files {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("hybrid-qkd: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_config() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"sed": 1}"#,
            r#"{"keygen": {"rounds": 10}}"#,
            r#"{"hbt": {"source": {"g3": 0.1}}}"#,
            r#"{"tomography": {"mle": {"iters": 3}}}"#,
        ] {
            let err = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn encodings_parse_by_name() {
        let cfg = ExperimentConfig::from_json(
            r#"{"qber_sweep": {"encodings": ["polarization", "hybrid", "polarization_only"]}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.qber_sweep.encodings,
            vec![Encoding::PolarizationOnly, Encoding::Hybrid, Encoding::PolarizationOnly]
        );
    }

    #[test]
    fn noise_resolution() {
        let p = NoiseConfig::default().resolve().unwrap().depolarizing_p();
        assert!((p - 0.0808).abs() < 1e-15);
        let both = NoiseConfig {
            depolarizing_p: Some(0.1),
            target_qber: Some(0.05),
        };
        assert_eq!(both.resolve().unwrap_err().exit_code(), 1);
        assert!(NoiseConfig { depolarizing_p: Some(1.5), target_qber: None }.resolve().is_err());
    }

    #[test]
    fn state_labels_accept_both_namings() {
        assert_eq!(parse_state("+L").unwrap(), parse_state("H").unwrap());
        assert_eq!(parse_state("1L").unwrap(), (true, Basis::Y));
        assert!(parse_state("X").is_err());
    }

    #[test]
    fn insufficient_statistics_maps_to_exit_three() {
        let cfg = HbtConfig {
            n_pulses: 1000,
            ..HbtConfig::default()
        };
        assert_eq!(hbt(&cfg, 0).unwrap_err().exit_code(), 3);
    }
}
