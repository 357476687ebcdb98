//! BB84 with polarization-only or rotation-invariant hybrid encoding.
//!
//! Alice prepares one of {H, V} (Z basis) or {R, L} (Y basis). With hybrid
//! encoding a q = 1/2 Q-plate turns these into |+>_L, |->_L and
//! |0>_L = |L,-1>, |1>_L = |R,+1>. The channel rotates the state by Bob's
//! platform angle and optionally depolarizes it; Bob decodes with a second
//! Q-plate and measures polarization at l = 0.

mod keyrate;

pub use keyrate::{
    binary_entropy, calibrate_depolarizing, qber_from_fidelities, secret_key_fraction,
    theoretical_qber, KEY_FRACTION_ZERO, SECURITY_THRESHOLD,
};

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QkdError, Result};
use crate::optics::{depolarize, qplate_operator, rotation_operator, NoiseParams, QPlateParams};
use crate::rng::{domain, stream_rng};
use crate::source::{click_with_photons, PhotonNumberDistribution, SourceParams};
use crate::spinorbit::{
    apply, DensityMatrix, LinearOperator, OamCutoff, Polarization, SpinOrbitState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoding {
    /// Q-plates disabled.
    #[serde(rename = "polarization", alias = "polarization_only")]
    PolarizationOnly,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl Encoding {
    pub fn label(self) -> &'static str {
        match self {
            Self::PolarizationOnly => "polarization",
            Self::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    Y,
}

impl Basis {
    /// Polarizations encoding bits 0 and 1 (before the Q-plate).
    pub fn polarizations(self) -> [Polarization; 2] {
        match self {
            Self::Z => [Polarization::H, Polarization::V],
            Self::Y => [Polarization::R, Polarization::L],
        }
    }

    pub fn polarization(self, bit: bool) -> Polarization {
        self.polarizations()[usize::from(bit)]
    }
}

/// Truncation and Q-plate used at both stations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Optics {
    pub cutoff: OamCutoff,
    pub qplate: QPlateParams,
}

impl Optics {
    fn qplate(&self) -> Result<LinearOperator> {
        qplate_operator(&self.qplate, self.cutoff)
    }

    pub fn prepare(&self, bit: bool, basis: Basis, encoding: Encoding) -> Result<SpinOrbitState> {
        let pol = SpinOrbitState::polarized(basis.polarization(bit), 0, self.cutoff)?;
        match encoding {
            Encoding::PolarizationOnly => Ok(pol),
            Encoding::Hybrid => apply(&self.qplate()?, &pol),
        }
    }

    /// Bob's analysis kets pulled back through the decoder: `U^dagger |pol, 0>`.
    fn analysis_kets(&self, basis: Basis, encoding: Encoding) -> Result<[DVector<Complex64>; 2]> {
        let decoder = match encoding {
            Encoding::PolarizationOnly => None,
            Encoding::Hybrid => Some(self.qplate()?.matrix().adjoint()),
        };
        let ket = |pol: Polarization| -> Result<DVector<Complex64>> {
            let k = SpinOrbitState::polarized(pol, 0, self.cutoff)?.amplitudes().clone();
            Ok(match &decoder {
                Some(d) => d * k,
                None => k,
            })
        };
        let [p0, p1] = basis.polarizations();
        Ok([ket(p0)?, ket(p1)?])
    }

    /// Probabilities that the photon reaches the bit-0 or bit-1 detector.
    /// They sum to less than one only if the state leaks outside the
    /// decoded l = 0 subspace.
    pub fn outcome_probabilities(
        &self,
        rho: &DensityMatrix,
        basis: Basis,
        encoding: Encoding,
    ) -> Result<[f64; 2]> {
        let [k0, k1] = self.analysis_kets(basis, encoding)?;
        let clamp = |p: f64| p.clamp(0.0, 1.0);
        Ok([clamp(rho.fidelity_to_ket(&k0)?), clamp(rho.fidelity_to_ket(&k1)?)])
    }

    /// State after Bob's decoding stage (a Q-plate for hybrid encoding).
    pub fn decode(&self, rho: &DensityMatrix, encoding: Encoding) -> Result<DensityMatrix> {
        match encoding {
            Encoding::PolarizationOnly => Ok(rho.clone()),
            Encoding::Hybrid => DensityMatrix::new(rho.conjugate_by(self.qplate()?.matrix()).into_matrix()),
        }
    }
}

/// Alice's state for `bit` in `basis`, with the default optics.
pub fn alice_prepare(bit: bool, basis: Basis, encoding: Encoding) -> SpinOrbitState {
    Optics::default()
        .prepare(bit, basis, encoding)
        .expect("protocol states fit the default cutoff")
}

/// Rotates the state by Bob's platform angle, then applies channel noise.
pub fn channel_transmit(state: &SpinOrbitState, theta: f64, noise: &NoiseParams) -> Result<DensityMatrix> {
    let rotated = apply(&rotation_operator(theta, state.cutoff()), state)?;
    let rho = DensityMatrix::from_pure(&rotated.normalize()?)?;
    if noise.depolarizing_p() == 0.0 {
        Ok(rho)
    } else {
        depolarize(&rho, noise.depolarizing_p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Detection {
    pub detected: bool,
    pub bit: Option<bool>,
}

/// Double clicks are resolved to a uniformly random bit.
fn resolve_clicks<R: Rng + ?Sized>(clicks: [bool; 2], rng: &mut R) -> Detection {
    let bit = match clicks {
        [false, false] => None,
        [true, false] => Some(false),
        [false, true] => Some(true),
        [true, true] => Some(rng.random()),
    };
    Detection {
        detected: bit.is_some(),
        bit,
    }
}

/// Routes `photons` photons by the Born probabilities, then applies detector
/// efficiency and dark counts.
fn measure_photons<R: Rng + ?Sized>(
    probs: [f64; 2],
    photons: u8,
    source: &SourceParams,
    rng: &mut R,
) -> Detection {
    let mut arrivals = [0u32; 2];
    for _ in 0..photons {
        let u: f64 = rng.random();
        if u < probs[0] {
            arrivals[0] += 1;
        } else if u < probs[0] + probs[1] {
            arrivals[1] += 1;
        }
    }
    let clicks = [
        click_with_photons(arrivals[0], source, rng),
        click_with_photons(arrivals[1], source, rng),
    ];
    resolve_clicks(clicks, rng)
}

/// Decode-and-measure for a single photon described by `rho`.
pub fn bob_measure<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: Basis,
    encoding: Encoding,
    source: &SourceParams,
    rng: &mut R,
) -> Result<Detection> {
    let probs = Optics::default().outcome_probabilities(rho, basis, encoding)?;
    Ok(measure_photons(probs, 1, source, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub n_rounds: u64,
    pub encoding: Encoding,
    /// Bob's platform angle in radians.
    pub theta: f64,
    pub source: SourceParams,
    pub noise: NoiseParams,
    /// Probability of choosing the Z basis.
    pub basis_bias: f64,
    /// Fraction of the sifted key sacrificed for QBER estimation.
    pub sample_fraction: f64,
    pub seed: u64,
    /// Exclude multiphoton rounds from the sifted key.
    pub discard_multiphoton: bool,
    pub optics: Optics,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_rounds: 1_000_000,
            encoding: Encoding::Hybrid,
            theta: 0.0,
            source: SourceParams::default(),
            noise: NoiseParams::noiseless(),
            basis_bias: 0.5,
            sample_fraction: 0.1,
            seed: 0,
            discard_multiphoton: false,
            optics: Optics::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(invalid("n_rounds must be at least 1"));
        }
        if !self.theta.is_finite() {
            return Err(invalid("theta must be finite"));
        }
        if !(self.basis_bias > 0.0 && self.basis_bias < 1.0) {
            return Err(invalid(format!("basis_bias {} outside (0, 1)", self.basis_bias)));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(invalid(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        self.source.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round_index: u64,
    pub alice_basis: Basis,
    pub alice_bit: bool,
    pub bob_basis: Basis,
    pub detected: bool,
    pub bob_bit: Option<bool>,
    pub multiphoton: bool,
}

/// Exact detector-arrival probabilities for every (Alice state, Bob basis).
#[derive(Debug, Clone)]
struct MeasurementTable {
    // [alice basis][alice bit][bob basis]
    probs: [[[[f64; 2]; 2]; 2]; 2],
}

fn basis_index(b: Basis) -> usize {
    match b {
        Basis::Z => 0,
        Basis::Y => 1,
    }
}

impl MeasurementTable {
    fn build(cfg: &ProtocolConfig) -> Result<Self> {
        let mut probs = [[[[0.0; 2]; 2]; 2]; 2];
        for alice_basis in [Basis::Z, Basis::Y] {
            for bit in [false, true] {
                let state = cfg.optics.prepare(bit, alice_basis, cfg.encoding)?;
                let rho = channel_transmit(&state, cfg.theta, &cfg.noise)?;
                for bob_basis in [Basis::Z, Basis::Y] {
                    probs[basis_index(alice_basis)][usize::from(bit)][basis_index(bob_basis)] =
                        cfg.optics.outcome_probabilities(&rho, bob_basis, cfg.encoding)?;
                }
            }
        }
        Ok(Self { probs })
    }

    fn get(&self, alice_basis: Basis, bit: bool, bob_basis: Basis) -> [f64; 2] {
        self.probs[basis_index(alice_basis)][usize::from(bit)][basis_index(bob_basis)]
    }
}

struct RoundSimulator<'a> {
    cfg: &'a ProtocolConfig,
    table: MeasurementTable,
    photons: PhotonNumberDistribution,
}

impl<'a> RoundSimulator<'a> {
    fn new(cfg: &'a ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            table: MeasurementTable::build(cfg)?,
            photons: PhotonNumberDistribution::new(&cfg.source)?,
        })
    }

    fn round(&self, round_index: u64) -> RoundRecord {
        let mut rng = stream_rng(self.cfg.seed, domain::ROUND, round_index);
        let pick_basis = |rng: &mut _| {
            if Rng::random_bool(rng, self.cfg.basis_bias) {
                Basis::Z
            } else {
                Basis::Y
            }
        };
        let alice_basis = pick_basis(&mut rng);
        let alice_bit: bool = rng.random();
        let bob_basis = pick_basis(&mut rng);
        let photon_count = self.photons.sample(&mut rng);
        let probs = self.table.get(alice_basis, alice_bit, bob_basis);
        let detection = measure_photons(probs, photon_count, &self.cfg.source, &mut rng);
        RoundRecord {
            round_index,
            alice_basis,
            alice_bit,
            bob_basis,
            detected: detection.detected,
            bob_bit: detection.bit,
            multiphoton: photon_count >= 2,
        }
    }
}

/// Simulates every round; round `i` draws only from stream `(seed, i)`.
pub fn run_session(config: &ProtocolConfig) -> Result<Vec<RoundRecord>> {
    let sim = RoundSimulator::new(config)?;
    Ok((0..config.n_rounds)
        .into_par_iter()
        .map(|i| sim.round(i))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiftedKey {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub round_indices: Vec<u64>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.alice_bits
            .iter()
            .zip(&self.bob_bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    fn push(&mut self, record: &RoundRecord) {
        self.alice_bits.push(record.alice_bit);
        self.bob_bits.push(record.bob_bit.expect("sifted rounds are detected"));
        self.round_indices.push(record.round_index);
    }

    fn append(&mut self, mut other: SiftedKey) {
        self.alice_bits.append(&mut other.alice_bits);
        self.bob_bits.append(&mut other.bob_bits);
        self.round_indices.append(&mut other.round_indices);
    }
}

fn keeps(record: &RoundRecord, discard_multiphoton: bool) -> bool {
    record.detected
        && record.alice_basis == record.bob_basis
        && !(discard_multiphoton && record.multiphoton)
}

/// Keeps detected rounds in which both parties chose the same basis.
pub fn sift(records: &[RoundRecord]) -> SiftedKey {
    sift_with(records, false)
}

pub fn sift_with(records: &[RoundRecord], discard_multiphoton: bool) -> SiftedKey {
    let mut key = SiftedKey::default();
    for r in records.iter().filter(|r| keeps(r, discard_multiphoton)) {
        key.push(r);
    }
    key
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SessionTally {
    pub rounds: u64,
    pub detected: u64,
    pub multiphoton: u64,
}

/// `sift_with(&run_session(config)?, config.discard_multiphoton)` without
/// materializing the round records.
pub fn run_sifted(config: &ProtocolConfig) -> Result<(SessionTally, SiftedKey)> {
    const CHUNK: u64 = 1 << 16;
    let sim = RoundSimulator::new(config)?;
    let chunks = config.n_rounds.div_ceil(CHUNK);
    let parts: Vec<(SessionTally, SiftedKey)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = SessionTally::default();
            let mut key = SiftedKey::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(config.n_rounds) {
                let r = sim.round(i);
                tally.rounds += 1;
                tally.detected += u64::from(r.detected);
                tally.multiphoton += u64::from(r.multiphoton);
                if keeps(&r, config.discard_multiphoton) {
                    key.push(&r);
                }
            }
            (tally, key)
        })
        .collect();
    let mut tally = SessionTally::default();
    let mut key = SiftedKey::default();
    for (t, k) in parts {
        tally.rounds += t.rounds;
        tally.detected += t.detected;
        tally.multiphoton += t.multiphoton;
        key.append(k);
    }
    Ok((tally, key))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QberReport {
    pub sample_size: u64,
    pub error_count: u64,
    pub qber: f64,
    /// Binomial standard error `sqrt(q(1-q)/n)`.
    pub std_error: f64,
}

impl QberReport {
    pub fn from_counts(sample_size: u64, error_count: u64) -> Result<Self> {
        if sample_size == 0 {
            return Err(QkdError::EmptyKey);
        }
        if error_count > sample_size {
            return Err(invalid("more errors than sampled bits"));
        }
        let qber = error_count as f64 / sample_size as f64;
        Ok(Self {
            sample_size,
            error_count,
            qber,
            std_error: (qber * (1.0 - qber) / sample_size as f64).sqrt(),
        })
    }
}

/// Publicly compares a random `fraction` of the sifted key (at least one
/// bit) and discards the compared bits.
pub fn estimate_qber<R: Rng + ?Sized>(
    key: &SiftedKey,
    fraction: f64,
    rng: &mut R,
) -> Result<(QberReport, SiftedKey)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("sample fraction {fraction} outside (0, 1]")));
    }
    if key.is_empty() {
        return Err(QkdError::EmptyKey);
    }
    let n = key.len();
    let amount = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut sampled = vec![false; n];
    for i in rand::seq::index::sample(rng, n, amount) {
        sampled[i] = true;
    }
    let mut errors = 0u64;
    let mut remaining = SiftedKey::default();
    for (i, &in_sample) in sampled.iter().enumerate() {
        if in_sample {
            errors += u64::from(key.alice_bits[i] != key.bob_bits[i]);
        } else {
            remaining.alice_bits.push(key.alice_bits[i]);
            remaining.bob_bits.push(key.bob_bits[i]);
            remaining.round_indices.push(key.round_indices[i]);
        }
    }
    Ok((QberReport::from_counts(amount as u64, errors)?, remaining))
}

/// Exact probability that Bob's bit differs from Alice's, given a matched
/// `basis` and that the photon reached a detector (ideal detectors).
pub fn exact_error_probability(
    optics: &Optics,
    encoding: Encoding,
    theta: f64,
    noise: &NoiseParams,
    basis: Basis,
) -> Result<f64> {
    let mut total = 0.0;
    for bit in [false, true] {
        let rho = channel_transmit(&optics.prepare(bit, basis, encoding)?, theta, noise)?;
        let probs = optics.outcome_probabilities(&rho, basis, encoding)?;
        let arrived = probs[0] + probs[1];
        if arrived <= 0.0 {
            return Err(invalid("state never reaches Bob's detectors"));
        }
        total += probs[usize::from(!bit)] / arrived;
    }
    Ok(total / 2.0)
}

/// Exact QBER of the sifted key: per-basis error probabilities weighted by
/// how often each basis survives sifting.
pub fn exact_qber(
    optics: &Optics,
    encoding: Encoding,
    theta: f64,
    noise: &NoiseParams,
    basis_bias: f64,
) -> Result<f64> {
    let z = basis_bias * basis_bias;
    let y = (1.0 - basis_bias) * (1.0 - basis_bias);
    let ez = exact_error_probability(optics, encoding, theta, noise, Basis::Z)?;
    let ey = exact_error_probability(optics, encoding, theta, noise, Basis::Y)?;
    Ok((z * ez + y * ey) / (z + y))
}
