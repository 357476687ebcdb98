//! Quantum-dot source, four-path demultiplexer and single-photon detectors.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QkdError, Result};
use crate::rng::{domain, stream_rng};

/// Number of spatial paths behind the demultiplexer.
pub const DEMUX_PATHS: u64 = 4;

/// Minimum expected adjacent-pulse coincidences for an HBT run.
pub const HBT_MIN_COINCIDENCES: f64 = 100.0;

const HBT_CHUNK: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Pulses per second.
    pub rep_rate: f64,
    /// Mean photon number per pulse at the encoder input.
    pub mean_photon_mu: f64,
    /// g2(0).
    pub g2: f64,
    pub eta_det: f64,
    /// Dark counts per second per detector.
    pub dark_rate: f64,
    pub gate_seconds: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            rep_rate: 79e6,
            mean_photon_mu: 2e6 / 79e6,
            g2: 0.03,
            eta_det: 0.90,
            dark_rate: 10.0,
            gate_seconds: 1e-9,
        }
    }
}

impl SourceParams {
    /// Deterministic single photons and perfect, noiseless detectors.
    pub fn ideal() -> Self {
        Self {
            mean_photon_mu: 1.0,
            g2: 0.0,
            eta_det: 1.0,
            dark_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rep_rate", self.rep_rate),
            ("mean_photon_mu", self.mean_photon_mu),
            ("g2", self.g2),
            ("eta_det", self.eta_det),
            ("dark_rate", self.dark_rate),
            ("gate_seconds", self.gate_seconds),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(invalid(format!("{name} must be finite and non-negative, got {value}")));
            }
        }
        if self.eta_det > 1.0 {
            return Err(invalid(format!("eta_det {} exceeds 1", self.eta_det)));
        }
        if self.dark_click_probability() > 1.0 {
            return Err(invalid("dark_rate * gate_seconds exceeds 1"));
        }
        PhotonNumberDistribution::new(self).map(|_| ())
    }

    pub fn dark_click_probability(&self) -> f64 {
        self.dark_rate * self.gate_seconds
    }
}

/// Photon-number distribution truncated at two photons.
///
/// `P(2) = g2 mu^2 / 2`, `P(1) = mu - 2 P(2)`, `P(0) = 1 - P(1) - P(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: [f64; 3],
}

impl PhotonNumberDistribution {
    pub fn new(params: &SourceParams) -> Result<Self> {
        let mu = params.mean_photon_mu;
        let p2 = params.g2 * mu * mu / 2.0;
        let p1 = mu - 2.0 * p2;
        if p1 < 0.0 {
            return Err(invalid(format!(
                "mu = {mu}, g2 = {} gives negative single-photon probability",
                params.g2
            )));
        }
        let p0 = 1.0 - p1 - p2;
        if p0 < 0.0 {
            return Err(invalid(format!(
                "mu = {mu}, g2 = {} gives negative vacuum probability",
                params.g2
            )));
        }
        Ok(Self { probs: [p0, p1, p2] })
    }

    pub fn probabilities(&self) -> [f64; 3] {
        self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        if u < self.probs[2] {
            2
        } else if u < self.probs[2] + self.probs[1] {
            1
        } else {
            0
        }
    }
}

pub fn sample_photon_number<R: Rng + ?Sized>(params: &SourceParams, rng: &mut R) -> Result<u8> {
    Ok(PhotonNumberDistribution::new(params)?.sample(rng))
}

/// Round-robin demultiplexer schedule.
pub fn demux_route(pulse_index: u64) -> u8 {
    (pulse_index % DEMUX_PATHS) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseEvent {
    pub pulse_index: u64,
    pub photon_count: u8,
    pub path: u8,
}

pub fn emit_pulse<R: Rng + ?Sized>(
    pulse_index: u64,
    photons: &PhotonNumberDistribution,
    rng: &mut R,
) -> PulseEvent {
    PulseEvent {
        pulse_index,
        photon_count: photons.sample(rng),
        path: demux_route(pulse_index),
    }
}

/// Click probability for one detector: `1 - (1 - eta p_arrival)(1 - p_dark)`.
pub fn click_probability(p_arrival: f64, params: &SourceParams) -> f64 {
    let (a, d) = (params.eta_det * p_arrival, params.dark_click_probability());
    a + d - a * d
}

/// Independent click decisions, one per detector.
pub fn detect<R: Rng + ?Sized>(
    arrival_prob_per_detector: &[f64],
    params: &SourceParams,
    rng: &mut R,
) -> Result<Vec<bool>> {
    arrival_prob_per_detector
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("arrival probability {p} outside [0, 1]")));
            }
            Ok(rng.random::<f64>() < click_probability(p, params))
        })
        .collect()
}

/// Click decision for a detector hit by `photons` photons.
pub(crate) fn click_with_photons<R: Rng + ?Sized>(photons: u32, params: &SourceParams, rng: &mut R) -> bool {
    let miss = (1.0 - params.eta_det).powi(photons as i32) * (1.0 - params.dark_click_probability());
    rng.random::<f64>() >= miss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HbtEstimate {
    pub g2: f64,
    pub n_pulses: u64,
    /// Pulses in which both detectors clicked.
    pub zero_delay: u64,
    /// A-then-B plus B-then-A clicks in consecutive pulses.
    pub adjacent: u64,
}

/// Per-detector click probability for a 50:50 split.
fn hbt_click_probability(params: &SourceParams, photons: &PhotonNumberDistribution) -> f64 {
    let [_, p1, p2] = photons.probabilities();
    let half = params.eta_det / 2.0;
    let photon_click = p1 * half + p2 * (1.0 - (1.0 - half).powi(2));
    1.0 - (1.0 - photon_click) * (1.0 - params.dark_click_probability())
}

/// Pulses needed for [`HBT_MIN_COINCIDENCES`] expected adjacent coincidences.
pub fn hbt_required_pulses(params: &SourceParams) -> Result<u64> {
    let photons = PhotonNumberDistribution::new(params)?;
    let p = hbt_click_probability(params, &photons);
    if p <= 0.0 {
        return Ok(u64::MAX);
    }
    let needed = (HBT_MIN_COINCIDENCES / (p * p)).ceil() + 1.0;
    Ok(if needed >= u64::MAX as f64 { u64::MAX } else { needed as u64 })
}

/// Hanbury-Brown-Twiss estimate of g2(0).
///
/// Each pulse is split 50:50 onto detectors A and B. The estimate is the
/// zero-delay coincidence count over the mean of the A(k)B(k+1) and
/// B(k)A(k+1) counts. Chunks run in parallel with streams derived from one
/// draw of `rng`, so the result depends only on that draw.
pub fn hbt_g2_estimate<R: Rng + ?Sized>(
    n_pulses: u64,
    params: &SourceParams,
    rng: &mut R,
) -> Result<HbtEstimate> {
    params.validate()?;
    let required = hbt_required_pulses(params)?;
    if n_pulses < required {
        return Err(QkdError::InsufficientStatistics {
            required_pulses: required,
        });
    }
    let photons = PhotonNumberDistribution::new(params)?;
    let base_seed: u64 = rng.random();
    let chunks = n_pulses.div_ceil(HBT_CHUNK);
    let parts: Vec<ChunkTally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * HBT_CHUNK;
            let end = (start + HBT_CHUNK).min(n_pulses);
            let mut rng = stream_rng(base_seed, domain::HBT_CHUNK, c);
            simulate_hbt_chunk(start, end, params, &photons, &mut rng)
        })
        .collect();

    let mut zero_delay = 0;
    let mut adjacent = 0;
    for (i, part) in parts.iter().enumerate() {
        zero_delay += part.zero_delay;
        adjacent += part.adjacent;
        if let (Some(prev), Some(first)) = (i.checked_sub(1).and_then(|j| parts[j].last), part.first) {
            adjacent += adjacent_pair(prev, first);
        }
    }
    if adjacent == 0 {
        return Err(QkdError::InsufficientStatistics {
            required_pulses: required.max(n_pulses.saturating_mul(2)),
        });
    }
    Ok(HbtEstimate {
        g2: zero_delay as f64 / (adjacent as f64 / 2.0),
        n_pulses,
        zero_delay,
        adjacent,
    })
}

const CLICK_A: u8 = 1;
const CLICK_B: u8 = 2;

#[derive(Debug, Default)]
struct ChunkTally {
    zero_delay: u64,
    adjacent: u64,
    first: Option<(u64, u8)>,
    last: Option<(u64, u8)>,
}

fn adjacent_pair((p0, m0): (u64, u8), (p1, m1): (u64, u8)) -> u64 {
    if p1 != p0 + 1 {
        return 0;
    }
    u64::from(m0 & CLICK_A != 0 && m1 & CLICK_B != 0) + u64::from(m0 & CLICK_B != 0 && m1 & CLICK_A != 0)
}

/// Pulse indices in `[start, end)` at which a Bernoulli(p) event fires,
/// found by geometric skipping.
fn bernoulli_hits<R: Rng + ?Sized>(start: u64, end: u64, p: f64, rng: &mut R, out: &mut Vec<u64>) {
    if p <= 0.0 {
        return;
    }
    let geo = Geometric::new(p.min(1.0)).expect("probability in (0, 1]");
    let mut pos = start;
    loop {
        pos = pos.saturating_add(geo.sample(rng));
        if pos >= end {
            break;
        }
        out.push(pos);
        pos += 1;
    }
}

fn simulate_hbt_chunk<R: Rng + ?Sized>(
    start: u64,
    end: u64,
    params: &SourceParams,
    photons: &PhotonNumberDistribution,
    rng: &mut R,
) -> ChunkTally {
    let [_, p1, p2] = photons.probabilities();
    let mut clicks: Vec<(u64, u8)> = Vec::new();

    let mut hits = Vec::new();
    bernoulli_hits(start, end, p1 + p2, rng, &mut hits);
    let two_given_some = if p1 + p2 > 0.0 { p2 / (p1 + p2) } else { 0.0 };
    let half = params.eta_det / 2.0;
    for &pulse in &hits {
        let n = if rng.random::<f64>() < two_given_some { 2 } else { 1 };
        let mut mask = 0;
        for _ in 0..n {
            let u: f64 = rng.random();
            if u < half {
                mask |= CLICK_A;
            } else if u < params.eta_det {
                mask |= CLICK_B;
            }
        }
        if mask != 0 {
            clicks.push((pulse, mask));
        }
    }
    for detector in [CLICK_A, CLICK_B] {
        hits.clear();
        bernoulli_hits(start, end, params.dark_click_probability(), rng, &mut hits);
        clicks.extend(hits.iter().map(|&p| (p, detector)));
    }

    clicks.sort_unstable_by_key(|&(p, _)| p);
    let mut merged: Vec<(u64, u8)> = Vec::with_capacity(clicks.len());
    for (pulse, mask) in clicks {
        match merged.last_mut() {
            Some(last) if last.0 == pulse => last.1 |= mask,
            _ => merged.push((pulse, mask)),
        }
    }

    let mut tally = ChunkTally {
        first: merged.first().copied(),
        last: merged.last().copied(),
        ..ChunkTally::default()
    };
    tally.zero_delay = merged.iter().filter(|&&(_, m)| m == CLICK_A | CLICK_B).count() as u64;
    tally.adjacent = merged.windows(2).map(|w| adjacent_pair(w[0], w[1])).sum();
    tally
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn defaults_follow_source_characterization() {
        let p = SourceParams::default();
        assert_eq!(p.rep_rate, 79e6);
        assert!((p.mean_photon_mu - 0.025316).abs() < 1e-6);
        assert_eq!(p.g2, 0.03);
        assert_eq!(p.eta_det, 0.9);
        assert_eq!(p.dark_click_probability(), 1e-8);
        p.validate().unwrap();
    }

    #[test]
    fn no_multiphoton_without_g2() {
        let params = SourceParams {
            g2: 0.0,
            ..SourceParams::default()
        };
        let d = PhotonNumberDistribution::new(&params).unwrap();
        assert_eq!(d.probabilities()[2], 0.0);
        assert_eq!(d.probabilities()[1], params.mean_photon_mu);
        let mut r = rng(1);
        assert!((0..100_000).all(|_| d.sample(&mut r) < 2));
    }

    #[test]
    fn vacuum_source_emits_nothing() {
        let params = SourceParams {
            mean_photon_mu: 0.0,
            ..SourceParams::default()
        };
        let mut r = rng(2);
        assert!((0..10_000).all(|_| sample_photon_number(&params, &mut r).unwrap() == 0));
    }

    #[test]
    fn two_photon_probability_at_defaults() {
        let d = PhotonNumberDistribution::new(&SourceParams::default()).unwrap();
        // g2 mu^2 / 2 with mu = 2/79.
        assert!((d.probabilities()[2] - 9.613843935266784e-6).abs() < 1e-18);
    }

    #[test]
    fn probability_bookkeeping() {
        for (mu, g2) in [(0.0253, 0.03), (0.5, 0.1), (1.0, 0.0), (0.05, 2.0)] {
            let params = SourceParams {
                mean_photon_mu: mu,
                g2,
                ..SourceParams::default()
            };
            let p = PhotonNumberDistribution::new(&params).unwrap().probabilities();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn negative_single_photon_probability_rejected() {
        let params = SourceParams {
            mean_photon_mu: 1.0,
            g2: 3.0,
            ..SourceParams::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn demux_is_round_robin() {
        assert_eq!(demux_route(0), 0);
        assert_eq!(demux_route(5), 1);
        let mut per_path = [0; 4];
        for i in 0..8 {
            per_path[demux_route(i) as usize] += 1;
        }
        assert_eq!(per_path, [2; 4]);
    }

    #[test]
    fn detection_examples() {
        let perfect = SourceParams {
            eta_det: 1.0,
            dark_rate: 0.0,
            ..SourceParams::default()
        };
        let mut r = rng(3);
        assert!((0..1000).all(|_| detect(&[1.0], &perfect, &mut r).unwrap()[0]));

        let dark_only = SourceParams::default();
        assert!((click_probability(0.0, &dark_only) - 1e-8).abs() < 1e-20);

        assert!(detect(&[1.2], &perfect, &mut r).is_err());
    }

    #[test]
    fn detection_frequency_matches_efficiency() {
        let params = SourceParams {
            eta_det: 0.9,
            dark_rate: 0.0,
            ..SourceParams::default()
        };
        let n = 1_000_000;
        let mut r = rng(4);
        let clicks = (0..n)
            .filter(|_| detect(&[1.0], &params, &mut r).unwrap()[0])
            .count();
        let sigma = (0.9 * 0.1 / n as f64).sqrt();
        assert!((clicks as f64 / n as f64 - 0.9).abs() < 3.0 * sigma);
    }

    #[test]
    fn detection_is_monotone() {
        let base = SourceParams::default();
        let mut last = 0.0;
        for eta in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let p = click_probability(0.7, &SourceParams { eta_det: eta, ..base });
            assert!(p >= last);
            last = p;
        }
        let mut last = 0.0;
        for arrival in [0.0, 0.1, 0.6, 1.0] {
            let p = click_probability(arrival, &base);
            assert!(p >= last);
            last = p;
        }
        let mut last = 0.0;
        for dark in [0.0, 10.0, 1e6, 1e8] {
            let p = click_probability(0.3, &SourceParams { dark_rate: dark, ..base });
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn hbt_insufficient_statistics_carries_requirement() {
        let params = SourceParams::default();
        let required = hbt_required_pulses(&params).unwrap();
        match hbt_g2_estimate(1000, &params, &mut rng(5)) {
            Err(QkdError::InsufficientStatistics { required_pulses }) => {
                assert_eq!(required_pulses, required)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hbt_is_deterministic_for_a_seed() {
        let params = SourceParams {
            mean_photon_mu: 0.2,
            g2: 0.05,
            ..SourceParams::default()
        };
        let a = hbt_g2_estimate(50_000_000, &params, &mut rng(6)).unwrap();
        let b = hbt_g2_estimate(50_000_000, &params, &mut rng(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adjacent_pairs_straddling_chunks_are_counted() {
        assert_eq!(adjacent_pair((9, CLICK_A), (10, CLICK_B)), 1);
        assert_eq!(adjacent_pair((9, CLICK_A | CLICK_B), (10, CLICK_A | CLICK_B)), 2);
        assert_eq!(adjacent_pair((9, CLICK_A), (11, CLICK_B)), 0);
        assert_eq!(adjacent_pair((9, CLICK_A), (10, CLICK_A)), 0);
    }
}
