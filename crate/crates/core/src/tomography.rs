//! Single-qubit state tomography on the decoded polarization qubit.
//!
//! The analysis subspace is polarization at l = 0 in the (|H>, |V>) basis.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QkdError, Result};
use crate::optics::NoiseParams;
use crate::protocol::{channel_transmit, Basis, Encoding, Optics};
use crate::rng::{domain, stream_rng};
use crate::spinorbit::{
    circular_to_linear, state_fidelity, DensityMatrix, LinearOperator, OamCutoff, Polarization, Sam,
    SpinOrbitMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TomographySetting {
    pub label: Polarization,
    pub projector: LinearOperator,
}

pub fn polarization_ket(pol: Polarization) -> DVector<Complex64> {
    DVector::from_row_slice(&pol.jones())
}

/// The six projectors H, V, D, A, R, L on the analysis subspace.
pub fn tomography_settings() -> Vec<TomographySetting> {
    Polarization::ALL
        .into_iter()
        .map(|label| {
            let ket = polarization_ket(label);
            TomographySetting {
                label,
                projector: LinearOperator::new(&ket * ket.adjoint(), false)
                    .expect("rank-1 projector is finite"),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRecord {
    pub setting: Polarization,
    pub shots: u64,
    pub clicks: u64,
}

impl CountRecord {
    pub fn new(setting: Polarization, shots: u64, clicks: u64) -> Result<Self> {
        if clicks > shots {
            return Err(invalid(format!(
                "{} setting has {clicks} clicks out of {shots} shots",
                setting.label()
            )));
        }
        Ok(Self {
            setting,
            shots,
            clicks,
        })
    }

    pub fn frequency(&self) -> f64 {
        self.clicks as f64 / self.shots as f64
    }
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    setting: String,
    shots: u64,
    clicks: u64,
}

/// Writes `setting,shots,clicks` rows with a header.
pub fn write_counts_csv<W: Write>(writer: W, counts: &[CountRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for c in counts {
        w.serialize(CountRow {
            setting: c.setting.label().to_owned(),
            shots: c.shots,
            clicks: c.clicks,
        })
        .map_err(|e| invalid(format!("CSV write failed: {e}")))?;
    }
    w.flush().map_err(|e| invalid(format!("CSV write failed: {e}")))
}

pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize::<CountRow>() {
        let row = row.map_err(|e| invalid(format!("bad count record: {e}")))?;
        let setting = Polarization::from_label(&row.setting)
            .ok_or_else(|| invalid(format!("unknown setting {:?}", row.setting)))?;
        out.push(CountRecord::new(setting, row.shots, row.clicks)?);
    }
    Ok(out)
}

fn check_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 2 {
        return Err(QkdError::DimensionMismatch {
            expected: 2,
            actual: rho.dim(),
        });
    }
    Ok(())
}

fn click_probability(rho: &DensityMatrix, projector: &DMatrix<Complex64>) -> Result<f64> {
    Ok(rho.expectation(projector)?.clamp(0.0, 1.0))
}

/// Binomial click counts for each setting.
pub fn simulate_counts<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    settings: &[TomographySetting],
    shots_per_setting: u64,
    rng: &mut R,
) -> Result<Vec<CountRecord>> {
    check_qubit(rho)?;
    if shots_per_setting == 0 {
        return Err(invalid("shots_per_setting must be at least 1"));
    }
    settings
        .iter()
        .map(|s| {
            let p = click_probability(rho, s.projector.matrix())?;
            let clicks = Binomial::new(shots_per_setting, p)
                .map_err(|e| invalid(e.to_string()))?
                .sample(rng);
            CountRecord::new(s.label, shots_per_setting, clicks)
        })
        .collect()
}

/// Merges repeated settings and returns the click frequency of every label.
fn frequencies(counts: &[CountRecord]) -> Result<[f64; 6]> {
    let mut totals = [(0u64, 0u64); 6];
    for c in counts {
        let k = Polarization::ALL.iter().position(|&p| p == c.setting).unwrap();
        totals[k].0 += c.shots;
        totals[k].1 += c.clicks;
    }
    let mut f = [0.0; 6];
    for (k, &(shots, clicks)) in totals.iter().enumerate() {
        if shots == 0 {
            return Err(QkdError::MissingSetting(Polarization::ALL[k].label().to_owned()));
        }
        f[k] = clicks as f64 / shots as f64;
    }
    Ok(f)
}

/// `1/2 (I + sum_k r_k sigma_k)`, with each Bloch component taken from the
/// frequency difference of a complementary pair. May be non-physical.
pub fn linear_inversion(counts: &[CountRecord]) -> Result<DMatrix<Complex64>> {
    let f = frequencies(counts)?;
    let mut rho = DMatrix::<Complex64>::identity(2, 2).scale(0.5);
    for pair in 0..3 {
        let (a, b) = (Polarization::ALL[2 * pair], Polarization::ALL[2 * pair + 1]);
        let (ka, kb) = (polarization_ket(a), polarization_ket(b));
        // P_a - P_b is the Pauli operator whose +1 eigenstate is `a`.
        let pauli = &ka * ka.adjoint() - &kb * kb.adjoint();
        rho += pauli.scale(0.5 * (f[2 * pair] - f[2 * pair + 1]));
    }
    Ok(rho)
}

/// Closest physical state in the eigenvalue sense: negative eigenvalues are
/// zeroed and the spectrum renormalized.
pub fn project_to_physical(m: &DMatrix<Complex64>) -> Result<DensityMatrix> {
    if m.nrows() != m.ncols() {
        return Err(invalid("matrix must be square"));
    }
    let hermitian = (m + m.adjoint()).scale(0.5);
    let eig = hermitian.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let total: f64 = clipped.sum();
    if total <= 0.0 {
        return Err(invalid("matrix has no positive spectrum"));
    }
    let diag = DMatrix::from_diagonal(&clipped.map(|l| Complex64::new(l / total, 0.0)));
    let rho = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    DensityMatrix::new((&rho + rho.adjoint()).scale(0.5))
}

/// Binomial log-likelihood `sum clicks ln p + (shots - clicks) ln(1 - p)`,
/// dropping the combinatorial constant.
pub fn log_likelihood(rho: &DensityMatrix, counts: &[CountRecord]) -> Result<f64> {
    check_qubit(rho)?;
    let mut ll = 0.0;
    for c in counts {
        let p = click_probability(rho, &{
            let k = polarization_ket(c.setting);
            &k * k.adjoint()
        })?;
        ll += xlogy(c.clicks as f64, p) + xlogy((c.shots - c.clicks) as f64, 1.0 - p);
    }
    Ok(ll)
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.max(f64::MIN_POSITIVE).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleOptions {
    pub max_iters: usize,
    /// Convergence threshold on the spread of log-likelihoods across the simplex.
    pub tol: f64,
    /// Random restarts in addition to the linear-inversion start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-10,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best log-likelihood after each iteration of the winning run.
    pub history: Vec<f64>,
}

/// `rho = T^dagger T / tr(T^dagger T)` with `T = [[a, 0], [c, b]]`.
fn params_to_rho(x: &[f64; 4]) -> DensityMatrix {
    let [a, b, cr, ci] = *x;
    let c = Complex64::new(cr, ci);
    let norm_c = c.norm_sqr();
    let trace = a * a + b * b + norm_c;
    let off = c.conj() * b / trace;
    DensityMatrix::from_matrix_unchecked(DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new((a * a + norm_c) / trace, 0.0),
            off,
            off.conj(),
            Complex64::new(b * b / trace, 0.0),
        ],
    ))
}

fn rho_to_params(rho: &DensityMatrix) -> [f64; 4] {
    // Pull the start off the boundary so every parameter is live.
    let m = rho.matrix().scale(1.0 - 1e-4) + DMatrix::identity(2, 2).scale(0.5e-4);
    let b = m[(1, 1)].re.sqrt();
    let c = m[(1, 0)] / b;
    let a = (m[(0, 0)].re - c.norm_sqr()).max(0.0).sqrt();
    [a, b, c.re, c.im]
}

struct SimplexRun {
    best: [f64; 4],
    value: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Nelder-Mead minimization of `f` from `start`.
fn nelder_mead(f: impl Fn(&[f64; 4]) -> f64, start: [f64; 4], opts: &MleOptions) -> SimplexRun {
    const STEP: f64 = 0.05;
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, f(&start)));
    for k in 0..4 {
        let mut x = start;
        x[k] += if x[k].abs() > 1e-3 { STEP * x[k].abs().max(0.1) } else { STEP };
        simplex.push((x, f(&x)));
    }
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[4].1);
        let floor = 8.0 * f64::EPSILON * lo.abs().max(1.0);
        if hi - lo <= opts.tol.max(floor) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; 4];
        for (x, _) in &simplex[..4] {
            for k in 0..4 {
                centroid[k] += x[k] / 4.0;
            }
        }
        let toward = |t: f64| -> [f64; 4] {
            let worst = simplex[4].0;
            std::array::from_fn(|k| centroid[k] + t * (worst[k] - centroid[k]))
        };
        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            simplex[4] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[4].1 { toward(-0.5) } else { toward(0.5) };
            let fc = f(&contracted);
            if fc < fr.min(simplex[4].1) {
                simplex[4] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for (x, fx) in simplex.iter_mut().skip(1) {
                    *x = std::array::from_fn(|k| best[k] + 0.5 * (x[k] - best[k]));
                    *fx = f(x);
                }
            }
        }
        let best = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        history.push(-best);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexRun {
        best: simplex[0].0,
        value: simplex[0].1,
        iterations,
        converged,
        history,
    }
}

/// Maximum-likelihood density matrix from the six-setting counts.
pub fn mle_reconstruct(counts: &[CountRecord], opts: &MleOptions) -> Result<TomographyResult> {
    if opts.max_iters == 0 || opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(invalid("MLE needs max_iters >= 1 and tol >= 0"));
    }
    let linear = linear_inversion(counts)?;
    if counts.iter().all(|c| c.clicks == 0) {
        return Err(QkdError::DegenerateCounts("all settings have zero clicks".into()));
    }
    let projected = project_to_physical(&linear)?;
    let objective = |x: &[f64; 4]| {
        -log_likelihood(&params_to_rho(x), counts).expect("parameterized state is a qubit")
    };

    let origin = rho_to_params(&projected);
    let mut starts = vec![origin];
    for k in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, domain::MLE_RESTART, k as u64);
        let noise = Normal::new(0.0, 0.2).expect("valid normal");
        starts.push(std::array::from_fn(|i| origin[i] + noise.sample(&mut rng)));
    }

    let best = starts
        .into_iter()
        .map(|s| nelder_mead(objective, s, opts))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    let rho = DensityMatrix::new(params_to_rho(&best.best).into_matrix())?;
    Ok(TomographyResult {
        log_likelihood: -best.value,
        rho,
        iterations: best.iterations,
        converged: best.converged,
        history: best.history,
    })
}

/// Restricts a mode-space density matrix to polarization at l = 0 and
/// expresses it in the (|H>, |V>) basis, conditioned on landing there.
pub fn reduce_to_analysis(rho: &DensityMatrix, cutoff: OamCutoff) -> Result<DensityMatrix> {
    if rho.dim() != cutoff.dim() {
        return Err(QkdError::DimensionMismatch {
            expected: cutoff.dim(),
            actual: rho.dim(),
        });
    }
    let idx = [
        cutoff.index(SpinOrbitMode::new(Sam::R, 0))?,
        cutoff.index(SpinOrbitMode::new(Sam::L, 0))?,
    ];
    let circ = DMatrix::from_fn(2, 2, |i, j| rho.matrix()[(idx[i], idx[j])]);
    let weight = circ.trace().re;
    if weight < 1e-12 {
        return Err(invalid("state has no weight on the analysis subspace"));
    }
    let c = circular_to_linear();
    let hv = &c * circ * c.adjoint();
    DensityMatrix::new(hv.unscale(weight))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub fidelities: Vec<f64>,
    pub predicted_qber: f64,
}

/// Fidelity of each reconstruction to its target and the QBER they imply.
pub fn state_fidelity_report(
    reconstructed: &[DensityMatrix],
    targets: &[DVector<Complex64>],
) -> Result<FidelityReport> {
    if reconstructed.len() != 4 || targets.len() != 4 {
        return Err(invalid(format!(
            "expected 4 reconstructions and 4 targets, got {} and {}",
            reconstructed.len(),
            targets.len()
        )));
    }
    let fidelities = reconstructed
        .iter()
        .zip(targets)
        .map(|(rho, t)| {
            let f = state_fidelity(rho, &DensityMatrix::from_ket(t)?)?;
            Ok(f.clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted_qber = crate::protocol::qber_from_fidelities(&fidelities)?;
    Ok(FidelityReport {
        fidelities,
        predicted_qber,
    })
}

/// The decoded polarization state Alice intends for `bit` in `basis`.
pub fn analysis_target(bit: bool, basis: Basis) -> DVector<Complex64> {
    polarization_ket(basis.polarization(bit))
}

/// Exact analysis-subspace state Bob receives for one prepared state.
pub fn received_state(
    optics: &Optics,
    bit: bool,
    basis: Basis,
    encoding: Encoding,
    theta: f64,
    noise: &NoiseParams,
) -> Result<DensityMatrix> {
    let rho = channel_transmit(&optics.prepare(bit, basis, encoding)?, theta, noise)?;
    reduce_to_analysis(&optics.decode(&rho, encoding)?, optics.cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn projector(label: Polarization) -> DMatrix<Complex64> {
        tomography_settings()
            .into_iter()
            .find(|s| s.label == label)
            .unwrap()
            .projector
            .matrix()
            .clone()
    }

    fn exact_counts(rho: &DensityMatrix, shots: u64) -> Vec<CountRecord> {
        tomography_settings()
            .iter()
            .map(|s| {
                let p = rho.expectation(s.projector.matrix()).unwrap();
                CountRecord::new(s.label, shots, (p * shots as f64).round() as u64).unwrap()
            })
            .collect()
    }

    fn pure(pol: Polarization) -> DensityMatrix {
        DensityMatrix::from_ket(&polarization_ket(pol)).unwrap()
    }

    fn mixed() -> DensityMatrix {
        DensityMatrix::new(DMatrix::identity(2, 2).scale(0.5)).unwrap()
    }

    #[test]
    fn settings_examples() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        for pol in [Polarization::H, Polarization::D, Polarization::R] {
            let sum = projector(pol) + projector(pol.orthogonal());
            assert!((sum - &id).camax() < 1e-12);
        }
        let hd = (projector(Polarization::H) * projector(Polarization::D)).trace();
        assert!((hd.re - 0.5).abs() < 1e-15);
        let rl = (projector(Polarization::R) * projector(Polarization::L)).trace();
        assert!(rl.norm() < 1e-15);
    }

    #[test]
    fn simulate_counts_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts = simulate_counts(&pure(Polarization::H), &tomography_settings(), 1000, &mut rng).unwrap();
        assert_eq!(counts[0], CountRecord::new(Polarization::H, 1000, 1000).unwrap());
        assert_eq!(counts[1].clicks, 0);

        let shots = 100_000;
        let counts = simulate_counts(&mixed(), &tomography_settings(), shots, &mut rng).unwrap();
        let sigma = (0.25 / shots as f64).sqrt();
        for c in &counts {
            assert!((c.frequency() - 0.5).abs() < 3.0 * sigma, "{c:?}");
        }

        let a = simulate_counts(&mixed(), &tomography_settings(), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_counts(&mixed(), &tomography_settings(), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_inversion_examples() {
        let h = pure(Polarization::H);
        let est = linear_inversion(&exact_counts(&h, 1_000_000)).unwrap();
        assert!((est - h.matrix()).camax() < 1e-12);
        let est = linear_inversion(&exact_counts(&mixed(), 1000)).unwrap();
        assert!((est - mixed().matrix()).camax() < 1e-12);
        for pol in Polarization::ALL {
            let est = linear_inversion(&exact_counts(&pure(pol), 1000)).unwrap();
            assert!((est - pure(pol).matrix()).camax() < 1e-12, "{pol:?}");
        }
    }

    #[test]
    fn linear_inversion_can_be_unphysical() {
        // At 100 shots a pure state usually yields a negative eigenvalue.
        let mut negative = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts = simulate_counts(&pure(Polarization::D), &tomography_settings(), 100, &mut rng).unwrap();
            let est = linear_inversion(&counts).unwrap();
            if est.symmetric_eigenvalues().min() < 0.0 {
                negative += 1;
                let mle = mle_reconstruct(&counts, &MleOptions::default()).unwrap();
                assert!(mle.rho.min_eigenvalue() >= -1e-12);
            }
        }
        assert!(negative > 0);
    }

    #[test]
    fn missing_setting_is_reported() {
        let mut counts = exact_counts(&mixed(), 10);
        counts.retain(|c| c.setting != Polarization::A);
        assert_eq!(linear_inversion(&counts), Err(QkdError::MissingSetting("A".into())));
        assert!(mle_reconstruct(&counts, &MleOptions::default()).is_err());
    }

    #[test]
    fn all_zero_counts_are_degenerate() {
        let counts: Vec<_> = Polarization::ALL
            .iter()
            .map(|&p| CountRecord::new(p, 10, 0).unwrap())
            .collect();
        assert!(matches!(
            mle_reconstruct(&counts, &MleOptions::default()),
            Err(QkdError::DegenerateCounts(_))
        ));
    }

    #[test]
    fn mle_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let counts = simulate_counts(&pure(Polarization::H), &tomography_settings(), 1_000_000, &mut rng).unwrap();
        let result = mle_reconstruct(&counts, &MleOptions::default()).unwrap();
        let f = result.rho.fidelity_to_ket(&polarization_ket(Polarization::H)).unwrap();
        assert!(f > 0.999, "fidelity {f}");

        let half = exact_counts(&mixed(), 1000);
        let result = mle_reconstruct(&half, &MleOptions::default()).unwrap();
        assert!((result.rho.matrix() - mixed().matrix()).camax() < 1e-6);
        assert!(result.converged);
    }

    #[test]
    fn mle_history_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let counts = simulate_counts(&pure(Polarization::R), &tomography_settings(), 500, &mut rng).unwrap();
        let result = mle_reconstruct(&counts, &MleOptions::default()).unwrap();
        assert!(result.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cholesky_parameters_round_trip() {
        let rho = DensityMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.7, 0.0),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.3, 0.0),
            ],
        ))
        .unwrap();
        let back = params_to_rho(&rho_to_params(&rho));
        assert!((back.matrix() - rho.matrix()).camax() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let counts = exact_counts(&pure(Polarization::D), 200);
        let mut buf = Vec::new();
        write_counts_csv(&mut buf, &counts).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("setting,shots,clicks\n"));
        assert_eq!(read_counts_csv(buf.as_slice()).unwrap(), counts);
        assert!(read_counts_csv("setting,shots,clicks\nQ,1,0\n".as_bytes()).is_err());
        assert!(read_counts_csv("setting,shots,clicks\nH,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn received_hybrid_state_ignores_rotation() {
        let optics = Optics::default();
        let noise = NoiseParams::noiseless();
        for deg in [0.0, 50.0, 90.0] {
            let rho = received_state(&optics, false, Basis::Z, Encoding::Hybrid, f64::to_radians(deg), &noise).unwrap();
            assert!((rho.matrix() - pure(Polarization::H).matrix()).camax() < 1e-12);
        }
    }

    #[test]
    fn received_polarization_follows_cos_squared() {
        let optics = Optics::default();
        let noise = NoiseParams::noiseless();
        for deg in [0.0, 12.5, 25.0, 50.0, 75.0, 90.0] {
            let theta = f64::to_radians(deg);
            let rho = received_state(&optics, false, Basis::Z, Encoding::PolarizationOnly, theta, &noise).unwrap();
            let f = rho.fidelity_to_ket(&analysis_target(false, Basis::Z)).unwrap();
            assert!((f - theta.cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_report_arity() {
        let rhos = vec![pure(Polarization::H); 3];
        let targets = vec![polarization_ket(Polarization::H); 3];
        assert!(state_fidelity_report(&rhos, &targets).is_err());
        let rhos = vec![pure(Polarization::H); 4];
        let targets = vec![polarization_ket(Polarization::H); 4];
        let report = state_fidelity_report(&rhos, &targets).unwrap();
        assert!(report.predicted_qber.abs() < 1e-12);
    }
}
