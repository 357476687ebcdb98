//! Joint spin (polarization) and orbital angular momentum mode space.
//!
//! A photon lives in span{|s, l>} with s in {R, L} and |l| <= L_max. The
//! space is small (10 modes at the default cutoff), so states and operators
//! are stored as dense complex vectors and matrices.
//!
//! Circular-basis convention, shared by every module of this crate:
//!
//! ```text
//! |R> = (|H> - i|V>) / sqrt(2)        |H> = (|R> + |L>) / sqrt(2)
//! |L> = (|H> + i|V>) / sqrt(2)        |V> = i (|R> - |L>) / sqrt(2)
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, QkdError, Result};

/// Default OAM truncation. The protocol only populates l in {-1, 0, +1};
/// the extra shell lets leakage checks catch misuse.
pub const DEFAULT_L_MAX: u32 = 2;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-9;
const UNIT_NORM_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Circular polarization handedness (eigenstates of S_z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sam {
    R,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinOrbitMode {
    pub sam: Sam,
    /// OAM in units of hbar.
    pub oam: i32,
}

impl SpinOrbitMode {
    pub const fn new(sam: Sam, oam: i32) -> Self {
        Self { sam, oam }
    }
}

/// OAM truncation |l| <= L_max, with L_max >= 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OamCutoff(u32);

impl Default for OamCutoff {
    fn default() -> Self {
        Self(DEFAULT_L_MAX)
    }
}

impl OamCutoff {
    pub fn new(l_max: u32) -> Result<Self> {
        if l_max < 2 {
            return Err(invalid(format!("L_max must be at least 2, got {l_max}")));
        }
        Ok(Self(l_max))
    }

    /// Recovers the cutoff from a mode-space dimension 2(2L+1).
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) || (dim / 2).is_multiple_of(2) {
            return Err(invalid(format!("{dim} is not a spin-orbit dimension")));
        }
        Self::new(((dim / 2 - 1) / 2) as u32)
    }

    pub fn l_max(self) -> u32 {
        self.0
    }

    pub fn dim(self) -> usize {
        2 * self.shell()
    }

    fn shell(self) -> usize {
        2 * self.0 as usize + 1
    }

    pub fn contains(self, oam: i32) -> bool {
        oam.unsigned_abs() <= self.0
    }

    pub fn index(self, mode: SpinOrbitMode) -> Result<usize> {
        if !self.contains(mode.oam) {
            return Err(QkdError::Truncation {
                oam: mode.oam,
                l_max: self.0,
            });
        }
        let block = match mode.sam {
            Sam::R => 0,
            Sam::L => self.shell(),
        };
        Ok(block + (mode.oam + self.0 as i32) as usize)
    }

    /// Inverse of [`OamCutoff::index`].
    pub fn mode(self, index: usize) -> Option<SpinOrbitMode> {
        if index >= self.dim() {
            return None;
        }
        let (sam, offset) = if index < self.shell() {
            (Sam::R, index)
        } else {
            (Sam::L, index - self.shell())
        };
        Some(SpinOrbitMode::new(sam, offset as i32 - self.0 as i32))
    }

    /// Modes in canonical order: R before L, then l ascending from -L_max.
    pub fn modes(self) -> impl Iterator<Item = SpinOrbitMode> {
        (0..self.dim()).filter_map(move |i| self.mode(i))
    }
}

/// Canonical position of `mode` in a space truncated at `l_max`.
pub fn mode_index(mode: SpinOrbitMode, l_max: u32) -> Result<usize> {
    OamCutoff::new(l_max)?.index(mode)
}

/// Transverse polarization states used by the optics and tomography code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    /// Components on (|R>, |L>).
    pub fn circular(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Self::H => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            Self::V => [Complex64::new(0.0, s), Complex64::new(0.0, -s)],
            Self::D => [Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5)],
            Self::A => [Complex64::new(0.5, -0.5), Complex64::new(0.5, 0.5)],
            Self::R => [ONE, ZERO],
            Self::L => [ZERO, ONE],
        }
    }

    /// Components on (|H>, |V>).
    pub fn jones(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Self::H => [ONE, ZERO],
            Self::V => [ZERO, ONE],
            Self::D => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            Self::A => [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
            Self::R => [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
            Self::L => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
        }
    }

    pub fn orthogonal(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
            Self::D => Self::A,
            Self::A => Self::D,
            Self::R => Self::L,
            Self::L => Self::R,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::V => "V",
            Self::D => "D",
            Self::A => "A",
            Self::R => "R",
            Self::L => "L",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == label)
    }
}

/// Maps (|R>, |L>) components to (|H>, |V>) components: column k holds the
/// Jones vector of the k-th circular state.
pub(crate) fn circular_to_linear() -> DMatrix<Complex64> {
    let r = Polarization::R.jones();
    let l = Polarization::L.jones();
    DMatrix::from_row_slice(2, 2, &[r[0], l[0], r[1], l[1]])
}

/// A (not necessarily normalized) pure state over the spin-orbit modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOrbitState {
    cutoff: OamCutoff,
    amplitudes: DVector<Complex64>,
}

impl SpinOrbitState {
    pub fn zeros(cutoff: OamCutoff) -> Self {
        Self {
            cutoff,
            amplitudes: DVector::zeros(cutoff.dim()),
        }
    }

    pub fn basis(mode: SpinOrbitMode, cutoff: OamCutoff) -> Result<Self> {
        let mut state = Self::zeros(cutoff);
        state.amplitudes[cutoff.index(mode)?] = ONE;
        Ok(state)
    }

    /// `pol` carried by a beam with OAM `oam`.
    pub fn polarized(pol: Polarization, oam: i32, cutoff: OamCutoff) -> Result<Self> {
        let [r, l] = pol.circular();
        Self::superposition(
            cutoff,
            &[
                (r, SpinOrbitMode::new(Sam::R, oam)),
                (l, SpinOrbitMode::new(Sam::L, oam)),
            ],
        )
    }

    /// Sum of `coefficient * |mode>` terms; repeated modes accumulate.
    pub fn superposition(cutoff: OamCutoff, terms: &[(Complex64, SpinOrbitMode)]) -> Result<Self> {
        let mut state = Self::zeros(cutoff);
        for &(c, mode) in terms {
            state.amplitudes[cutoff.index(mode)?] += c;
        }
        state.check_finite()?;
        Ok(state)
    }

    pub fn from_amplitudes(cutoff: OamCutoff, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != cutoff.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: cutoff.dim(),
                actual: amplitudes.len(),
            });
        }
        let state = Self {
            cutoff,
            amplitudes: DVector::from_vec(amplitudes),
        };
        state.check_finite()?;
        Ok(state)
    }

    pub(crate) fn from_vector(cutoff: OamCutoff, amplitudes: DVector<Complex64>) -> Result<Self> {
        debug_assert_eq!(amplitudes.len(), cutoff.dim());
        let state = Self { cutoff, amplitudes };
        state.check_finite()?;
        Ok(state)
    }

    fn check_finite(&self) -> Result<()> {
        if self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            Ok(())
        } else {
            Err(QkdError::NonFinite)
        }
    }

    pub(crate) fn ensure_nonzero(&self) -> Result<()> {
        if self.norm_sqr() == 0.0 {
            Err(QkdError::ZeroNorm)
        } else {
            Ok(())
        }
    }

    pub fn cutoff(&self) -> OamCutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, mode: SpinOrbitMode) -> Result<Complex64> {
        Ok(self.amplitudes[self.cutoff.index(mode)?])
    }

    /// Probability weight on `mode` (unnormalized if the state is).
    pub fn weight(&self, mode: SpinOrbitMode) -> Result<f64> {
        Ok(self.amplitude(mode)?.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        self.ensure_nonzero()?;
        let norm = self.norm_sqr().sqrt();
        Ok(Self {
            cutoff: self.cutoff,
            amplitudes: self.amplitudes.unscale(norm),
        })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            cutoff: self.cutoff,
            amplitudes: self.amplitudes.map(|a| a * factor),
        }
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            cutoff: self.cutoff,
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &SpinOrbitState, b: &SpinOrbitState) -> Result<Complex64> {
    a.check_same_space(b)?;
    a.ensure_nonzero()?;
    b.ensure_nonzero()?;
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QkdError::InvalidDensityMatrix(format!(
                "{}x{} matrix is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QkdError::NonFinite);
        }
        let asym = (&matrix - matrix.adjoint()).camax();
        if asym > HERMITIAN_TOL {
            return Err(QkdError::InvalidDensityMatrix(format!(
                "not Hermitian (max deviation {asym:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(QkdError::InvalidDensityMatrix(format!("trace {trace} != 1")));
        }
        let rho = Self { matrix };
        let min = rho.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(QkdError::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// `|psi><psi|` for a normalized `psi`.
    pub fn from_pure(state: &SpinOrbitState) -> Result<Self> {
        state.ensure_nonzero()?;
        Self::from_ket(state.amplitudes())
    }

    pub fn from_ket(ket: &DVector<Complex64>) -> Result<Self> {
        let norm = ket.norm_squared();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(QkdError::InvalidDensityMatrix(format!(
                "pure state has squared norm {norm}"
            )));
        }
        Ok(Self {
            matrix: ket * ket.adjoint(),
        })
    }

    /// Uniform mixture over an orthonormal set of kets.
    pub fn maximally_mixed(kets: &[DVector<Complex64>]) -> Result<Self> {
        let Some(first) = kets.first() else {
            return Err(invalid("maximally mixed state needs at least one ket"));
        };
        let mut m = DMatrix::zeros(first.len(), first.len());
        for k in kets {
            m += k * k.adjoint();
        }
        Self::new(m.unscale(kets.len() as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `Re tr(op * rho)`.
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Result<f64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: self.dim(),
                actual: op.nrows(),
            });
        }
        Ok(op.component_mul(&self.matrix.transpose()).sum().re)
    }

    /// `<k|rho|k>`.
    pub fn fidelity_to_ket(&self, ket: &DVector<Complex64>) -> Result<f64> {
        if ket.len() != self.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: self.dim(),
                actual: ket.len(),
            });
        }
        Ok(ket.dotc(&(&self.matrix * ket)).re)
    }

    /// `U rho U^dagger`; the caller vouches that `U` keeps the state physical.
    pub(crate) fn conjugate_by(&self, op: &DMatrix<Complex64>) -> Self {
        Self {
            matrix: op * &self.matrix * op.adjoint(),
        }
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` between mixed states.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QkdError::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let sqrt_rho = psd_sqrt(rho.matrix());
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let root_trace: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    Ok(root_trace * root_trace)
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let roots = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    );
    &eig.eigenvectors * roots * eig.eigenvectors.adjoint()
}

/// `<target|rho|target>` for a normalized target.
pub fn fidelity(rho: &DensityMatrix, target: &SpinOrbitState) -> Result<f64> {
    target.ensure_nonzero()?;
    if !target.is_normalized(UNIT_NORM_TOL) {
        return Err(invalid("fidelity target must be normalized"));
    }
    rho.fidelity_to_ket(target.amplitudes())
}

/// Dense operator on the mode space.
///
/// `retained` marks the columns whose images stay inside the truncated space;
/// a unitary is only required to be unitary on those.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    matrix: DMatrix<Complex64>,
    unitary_expected: bool,
    retained: Vec<bool>,
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<Complex64>, unitary_expected: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QkdError::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QkdError::NonFinite);
        }
        let retained = vec![true; matrix.nrows()];
        Ok(Self {
            matrix,
            unitary_expected,
            retained,
        })
    }

    pub fn with_retained(mut self, retained: Vec<bool>) -> Result<Self> {
        if retained.len() != self.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: self.dim(),
                actual: retained.len(),
            });
        }
        self.retained = retained;
        Ok(self)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            unitary_expected: true,
            retained: vec![true; dim],
        }
    }

    /// Rank-one projector onto the normalized direction of `ket`.
    pub fn projector(ket: &SpinOrbitState) -> Result<Self> {
        let k = ket.normalize()?;
        Self::new(k.amplitudes() * k.amplitudes().adjoint(), false)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn unitary_expected(&self) -> bool {
        self.unitary_expected
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    /// `self * inner`: apply `inner` first.
    pub fn compose(&self, inner: &LinearOperator) -> Result<Self> {
        if self.dim() != inner.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: self.dim(),
                actual: inner.dim(),
            });
        }
        let retained = (0..inner.dim())
            .map(|j| {
                inner.retained[j]
                    && (0..inner.dim())
                        .all(|i| inner.matrix[(i, j)].norm_sqr() == 0.0 || self.retained[i])
            })
            .collect();
        Ok(Self {
            matrix: &self.matrix * &inner.matrix,
            unitary_expected: self.unitary_expected && inner.unitary_expected,
            retained,
        })
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        // A row is clean when only retained columns feed it.
        let retained = (0..n)
            .map(|i| (0..n).all(|j| self.retained[j] || self.matrix[(i, j)].norm_sqr() == 0.0))
            .collect();
        Self {
            matrix: self.matrix.adjoint(),
            unitary_expected: self.unitary_expected,
            retained,
        }
    }

    /// Largest entry of `|U^dagger U - I|` restricted to retained modes.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0_f64;
        for i in (0..self.dim()).filter(|&i| self.retained[i]) {
            for j in (0..self.dim()).filter(|&j| self.retained[j]) {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Matrix-vector product with leakage and norm checks for unitaries.
pub fn apply(op: &LinearOperator, state: &SpinOrbitState) -> Result<SpinOrbitState> {
    if op.dim() != state.dim() {
        return Err(QkdError::DimensionMismatch {
            expected: op.dim(),
            actual: state.dim(),
        });
    }
    state.ensure_nonzero()?;
    if op.unitary_expected {
        let leaked = state
            .amplitudes
            .iter()
            .zip(&op.retained)
            .position(|(a, &kept)| !kept && a.norm_sqr() > 0.0);
        if let Some(idx) = leaked {
            let mode = state.cutoff.mode(idx).expect("index within dimension");
            return Err(QkdError::Truncation {
                oam: mode.oam,
                l_max: state.cutoff.l_max(),
            });
        }
    }
    let out = SpinOrbitState::from_vector(state.cutoff, &op.matrix * &state.amplitudes)?;
    if op.unitary_expected {
        let before = state.norm_sqr();
        let deviation = (out.norm_sqr() - before).abs();
        if deviation > 1e-10 * before.max(1.0) {
            return Err(QkdError::NormViolation { deviation });
        }
    }
    Ok(out)
}

/// Exact outcome probabilities `<psi|P_i|psi> / <psi|psi>`.
pub fn born_probabilities(state: &SpinOrbitState, projectors: &[LinearOperator]) -> Result<Vec<f64>> {
    state.ensure_nonzero()?;
    let norm = state.norm_sqr();
    let mut total = DMatrix::<Complex64>::zeros(state.dim(), state.dim());
    let mut probs = Vec::with_capacity(projectors.len());
    for p in projectors {
        if p.dim() != state.dim() {
            return Err(QkdError::DimensionMismatch {
                expected: state.dim(),
                actual: p.dim(),
            });
        }
        total += p.matrix();
        let psi = state.amplitudes();
        probs.push(psi.dotc(&(p.matrix() * psi)).re / norm);
    }
    // The set must act as the identity on the state's support.
    let residual = (&total * state.amplitudes() - state.amplitudes()).norm() / norm.sqrt();
    if residual > COMPLETENESS_TOL {
        return Err(QkdError::IncompleteProjectors { deviation: residual });
    }
    Ok(probs)
}

/// Draws a measurement outcome according to the Born rule.
pub fn born_sample<R: Rng + ?Sized>(
    state: &SpinOrbitState,
    projectors: &[LinearOperator],
    rng: &mut R,
) -> Result<usize> {
    let probs = born_probabilities(state, projectors)?;
    Ok(sample_index(&probs, rng))
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
