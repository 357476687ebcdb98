//! Optical transformations on the spin-orbit space: Q-plates, frame
//! rotations, waveplates, the polarizing beam splitter and depolarizing noise.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{invalid, QkdError, Result};
use crate::spinorbit::{
    circular_to_linear, DensityMatrix, LinearOperator, OamCutoff, Polarization, Sam,
    SpinOrbitMode, SpinOrbitState, I, ONE, ZERO,
};

/// Retardation below which a Q-plate does not couple spin to orbit.
const COUPLING_EPS: f64 = 1e-15;
const SUPPORT_TOL: f64 = 1e-10;

/// Parameters of a Q-plate: retardation, topological charge and axis offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPlateParams {
    delta: f64,
    q: f64,
    alpha0: f64,
}

impl QPlateParams {
    pub fn new(delta: f64, q: f64, alpha0: f64) -> Result<Self> {
        if !delta.is_finite() || !(-1e-12..=TAU + 1e-12).contains(&delta) {
            return Err(invalid(format!("Q-plate retardation {delta} outside [0, 2pi]")));
        }
        if !q.is_finite() || ((2.0 * q) - (2.0 * q).round()).abs() > 1e-9 {
            return Err(invalid(format!("Q-plate charge {q} is not a half-integer")));
        }
        if !alpha0.is_finite() {
            return Err(invalid("Q-plate axis angle must be finite"));
        }
        Ok(Self { delta, q, alpha0 })
    }

    /// Fully converting q = 1/2 plate, the device used at both ends of the link.
    pub fn tuned_half(alpha0: f64) -> Result<Self> {
        Self::new(PI, 0.5, alpha0)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// OAM change 2q imparted on conversion.
    pub fn oam_shift(&self) -> i32 {
        (2.0 * self.q).round() as i32
    }
}

impl Default for QPlateParams {
    fn default() -> Self {
        Self {
            delta: PI,
            q: 0.5,
            alpha0: 0.0,
        }
    }
}

/// Q-plate unitary:
///
/// ```text
/// |R,m> -> cos(d/2)|R,m> + i e^{-2i a0} sin(d/2)|L,m-2q>
/// |L,m> -> cos(d/2)|L,m> + i e^{+2i a0} sin(d/2)|R,m+2q>
/// ```
///
/// Columns whose converted component would fall outside the cutoff are
/// marked non-retained, so `apply` reports truncation leakage for states
/// populating them.
pub fn qplate_operator(params: &QPlateParams, cutoff: OamCutoff) -> Result<LinearOperator> {
    let n = cutoff.dim();
    let c = Complex64::new((params.delta / 2.0).cos(), 0.0);
    let s = (params.delta / 2.0).sin();
    let couples = s.abs() > COUPLING_EPS;
    let shift = params.oam_shift();
    if couples && shift.unsigned_abs() > 2 * cutoff.l_max() {
        return Err(QkdError::Truncation {
            oam: shift,
            l_max: cutoff.l_max(),
        });
    }
    let to_left = I * Complex64::from_polar(s, -2.0 * params.alpha0);
    let to_right = I * Complex64::from_polar(s, 2.0 * params.alpha0);

    let mut m = DMatrix::zeros(n, n);
    let mut retained = vec![true; n];
    for mode in cutoff.modes() {
        let j = cutoff.index(mode)?;
        m[(j, j)] = c;
        let (target, coeff) = match mode.sam {
            Sam::R => (SpinOrbitMode::new(Sam::L, mode.oam - shift), to_left),
            Sam::L => (SpinOrbitMode::new(Sam::R, mode.oam + shift), to_right),
        };
        if cutoff.contains(target.oam) {
            m[(cutoff.index(target)?, j)] = coeff;
        } else if couples {
            retained[j] = false;
        }
    }
    LinearOperator::new(m, true)?.with_retained(retained)
}

/// Spin sign entering the rotation phase; R carries -1 so that |R,+1> and
/// |L,-1> pick up no phase at all.
pub fn spin_sign(sam: Sam) -> i32 {
    match sam {
        Sam::R => -1,
        Sam::L => 1,
    }
}

/// Rotation by `theta` about the propagation axis: `|s,l> -> e^{i(sigma+l)theta}|s,l>`.
pub fn rotation_operator(theta: f64, cutoff: OamCutoff) -> LinearOperator {
    let diag = DVector::from_iterator(
        cutoff.dim(),
        cutoff
            .modes()
            .map(|mode| Complex64::from_polar(1.0, f64::from(spin_sign(mode.sam) + mode.oam) * theta)),
    );
    LinearOperator::new(DMatrix::from_diagonal(&diag), true).expect("finite diagonal")
}

/// Linear retarder; identity on OAM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateParams {
    retardance: f64,
    axis_angle: f64,
}

impl WaveplateParams {
    pub fn new(retardance: f64, axis_angle: f64) -> Result<Self> {
        if !retardance.is_finite() || !axis_angle.is_finite() {
            return Err(invalid("waveplate parameters must be finite"));
        }
        Ok(Self {
            retardance,
            axis_angle,
        })
    }

    pub fn half_wave(axis_angle: f64) -> Result<Self> {
        Self::new(PI, axis_angle)
    }

    pub fn quarter_wave(axis_angle: f64) -> Result<Self> {
        Self::new(FRAC_PI_2, axis_angle)
    }

    pub fn retardance(&self) -> f64 {
        self.retardance
    }

    pub fn axis_angle(&self) -> f64 {
        self.axis_angle
    }

    /// Jones matrix on (|H>, |V>): fast axis at `axis_angle`, slow axis delayed.
    pub fn jones_matrix(&self) -> Matrix2<Complex64> {
        let (sin, cos) = self.axis_angle.sin_cos();
        let rot = Matrix2::new(cos, -sin, sin, cos).map(|x| Complex64::new(x, 0.0));
        let delay = Matrix2::new(ONE, ZERO, ZERO, Complex64::from_polar(1.0, self.retardance));
        rot * delay * rot.transpose()
    }
}

/// Block-diagonal embedding of a polarization operator given on (|H>, |V>).
pub(crate) fn embed_linear_polarization(jones: &Matrix2<Complex64>, cutoff: OamCutoff) -> DMatrix<Complex64> {
    let c = circular_to_linear();
    let jones = DMatrix::from_fn(2, 2, |i, j| jones[(i, j)]);
    let circ = c.adjoint() * jones * &c;
    embed_circular_polarization(&circ, cutoff)
}

/// Block-diagonal embedding of a polarization operator given on (|R>, |L>).
pub(crate) fn embed_circular_polarization(circ: &DMatrix<Complex64>, cutoff: OamCutoff) -> DMatrix<Complex64> {
    let n = cutoff.dim();
    let l = cutoff.l_max() as i32;
    let mut m = DMatrix::zeros(n, n);
    for oam in -l..=l {
        let idx = [
            cutoff.index(SpinOrbitMode::new(Sam::R, oam)).expect("in range"),
            cutoff.index(SpinOrbitMode::new(Sam::L, oam)).expect("in range"),
        ];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = circ[(a, b)];
            }
        }
    }
    m
}

pub fn waveplate_operator(params: &WaveplateParams, cutoff: OamCutoff) -> LinearOperator {
    LinearOperator::new(embed_linear_polarization(&params.jones_matrix(), cutoff), true)
        .expect("finite waveplate matrix")
}

fn polarization_projector(pol: Polarization, cutoff: OamCutoff) -> DMatrix<Complex64> {
    let k = pol.circular();
    let circ = DMatrix::from_fn(2, 2, |i, j| k[i] * k[j].conj());
    embed_circular_polarization(&circ, cutoff)
}

/// Polarizing beam splitter: (H-polarized part, V-polarized part) at every l.
pub fn pbs_split(state: &SpinOrbitState) -> Result<(SpinOrbitState, SpinOrbitState)> {
    state.ensure_nonzero()?;
    let cutoff = state.cutoff();
    let transmitted = polarization_projector(Polarization::H, cutoff) * state.amplitudes();
    let reflected = polarization_projector(Polarization::V, cutoff) * state.amplitudes();
    Ok((
        SpinOrbitState::from_amplitudes(cutoff, transmitted.iter().copied().collect())?,
        SpinOrbitState::from_amplitudes(cutoff, reflected.iter().copied().collect())?,
    ))
}

/// Two-dimensional subspaces the protocol ever populates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    /// span{|L,-1>, |R,+1>}: the rotation-invariant logical qubit.
    Logical,
    /// span{|R,0>, |L,0>}: polarization of a Gaussian beam.
    Polarization,
}

impl Subspace {
    pub fn modes(self) -> [SpinOrbitMode; 2] {
        match self {
            Self::Logical => [SpinOrbitMode::new(Sam::L, -1), SpinOrbitMode::new(Sam::R, 1)],
            Self::Polarization => [SpinOrbitMode::new(Sam::R, 0), SpinOrbitMode::new(Sam::L, 0)],
        }
    }

    pub fn kets(self, cutoff: OamCutoff) -> [DVector<Complex64>; 2] {
        self.modes().map(|m| {
            SpinOrbitState::basis(m, cutoff)
                .expect("protocol modes fit any valid cutoff")
                .amplitudes()
                .clone()
        })
    }

    /// Weight `tr(Pi rho)` of `rho` inside the subspace.
    pub fn support(self, rho: &DensityMatrix, cutoff: OamCutoff) -> Result<f64> {
        self.kets(cutoff)
            .iter()
            .map(|k| rho.fidelity_to_ket(k))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    depolarizing_p: f64,
}

impl NoiseParams {
    pub fn new(depolarizing_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&depolarizing_p) {
            return Err(invalid(format!(
                "depolarizing probability {depolarizing_p} outside [0, 1]"
            )));
        }
        Ok(Self { depolarizing_p })
    }

    pub fn noiseless() -> Self {
        Self { depolarizing_p: 0.0 }
    }

    pub fn depolarizing_p(&self) -> f64 {
        self.depolarizing_p
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// `(1-p) rho + p Pi/2` on whichever protocol subspace holds `rho`.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    let cutoff = OamCutoff::from_dim(rho.dim())?;
    for subspace in [Subspace::Logical, Subspace::Polarization] {
        if subspace.support(rho, cutoff)? >= 1.0 - SUPPORT_TOL {
            return depolarize_on(rho, p, subspace);
        }
    }
    Err(invalid("state has no support on a protocol subspace"))
}

pub fn depolarize_on(rho: &DensityMatrix, p: f64, subspace: Subspace) -> Result<DensityMatrix> {
    NoiseParams::new(p)?;
    let cutoff = OamCutoff::from_dim(rho.dim())?;
    let support = subspace.support(rho, cutoff)?;
    if support < 1.0 - SUPPORT_TOL {
        return Err(invalid(format!(
            "state has weight {support} on the {subspace:?} subspace"
        )));
    }
    if p == 0.0 {
        return Ok(rho.clone());
    }
    let mixed = DensityMatrix::maximally_mixed(&subspace.kets(cutoff))?;
    DensityMatrix::new(rho.matrix().scale(1.0 - p) + mixed.matrix().scale(p))
}
