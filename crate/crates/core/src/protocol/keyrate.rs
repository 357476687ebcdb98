//! Closed-form error-rate and key-rate relations.

use crate::error::{invalid, Result};

/// Largest QBER at which a secret key can still be extracted, as plotted
/// alongside the measurements.
pub const SECURITY_THRESHOLD: f64 = 0.11;

/// Root of `1 - 2 h2(q)`.
pub const KEY_FRACTION_ZERO: f64 = 0.110_027_864_438;

/// Basis-averaged QBER of polarization-only BB84 with misalignment `theta`:
/// the Z basis errs with `sin^2(theta)`, the circular basis never does.
pub fn theoretical_qber(theta: f64) -> f64 {
    theta.sin().powi(2) / 2.0
}

/// `(1/4) sum_i (1 - F_i)` over the four prepared states.
pub fn qber_from_fidelities(fidelities: &[f64]) -> Result<f64> {
    if fidelities.len() != 4 {
        return Err(invalid(format!(
            "expected 4 fidelities, got {}",
            fidelities.len()
        )));
    }
    let mut total = 0.0;
    for &f in fidelities {
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(invalid(format!("fidelity {f} outside [0, 1]")));
        }
        total += 1.0 - f.clamp(0.0, 1.0);
    }
    Ok(total / 4.0)
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Asymptotic BB84 secret fraction `max(0, 1 - 2 h2(Q))`.
pub fn secret_key_fraction(qber: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(invalid(format!("QBER {qber} outside [0, 0.5]")));
    }
    Ok((1.0 - 2.0 * binary_entropy(qber)).max(0.0))
}

/// Depolarizing probability producing `target_qber` on the protocol
/// subspace. The channel leaves a fraction `p/2` of every prepared state in
/// the orthogonal outcome, so `p = 2 Q`.
pub fn calibrate_depolarizing(target_qber: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&target_qber) {
        return Err(invalid(format!(
            "target QBER {target_qber} outside [0, 0.5]"
        )));
    }
    Ok(2.0 * target_qber)
}
