//! Secret key rate from the single-photon bounds and the signal-pair
//! statistics, and the failure probability of an `n_alpha`-sigma analysis.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Reconciliation inefficiency of the reference setup.
pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.16;

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::Domain(format!("binary entropy needs e in [0, 1], got {e}")));
    }
    if e == 0.0 || e == 1.0 {
        return Ok(0.0);
    }
    Ok(-e * e.log2() - (1.0 - e) * (1.0 - e).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInputs {
    /// Lower bound on the single-photon pair gain in the key (`z`) basis.
    pub q11_z: f64,
    /// Upper bound on the single-photon pair phase error (`x`-basis error).
    pub e11_x: f64,
    /// Observed signal-pair gain in the key basis.
    pub gain_z: f64,
    /// Observed signal-pair QBER in the key basis.
    pub qber_z: f64,
    /// Error-correction inefficiency, `>= 1`.
    pub f_ec: f64,
}

impl KeyRateInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q11_z", self.q11_z),
            ("e11_x", self.e11_x),
            ("gain_z", self.gain_z),
            ("qber_z", self.qber_z),
        ] {
            ensure((0.0..=1.0).contains(&v), || format!("{name} must lie in [0, 1], got {v}"))?;
        }
        ensure(self.f_ec >= 1.0 && self.f_ec.is_finite(), || {
            format!("f_ec must be >= 1, got {}", self.f_ec)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    /// `max(0, raw)`, bits per signal-pair pulse.
    pub rate: f64,
    /// Unclamped value; negative past the cutoff.
    pub raw: f64,
    /// `q11_z [1 - H(e11_x)]`
    pub privacy_term: f64,
    /// `gain_z f H(qber_z)`
    pub ec_cost: f64,
    /// The phase-error bound reached 1/2, leaving nothing after privacy
    /// amplification.
    pub privacy_saturated: bool,
}

/// `R = q11_z [1 - H(e11_x)] - gain_z f H(qber_z)`, floored at zero.
pub fn key_rate(inputs: &KeyRateInputs) -> Result<KeyRate> {
    inputs.validate()?;
    let saturated = inputs.e11_x >= 0.5;
    let e = inputs.e11_x.clamp(0.0, 0.5);
    let privacy_term = inputs.q11_z * (1.0 - binary_entropy(e)?);
    let ec_cost = inputs.gain_z * inputs.f_ec * binary_entropy(inputs.qber_z)?;
    let raw = privacy_term - ec_cost;
    Ok(KeyRate { rate: raw.max(0.0), raw, privacy_term, ec_cost, privacy_saturated: saturated })
}

/// Two-sided Gaussian tail mass beyond `n_alpha` standard deviations.
pub fn failure_probability(n_alpha: f64) -> Result<f64> {
    if !(n_alpha >= 0.0) {
        return Err(Error::Domain(format!("n_alpha must be >= 0, got {n_alpha}")));
    }
    Ok(libm::erfc(n_alpha / std::f64::consts::SQRT_2))
}
