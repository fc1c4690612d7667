//! Closed-form asymptotic model of the MDI-QKD link.
//!
//! Given the two arm transmittances (detector efficiency folded in), the dark
//! count probability and the misalignment error, this module produces the
//! expected gain and QBER of every intensity pair in the `x` and `z` bases,
//! and the yield and error rates of the single-photon pair channel. These are
//! the numbers a noiseless-statistics experiment would observe, and they also
//! provide the asymptotic reference curve for key-rate sweeps.
//!
//! Alice's intensity is always `mu` and Bob's is always `nu`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::special::i0_minus_one;

/// Error probability of a completely random outcome.
pub const E0: f64 = 0.5;

/// Dark count probability per detector per gate used in the reference setup.
pub const DEFAULT_DARK_COUNT: f64 = 3e-6;

/// Misalignment error probability used in the reference setup.
pub const DEFAULT_MISALIGNMENT: f64 = 0.015;

/// Which conjugate basis both parties prepared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::X, Basis::Z];

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::X => "x",
            Basis::Z => "z",
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Basis::X),
            "z" => Ok(Basis::Z),
            other => Err(Error::Validation(format!("unknown basis {other:?}"))),
        }
    }
}

/// Physical inputs of the channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmittance from Alice to the relay.
    pub eta_a: f64,
    /// Transmittance from Bob to the relay.
    pub eta_b: f64,
    /// Dark count probability per detector per gate.
    pub p_d: f64,
    /// Misalignment error probability.
    pub e_d: f64,
}

impl ChannelParams {
    pub fn new(eta_a: f64, eta_b: f64, p_d: f64, e_d: f64) -> Result<Self> {
        let params = Self { eta_a, eta_b, p_d, e_d };
        params.validate()?;
        Ok(params)
    }

    /// Symmetric link with the reference dark count and misalignment.
    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta, DEFAULT_DARK_COUNT, DEFAULT_MISALIGNMENT)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_a", self.eta_a),
            ("eta_b", self.eta_b),
            ("p_d", self.p_d),
            ("e_d", self.e_d),
        ] {
            ensure((0.0..=1.0).contains(&v), || format!("{name} must lie in [0, 1], got {v}"))?;
        }
        ensure(self.e_d < 0.5, || format!("e_d must be below 0.5, got {}", self.e_d))
    }
}

/// Auxiliary quantities shared by the gain formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxVars {
    /// `sqrt(eta_a mu eta_b nu) / 2`
    pub x_var: f64,
    /// `(1 - p_d) exp(-(eta_a mu + eta_b nu) / 4)`
    pub y_var: f64,
    /// `eta_a mu + eta_b nu`
    pub mu_prime: f64,
}

/// Gain and QBER of one intensity pair in one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
}

impl GainQber {
    fn from_error_gain(gain: f64, error_gain: f64) -> Self {
        let qber = if gain > 0.0 { error_gain / gain } else { E0 };
        Self { gain, qber }
    }

    /// Product `qber * gain`, the rate of erroneous successful events.
    pub fn error_gain(&self) -> f64 {
        self.gain * self.qber
    }
}

/// Expected yield and error rates of the single-photon pair channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonStats {
    pub y11: f64,
    pub e11_x: f64,
    pub e11_z: f64,
}

fn check_intensity(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("intensity {name} must be finite and >= 0, got {v}")))
    }
}

pub fn aux_vars(params: &ChannelParams, mu: f64, nu: f64) -> Result<AuxVars> {
    params.validate()?;
    check_intensity("mu", mu)?;
    check_intensity("nu", nu)?;
    Ok(aux_unchecked(params, mu, nu))
}

fn aux_unchecked(p: &ChannelParams, mu: f64, nu: f64) -> AuxVars {
    let a = p.eta_a * mu;
    let b = p.eta_b * nu;
    AuxVars {
        x_var: (a * b).sqrt() / 2.0,
        y_var: (1.0 - p.p_d) * (-(a + b) / 4.0).exp(),
        mu_prime: a + b,
    }
}

/// Expected `x`-basis gain and QBER for Alice intensity `mu`, Bob intensity `nu`.
pub fn gain_qber_x(params: &ChannelParams, mu: f64, nu: f64) -> Result<GainQber> {
    let aux = aux_vars(params, mu, nu)?;
    let y = aux.y_var;
    let y2 = y * y;
    // 1 + 2y^2 - 4y I0(x) + I0(2x) = 2(1-y)^2 - 4y (I0(x)-1) + (I0(2x)-1)
    let s = aux.mu_prime / 4.0;
    let one_minus_y = -(-s).exp_m1() + params.p_d * (-s).exp();
    let i0m1_x = i0_minus_one(aux.x_var);
    let i0m1_2x = i0_minus_one(2.0 * aux.x_var);
    let bracket = 2.0 * one_minus_y * one_minus_y - 4.0 * y * i0m1_x + i0m1_2x;
    let gain = 2.0 * y2 * bracket;
    let error_gain = E0 * gain - 2.0 * (E0 - params.e_d) * y2 * i0m1_2x;
    Ok(GainQber::from_error_gain(gain, error_gain))
}

/// Expected `z`-basis gain and QBER, split into correct (`Q_C`) and
/// erroneous (`Q_E`) coincidence contributions.
pub fn gain_qber_z(params: &ChannelParams, mu: f64, nu: f64) -> Result<GainQber> {
    let aux = aux_vars(params, mu, nu)?;
    let pd = params.p_d;
    let keep = 1.0 - pd;
    // 1 - (1 - p_d) e^{-t}, without cancellation for small t and p_d.
    let miss = |t: f64| -(-t).exp_m1() + pd * (-t).exp();
    let half = (-aux.mu_prime / 2.0).exp();
    let q_c = 2.0
        * keep
        * keep
        * half
        * miss(params.eta_a * mu / 2.0)
        * miss(params.eta_b * nu / 2.0);
    // I0(2x) - (1 - p_d) e^{-mu'/2}
    let excess = i0_minus_one(2.0 * aux.x_var) + miss(aux.mu_prime / 2.0);
    let q_e = 2.0 * pd * keep * keep * half * excess;
    let gain = q_c + q_e;
    let error_gain = params.e_d * q_c + (1.0 - params.e_d) * q_e;
    Ok(GainQber::from_error_gain(gain, error_gain))
}

pub fn gain_qber(params: &ChannelParams, basis: Basis, mu: f64, nu: f64) -> Result<GainQber> {
    match basis {
        Basis::X => gain_qber_x(params, mu, nu),
        Basis::Z => gain_qber_z(params, mu, nu),
    }
}

/// Yield of the single-photon pair channel (identical in both bases) and its
/// `x`/`z` error rates, for an honest relay.
pub fn single_photon_stats(params: &ChannelParams) -> Result<SinglePhotonStats> {
    params.validate()?;
    let ChannelParams { eta_a, eta_b, p_d, e_d } = *params;
    let keep2 = (1.0 - p_d) * (1.0 - p_d);
    let both = eta_a * eta_b / 2.0;
    let y11 = keep2
        * (both
            + (2.0 * eta_a + 2.0 * eta_b - 3.0 * eta_a * eta_b) * p_d
            + 4.0 * (1.0 - eta_a) * (1.0 - eta_b) * p_d * p_d);
    if y11 <= 0.0 {
        return Ok(SinglePhotonStats { y11: 0.0, e11_x: E0, e11_z: E0 });
    }
    let ey_x = E0 * y11 - (E0 - e_d) * keep2 * both;
    let ey_z = E0 * y11 - (E0 - e_d) * keep2 * (1.0 - 2.0 * p_d) * both;
    Ok(SinglePhotonStats { y11, e11_x: ey_x / y11, e11_z: ey_z / y11 })
}

/// Gain contributed by the single-photon pair channel.
pub fn q11(mu: f64, nu: f64, y11: f64) -> f64 {
    mu * nu * (-mu - nu).exp() * y11
}
