//! Scenario files: channel, decoy protocol, estimation settings and run mode.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, DEFAULT_DARK_COUNT, DEFAULT_MISALIGNMENT};
use crate::error::{ensure, Result};
use crate::estimation::FluctuationConfig;
use crate::keyrate::DEFAULT_EC_INEFFICIENCY;

/// Pulses sent per intensity pair, summed over both bases.
pub const DEFAULT_N_DATA: f64 = 2e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub channel: ChannelConfig,
    pub protocol: DecoyProtocol,
    #[serde(default)]
    pub estimation: FluctuationConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_dark_count")]
    pub p_d: f64,
    #[serde(default = "default_misalignment")]
    pub e_d: f64,
    #[serde(default)]
    pub eta_a: Option<f64>,
    #[serde(default)]
    pub eta_b: Option<f64>,
    #[serde(default)]
    pub sweep: Option<LossSweep>,
}

fn default_dark_count() -> f64 {
    DEFAULT_DARK_COUNT
}

fn default_misalignment() -> f64 {
    DEFAULT_MISALIGNMENT
}

/// Evenly spaced grid over total loss in dB. `alice_share` is the fraction of
/// the loss (in dB) placed on Alice's arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub points: usize,
    #[serde(default = "half")]
    pub alice_share: f64,
}

fn half() -> f64 {
    0.5
}

impl LossSweep {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_db];
        }
        let step = (self.stop_db - self.start_db) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start_db + step * i as f64).collect()
    }

    /// Per-arm transmittances for a total loss of `loss_db`.
    pub fn split(&self, loss_db: f64) -> (f64, f64) {
        split_loss(loss_db, self.alice_share)
    }

    fn validate(&self) -> Result<()> {
        ensure(self.points > 0, || "sweep needs at least one point".into())?;
        ensure(self.start_db >= 0.0 && self.stop_db >= 0.0, || "sweep losses must be >= 0 dB".into())?;
        ensure((0.0..=1.0).contains(&self.alice_share), || {
            format!("alice_share must lie in [0, 1], got {}", self.alice_share)
        })
    }
}

/// `eta_a eta_b = 10^(-loss_db / 10)` with Alice taking `share` of the loss.
pub fn split_loss(loss_db: f64, share: f64) -> (f64, f64) {
    let eta_a = 10f64.powf(-loss_db * share / 10.0);
    let eta_b = 10f64.powf(-loss_db * (1.0 - share) / 10.0);
    (eta_a, eta_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoyProtocol {
    pub intensities_a: Vec<f64>,
    pub intensities_b: Vec<f64>,
    /// Index into `intensities_a` of the key-generating intensity; defaults
    /// to the largest.
    #[serde(default)]
    pub signal_a: Option<usize>,
    #[serde(default)]
    pub signal_b: Option<usize>,
    #[serde(default = "default_n_data")]
    pub n_data: f64,
    /// Fraction of each pair's pulses prepared in the z basis.
    #[serde(default = "half")]
    pub z_basis_fraction: f64,
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
}

fn default_n_data() -> f64 {
    DEFAULT_N_DATA
}

fn default_f_ec() -> f64 {
    DEFAULT_EC_INEFFICIENCY
}

impl DecoyProtocol {
    pub fn new(intensities_a: Vec<f64>, intensities_b: Vec<f64>) -> Self {
        Self {
            intensities_a,
            intensities_b,
            signal_a: None,
            signal_b: None,
            n_data: DEFAULT_N_DATA,
            z_basis_fraction: 0.5,
            f_ec: DEFAULT_EC_INEFFICIENCY,
        }
    }

    pub fn signal_indices(&self) -> (usize, usize) {
        (
            self.signal_a.unwrap_or(self.intensities_a.len().saturating_sub(1)),
            self.signal_b.unwrap_or(self.intensities_b.len().saturating_sub(1)),
        )
    }

    pub fn signal_intensities(&self) -> (f64, f64) {
        let (a, b) = self.signal_indices();
        (self.intensities_a[a], self.intensities_b[b])
    }

    /// Pulses per intensity pair in the z and x bases.
    pub fn pulses_per_basis(&self) -> (u64, u64) {
        let z = (self.n_data * self.z_basis_fraction).round();
        let x = (self.n_data * (1.0 - self.z_basis_fraction)).round();
        (z as u64, x as u64)
    }

    pub fn validate(&self) -> Result<()> {
        for (who, list) in [("intensities_a", &self.intensities_a), ("intensities_b", &self.intensities_b)] {
            ensure(!list.is_empty(), || format!("{who} is empty"))?;
            ensure(list.iter().all(|v| v.is_finite() && *v >= 0.0), || format!("{who} must be nonnegative"))?;
            ensure(list.windows(2).all(|w| w[0] < w[1]), || format!("{who} must be strictly increasing"))?;
        }
        let (a, b) = self.signal_indices();
        ensure(a < self.intensities_a.len(), || format!("signal_a index {a} out of range"))?;
        ensure(b < self.intensities_b.len(), || format!("signal_b index {b} out of range"))?;
        ensure(self.n_data.is_finite() && self.n_data >= 1.0 && self.n_data < 1.8e19, || {
            format!("n_data must be a positive pulse count, got {}", self.n_data)
        })?;
        ensure(self.z_basis_fraction > 0.0 && self.z_basis_fraction < 1.0, || {
            format!("z_basis_fraction must lie in (0, 1), got {}", self.z_basis_fraction)
        })?;
        let (z, x) = self.pulses_per_basis();
        ensure(z > 0 && x > 0, || "every basis needs at least one pulse per pair".into())?;
        ensure(self.f_ec >= 1.0 && self.f_ec.is_finite(), || format!("f_ec must be >= 1, got {}", self.f_ec))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| crate::error::unreadable(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.estimation.validate()?;
        if let Some(sweep) = &self.channel.sweep {
            sweep.validate()?;
        }
        if self.channel.eta_a.is_some() || self.channel.eta_b.is_some() || self.channel.sweep.is_none() {
            self.channel_params()?;
        } else {
            ChannelParams::new(1.0, 1.0, self.channel.p_d, self.channel.e_d)?;
        }
        Ok(())
    }

    /// Fixed-point channel. Requires `eta_a` and `eta_b` in the file.
    pub fn channel_params(&self) -> Result<ChannelParams> {
        let (Some(eta_a), Some(eta_b)) = (self.channel.eta_a, self.channel.eta_b) else {
            return Err(crate::error::Error::Validation(
                "channel needs eta_a and eta_b for a single-point run".into(),
            ));
        };
        ChannelParams::new(eta_a, eta_b, self.channel.p_d, self.channel.e_d)
    }

    /// Channel at a given total loss, split per the sweep's `alice_share`.
    pub fn channel_at_loss(&self, loss_db: f64) -> Result<ChannelParams> {
        let share = self.channel.sweep.map_or(0.5, |s| s.alice_share);
        let (eta_a, eta_b) = split_loss(loss_db, share);
        ChannelParams::new(eta_a, eta_b, self.channel.p_d, self.channel.e_d)
    }

    fn preset(intensities: Vec<f64>) -> Self {
        Self {
            channel: ChannelConfig {
                p_d: DEFAULT_DARK_COUNT,
                e_d: DEFAULT_MISALIGNMENT,
                eta_a: Some(0.1),
                eta_b: Some(0.1),
                sweep: None,
            },
            protocol: DecoyProtocol::new(intensities.clone(), intensities),
            estimation: FluctuationConfig::default(),
            mode: Mode::Analytic,
            seed: 0,
        }
    }

    /// Vacuum plus one weak decoy and the signal: `{0, 0.1, 0.5}` per party.
    pub fn vacuum_weak() -> Self {
        Self::preset(vec![0.0, 0.1, 0.5])
    }

    /// Vacuum plus two weak decoys and the signal: `{0, 0.1, 0.2, 0.5}`.
    pub fn vacuum_two_weak() -> Self {
        Self::preset(vec![0.0, 0.1, 0.2, 0.5])
    }

    pub fn with_sweep(mut self, sweep: LossSweep) -> Self {
        self.channel.sweep = Some(sweep);
        self
    }
}
