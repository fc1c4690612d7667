//! Scenario execution: observed statistics, decoy bounds, key rate, sweeps
//! over channel loss, and the files each run emits.

pub mod counts;
pub mod output;
pub mod sampling;
pub mod scenario;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{gain_qber, q11, single_photon_stats, Basis, ChannelParams, SinglePhotonStats};
use crate::error::{Error, Result};
use crate::estimation::{estimate, DecoyBounds, FluctuationConfig, ObservedStats};
use crate::keyrate::{failure_probability, key_rate, KeyRate, KeyRateInputs};

pub use counts::{ingest_counts, read_counts, write_counts};
pub use sampling::simulate_observed;
pub use scenario::{ChannelConfig, DecoyProtocol, LossSweep, Mode, Scenario};

/// Everything computed for one operating point.
#[derive(Debug, Clone, Serialize)]
pub struct KeyRateReport {
    /// Present when the statistics came from the forward model.
    pub channel: Option<ChannelParams>,
    #[serde(skip)]
    pub observed: ObservedStats,
    pub config: FluctuationConfig,
    pub signal: (usize, usize),
    pub signal_mu: f64,
    pub signal_nu: f64,
    pub bounds: DecoyBounds,
    /// `mu nu e^(-mu-nu)` times the z-basis `Y11` lower bound.
    pub q11_z_lower: f64,
    pub e11_x_upper: f64,
    pub gain_z: f64,
    pub qber_z: f64,
    pub f_ec: f64,
    pub finite: KeyRate,
    /// Finite rate spread over every pulse sent in the run (all pairs, both
    /// bases) instead of the signal-pair z-basis pulses alone.
    pub rate_per_total_pulse: f64,
    pub truth: Option<SinglePhotonStats>,
    pub asymptotic: Option<KeyRate>,
    pub failure_probability: f64,
}

/// Key rate with exact single-photon quantities, as if infinitely many
/// decoy pulses had been sent.
pub fn asymptotic_rate(params: &ChannelParams, mu: f64, nu: f64, f_ec: f64) -> Result<KeyRate> {
    let truth = single_photon_stats(params)?;
    let signal = gain_qber(params, Basis::Z, mu, nu)?;
    key_rate(&KeyRateInputs {
        q11_z: q11(mu, nu, truth.y11),
        e11_x: truth.e11_x,
        gain_z: signal.gain,
        qber_z: signal.qber,
        f_ec,
    })
}

/// Bounds and key rate from observed statistics. `channel`, when known, adds
/// the asymptotic reference.
pub fn analyze(
    observed: ObservedStats,
    signal: (usize, usize),
    config: &FluctuationConfig,
    f_ec: f64,
    channel: Option<&ChannelParams>,
) -> Result<KeyRateReport> {
    let sig = *observed.get(Basis::Z, signal.0, signal.1).ok_or_else(|| {
        Error::Validation(format!("no z-basis observation for signal pair ({}, {})", signal.0, signal.1))
    })?;
    let bounds = estimate(&observed, config)?;
    let q11_z_lower = q11(sig.mu, sig.nu, bounds.y11_z_lower);
    let finite = key_rate(&KeyRateInputs {
        q11_z: q11_z_lower,
        e11_x: bounds.e11_x_upper,
        gain_z: sig.gain,
        qber_z: sig.qber,
        f_ec,
    })?;
    let total_pulses: f64 = observed.iter().map(|o| o.pulses as f64).sum();
    let (truth, asymptotic) = match channel {
        Some(p) => (Some(single_photon_stats(p)?), Some(asymptotic_rate(p, sig.mu, sig.nu, f_ec)?)),
        None => (None, None),
    };
    Ok(KeyRateReport {
        channel: channel.copied(),
        config: *config,
        signal,
        signal_mu: sig.mu,
        signal_nu: sig.nu,
        q11_z_lower,
        e11_x_upper: bounds.e11_x_upper,
        gain_z: sig.gain,
        qber_z: sig.qber,
        f_ec,
        rate_per_total_pulse: finite.rate * sig.pulses as f64 / total_pulses,
        finite,
        truth,
        asymptotic,
        failure_probability: failure_probability(config.n_alpha)?,
        bounds,
        observed,
    })
}

/// Single operating point at the scenario's fixed `eta_a`, `eta_b`.
pub fn run_point(scenario: &Scenario) -> Result<KeyRateReport> {
    scenario.validate()?;
    let params = scenario.channel_params()?;
    run_at(scenario, &params, 0, &scenario.estimation)
}

fn run_at(scenario: &Scenario, params: &ChannelParams, point: u64, cfg: &FluctuationConfig) -> Result<KeyRateReport> {
    let observed = simulate_observed(params, &scenario.protocol, scenario.mode, scenario.seed, point)?;
    analyze(observed, scenario.protocol.signal_indices(), cfg, scenario.protocol.f_ec, Some(params))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub loss_db: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub rate_asymptotic: f64,
    pub rate_nalpha0: f64,
    pub rate_finite: f64,
    /// Unclamped counterparts, negative past each curve's cutoff.
    pub raw_asymptotic: f64,
    pub raw_nalpha0: f64,
    pub raw_finite: f64,
    /// Bounds at the configured `n_alpha`.
    pub bounds: Option<DecoyBounds>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn y11_z_lower(&self) -> f64 {
        self.bounds.as_ref().map_or(f64::NAN, |b| b.y11_z_lower)
    }

    pub fn e11_x_upper(&self) -> f64 {
        self.bounds.as_ref().map_or(f64::NAN, |b| b.e11_x_upper)
    }
}

fn sweep_point(scenario: &Scenario, index: usize, loss_db: f64) -> SweepPoint {
    let mut pt = SweepPoint {
        index,
        loss_db,
        eta_a: f64::NAN,
        eta_b: f64::NAN,
        rate_asymptotic: f64::NAN,
        rate_nalpha0: f64::NAN,
        rate_finite: f64::NAN,
        raw_asymptotic: f64::NAN,
        raw_nalpha0: f64::NAN,
        raw_finite: f64::NAN,
        bounds: None,
        error: None,
    };
    let mut errors = Vec::new();
    let observed = (|| -> Result<ObservedStats> {
        let params = scenario.channel_at_loss(loss_db)?;
        pt.eta_a = params.eta_a;
        pt.eta_b = params.eta_b;
        let (mu, nu) = scenario.protocol.signal_intensities();
        let asym = asymptotic_rate(&params, mu, nu, scenario.protocol.f_ec)?;
        pt.rate_asymptotic = asym.rate;
        pt.raw_asymptotic = asym.raw;
        simulate_observed(&params, &scenario.protocol, scenario.mode, scenario.seed, index as u64)
    })();
    match observed {
        Err(e) => errors.push(e.to_string()),
        Ok(observed) => {
            let signal = scenario.protocol.signal_indices();
            let f_ec = scenario.protocol.f_ec;
            let exact_cfg = scenario.estimation.with_n_alpha(0.0);
            let exact = analyze(observed.clone(), signal, &exact_cfg, f_ec, None);
            match &exact {
                Ok(r) => {
                    pt.rate_nalpha0 = r.finite.rate;
                    pt.raw_nalpha0 = r.finite.raw;
                }
                Err(e) => errors.push(format!("n_alpha = 0: {e}")),
            }
            let finite = if scenario.estimation.n_alpha == 0.0 {
                exact
            } else {
                let r = analyze(observed, signal, &scenario.estimation, f_ec, None);
                if let Err(e) = &r {
                    errors.push(format!("n_alpha = {}: {e}", scenario.estimation.n_alpha));
                }
                r
            };
            if let Ok(r) = finite {
                pt.rate_finite = r.finite.rate;
                pt.raw_finite = r.finite.raw;
                pt.bounds = Some(r.bounds);
            }
        }
    }
    if !errors.is_empty() {
        pt.error = Some(errors.join("; "));
    }
    pt
}

/// One point per grid loss, in grid order. A failing point is recorded with
/// its error and the sweep carries on.
pub fn run_sweep(scenario: &Scenario, loss_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    scenario.validate()?;
    if loss_grid.is_empty() {
        return Err(Error::Validation("loss grid is empty".into()));
    }
    if let Some(bad) = loss_grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Validation(format!("loss {bad} dB is not a nonnegative number")));
    }
    Ok(loss_grid
        .par_iter()
        .enumerate()
        .map(|(i, &loss)| sweep_point(scenario, i, loss))
        .collect())
}

/// The scenario's own sweep grid.
pub fn run_configured_sweep(scenario: &Scenario) -> Result<Vec<SweepPoint>> {
    let sweep = scenario
        .channel
        .sweep
        .ok_or_else(|| Error::Validation("scenario has no channel.sweep section".into()))?;
    run_sweep(scenario, &sweep.grid())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// Interpolated loss where the rate reaches zero.
    Within(f64),
    /// Still positive at the last grid point.
    BeyondGrid,
    /// No positive rate anywhere on the grid.
    NoKey,
}

/// Loss at which a curve stops producing key, taking the zero crossing of the
/// unclamped rate after the last positive grid point.
pub fn positive_rate_cutoff(losses: &[f64], raw_rates: &[f64]) -> Cutoff {
    let Some(last) = raw_rates.iter().rposition(|r| *r > 0.0) else {
        return Cutoff::NoKey;
    };
    if last + 1 == raw_rates.len() {
        return Cutoff::BeyondGrid;
    }
    let (l0, l1) = (losses[last], losses[last + 1]);
    let (r0, r1) = (raw_rates[last], raw_rates[last + 1]);
    if r1.is_finite() && r1 < r0 {
        Cutoff::Within(l0 + (l1 - l0) * r0 / (r0 - r1))
    } else {
        Cutoff::Within(l1)
    }
}

/// Cutoffs of the asymptotic, `n_alpha = 0` and configured curves.
pub fn sweep_cutoffs(points: &[SweepPoint]) -> [Cutoff; 3] {
    let losses: Vec<f64> = points.iter().map(|p| p.loss_db).collect();
    let curve = |f: fn(&SweepPoint) -> f64| {
        let raws: Vec<f64> = points.iter().map(f).collect();
        positive_rate_cutoff(&losses, &raws)
    };
    [curve(|p| p.raw_asymptotic), curve(|p| p.raw_nalpha0), curve(|p| p.raw_finite)]
}
