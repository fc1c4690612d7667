//! Observed statistics from the forward model, either as exact expectations
//! or as seeded binomial draws.
//!
//! The generator is ChaCha8 seeded with the scenario seed; each sweep point
//! gets its own stream (`set_stream(point)`), so a point's draws do not depend
//! on how many other points ran or in which order. Counts are drawn with the
//! BTPE / inversion binomial sampler of `rand_distr`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::channel::{gain_qber, Basis, ChannelParams};
use crate::error::{Error, Result};
use crate::estimation::{Counts, Observation, ObservedStats};

use super::scenario::{DecoyProtocol, Mode};

/// Generator for sweep point `point` under `seed`.
pub fn point_rng(seed: u64, point: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point);
    rng
}

/// Successes ~ Bin(pulses, gain), then errors ~ Bin(successes, qber).
pub fn sample_counts(rng: &mut ChaCha8Rng, pulses: u64, gain: f64, qber: f64) -> Result<Counts> {
    let binomial = |n: u64, p: f64| {
        Binomial::new(n, p).map_err(|e| Error::Domain(format!("binomial({n}, {p}): {e}")))
    };
    let successes = binomial(pulses, gain)?.sample(rng);
    let errors = binomial(successes, qber)?.sample(rng);
    Ok(Counts { successes, errors })
}

/// Every (basis, k, l) cell of the protocol, z basis first, row-major in
/// `(k, l)`. Sampled mode draws in exactly this order.
pub fn simulate_observed(
    params: &ChannelParams,
    protocol: &DecoyProtocol,
    mode: Mode,
    seed: u64,
    point: u64,
) -> Result<ObservedStats> {
    params.validate()?;
    protocol.validate()?;
    let (z_pulses, x_pulses) = protocol.pulses_per_basis();
    let mut rng = point_rng(seed, point);
    let mut obs = ObservedStats::new();
    for basis in [Basis::Z, Basis::X] {
        let pulses = if basis == Basis::Z { z_pulses } else { x_pulses };
        for (k, &mu) in protocol.intensities_a.iter().enumerate() {
            for (l, &nu) in protocol.intensities_b.iter().enumerate() {
                let expected = gain_qber(params, basis, mu, nu)?;
                let o = match mode {
                    Mode::Analytic => Observation::from_rates(basis, k, l, mu, nu, pulses, expected.gain, expected.qber),
                    Mode::Sampled => {
                        let counts = sample_counts(&mut rng, pulses, expected.gain, expected.qber)?;
                        Observation::from_counts(basis, k, l, mu, nu, pulses, counts)
                    }
                };
                obs.insert(o)?;
            }
        }
    }
    Ok(obs)
}
