//! Decoy-state parameter estimation under statistical fluctuations.
//!
//! Every observed intensity pair `(mu_k, nu_l)` in a basis contributes a
//! two-sided linear constraint on the unknown yields (or error-yields) of the
//! photon-number channels, widened by `n_alpha` standard deviations of the
//! observed count. Extremising the single-photon pair entry under those
//! constraints gives bounds that hold for any relay behaviour consistent with
//! the data.
//!
//! Yield and error-yield problems are solved as separate LPs by default; the
//! phase-error bound is the upper error-yield bound divided by the lower
//! yield bound. A coupled mode solves one joint LP with `b_ij <= y_ij`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Basis;
use crate::error::{ensure, Error, Result};
use crate::lp::{self, Constraint, Direction, LinearProgram, LpStatus};
use crate::photon::{pair_coefficients, truncation_bound, DEFAULT_CUTOFF};

/// Integer detection counts behind an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub successes: u64,
    pub errors: u64,
}

/// Observed rates of one intensity pair in one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub basis: Basis,
    /// Index of Alice's intensity.
    pub k: usize,
    /// Index of Bob's intensity.
    pub l: usize,
    pub mu: f64,
    pub nu: f64,
    /// Pulse pairs sent with this intensity pair in this basis.
    pub pulses: u64,
    pub gain: f64,
    pub qber: f64,
    /// Present when the rates were derived from integer counts.
    pub counts: Option<Counts>,
}

impl Observation {
    pub fn from_rates(basis: Basis, k: usize, l: usize, mu: f64, nu: f64, pulses: u64, gain: f64, qber: f64) -> Self {
        Self { basis, k, l, mu, nu, pulses, gain, qber, counts: None }
    }

    /// Rates from counts; the QBER of an event-free pair is reported as 0.
    pub fn from_counts(basis: Basis, k: usize, l: usize, mu: f64, nu: f64, pulses: u64, counts: Counts) -> Self {
        let gain = if pulses > 0 { counts.successes as f64 / pulses as f64 } else { 0.0 };
        let qber = if counts.successes > 0 { counts.errors as f64 / counts.successes as f64 } else { 0.0 };
        Self { basis, k, l, mu, nu, pulses, gain, qber, counts: Some(counts) }
    }

    /// Expected number of successful events, `N * Q`.
    pub fn success_count(&self) -> f64 {
        match self.counts {
            Some(c) => c.successes as f64,
            None => self.pulses as f64 * self.gain,
        }
    }

    /// Expected number of erroneous events, `N * E * Q`.
    pub fn error_count(&self) -> f64 {
        match self.counts {
            Some(c) => c.errors as f64,
            None => self.pulses as f64 * self.gain * self.qber,
        }
    }

    pub fn error_gain(&self) -> f64 {
        self.gain * self.qber
    }

    fn validate(&self) -> Result<()> {
        let tag = format!("({}, {}, {})", self.basis, self.k, self.l);
        ensure(self.pulses > 0, || format!("{tag}: pulse count must be positive"))?;
        ensure(self.mu >= 0.0 && self.nu >= 0.0 && self.mu.is_finite() && self.nu.is_finite(), || {
            format!("{tag}: intensities must be finite and non-negative")
        })?;
        ensure((0.0..=1.0).contains(&self.gain), || format!("{tag}: gain {} outside [0, 1]", self.gain))?;
        ensure((0.0..=1.0).contains(&self.qber), || format!("{tag}: qber {} outside [0, 1]", self.qber))?;
        if let Some(c) = self.counts {
            ensure(c.successes <= self.pulses, || format!("{tag}: successes exceed pulses"))?;
            ensure(c.errors <= c.successes, || format!("{tag}: errors exceed successes"))?;
        }
        Ok(())
    }
}

/// Observations keyed by `(basis, k, l)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservedStats {
    entries: BTreeMap<(Basis, usize, usize), Observation>,
}

impl ObservedStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an observation. Rejects invalid rates, duplicate keys, and
    /// intensity indices that disagree with earlier entries.
    pub fn insert(&mut self, obs: Observation) -> Result<()> {
        obs.validate()?;
        let key = (obs.basis, obs.k, obs.l);
        if self.entries.contains_key(&key) {
            return Err(Error::Validation(format!(
                "duplicate observation for basis {} k={} l={}",
                obs.basis, obs.k, obs.l
            )));
        }
        for other in self.entries.values() {
            if other.k == obs.k && other.mu != obs.mu {
                return Err(Error::Validation(format!(
                    "alice intensity index {} used for both {} and {}",
                    obs.k, other.mu, obs.mu
                )));
            }
            if other.l == obs.l && other.nu != obs.nu {
                return Err(Error::Validation(format!(
                    "bob intensity index {} used for both {} and {}",
                    obs.l, other.nu, obs.nu
                )));
            }
        }
        self.entries.insert(key, obs);
        Ok(())
    }

    pub fn get(&self, basis: Basis, k: usize, l: usize) -> Option<&Observation> {
        self.entries.get(&(basis, k, l))
    }

    /// All observations ordered by basis, then `k`, then `l`.
    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.entries.values()
    }

    pub fn in_basis(&self, basis: Basis) -> impl Iterator<Item = &Observation> {
        self.entries.values().filter(move |o| o.basis == basis)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn distinct(&self, basis: Basis, f: impl Fn(&Observation) -> f64) -> usize {
        self.in_basis(basis).map(|o| f(o).to_bits()).collect::<BTreeSet<_>>().len()
    }
}

/// What to do with a pair that recorded no events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroCountPolicy {
    /// Drop the lower constraint; cap the rate at `n_alpha^2 / N`.
    #[default]
    PoissonUpper,
    /// Emit no constraint for the pair.
    Omit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctuationConfig {
    /// Standard deviations of fluctuation allowed on each observed count.
    pub n_alpha: f64,
    /// Photon numbers `i, j < cutoff` are kept.
    pub cutoff: usize,
    /// Relax lower constraints by the truncated Poisson mass so the
    /// truncation cannot exclude the true yields.
    pub rigorous_tail: bool,
    pub zero_count_policy: ZeroCountPolicy,
    /// Solve yields and error-yields jointly with `b_ij <= y_ij`.
    pub coupled: bool,
}

impl Default for FluctuationConfig {
    fn default() -> Self {
        Self {
            n_alpha: 5.0,
            cutoff: DEFAULT_CUTOFF,
            rigorous_tail: false,
            zero_count_policy: ZeroCountPolicy::PoissonUpper,
            coupled: false,
        }
    }
}

impl FluctuationConfig {
    pub fn with_n_alpha(mut self, n_alpha: f64) -> Self {
        self.n_alpha = n_alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_alpha >= 0.0 && self.n_alpha.is_finite(), || {
            format!("n_alpha must be finite and >= 0, got {}", self.n_alpha)
        })?;
        ensure(self.cutoff >= 2, || format!("cutoff must be >= 2, got {}", self.cutoff))
    }
}

/// Which observable a constraint row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Gain,
    ErrorGain,
}

/// Relative fluctuation widths `(beta_q, beta_eq)` for one pair.
///
/// A ratio is `None` when its count is zero and `n_alpha > 0`; such pairs
/// are handled by [`ZeroCountPolicy`].
pub fn fluctuation_ratios(pulses: u64, gain: f64, qber: f64, n_alpha: f64) -> (Option<f64>, Option<f64>) {
    let n = pulses as f64;
    let ratio = |count: f64| {
        if n_alpha == 0.0 {
            Some(0.0)
        } else if count > 0.0 {
            Some(n_alpha / count.sqrt())
        } else {
            None
        }
    };
    (ratio(n * gain), ratio(n * gain * qber))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

/// Index of `Y_11` in the row-major variable vector.
pub fn y11_index(cutoff: usize) -> usize {
    cutoff + 1
}

/// Fluctuation-widened constraints over the `cutoff^2` yields (or
/// error-yields) of one basis, two rows per observed pair.
pub fn build_constraints(
    obs: &ObservedStats,
    cfg: &FluctuationConfig,
    basis: Basis,
    kind: Observable,
) -> Result<Vec<LabeledConstraint>> {
    cfg.validate()?;
    ensure(!obs.is_empty(), || "no observations".into())?;
    let mut out = Vec::new();
    for o in obs.in_basis(basis) {
        let coeffs = pair_coefficients(o.mu, o.nu, cfg.cutoff);
        let (rate, count) = match kind {
            Observable::Gain => (o.gain, o.success_count()),
            Observable::ErrorGain => (o.error_gain(), o.error_count()),
        };
        let name = match kind {
            Observable::Gain => "Q",
            Observable::ErrorGain => "EQ",
        };
        let tag = format!("{basis} {name}(mu={}, nu={})", o.mu, o.nu);
        let (beta_q, beta_eq) = fluctuation_ratios(o.pulses, o.gain, o.qber, cfg.n_alpha);
        let beta = match kind {
            Observable::Gain => beta_q,
            Observable::ErrorGain => beta_eq,
        };
        let (lower, upper) = match beta {
            Some(beta) if count > 0.0 || cfg.n_alpha == 0.0 => {
                (Some((rate * (1.0 - beta)).max(0.0)), rate * (1.0 + beta))
            }
            _ => match cfg.zero_count_policy {
                ZeroCountPolicy::PoissonUpper => (None, cfg.n_alpha * cfg.n_alpha / o.pulses as f64),
                ZeroCountPolicy::Omit => continue,
            },
        };
        let lower = lower.map(|lo| {
            if cfg.rigorous_tail {
                let dropped = truncation_bound(o.mu, cfg.cutoff) + truncation_bound(o.nu, cfg.cutoff);
                (lo - dropped).max(0.0)
            } else {
                lo
            }
        });
        if let Some(lo) = lower {
            out.push(LabeledConstraint { label: format!("{tag} >= {lo:e}"), constraint: Constraint::ge(coeffs.clone(), lo) });
        }
        out.push(LabeledConstraint { label: format!("{tag} <= {upper:e}"), constraint: Constraint::le(coeffs, upper) });
    }
    Ok(out)
}

/// Which single-photon quantity an LP extremises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Yield,
    ErrorYield,
}

/// Record of one LP solved during estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRun {
    pub basis: Basis,
    pub target: Target,
    pub direction: Direction,
    pub status: LpStatus,
    pub value: f64,
    pub iterations: usize,
}

fn build_program(
    obs: &ObservedStats,
    cfg: &FluctuationConfig,
    basis: Basis,
    target: Target,
    direction: Direction,
) -> Result<(LinearProgram, Vec<String>)> {
    let nk = cfg.cutoff * cfg.cutoff;
    let mut labels = Vec::new();
    let mut constraints = Vec::new();
    let mut push = |rows: Vec<LabeledConstraint>, offset: usize, width: usize| {
        for r in rows {
            let mut coeffs = vec![0.0; width];
            coeffs[offset..offset + nk].copy_from_slice(&r.constraint.coeffs);
            labels.push(r.label);
            constraints.push(Constraint::new(coeffs, r.constraint.relation, r.constraint.rhs));
        }
    };
    let (objective_index, width) = if cfg.coupled {
        let width = 2 * nk;
        push(build_constraints(obs, cfg, basis, Observable::Gain)?, 0, width);
        push(build_constraints(obs, cfg, basis, Observable::ErrorGain)?, nk, width);
        for idx in 0..nk {
            let mut coeffs = vec![0.0; width];
            coeffs[nk + idx] = 1.0;
            coeffs[idx] = -1.0;
            labels.push(format!("b[{}][{}] <= y[{0}][{1}]", idx / cfg.cutoff, idx % cfg.cutoff));
            constraints.push(Constraint::le(coeffs, 0.0));
        }
        let at = match target {
            Target::Yield => y11_index(cfg.cutoff),
            Target::ErrorYield => nk + y11_index(cfg.cutoff),
        };
        (at, width)
    } else {
        let kind = match target {
            Target::Yield => Observable::Gain,
            Target::ErrorYield => Observable::ErrorGain,
        };
        push(build_constraints(obs, cfg, basis, kind)?, 0, nk);
        (y11_index(cfg.cutoff), nk)
    };
    let mut objective = vec![0.0; width];
    objective[objective_index] = 1.0;
    let mut lp = LinearProgram::new(objective, direction);
    lp.constraints = constraints;
    Ok((lp, labels))
}

/// Deletion filter: drop each constraint in turn and keep it dropped if the
/// rest is still infeasible. What survives is an irreducible conflict.
fn conflicting_subset(lp: &LinearProgram, labels: &[String]) -> Vec<String> {
    let mut keep: Vec<bool> = vec![true; lp.constraints.len()];
    for i in 0..keep.len() {
        keep[i] = false;
        let mut trial = lp.clone();
        trial.constraints = lp
            .constraints
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c.clone())
            .collect();
        let still_infeasible = matches!(lp::solve(&trial), Ok(s) if s.status == LpStatus::Infeasible);
        if !still_infeasible {
            keep[i] = true;
        }
    }
    labels.iter().zip(&keep).filter(|(_, &k)| k).map(|(l, _)| l.clone()).collect()
}

fn solve_bound(
    obs: &ObservedStats,
    cfg: &FluctuationConfig,
    basis: Basis,
    target: Target,
    direction: Direction,
) -> Result<LpRun> {
    let (lp, labels) = build_program(obs, cfg, basis, target, direction)?;
    let sol = lp::solve(&lp)?;
    match sol.objective_value {
        Some(value) => Ok(LpRun { basis, target, direction, status: sol.status, value, iterations: sol.iterations }),
        None => Err(Error::Infeasible {
            problem: format!("{basis}-basis {target:?} {direction:?} LP"),
            conflicting: conflicting_subset(&lp, &labels),
        }),
    }
}

/// Lower or upper LP bound on the single-photon pair yield in `basis`.
pub fn bound_y11(obs: &ObservedStats, cfg: &FluctuationConfig, basis: Basis, direction: Direction) -> Result<f64> {
    solve_bound(obs, cfg, basis, Target::Yield, direction).map(|r| r.value)
}

/// Lower or upper LP bound on the single-photon pair error-yield `e11 * Y11`.
pub fn bound_ey11(obs: &ObservedStats, cfg: &FluctuationConfig, basis: Basis, direction: Direction) -> Result<f64> {
    solve_bound(obs, cfg, basis, Target::ErrorYield, direction).map(|r| r.value)
}

pub fn bound_ey11_upper(obs: &ObservedStats, cfg: &FluctuationConfig, basis: Basis) -> Result<f64> {
    bound_ey11(obs, cfg, basis, Direction::Maximize)
}

/// Bounds on the single-photon pair channel in both bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y11_z_lower: f64,
    pub y11_z_upper: f64,
    pub y11_x_lower: f64,
    pub y11_x_upper: f64,
    pub ey11_z_lower: f64,
    pub ey11_z_upper: f64,
    pub ey11_x_lower: f64,
    pub ey11_x_upper: f64,
    pub e11_z_lower: f64,
    pub e11_z_upper: f64,
    pub e11_x_lower: f64,
    /// Phase-error bound used for privacy amplification.
    pub e11_x_upper: f64,
    /// Set when the data cannot constrain the single-photon channel, i.e.
    /// fewer than two intensities per party or a zero yield lower bound
    /// under a nonzero error-yield.
    pub vacuous: bool,
    pub lp_runs: Vec<LpRun>,
}

impl DecoyBounds {
    pub fn y11(&self, basis: Basis) -> (f64, f64) {
        match basis {
            Basis::X => (self.y11_x_lower, self.y11_x_upper),
            Basis::Z => (self.y11_z_lower, self.y11_z_upper),
        }
    }

    pub fn e11(&self, basis: Basis) -> (f64, f64) {
        match basis {
            Basis::X => (self.e11_x_lower, self.e11_x_upper),
            Basis::Z => (self.e11_z_lower, self.e11_z_upper),
        }
    }
}

/// `(upper error-yield) / (lower yield)` clipped to `[0, 1]`; the flag is set
/// when the division is vacuous.
fn error_rate_upper(ey_upper: f64, y_lower: f64) -> (f64, bool) {
    if ey_upper <= 0.0 {
        (0.0, false)
    } else if y_lower <= 0.0 {
        (1.0, true)
    } else {
        ((ey_upper / y_lower).min(1.0), false)
    }
}

fn error_rate_lower(ey_lower: f64, y_upper: f64) -> f64 {
    if ey_lower <= 0.0 || y_upper <= 0.0 {
        0.0
    } else {
        (ey_lower / y_upper).min(1.0)
    }
}

/// Runs the yield and error-yield LPs for both bases and assembles the
/// single-photon bounds.
pub fn estimate(obs: &ObservedStats, cfg: &FluctuationConfig) -> Result<DecoyBounds> {
    cfg.validate()?;
    ensure(!obs.is_empty(), || "no observations".into())?;
    for basis in Basis::ALL {
        ensure(obs.in_basis(basis).next().is_some(), || format!("no {basis}-basis observations"))?;
    }

    let mut tasks = Vec::with_capacity(8);
    for basis in [Basis::Z, Basis::X] {
        for target in [Target::Yield, Target::ErrorYield] {
            for direction in [Direction::Minimize, Direction::Maximize] {
                tasks.push((basis, target, direction));
            }
        }
    }
    let runs: Vec<LpRun> = tasks
        .par_iter()
        .map(|&(b, t, d)| solve_bound(obs, cfg, b, t, d))
        .collect::<Result<_>>()?;
    let value = |b, t, d| {
        runs.iter()
            .find(|r| r.basis == b && r.target == t && r.direction == d)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    use Direction::{Maximize as Hi, Minimize as Lo};
    let y11_z_lower = value(Basis::Z, Target::Yield, Lo);
    let y11_z_upper = value(Basis::Z, Target::Yield, Hi);
    let y11_x_lower = value(Basis::X, Target::Yield, Lo);
    let y11_x_upper = value(Basis::X, Target::Yield, Hi);
    let ey11_z_lower = value(Basis::Z, Target::ErrorYield, Lo);
    let ey11_z_upper = value(Basis::Z, Target::ErrorYield, Hi);
    let ey11_x_lower = value(Basis::X, Target::ErrorYield, Lo);
    let ey11_x_upper = value(Basis::X, Target::ErrorYield, Hi);

    let (e11_x_upper, vacuous_x) = error_rate_upper(ey11_x_upper, y11_x_lower);
    let (e11_z_upper, _) = error_rate_upper(ey11_z_upper, y11_z_lower);
    let few_intensities = Basis::ALL
        .iter()
        .any(|&b| obs.distinct(b, |o| o.mu) < 2 || obs.distinct(b, |o| o.nu) < 2);

    Ok(DecoyBounds {
        y11_z_lower,
        y11_z_upper,
        y11_x_lower,
        y11_x_upper,
        ey11_z_lower,
        ey11_z_upper,
        ey11_x_lower,
        ey11_x_upper,
        e11_z_lower: error_rate_lower(ey11_z_lower, y11_z_upper),
        e11_z_upper,
        e11_x_lower: error_rate_lower(ey11_x_lower, y11_x_upper),
        e11_x_upper,
        vacuous: vacuous_x || few_intensities,
        lp_runs: runs,
    })
}
