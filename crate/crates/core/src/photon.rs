//! Poisson photon-number decomposition of phase-randomized coherent states.

use crate::error::{ensure, Result};

/// Photon numbers `i, j < DEFAULT_CUTOFF` are kept in the decomposition.
pub const DEFAULT_CUTOFF: usize = 7;

/// Probability that a coherent pulse of mean photon number `mu` holds `i`
/// photons. Uses `0^0 = 1`.
pub fn poisson_weight(mu: f64, i: usize) -> f64 {
    let mut w = (-mu).exp();
    for n in 1..=i {
        w *= mu / n as f64;
    }
    w
}

/// Weights `poisson_weight(mu, i)` for `i` in `0..cutoff`.
pub fn poisson_weights(mu: f64, cutoff: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cutoff);
    let mut w = (-mu).exp();
    for i in 0..cutoff {
        if i > 0 {
            w *= mu / i as f64;
        }
        out.push(w);
    }
    out
}

/// Upper bound on the joint Poisson mass dropped when photon numbers `>= k`
/// are discarded: `1 - (P[n < k])^2`.
pub fn truncation_bound(mu: f64, k: usize) -> f64 {
    let tail = poisson_tail(mu, k);
    tail * (2.0 - tail)
}

/// `P[n >= k]` for a Poisson variable of mean `mu`, summed term by term.
pub fn poisson_tail(mu: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    // Past the mode the terms decrease geometrically; before it, summing the
    // kept head is accurate enough.
    if (k as f64) <= mu {
        let head: f64 = poisson_weights(mu, k).iter().sum();
        return (1.0 - head).max(0.0);
    }
    let mut term = poisson_weight(mu, k);
    let mut sum = 0.0;
    let mut n = k;
    while term > 0.0 && term > 1e-17 * sum {
        sum += term;
        n += 1;
        term *= mu / n as f64;
    }
    sum.min(1.0)
}

/// Truncated grid of yields `y[i][j]` and error-yields `b[i][j] = e_ij * Y_ij`,
/// stored row-major with `i` (Alice's photon number) as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldMatrix {
    cutoff: usize,
    y: Vec<f64>,
    b: Vec<f64>,
}

impl YieldMatrix {
    /// `y` and `b` are row-major `cutoff x cutoff` grids. With `coupled` set,
    /// every error-yield must also be bounded by its yield.
    pub fn new(cutoff: usize, y: Vec<f64>, b: Vec<f64>, coupled: bool) -> Result<Self> {
        ensure(cutoff >= 2, || format!("cutoff must be >= 2, got {cutoff}"))?;
        let n = cutoff * cutoff;
        ensure(y.len() == n && b.len() == n, || {
            format!("expected {n} yields and error-yields, got {} and {}", y.len(), b.len())
        })?;
        for (idx, (&yv, &bv)) in y.iter().zip(&b).enumerate() {
            let (i, j) = (idx / cutoff, idx % cutoff);
            ensure((0.0..=1.0).contains(&yv), || format!("y[{i}][{j}] = {yv} outside [0, 1]"))?;
            let hi = if coupled { yv } else { 1.0 };
            ensure((0.0..=hi).contains(&bv), || format!("b[{i}][{j}] = {bv} outside [0, {hi}]"))?;
        }
        Ok(Self { cutoff, y, b })
    }

    /// All yields equal to `y`, all error-yields equal to `b`.
    pub fn uniform(cutoff: usize, y: f64, b: f64) -> Result<Self> {
        let n = cutoff * cutoff;
        Self::new(cutoff, vec![y; n], vec![b; n], false)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn yield_at(&self, i: usize, j: usize) -> f64 {
        self.y[i * self.cutoff + j]
    }

    pub fn error_yield_at(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.cutoff + j]
    }

    pub fn set(&mut self, i: usize, j: usize, y: f64, b: f64) -> Result<()> {
        ensure(i < self.cutoff && j < self.cutoff, || format!("({i}, {j}) outside the grid"))?;
        ensure((0.0..=1.0).contains(&y) && (0.0..=1.0).contains(&b), || {
            format!("yield {y} / error-yield {b} outside [0, 1]")
        })?;
        self.y[i * self.cutoff + j] = y;
        self.b[i * self.cutoff + j] = b;
        Ok(())
    }
}

/// Row-major coefficients `w(mu, i) * w(nu, j)` of the truncated sum.
pub fn pair_coefficients(mu: f64, nu: f64, cutoff: usize) -> Vec<f64> {
    let wa = poisson_weights(mu, cutoff);
    let wb = poisson_weights(nu, cutoff);
    wa.iter().flat_map(|a| wb.iter().map(move |b| a * b)).collect()
}

fn weighted_sum(grid: &[f64], mu: f64, nu: f64, cutoff: usize) -> f64 {
    pair_coefficients(mu, nu, cutoff).iter().zip(grid).map(|(c, v)| c * v).sum()
}

/// Gain implied by a yield grid for Alice intensity `mu` and Bob intensity `nu`.
pub fn predicted_gain(ym: &YieldMatrix, mu: f64, nu: f64) -> f64 {
    weighted_sum(&ym.y, mu, nu, ym.cutoff)
}

/// Error-gain `E * Q` implied by the error-yield grid.
pub fn predicted_error_gain(ym: &YieldMatrix, mu: f64, nu: f64) -> f64 {
    weighted_sum(&ym.b, mu, nu, ym.cutoff)
}
