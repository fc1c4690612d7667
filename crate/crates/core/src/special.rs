//! Special functions needed by the channel model.

use crate::error::{Error, Result};

/// Relative size of a series term below which summation stops.
const SERIES_EPS: f64 = 1e-16;

/// Modified Bessel function of the first kind, order zero.
///
/// Evaluated with the ascending series `sum (z/2)^(2k) / (k!)^2`. All terms
/// are positive, so there is no cancellation; on `[0, 20]` the result is
/// accurate to a few ulp.
pub fn bessel_i0(z: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("bessel_i0 requires z >= 0, got {z}")));
    }
    Ok(i0_series(z))
}

pub(crate) fn i0_series(z: f64) -> f64 {
    1.0 + i0_minus_one(z)
}

/// `I0(z) - 1`, summed without the leading term so small arguments keep
/// full relative precision.
pub(crate) fn i0_minus_one(z: f64) -> f64 {
    let q = 0.25 * z * z;
    if q == 0.0 {
        return 0.0;
    }
    let mut term = q;
    let mut sum = q;
    let mut k = 1.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < SERIES_EPS * sum {
            return sum;
        }
    }
}
