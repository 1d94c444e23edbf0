use num_complex::Complex64;

use super::ComplexBuffer;
use crate::error::{Error, Result};

/// Full aperiodic cross-correlation `c[lag] = Σ_n a[n+lag]·conj(b[n])`.
///
/// Lags run from `-(len(b)-1)` to `len(a)-1`; element `i` holds lag
/// `i - (len(b)-1)`.
pub fn xcorr(a: &ComplexBuffer, b: &ComplexBuffer) -> Result<Vec<Complex64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("xcorr needs two nonempty inputs".into()));
    }
    Ok(xcorr_slices(&a.samples, &b.samples))
}

pub(crate) fn xcorr_slices(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let (na, nb) = (a.len() as isize, b.len() as isize);
    (-(nb - 1)..na)
        .map(|lag| {
            let lo = 0.max(-lag);
            let hi = nb.min(na - lag);
            (lo..hi)
                .map(|n| a[(n + lag) as usize] * b[n as usize].conj())
                .sum()
        })
        .collect()
}
