use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::params::FFT_SIZE;

/// Scale making a symbol with 52 unit-energy subcarriers unit-power in time.
pub(crate) const OCCUPIED: f64 = 52.0;

/// Planned 64-point transforms with the packet's power normalisation:
/// `o[k] = (1/√52) Σ d[m] e^{j2πmk/64}` and the matching inverse, so that
/// `to_freq(to_time(d)) == d`.
#[derive(Clone)]
pub struct Transforms {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Default for Transforms {
    fn default() -> Self {
        Self::new()
    }
}

impl Transforms {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(FFT_SIZE),
            inv: planner.plan_fft_inverse(FFT_SIZE),
        }
    }

    pub fn to_time(&self, freq: &[Complex64]) -> [Complex64; FFT_SIZE] {
        let mut buf = [Complex64::new(0.0, 0.0); FFT_SIZE];
        buf.copy_from_slice(&freq[..FFT_SIZE]);
        self.inv.process(&mut buf);
        let s = 1.0 / OCCUPIED.sqrt();
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    pub fn to_freq(&self, time: &[Complex64]) -> [Complex64; FFT_SIZE] {
        let mut buf = [Complex64::new(0.0, 0.0); FFT_SIZE];
        buf.copy_from_slice(&time[..FFT_SIZE]);
        self.fwd.process(&mut buf);
        let s = OCCUPIED.sqrt() / FFT_SIZE as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Plain DFT (no packet scaling), e.g. impulse response → transfer function.
    pub fn dft(&self, x: &[Complex64]) -> [Complex64; FFT_SIZE] {
        let mut buf = [Complex64::new(0.0, 0.0); FFT_SIZE];
        buf.copy_from_slice(&x[..FFT_SIZE]);
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse of [`Transforms::dft`].
    pub fn idft(&self, x: &[Complex64]) -> [Complex64; FFT_SIZE] {
        let mut buf = [Complex64::new(0.0, 0.0); FFT_SIZE];
        buf.copy_from_slice(&x[..FFT_SIZE]);
        self.inv.process(&mut buf);
        let s = 1.0 / FFT_SIZE as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }
}

/// `e^{j2π·m·shift/64}` for bin `m`: the factor undoing a window that
/// started `shift` samples early.
pub(crate) fn window_shift(m: usize, shift: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (m * shift) as f64 / FFT_SIZE as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = Transforms::new();
        let d: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let back = t.to_freq(&t.to_time(&d));
        for (a, b) in d.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
        let back = t.idft(&t.dft(&d));
        for (a, b) in d.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
