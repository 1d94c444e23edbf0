//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.
//!
//! The lowpass passes `0.8125·(fs_min/2)` (±8.125 MHz for a 20 MSPS side)
//! and stops from `fs_min/2`, with 70 dB design attenuation. Output is
//! aligned with the input: the filter's group delay is removed.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ComplexBuffer;
use crate::error::{Error, Result};

const MAX_FACTOR: usize = 64;
const ATTENUATION_DB: f64 = 70.0;
const PASSBAND_FRACTION: f64 = 0.8125;

#[derive(Clone, Debug)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
    in_rate: f64,
    out_rate: f64,
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn ratio_terms(in_rate: f64, out_rate: f64) -> Option<(usize, usize)> {
    let ratio = out_rate / in_rate;
    (1..=MAX_FACTOR).find_map(|q| {
        let p = (ratio * q as f64).round();
        (p >= 1.0 && p <= MAX_FACTOR as f64 && ((p / q as f64) - ratio).abs() <= 1e-9 * ratio)
            .then_some((p as usize, q))
    })
}

impl Resampler {
    pub fn new(in_rate: f64, out_rate: f64) -> Result<Self> {
        let bad = || Error::UnsupportedRatio {
            from: in_rate,
            to: out_rate,
        };
        if !(in_rate > 0.0 && out_rate > 0.0 && in_rate.is_finite() && out_rate.is_finite()) {
            return Err(bad());
        }
        let (up, down) = ratio_terms(in_rate, out_rate).ok_or_else(bad)?;

        let fs_up = in_rate * up as f64;
        let nyq = in_rate.min(out_rate) / 2.0;
        let f_pass = PASSBAND_FRACTION * nyq;
        let f_stop = nyq;
        let dw = 2.0 * PI * (f_stop - f_pass) / fs_up;
        let mut len = ((ATTENUATION_DB - 7.95) / (2.285 * dw)).ceil() as usize + 1;
        if len.is_multiple_of(2) {
            len += 1;
        }
        let beta = 0.1102 * (ATTENUATION_DB - 8.7);
        let fc = (f_pass + f_stop) / 2.0 / fs_up; // cycles/sample
        let mid = (len - 1) as f64 / 2.0;
        let i0b = bessel_i0(beta);
        let taps = (0..len)
            .map(|n| {
                let t = n as f64 - mid;
                let sinc = if t == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * t).sin() / (PI * t)
                };
                let r = t / mid;
                let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                up as f64 * sinc * w
            })
            .collect();
        Ok(Self {
            up,
            down,
            taps,
            in_rate,
            out_rate,
        })
    }

    pub fn factors(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn output_rate(&self) -> f64 {
        self.out_rate
    }

    pub fn input_rate(&self) -> f64 {
        self.in_rate
    }

    pub fn process(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (p, q) = (self.up, self.down);
        let n = x.len();
        let out_len = (n * p).div_ceil(q);
        let delay = (self.taps.len() - 1) / 2;
        (0..out_len)
            .map(|i| {
                let m = i * q + delay;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut k = m % p;
                while k < self.taps.len() {
                    if k <= m {
                        let idx = (m - k) / p;
                        if idx < n {
                            acc += x[idx] * self.taps[k];
                        }
                    }
                    k += p;
                }
                acc
            })
            .collect()
    }
}

/// Resamples `x` to `target_rate_hz`; the ratio must reduce to terms ≤ 64.
pub fn resample(x: &ComplexBuffer, target_rate_hz: f64) -> Result<ComplexBuffer> {
    if (target_rate_hz - x.sample_rate_hz()).abs() < 1e-9 * target_rate_hz {
        return Ok(x.clone());
    }
    let r = Resampler::new(x.sample_rate_hz(), target_rate_hz)?;
    ComplexBuffer::new(r.process(&x.samples), target_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> ComplexBuffer {
        ComplexBuffer::new(
            (0..n)
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * freq * k as f64 / fs))
                .collect(),
            fs,
        )
        .unwrap()
    }

    /// Steady-state amplitude gain, skipping filter edges.
    fn gain_db(y: &ComplexBuffer, skip: usize) -> f64 {
        let mid = &y.samples[skip..y.len() - skip];
        let p = mid.iter().map(|s| s.norm_sqr()).sum::<f64>() / mid.len() as f64;
        10.0 * p.log10()
    }

    #[test]
    fn forty_to_twenty_halves_length() {
        let x = tone(1e6, 40e6, 4001);
        let y = resample(&x, 20e6).unwrap();
        assert!(y.len().abs_diff(2000) <= 1);
        assert_eq!(y.sample_rate_hz(), 20e6);
    }

    #[test]
    fn passband_ripple_under_a_tenth_db() {
        for f in [0.0, 1e6, 3e6, 5e6, 7e6, 8.125e6, -8.125e6, -4e6] {
            let y = resample(&tone(f, 40e6, 8000), 20e6).unwrap();
            let g = gain_db(&y, 200);
            assert!(g.abs() < 0.1, "{f}: {g}");
        }
    }

    #[test]
    fn fifteen_mhz_rejected() {
        let y = resample(&tone(15e6, 40e6, 8000), 20e6).unwrap();
        assert!(gain_db(&y, 200) < -40.0);
    }

    #[test]
    fn upsampling_keeps_tone_and_aligns() {
        let x = tone(2e6, 20e6, 2000);
        let y = resample(&x, 40e6).unwrap();
        assert!(gain_db(&y, 200).abs() < 0.1);
        // zero group delay: even output samples reproduce the input
        for k in 200..800 {
            assert!((y.samples[2 * k] - x.samples[k]).norm() < 2e-3);
        }
    }

    #[test]
    fn round_trip_recovers_in_band_signal() {
        let mut rng = crate::sigcore::Rng::new(11);
        // band-limited random signal at 20 MSPS: random tones within ±8 MHz
        let n = 3000;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..20 {
            let f = rng.uniform_range(-8e6, 8e6);
            let a = rng.complex_gaussian(1.0);
            for (k, v) in x.iter_mut().enumerate() {
                *v += a * Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / 20e6);
            }
        }
        let x = ComplexBuffer::new(x, 20e6).unwrap();
        let back = resample(&resample(&x, 40e6).unwrap(), 20e6).unwrap();
        let skip = 300;
        let err: f64 = (skip..n - skip)
            .map(|k| (back.samples[k] - x.samples[k]).norm_sqr())
            .sum();
        let sig: f64 = (skip..n - skip).map(|k| x.samples[k].norm_sqr()).sum();
        assert!(10.0 * (err / sig).log10() < -40.0);
    }

    #[test]
    fn unsupported_ratios() {
        assert!(Resampler::new(20e6, 20e6 * std::f64::consts::SQRT_2).is_err());
        assert!(Resampler::new(1.0, 1000.0).is_err());
        assert!(Resampler::new(0.0, 1.0).is_err());
        assert_eq!(Resampler::new(40e6, 20e6).unwrap().factors(), (1, 2));
        assert_eq!(Resampler::new(20e6, 80e6).unwrap().factors(), (4, 1));
    }
}
