//! Welch PSD estimate.
//!
//! Segments of `nfft` samples are Hann-windowed, transformed and averaged.
//! The per-bin values are normalised so they sum to the mean power of the
//! input, i.e. each bin holds the power falling in `fs/nfft` Hz. Bins are
//! returned in ascending frequency order, DC at index `nfft/2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{buffer::power_to_db, ComplexBuffer};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Psd {
    /// Power per bin in dB, ascending frequency.
    pub bins_db: Vec<f64>,
    pub sample_rate_hz: f64,
    pub segments: usize,
}

impl Psd {
    pub fn nfft(&self) -> usize {
        self.bins_db.len()
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.nfft() as f64
    }

    pub fn freq_hz(&self, i: usize) -> f64 {
        (i as f64 - (self.nfft() / 2) as f64) * self.bin_width_hz()
    }

    /// Index of the bin containing `freq_hz` (clamped).
    pub fn bin_at(&self, freq_hz: f64) -> usize {
        let i = (freq_hz / self.bin_width_hz()).round() as isize + (self.nfft() / 2) as isize;
        i.clamp(0, self.nfft() as isize - 1) as usize
    }

    pub fn linear(&self) -> Vec<f64> {
        self.bins_db.iter().map(|d| 10f64.powf(d / 10.0)).collect()
    }

    /// Sum of all bins in dB; equals the measured mean power.
    pub fn total_power_db(&self) -> f64 {
        power_to_db(self.linear().iter().sum())
    }

    pub fn peak_bin(&self) -> usize {
        self.bins_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

pub(crate) fn hann(n: usize) -> Vec<f64> {
    // periodic Hann
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn psd_estimate(x: &ComplexBuffer, nfft: usize, overlap: f64) -> Result<Psd> {
    if nfft < 2 {
        return Err(Error::InvalidInput("nfft must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidInput(format!("overlap {overlap} outside [0, 1)")));
    }
    if x.len() < nfft {
        return Err(Error::TooShort {
            needed: nfft,
            available: x.len(),
        });
    }
    let hop = ((nfft as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window = hann(nfft);
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);

    let mut acc = vec![0.0; nfft];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut segments = 0;
    let mut start = 0;
    while start + nfft <= x.len() {
        for (b, (s, w)) in buf
            .iter_mut()
            .zip(x.samples[start..start + nfft].iter().zip(&window))
        {
            *b = s * w;
        }
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * nfft as f64 * wpow);
    let half = nfft / 2;
    let bins_db = (0..nfft)
        .map(|i| power_to_db(acc[(i + nfft - half) % nfft] * scale))
        .collect();
    Ok(Psd {
        bins_db,
        sample_rate_hz: x.sample_rate_hz(),
        segments,
    })
}
