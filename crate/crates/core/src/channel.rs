//! Impairments between transmitter and receiver: `r = Λ_Θ H s + n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::{ComplexBuffer, Rng};

/// One draw of the channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// Multipath impulse response at the buffer's sample rate.
    pub taps: Vec<Complex64>,
    /// Carrier offset, rad/sample.
    pub cfo_omega: f64,
    /// Carrier phase at sample 0, rad.
    pub cfo_phi: f64,
    /// Leading samples inserted before the signal.
    pub timing_offset: usize,
    /// Noise power relative to unit signal power; `-inf` disables noise.
    pub noise_power_db: f64,
}

impl Default for ChannelRealization {
    fn default() -> Self {
        Self::identity()
    }
}

impl ChannelRealization {
    pub fn identity() -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            cfo_omega: 0.0,
            cfo_phi: 0.0,
            timing_offset: 0,
            noise_power_db: f64::NEG_INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.taps.first() {
            None => Err(Error::InvalidInput("channel needs at least one tap".into())),
            Some(t) if t.norm() == 0.0 => Err(Error::InvalidInput("main channel tap must be nonzero".into())),
            _ => Ok(()),
        }
    }

    pub fn cfo_hz(&self, sample_rate_hz: f64) -> f64 {
        self.cfo_omega * sample_rate_hz / (2.0 * PI)
    }

    pub fn with_cfo_hz(mut self, cfo_hz: f64, sample_rate_hz: f64) -> Self {
        self.cfo_omega = 2.0 * PI * cfo_hz / sample_rate_hz;
        self
    }
}

/// Linear convolution; output has `x.len() + h.len() - 1` samples.
pub fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (d, &t) in h.iter().enumerate() {
        if t == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, &v) in y[d..].iter_mut().zip(x) {
            *o += v * t;
        }
    }
    y
}

/// Convolves with the taps, applies `e^{j(ωk+φ)}`, delays by the timing
/// offset and adds noise, in that order.
pub fn apply_channel(s: &ComplexBuffer, ch: &ChannelRealization, rng: &mut Rng) -> Result<ComplexBuffer> {
    ch.validate()?;
    if s.is_empty() {
        return Err(Error::InvalidInput("cannot apply a channel to an empty buffer".into()));
    }
    let mut y = if ch.taps.len() == 1 {
        s.samples.iter().map(|v| v * ch.taps[0]).collect()
    } else {
        convolve(&s.samples, &ch.taps)
    };
    if ch.cfo_omega != 0.0 || ch.cfo_phi != 0.0 {
        for (k, v) in y.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, ch.cfo_omega * k as f64 + ch.cfo_phi);
        }
    }
    if ch.timing_offset > 0 {
        y.splice(0..0, std::iter::repeat_n(Complex64::new(0.0, 0.0), ch.timing_offset));
    }
    let out = s.with_samples(y);
    if ch.noise_power_db == f64::NEG_INFINITY {
        return Ok(out);
    }
    add_noise(&out, 10f64.powf(ch.noise_power_db / 10.0), rng)
}

/// Adds circularly-symmetric complex Gaussian noise of the given power.
pub fn add_noise(s: &ComplexBuffer, noise_power: f64, rng: &mut Rng) -> Result<ComplexBuffer> {
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::InvalidInput(format!("noise power must be finite and >= 0, got {noise_power}")));
    }
    Ok(s.with_samples(s.samples.iter().map(|v| v + rng.complex_gaussian(noise_power)).collect()))
}

/// Adds noise `snr_db` below the mean power of `s`. `+inf` adds nothing.
pub fn awgn_for_snr(s: &ComplexBuffer, snr_db: f64, rng: &mut Rng) -> Result<ComplexBuffer> {
    let p = s.power();
    if p <= 0.0 {
        return Err(Error::ZeroPower("AWGN reference signal".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(s.clone());
    }
    add_noise(s, p / 10f64.powf(snr_db / 10.0), rng)
}

/// Random exponentially decaying multipath with uniform tap phases,
/// normalised to unit energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathProfile {
    pub min_taps: usize,
    pub max_taps: usize,
    pub decay_db_per_tap: f64,
}

impl Default for MultipathProfile {
    fn default() -> Self {
        Self {
            min_taps: 3,
            max_taps: 3,
            decay_db_per_tap: 3.0,
        }
    }
}

impl MultipathProfile {
    pub fn validate(&self) -> Result<()> {
        if self.min_taps == 0 || self.max_taps < self.min_taps {
            return Err(Error::Config(format!(
                "multipath tap range {}..={} is empty",
                self.min_taps, self.max_taps
            )));
        }
        if !self.decay_db_per_tap.is_finite() || self.decay_db_per_tap < 0.0 {
            return Err(Error::Config("multipath decay must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<Complex64> {
        let n = self.min_taps + rng.index(self.max_taps - self.min_taps + 1);
        let mut taps: Vec<Complex64> = (0..n)
            .map(|i| {
                let amp = 10f64.powf(-self.decay_db_per_tap * i as f64 / 20.0);
                let phase = if i == 0 { 0.0 } else { rng.uniform_range(-PI, PI) };
                Complex64::from_polar(amp, phase)
            })
            .collect();
        let e: f64 = taps.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
        taps.iter_mut().for_each(|t| *t /= e);
        taps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::{psd_estimate, Rng};

    fn buf(x: Vec<Complex64>) -> ComplexBuffer {
        ComplexBuffer::new(x, 20e6).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let mut rng = Rng::new(1);
        let x: Vec<Complex64> = (0..500).map(|_| rng.complex_gaussian(1.0)).collect();
        let y = apply_channel(&buf(x.clone()), &ChannelRealization::identity(), &mut rng).unwrap();
        assert_eq!(y.samples, x);
    }

    #[test]
    fn impulse_through_two_taps() {
        let ch = ChannelRealization {
            taps: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)],
            ..ChannelRealization::identity()
        };
        let y = apply_channel(&buf(vec![Complex64::new(1.0, 0.0)]), &ch, &mut Rng::new(0)).unwrap();
        assert_eq!(y.samples, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)]);
    }

    #[test]
    fn order_is_convolve_rotate_delay() {
        let ch = ChannelRealization {
            taps: vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
            cfo_omega: 0.1,
            cfo_phi: 0.2,
            timing_offset: 3,
            noise_power_db: f64::NEG_INFINITY,
        };
        let x = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 1.0)];
        let y = apply_channel(&buf(x.clone()), &ch, &mut Rng::new(0)).unwrap().samples;
        let conv = [x[0], x[1] + 0.5 * x[0], 0.5 * x[1]];
        assert_eq!(y.len(), 6);
        assert!(y[..3].iter().all(|v| v.norm() == 0.0));
        for (k, c) in conv.iter().enumerate() {
            let want = c * Complex64::from_polar(1.0, 0.1 * k as f64 + 0.2);
            assert!((y[3 + k] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn cfo_shifts_a_tone() {
        let f0 = 1e6;
        let x: Vec<Complex64> = (0..8192)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f0 * k as f64 / 20e6))
            .collect();
        let ch = ChannelRealization::identity().with_cfo_hz(50e3 * 16.0, 20e6);
        let y = apply_channel(&buf(x), &ch, &mut Rng::new(0)).unwrap();
        let psd = psd_estimate(&y, 256, 0.5).unwrap();
        let peak = psd.freq_hz(psd.peak_bin());
        assert!((peak - (f0 + 800e3)).abs() < psd.bin_width_hz() / 2.0, "{peak}");
    }

    #[test]
    fn cfo_round_trip() {
        let mut rng = Rng::new(2);
        let x: Vec<Complex64> = (0..1000).map(|_| rng.complex_gaussian(1.0)).collect();
        let ch = ChannelRealization {
            cfo_omega: 0.0123,
            cfo_phi: -1.1,
            ..ChannelRealization::identity()
        };
        let y = apply_channel(&buf(x.clone()), &ch, &mut rng).unwrap();
        for (k, (a, b)) in y.samples.iter().zip(&x).enumerate() {
            let back = a * Complex64::from_polar(1.0, -(0.0123 * k as f64 - 1.1));
            assert!((back - b).norm() < 1e-12);
        }
    }

    #[test]
    fn awgn_hits_requested_snr() {
        let mut rng = Rng::new(3);
        let x = buf(vec![Complex64::new(0.6, 0.8); 200_000]);
        for snr in [0.0, 23.0] {
            let y = awgn_for_snr(&x, snr, &mut rng).unwrap();
            let n: f64 = y.samples.iter().zip(&x.samples).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
                / x.len() as f64;
            assert!((10.0 * (1.0 / n).log10() - snr).abs() < 0.1);
        }
        assert_eq!(awgn_for_snr(&x, f64::INFINITY, &mut rng).unwrap(), x);
        assert!(awgn_for_snr(&buf(vec![Complex64::new(0.0, 0.0); 8]), 10.0, &mut rng).is_err());
    }

    #[test]
    fn noise_depends_only_on_seed() {
        let x = buf(vec![Complex64::new(1.0, 0.0); 100]);
        let a = awgn_for_snr(&x, 10.0, &mut Rng::new(9)).unwrap();
        let b = awgn_for_snr(&x, 10.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_energy_multipath_preserves_power() {
        let mut rng = Rng::new(4);
        let p = MultipathProfile {
            min_taps: 2,
            max_taps: 4,
            decay_db_per_tap: 3.0,
        };
        let x: Vec<Complex64> = (0..100_000).map(|_| rng.complex_gaussian(1.0)).collect();
        for _ in 0..5 {
            let taps = p.draw(&mut rng);
            assert!((2..=4).contains(&taps.len()));
            let ch = ChannelRealization {
                taps,
                ..ChannelRealization::identity()
            };
            let y = apply_channel(&buf(x.clone()), &ch, &mut rng).unwrap();
            assert!((10.0 * y.power().log10()).abs() < 0.2);
        }
    }

    #[test]
    fn rejects_bad_realizations() {
        let mut ch = ChannelRealization::identity();
        ch.taps = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(apply_channel(&buf(vec![Complex64::new(1.0, 0.0)]), &ch, &mut Rng::new(0)).is_err());
        ch.taps.clear();
        assert!(ch.validate().is_err());
    }
}
