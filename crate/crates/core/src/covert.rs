//! The hidden DSSS BPSK signal.
//!
//! Each covert bit is one period of the 64-chip code; each chip is held for
//! two samples at 20 MSPS, giving 10 Mcps and 156.25 kbaud. The waveform is
//! real and centred on DC.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{PREAMBLE_LEN, SAMPLE_RATE_HZ};
use crate::sigcore::{build_spreading_code, ComplexBuffer, SpreadingCode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovertConfig {
    pub code: SpreadingCode,
    pub samples_per_chip: usize,
    pub sample_rate_hz: f64,
    /// OFDM power over covert power, dB.
    pub sir_db: f64,
    /// First covert sample, as an index into the buffer the frame is
    /// injected into. The default starts right after the preamble of a
    /// packet that begins at sample 0.
    pub start_offset: usize,
}

impl Default for CovertConfig {
    fn default() -> Self {
        Self {
            code: build_spreading_code(),
            samples_per_chip: 2,
            sample_rate_hz: SAMPLE_RATE_HZ,
            sir_db: 35.0,
            start_offset: PREAMBLE_LEN,
        }
    }
}

impl CovertConfig {
    pub fn with_start(mut self, start_offset: usize) -> Self {
        self.start_offset = start_offset;
        self
    }

    /// Samples per covert bit (128 by default).
    pub fn symbol_len(&self) -> usize {
        self.code.len() * self.samples_per_chip
    }

    pub fn chip_rate_hz(&self) -> f64 {
        self.sample_rate_hz / self.samples_per_chip as f64
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        self.sample_rate_hz / self.symbol_len() as f64
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_chip == 0 {
            return Err(Error::Config("samples_per_chip must be >= 1".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("covert sample rate must be positive".into()));
        }
        if self.sir_db.is_nan() {
            return Err(Error::Config("covert SIR is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovertFrame {
    pub bits: Vec<u8>,
    /// Unit-power ±1 chips, `bits.len() * symbol_len` samples.
    pub waveform: ComplexBuffer,
    /// Where the frame goes in the host buffer.
    pub start_offset: usize,
}

impl CovertFrame {
    pub fn len(&self) -> usize {
        self.waveform.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveform.is_empty()
    }

    pub fn span(&self) -> std::ops::Range<usize> {
        self.start_offset..self.start_offset + self.len()
    }
}

/// Spreads `bits` (0 → +1, 1 → −1) with rectangular chips.
pub fn covert_modulate(bits: &[u8], cfg: &CovertConfig) -> Result<CovertFrame> {
    cfg.validate()?;
    if bits.is_empty() {
        return Err(Error::InvalidInput("covert frame needs at least one bit".into()));
    }
    let mut w = Vec::with_capacity(bits.len() * cfg.symbol_len());
    for &b in bits {
        let s = if b & 1 == 0 { 1.0 } else { -1.0 };
        for &c in cfg.code.chips() {
            let v = Complex64::new(s * c as f64, 0.0);
            w.extend(std::iter::repeat_n(v, cfg.samples_per_chip));
        }
    }
    Ok(CovertFrame {
        bits: bits.to_vec(),
        waveform: ComplexBuffer::new(w, cfg.sample_rate_hz)?,
        start_offset: cfg.start_offset,
    })
}

/// Whole covert bits fitting in `duration_s` of host signal after the
/// start offset.
pub fn capacity(duration_s: f64, cfg: &CovertConfig) -> usize {
    let avail = duration_s - cfg.start_offset as f64 / cfg.sample_rate_hz;
    if avail <= 0.0 {
        return 0;
    }
    // guard against 64/6.4 landing just below an integer
    (avail / cfg.symbol_duration_s() + 1e-9).floor() as usize
}

/// Capacity of a host buffer of `len` samples.
pub fn capacity_samples(len: usize, cfg: &CovertConfig) -> usize {
    len.saturating_sub(cfg.start_offset) / cfg.symbol_len()
}

/// Amplitude that puts the frame `sir_db` below the host power measured
/// over the frame's span.
pub fn covert_gain(host: &ComplexBuffer, frame: &CovertFrame, sir_db: f64) -> Result<f64> {
    let span = frame.span();
    if span.end > host.len() {
        return Err(Error::FrameTooLong {
            frame: frame.len(),
            offset: frame.start_offset,
            available: host.len(),
        });
    }
    if sir_db == f64::INFINITY {
        return Ok(0.0);
    }
    let p_host = host.power_in(span);
    let p_frame = frame.waveform.power();
    if p_host <= 0.0 {
        return Err(Error::ZeroPower("host signal under the covert frame".into()));
    }
    if p_frame <= 0.0 {
        return Err(Error::ZeroPower("covert frame".into()));
    }
    Ok((p_host / p_frame / 10f64.powf(sir_db / 10.0)).sqrt())
}

/// Adds the frame at its start offset, scaled to `sir_db`. Samples outside
/// the frame's span are untouched.
pub fn inject(host: &ComplexBuffer, frame: &CovertFrame, sir_db: f64) -> Result<ComplexBuffer> {
    let g = covert_gain(host, frame, sir_db)?;
    let mut out = host.clone();
    if g == 0.0 {
        return Ok(out);
    }
    for (o, w) in out.samples[frame.span()].iter_mut().zip(&frame.waveform.samples) {
        *o += w * g;
    }
    Ok(out)
}

/// Chip-matched integration and code correlation over `n_bits` symbols
/// starting at `cfg.start_offset`. Returns hard bits and the correlator
/// outputs, normalised per sample (a clean unit frame gives ±1).
pub fn covert_demodulate(x: &ComplexBuffer, cfg: &CovertConfig, n_bits: usize) -> Result<(Vec<u8>, Vec<f64>)> {
    cfg.validate()?;
    let sl = cfg.symbol_len();
    let needed = cfg.start_offset + n_bits * sl;
    if needed > x.len() {
        return Err(Error::TooShort {
            needed,
            available: x.len(),
        });
    }
    let spc = cfg.samples_per_chip;
    let mut bits = Vec::with_capacity(n_bits);
    let mut soft = Vec::with_capacity(n_bits);
    for b in 0..n_bits {
        let base = cfg.start_offset + b * sl;
        let acc: f64 = cfg
            .code
            .chips()
            .iter()
            .enumerate()
            .map(|(c, &chip)| {
                let s = base + c * spc;
                let chip_sum: f64 = x.samples[s..s + spc].iter().map(|v| v.re).sum();
                chip as f64 * chip_sum
            })
            .sum();
        let m = acc / sl as f64;
        bits.push(u8::from(m < 0.0));
        soft.push(m);
    }
    Ok((bits, soft))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{modulate, packet_len, Mcs, OfdmConfig};
    use crate::sigcore::{psd_estimate, Rng};
    use proptest::prelude::*;

    fn erfc_q(x: f64) -> f64 {
        // Q(x) by numerical integration of the normal tail
        let n = 20_000;
        let hi = x + 12.0;
        let h = (hi - x) / n as f64;
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        (0..n).map(|i| f(x + (i as f64 + 0.5) * h) * h).sum()
    }

    #[test]
    fn rates_and_lengths() {
        let cfg = CovertConfig::default();
        assert_eq!(cfg.symbol_len(), 128);
        assert!((cfg.chip_rate_hz() - 10e6).abs() < 1e-6);
        assert!((cfg.symbol_rate_hz() - 156_250.0).abs() < 1e-6);
        assert!((cfg.symbol_duration_s() - 6.4e-6).abs() < 1e-15);
        let f = covert_modulate(&[1], &cfg).unwrap();
        assert_eq!(f.len(), 128);
        assert!(f.waveform.samples.iter().all(|v| v.im == 0.0 && v.re.abs() == 1.0));
    }

    #[test]
    fn antipodal_symbols() {
        let f = covert_modulate(&[1, 0], &CovertConfig::default()).unwrap();
        let (a, b) = f.waveform.samples.split_at(128);
        assert!(a.iter().zip(b).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn capacity_examples() {
        let cfg = CovertConfig::default().with_start(0);
        assert_eq!(capacity(64e-6, &cfg), 10);
        assert_eq!(capacity(6.3e-6, &cfg), 0);
        let ofdm = OfdmConfig::default();
        let mcs = Mcs::new(7).unwrap();
        let len = packet_len(mcs, 1000);
        let p = modulate(&[0; 1000], mcs, &ofdm).unwrap();
        let dur = (len as f64) / 20e6;
        assert!((p.duration_s() - dur).abs() < 1e-12);
        // 38 data symbols plus SIGNAL at 4 µs, after a 16 µs preamble
        let want = ((16.0 + 39.0 * 4.0 - 16.0) / 6.4f64).floor() as usize;
        assert_eq!(capacity(dur, &CovertConfig::default()), want);
        assert_eq!(capacity_samples(len, &CovertConfig::default()), want);
    }

    #[test]
    fn injection_power_and_linearity() {
        let cfg = CovertConfig::default();
        let mut rng = Rng::new(1);
        let host = modulate(&rng.bytes(500), Mcs::new(5).unwrap(), &OfdmConfig::default())
            .unwrap()
            .samples;
        let n = capacity_samples(host.len(), &cfg);
        let f = covert_modulate(&rng.bits(n), &cfg).unwrap();
        for sir in [0.0, 35.0] {
            let y = inject(&host, &f, sir).unwrap();
            let diff: Vec<Complex64> = y.samples.iter().zip(&host.samples).map(|(a, b)| a - b).collect();
            assert!(diff[..f.start_offset].iter().all(|v| v.norm() == 0.0));
            assert!(diff[f.span().end..].iter().all(|v| v.norm() == 0.0));
            let pc: f64 = diff[f.span()].iter().map(|v| v.norm_sqr()).sum::<f64>() / f.len() as f64;
            let measured = 10.0 * (host.power_in(f.span()) / pc).log10();
            assert!((measured - sir).abs() < 0.1);
            let g = covert_gain(&host, &f, sir).unwrap();
            for (d, w) in diff[f.span()].iter().zip(&f.waveform.samples) {
                assert!((d - w * g).norm() < 1e-12);
            }
        }
        assert_eq!(inject(&host, &f, f64::INFINITY).unwrap(), host);
    }

    #[test]
    fn oversize_frame_rejected() {
        let cfg = CovertConfig::default();
        let host = ComplexBuffer::new(vec![Complex64::new(1.0, 0.0); 1000], 20e6).unwrap();
        let f = covert_modulate(&[0; 6], &cfg).unwrap();
        assert!(matches!(inject(&host, &f, 10.0), Err(Error::FrameTooLong { .. })));
    }

    #[test]
    fn short_buffer_rejected() {
        let x = ComplexBuffer::zeros(300, 20e6).unwrap();
        assert!(covert_demodulate(&x, &CovertConfig::default().with_start(0), 3).is_err());
    }

    #[test]
    fn despreading_gain_against_chip_rate_interference() {
        // real ±1 interference, white at the chip rate
        let cfg = CovertConfig::default().with_start(0);
        let mut rng = Rng::new(2);
        let n = 10_000;
        let f = covert_modulate(&vec![0; n], &cfg).unwrap();
        let amp = 10f64.powf(-10.0 / 20.0);
        let mut x = f.waveform.scaled(amp);
        for chip in x.samples.chunks_mut(2) {
            let v = rng.gaussian();
            chip.iter_mut().for_each(|s| s.re += v);
        }
        let (_, soft) = covert_demodulate(&x, &cfg, n).unwrap();
        let mean = soft.iter().sum::<f64>() / n as f64;
        let var = soft.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        let gain = 10.0 * (mean * mean / var).log10() - (-10.0);
        assert!((gain - 10.0 * 64f64.log10()).abs() < 0.5, "{gain}");
    }

    #[test]
    fn ber_in_awgn_matches_bpsk_theory() {
        // complex noise white at 20 MSPS: post-correlation SNR is
        // 128²a² / (128 σ²/2) = 256 a²/σ²
        let cfg = CovertConfig::default().with_start(0);
        let mut rng = Rng::new(3);
        let n = 200_000;
        let bits = rng.bits(n);
        let f = covert_modulate(&bits, &cfg).unwrap();
        let snr_out: f64 = 2.0;
        let sigma2 = 256.0 / snr_out;
        let x = f.waveform.with_samples(
            f.waveform.samples.iter().map(|v| v + rng.complex_gaussian(sigma2)).collect(),
        );
        let (got, _) = covert_demodulate(&x, &cfg, n).unwrap();
        let errors = got.iter().zip(&bits).filter(|(a, b)| a != b).count();
        let ber = errors as f64 / n as f64;
        let want = erfc_q(snr_out.sqrt());
        assert!((ber - want).abs() < 4.0 * (want / n as f64).sqrt(), "{ber} vs {want}");
    }

    #[test]
    fn spectrum_matches_expected_periodogram() {
        // With a 256-point window hopping 128 samples, every segment holds two
        // whole symbols with independent signs, so the expected periodogram is
        // |DTFT(w[0..128]·s)|² + |DTFT(w[128..256]·s)|².
        let cfg = CovertConfig::default().with_start(0);
        let one = covert_modulate(&[0], &cfg).unwrap().waveform.samples;
        let nfft = 256;
        let hann: Vec<f64> = (0..nfft)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nfft as f64).cos())
            .collect();
        let f = covert_modulate(&Rng::new(4).bits(4000), &cfg).unwrap();
        let psd = psd_estimate(&f.waveform, nfft, 0.5).unwrap();
        let expected: Vec<f64> = (0..nfft)
            .map(|i| {
                let hz = psd.freq_hz(i);
                (0..2)
                    .map(|half| {
                        (0..128)
                            .map(|n| {
                                let t = half * 128 + n;
                                let ph = -2.0 * std::f64::consts::PI * hz * t as f64 / 20e6;
                                one[n] * hann[t] * Complex64::from_polar(1.0, ph)
                            })
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum()
            })
            .collect();
        let lin = psd.linear();
        let norm = lin.iter().sum::<f64>() / expected.iter().sum::<f64>();
        for i in 0..nfft {
            if psd.freq_hz(i).abs() < 8e6 {
                let d = 10.0 * (lin[i] / (expected[i] * norm)).log10();
                assert!(d.abs() < 0.5, "{} Hz: {d} dB", psd.freq_hz(i));
            }
        }
        let level = |lo: f64, hi: f64| {
            let v: Vec<f64> = (0..nfft)
                .filter(|&i| (lo..hi).contains(&psd.freq_hz(i).abs()))
                .map(|i| lin[i])
                .collect();
            10.0 * (v.iter().sum::<f64>() / v.len() as f64).log10()
        };
        // main lobe out to the 10 MHz chip-rate null, no spike at DC
        assert!(level(9.5e6, 10.1e6) < level(0.0, 2e6) - 20.0);
        assert!(10.0 * lin[psd.bin_at(0.0)].log10() - level(0.0, 2e6) < 6.0);
    }

    proptest! {
        #[test]
        fn clean_round_trip(bits in proptest::collection::vec(0u8..2, 1..64), start in 0usize..500) {
            let cfg = CovertConfig::default().with_start(start);
            let f = covert_modulate(&bits, &cfg).unwrap();
            let mut host = vec![Complex64::new(0.0, 0.0); start + f.len() + 7];
            host[f.span()].copy_from_slice(&f.waveform.samples);
            let x = ComplexBuffer::new(host, 20e6).unwrap();
            let (got, soft) = covert_demodulate(&x, &cfg, bits.len()).unwrap();
            prop_assert_eq!(got, bits);
            prop_assert!(soft.iter().all(|s| (s.abs() - 1.0).abs() < 1e-12));
        }
    }
}
