//! Receiver: channel estimation, equalisation, decoding and seed recovery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::convcode::{depuncture, viterbi_decode};
use super::interleave::{deinterleave, permutation};
use super::mapping::demap_point;
use super::params::*;
use super::preamble::ltf_freq;
use super::scrambler::{pilot_polarity, recover_seed, Scrambler, DEFAULT_SEED};
use super::sync::detect_and_sync;
use super::transform::{window_shift, Transforms};
use super::tx::bits_to_octets;
use crate::error::{Error, Result};
use crate::sigcore::ComplexBuffer;

/// FFT windows start this many samples inside the cyclic prefix, which
/// tolerates small timing errors and short channel precursors.
pub const FFT_BACKOFF: usize = 3;

/// Offset of LTF period 1 from the packet start.
const LTF1_OFFSET: usize = STF_LEN + 32;

/// Everything the receiver learned about one packet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RxEstimates {
    /// Sample where the STF detector fired.
    pub coarse_timing: usize,
    /// Packet start (first STF sample).
    pub fine_timing: usize,
    /// Carrier offset in rad/sample, referenced to absolute sample index.
    pub cfo_omega: f64,
    /// Carrier phase at sample 0; the LTF-based channel estimate absorbs the
    /// packet's phase, so the receiver leaves this at 0.
    pub cfo_phi: f64,
    /// Channel estimate per FFT bin (64 entries), referenced to a window
    /// starting exactly at the symbol body. Null bins are interpolated.
    pub channel: Vec<Complex64>,
    /// Post-sync SNR from the difference of the two LTF periods.
    pub snr_db: f64,
    /// Common phase (rad) measured on the pilots of each symbol after the
    /// preamble, SIGNAL first.
    pub symbol_phases: Vec<f64>,
}

impl RxEstimates {
    /// `Λ̂[k] = e^{j(ω̂k + φ̂)}`.
    pub fn cfo_phasor(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.cfo_omega * k as f64 + self.cfo_phi)
    }

    pub fn cfo_hz(&self, sample_rate_hz: f64) -> f64 {
        self.cfo_omega * sample_rate_hz / (2.0 * PI)
    }
}

/// Frame parameters known to the receiver in advance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameFormat {
    pub mcs: Mcs,
    pub psdu_octets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demodulated {
    pub psdu: Vec<u8>,
    pub format: FrameFormat,
    pub estimates: RxEstimates,
    /// The trailing four octets match the CRC-32 of the rest.
    pub fcs_ok: bool,
    pub scrambler_seed: u8,
}

/// Removes `Λ̂` from the whole buffer.
pub fn correct_cfo(r: &ComplexBuffer, est: &RxEstimates) -> ComplexBuffer {
    let x = r
        .samples
        .iter()
        .enumerate()
        .map(|(k, v)| v * est.cfo_phasor(k).conj())
        .collect();
    r.with_samples(x)
}

fn fft_window(t: &Transforms, x: &[Complex64], body_start: usize) -> [Complex64; FFT_SIZE] {
    let mut y = t.to_freq(&x[body_start - FFT_BACKOFF..]);
    for (m, v) in y.iter_mut().enumerate() {
        *v *= window_shift(m, FFT_BACKOFF);
    }
    y
}

/// Fills null bins by circular linear interpolation of magnitude and
/// unwrapped phase between the nearest occupied neighbours.
fn interpolate_nulls(h: &mut [Complex64], occupied: &[bool]) {
    let n = h.len();
    let Some(first) = (0..n).find(|&i| occupied[i]) else {
        return;
    };
    let mut i = 0;
    while i < n {
        let pos = (first + i) % n;
        if occupied[pos] {
            i += 1;
            continue;
        }
        let prev = (first + i - 1) % n;
        let mut gap = 0;
        while !occupied[(pos + gap) % n] {
            gap += 1;
        }
        let next = (pos + gap) % n;
        let (a, b) = (h[prev], h[next]);
        let mut dphi = b.arg() - a.arg();
        dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
        for j in 0..gap {
            let f = (j + 1) as f64 / (gap + 1) as f64;
            let mag = a.norm() + f * (b.norm() - a.norm());
            h[(pos + j) % n] = Complex64::from_polar(mag, a.arg() + f * dphi);
        }
        i += gap;
    }
}

/// Least-squares channel estimate from the two LTF periods of a
/// CFO-corrected buffer. Fills `channel` and `snr_db`.
pub fn estimate_channel(r_sync: &ComplexBuffer, est: &RxEstimates, cfg: &OfdmConfig) -> Result<RxEstimates> {
    cfg.validate()?;
    let x = &r_sync.samples;
    let ltf1 = est.fine_timing + LTF1_OFFSET;
    if ltf1 + 2 * FFT_SIZE > x.len() {
        return Err(Error::TooShort {
            needed: ltf1 + 2 * FFT_SIZE,
            available: x.len(),
        });
    }
    let t = Transforms::new();
    let y1 = fft_window(&t, x, ltf1);
    let y2 = fft_window(&t, x, ltf1 + FFT_SIZE);
    let l = ltf_freq();
    let mut h = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    let mut occupied = vec![false; FFT_SIZE];
    let mut sig = 0.0;
    let mut noise = 0.0;
    for m in cfg.occupied_bins() {
        h[m] = (y1[m] + y2[m]) * 0.5 / l[m];
        occupied[m] = true;
        sig += h[m].norm_sqr();
        noise += (y1[m] - y2[m]).norm_sqr() / 2.0;
    }
    interpolate_nulls(&mut h, &occupied);
    // per-bin noise variance maps to time-domain variance by 64/52
    let snr = sig / (noise * FFT_SIZE as f64 / cfg.occupied_bins().len() as f64).max(1e-300);
    Ok(RxEstimates {
        channel: h,
        snr_db: 10.0 * snr.log10(),
        ..est.clone()
    })
}

/// Equalised symbol `p` (SIGNAL = 0): pilot-phase-corrected data points,
/// ZF weights and the measured common phase.
fn equalise_symbol(
    t: &Transforms,
    x: &[Complex64],
    est: &RxEstimates,
    cfg: &OfdmConfig,
    p: usize,
    polarity: f64,
) -> Result<(Vec<Complex64>, Vec<f64>, f64)> {
    let body = est.fine_timing + PREAMBLE_LEN + p * SYMBOL_LEN + CP_LEN;
    let y = fft_window(t, x, body);
    let h = &est.channel;
    let mut acc = Complex64::new(0.0, 0.0);
    for (&k, &v) in cfg.pilot_subcarriers.iter().zip(PILOT_VALUES.iter()) {
        let m = bin(k);
        acc += y[m] * (h[m] * v * polarity).conj();
    }
    let theta = acc.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    let mut points = Vec::with_capacity(cfg.data_subcarriers.len());
    let mut weights = Vec::with_capacity(cfg.data_subcarriers.len());
    for &k in &cfg.data_subcarriers {
        let m = bin(k);
        let g = h[m].norm_sqr();
        if g < 1e-24 {
            return Err(Error::SingularChannel {
                bin: m,
                magnitude: g.sqrt(),
            });
        }
        points.push(y[m] / h[m] * rot);
        weights.push(g);
    }
    Ok((points, weights, theta))
}

fn soft_bits(m: Modulation, points: &[Complex64], weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len() * m.bits_per_symbol());
    for (&y, &w) in points.iter().zip(weights) {
        demap_point(m, y, w, &mut out);
    }
    out
}

/// Decoded SIGNAL field, if its parity and rate bits are valid.
fn parse_signal(bits: &[u8]) -> Option<FrameFormat> {
    if bits[..18].iter().fold(0, |a, b| a ^ b) != 0 || bits[4] != 0 {
        return None;
    }
    let mcs = Mcs::all().find(|m| m.rate_bits() == bits[..4])?;
    let len = bits[5..17]
        .iter()
        .enumerate()
        .fold(0usize, |a, (i, &b)| a | ((b as usize) << i));
    Some(FrameFormat {
        mcs,
        psdu_octets: len,
    })
}

pub fn fcs_ok(psdu: &[u8]) -> bool {
    if psdu.len() < 4 {
        return false;
    }
    let (body, fcs) = psdu.split_at(psdu.len() - 4);
    crc32fast::hash(body).to_le_bytes() == fcs
}

/// Demodulates the packet described by `est` (timing and CFO already known).
/// With `format = None` the SIGNAL field decides rate and length.
pub fn demodulate_at(
    r: &ComplexBuffer,
    est: &RxEstimates,
    format: Option<FrameFormat>,
    cfg: &OfdmConfig,
) -> Result<Option<Demodulated>> {
    cfg.validate()?;
    if est.fine_timing + HEADER_LEN > r.len() {
        return Ok(None);
    }
    let rs = correct_cfo(r, est);
    let mut est = estimate_channel(&rs, est, cfg)?;
    let x = &rs.samples;
    let t = Transforms::new();
    let pol = pilot_polarity();

    let (pts, w, theta) = equalise_symbol(&t, x, &est, cfg, 0, pol[0])?;
    let sig = deinterleave(&soft_bits(Modulation::Bpsk, &pts, &w), &permutation(48, 1));
    let sig_bits = viterbi_decode(&sig);
    let format = match format.or_else(|| parse_signal(&sig_bits)) {
        Some(f) => f,
        None => return Ok(None),
    };
    let mcs = format.mcs;
    let n_sym = mcs.n_symbols(format.psdu_octets);
    if est.fine_timing + packet_len(mcs, format.psdu_octets) > r.len() {
        return Ok(None);
    }

    let mut phases = Vec::with_capacity(n_sym + 1);
    phases.push(theta);
    let perm = permutation(mcs.n_cbps(), mcs.n_bpsc());
    let mut soft = Vec::with_capacity(n_sym * mcs.n_cbps());
    for n in 0..n_sym {
        let (pts, w, theta) = equalise_symbol(&t, x, &est, cfg, n + 1, pol[(n + 1) % 127])?;
        phases.push(theta);
        soft.extend(deinterleave(&soft_bits(mcs.modulation(), &pts, &w), &perm));
    }
    est.symbol_phases = phases;

    let n_data = n_sym * mcs.n_dbps();
    let mut bits = viterbi_decode(&depuncture(&soft, mcs.code_rate(), 2 * n_data));
    let seed = recover_seed(&bits[..7]).unwrap_or(DEFAULT_SEED);
    Scrambler::new(seed).apply(&mut bits);
    let psdu = bits_to_octets(&bits[SERVICE_BITS..SERVICE_BITS + 8 * format.psdu_octets]);
    Ok(Some(Demodulated {
        fcs_ok: fcs_ok(&psdu),
        psdu,
        format,
        estimates: est,
        scrambler_seed: seed,
    }))
}

/// Detects, synchronises and demodulates the first packet at or after
/// `search_from`. `Ok(None)` means no packet was found or it was cut off.
pub fn demodulate_from(
    r: &ComplexBuffer,
    search_from: usize,
    format: Option<FrameFormat>,
    cfg: &OfdmConfig,
) -> Result<Option<Demodulated>> {
    cfg.validate()?;
    match detect_and_sync(r, cfg, search_from) {
        Some(est) => demodulate_at(r, &est, format, cfg),
        None => Ok(None),
    }
}

pub fn demodulate(r: &ComplexBuffer, format: Option<FrameFormat>, cfg: &OfdmConfig) -> Result<Option<Demodulated>> {
    demodulate_from(r, 0, format, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::tx::modulate;
    use crate::sigcore::Rng;

    fn with_fcs(mut body: Vec<u8>) -> Vec<u8> {
        let c = crc32fast::hash(&body);
        body.extend(c.to_le_bytes());
        body
    }

    /// Pads, applies a two-tap channel, CFO and noise.
    fn impair(x: &[Complex64], lead: usize, cfo_hz: f64, noise_var: f64, rng: &mut Rng) -> ComplexBuffer {
        let taps = [Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.2)];
        let n = lead + x.len() + 200;
        let w = 2.0 * PI * cfo_hz / SAMPLE_RATE_HZ;
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, v) in x.iter().enumerate() {
            for (d, t) in taps.iter().enumerate() {
                y[lead + i + d] += v * t;
            }
        }
        for (k, v) in y.iter_mut().enumerate() {
            *v = *v * Complex64::from_polar(1.0, w * k as f64 + 0.7) + rng.complex_gaussian(noise_var);
        }
        ComplexBuffer::new(y, SAMPLE_RATE_HZ).unwrap()
    }

    #[test]
    fn clean_loopback_every_mcs() {
        let cfg = OfdmConfig::default();
        let mut rng = Rng::new(3);
        for mcs in Mcs::all() {
            let psdu = with_fcs(rng.bytes(200));
            let p = modulate(&psdu, mcs, &cfg).unwrap();
            let mut y = vec![Complex64::new(0.0, 0.0); 100];
            y.extend(&p.samples.samples);
            y.extend(vec![Complex64::new(0.0, 0.0); 100]);
            let r = ComplexBuffer::new(y, SAMPLE_RATE_HZ).unwrap();
            let d = demodulate(&r, None, &cfg).unwrap().expect("packet");
            assert_eq!(d.estimates.fine_timing, 100, "{mcs:?}");
            assert_eq!(d.format.mcs, mcs);
            assert_eq!(d.psdu, psdu);
            assert!(d.fcs_ok);
            assert_eq!(d.scrambler_seed, DEFAULT_SEED);
            assert!(d.estimates.cfo_omega.abs() < 1e-9);
        }
    }

    #[test]
    fn impaired_loopback_with_known_format() {
        let cfg = OfdmConfig::default();
        let mut rng = Rng::new(4);
        for mcs in Mcs::all() {
            let psdu = with_fcs(rng.bytes(300));
            let p = modulate(&psdu, mcs, &cfg).unwrap();
            let lead = 237 + rng.index(50);
            let r = impair(&p.samples.samples, lead, 37e3, 1e-4, &mut rng);
            let f = FrameFormat {
                mcs,
                psdu_octets: psdu.len(),
            };
            let d = demodulate(&r, Some(f), &cfg).unwrap().expect("packet");
            assert!(d.estimates.fine_timing.abs_diff(lead) <= 1);
            assert!((d.estimates.cfo_hz(SAMPLE_RATE_HZ) - 37e3).abs() < 500.0);
            assert_eq!(d.psdu, psdu, "{mcs:?}");
            assert_eq!(d.estimates.symbol_phases.len(), p.symbol_vectors.len());
            assert!(d.estimates.snr_db > 30.0);
        }
    }

    #[test]
    fn channel_estimate_matches_two_tap_response() {
        let cfg = OfdmConfig::default();
        let p = modulate(&[0u8; 20], Mcs::new(0).unwrap(), &cfg).unwrap();
        let mut y = vec![Complex64::new(0.0, 0.0); p.len() + 100];
        for (i, v) in p.samples.samples.iter().enumerate() {
            y[50 + i] += v;
            y[51 + i] += v * 0.5;
        }
        let r = ComplexBuffer::new(y, SAMPLE_RATE_HZ).unwrap();
        let est = detect_and_sync(&r, &cfg, 0).unwrap();
        assert_eq!(est.fine_timing, 50);
        let est = estimate_channel(&correct_cfo(&r, &est), &est, &cfg).unwrap();
        for m in cfg.occupied_bins() {
            let want = Complex64::new(1.0, 0.0) + 0.5 * Complex64::from_polar(1.0, -2.0 * PI * m as f64 / 64.0);
            assert!((est.channel[m] - want).norm() < 1e-9, "bin {m}");
        }
        assert_eq!(est.channel.len(), FFT_SIZE);
        assert!(est.channel.iter().all(|h| h.norm() > 0.0));
    }

    #[test]
    fn noise_only_finds_nothing() {
        let mut rng = Rng::new(5);
        let y: Vec<Complex64> = (0..20_000).map(|_| rng.complex_gaussian(1.0)).collect();
        let r = ComplexBuffer::new(y, SAMPLE_RATE_HZ).unwrap();
        assert!(demodulate(&r, None, &OfdmConfig::default()).unwrap().is_none());
    }

    #[test]
    fn truncated_packet_is_not_reported() {
        let cfg = OfdmConfig::default();
        let p = modulate(&[7u8; 400], Mcs::new(2).unwrap(), &cfg).unwrap();
        let r = ComplexBuffer::new(p.samples.samples[..p.len() - 500].to_vec(), SAMPLE_RATE_HZ).unwrap();
        assert!(demodulate(&r, None, &cfg).unwrap().is_none());
    }

    #[test]
    fn cfo_rms_error_at_23_db() {
        let cfg = OfdmConfig::default();
        let mut rng = Rng::new(6);
        let p = modulate(&rng.bytes(50), Mcs::new(0).unwrap(), &cfg).unwrap();
        let noise = 10f64.powf(-2.3);
        let trials = 200;
        let mut se = 0.0;
        for _ in 0..trials {
            let cfo = rng.uniform_range(-40e3, 40e3);
            let r = impair(&p.samples.samples, 300, cfo, noise, &mut rng);
            let est = detect_and_sync(&r, &cfg, 0).expect("detected");
            se += (est.cfo_hz(SAMPLE_RATE_HZ) - cfo).powi(2);
        }
        let rms = (se / trials as f64).sqrt();
        assert!(rms < 2e3, "rms {rms}");
    }

    #[test]
    fn second_packet_found_after_first() {
        let cfg = OfdmConfig::default();
        let a = modulate(&with_fcs(vec![1; 60]), Mcs::new(3).unwrap(), &cfg).unwrap();
        let b = modulate(&with_fcs(vec![2; 60]), Mcs::new(5).unwrap(), &cfg).unwrap();
        let mut y = vec![Complex64::new(0.0, 0.0); 80];
        y.extend(&a.samples.samples);
        y.extend(vec![Complex64::new(0.0, 0.0); 400]);
        let second = y.len();
        y.extend(&b.samples.samples);
        y.extend(vec![Complex64::new(0.0, 0.0); 80]);
        let r = ComplexBuffer::new(y, SAMPLE_RATE_HZ).unwrap();
        let d1 = demodulate(&r, None, &cfg).unwrap().unwrap();
        let next = d1.estimates.fine_timing + a.len();
        let d2 = demodulate_from(&r, next, None, &cfg).unwrap().unwrap();
        assert_eq!(d2.estimates.fine_timing, second);
        assert_eq!(d2.psdu, b.psdu);
    }

    #[test]
    fn fcs_check() {
        assert!(fcs_ok(&with_fcs(b"hello".to_vec())));
        assert!(!fcs_ok(b"hello world"));
        assert!(!fcs_ok(&[1, 2]));
    }
}
