//! Remodulate-and-subtract cancellation of the host OFDM packet.
//!
//! Forward mode rebuilds what the receiver should have seen,
//! `Λ̂ Ĥ ŝ`, and subtracts it from `r`, leaving the noise untouched.
//! Inverse mode equalises `r` and subtracts `ŝ`; it is kept for comparison.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::convolve;
use crate::covert::{covert_demodulate, CovertConfig};
use crate::error::{Error, Result};
use crate::ofdm::{
    demodulate_from, octets_to_bits, remodulate, FrameFormat, OfdmConfig, RxEstimates, Transforms, CP_LEN,
    FFT_SIZE, PREAMBLE_LEN, SYMBOL_LEN,
};
use crate::sigcore::{power_to_db, ComplexBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CancelMode {
    Forward,
    Inverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancelOptions {
    /// Match model power and common phase to `r` before subtracting.
    pub refine: bool,
    /// Window for the refinement and the suppression figure; defaults to
    /// the packet body after the preamble.
    pub window: Option<Range<usize>>,
}

impl Default for CancelOptions {
    fn default() -> Self {
        Self {
            refine: true,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    /// Residue power over model power in the window, dB.
    pub suppression_db: f64,
    /// PSDU bit errors against the true payload, when it is known.
    pub ofdm_bit_errors: Option<usize>,
    pub scale_applied: f64,
    pub phase_applied: f64,
    pub mode: CancelMode,
    /// The OFDM packet was not demodulated; the covert receiver ran on `r`.
    pub degraded: bool,
}

/// Estimated impulse response: `IDFT(Ĥ)` with taps 32..63 read as negative
/// delays. Returns the taps and the number of negative-delay taps.
pub fn impulse_response(channel: &[Complex64]) -> Result<(Vec<Complex64>, usize)> {
    if channel.len() != FFT_SIZE {
        return Err(Error::LengthMismatch(format!(
            "channel estimate has {} bins, expected {FFT_SIZE}",
            channel.len()
        )));
    }
    let h = Transforms::new().idft(channel);
    let pre = FFT_SIZE / 2;
    let taps = h[pre..].iter().chain(&h[..pre]).copied().collect();
    Ok((taps, pre))
}

/// Phase applied to each sample of the packet: 0 over the preamble, then the
/// pilot-tracked common phase of each symbol.
fn symbol_phase(est: &RxEstimates, offset: isize) -> f64 {
    if offset < PREAMBLE_LEN as isize || est.symbol_phases.is_empty() {
        return 0.0;
    }
    let p = (offset as usize - PREAMBLE_LEN) / SYMBOL_LEN;
    est.symbol_phases[p.min(est.symbol_phases.len() - 1)]
}

fn default_window(est: &RxEstimates, s_hat: &ComplexBuffer, len: usize) -> Range<usize> {
    let start = (est.fine_timing + PREAMBLE_LEN).min(len);
    start..(est.fine_timing + s_hat.len()).min(len)
}

fn check_window(w: &Range<usize>, len: usize) -> Result<()> {
    if w.start >= w.end || w.end > len {
        return Err(Error::InvalidInput(format!("window {w:?} is empty or outside {len} samples")));
    }
    Ok(())
}

/// `Λ̂ Ĥ ŝ` placed at the estimated packet start, with the per-symbol pilot
/// phase applied. Same length as `r`.
pub fn reconstruct(len: usize, est: &RxEstimates, s_hat: &ComplexBuffer) -> Result<Vec<Complex64>> {
    let (taps, pre) = impulse_response(&est.channel)?;
    let filtered = convolve(&s_hat.samples, &taps);
    let mut model = vec![Complex64::new(0.0, 0.0); len];
    for (i, v) in filtered.iter().enumerate() {
        let k = est.fine_timing as isize + i as isize - pre as isize;
        if k < 0 || k as usize >= len {
            continue;
        }
        let offset = i as isize - pre as isize;
        let rot = est.cfo_omega * k as f64 + est.cfo_phi + symbol_phase(est, offset);
        model[k as usize] = v * Complex64::from_polar(1.0, rot);
    }
    Ok(model)
}

/// Gain and rotation that best align `s_model` with `r`:
/// `√(P_r/P_model)` and `arg Σ r·conj(s_model)`.
pub fn refine_scale_phase(r: &[Complex64], s_model: &[Complex64]) -> Result<(f64, f64)> {
    if r.len() != s_model.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} samples", r.len(), s_model.len())));
    }
    let pm: f64 = s_model.iter().map(|v| v.norm_sqr()).sum();
    if pm <= 0.0 {
        return Err(Error::ZeroPower("cancellation model".into()));
    }
    let pr: f64 = r.iter().map(|v| v.norm_sqr()).sum();
    let c: Complex64 = r.iter().zip(s_model).map(|(a, b)| a * b.conj()).sum();
    Ok(((pr / pm).sqrt(), c.arg()))
}

fn power(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len().max(1) as f64
}

/// `u = r − Λ̂ Ĥ ŝ`. `r` and `ŝ` share the packet start `est.fine_timing`.
pub fn cancel_forward(
    r: &ComplexBuffer,
    est: &RxEstimates,
    s_hat: &ComplexBuffer,
    opts: &CancelOptions,
) -> Result<(ComplexBuffer, CancellationReport)> {
    if est.fine_timing + s_hat.len() > r.len() {
        return Err(Error::LengthMismatch(format!(
            "remodulated packet of {} samples at {} overruns {} received samples",
            s_hat.len(),
            est.fine_timing,
            r.len()
        )));
    }
    let window = opts.window.clone().unwrap_or_else(|| default_window(est, s_hat, r.len()));
    check_window(&window, r.len())?;
    let mut model = reconstruct(r.len(), est, s_hat)?;
    let (scale, phase) = if opts.refine {
        refine_scale_phase(&r.samples[window.clone()], &model[window.clone()])?
    } else {
        (1.0, 0.0)
    };
    if opts.refine {
        let g = Complex64::from_polar(scale, phase);
        model.iter_mut().for_each(|v| *v *= g);
    }
    let residue: Vec<Complex64> = r.samples.iter().zip(&model).map(|(a, b)| a - b).collect();
    let suppression_db = power_to_db(power(&residue[window.clone()]) / power(&model[window]));
    Ok((
        r.with_samples(residue),
        CancellationReport {
            suppression_db,
            ofdm_bit_errors: None,
            scale_applied: scale,
            phase_applied: phase,
            mode: CancelMode::Forward,
            degraded: false,
        },
    ))
}

/// Relative |Ĥ| below which inverse equalisation refuses to divide.
pub const INVERSE_FLOOR: f64 = 1e-6;

/// `u = Ĥ⁻¹ Λ̂* r − ŝ`, equalising each 80-sample block by FFT: the body
/// from its own window, the cyclic prefix from the window starting at the
/// block. The residue is expressed in the transmitter's frame (no CFO).
pub fn cancel_inverse(
    r: &ComplexBuffer,
    est: &RxEstimates,
    s_hat: &ComplexBuffer,
    opts: &CancelOptions,
) -> Result<(ComplexBuffer, CancellationReport)> {
    let n = s_hat.len();
    let start = est.fine_timing;
    if start + n > r.len() {
        return Err(Error::LengthMismatch(format!(
            "remodulated packet of {n} samples at {start} overruns {} received samples",
            r.len()
        )));
    }
    if est.channel.len() != FFT_SIZE {
        return Err(Error::LengthMismatch("channel estimate must have 64 bins".into()));
    }
    let hmax = est.channel.iter().map(|h| h.norm()).fold(0.0, f64::max);
    for (bin, h) in est.channel.iter().enumerate() {
        if h.norm() < INVERSE_FLOOR * hmax || hmax == 0.0 {
            return Err(Error::SingularChannel {
                bin,
                magnitude: h.norm(),
            });
        }
    }
    let t = Transforms::new();
    let derot: Vec<Complex64> = r
        .samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let off = k as isize - start as isize;
            v * Complex64::from_polar(1.0, -(est.cfo_omega * k as f64 + est.cfo_phi + symbol_phase(est, off)))
        })
        .collect();
    let equalise = |from: usize| -> [Complex64; FFT_SIZE] {
        let mut y = t.dft(&derot[from..from + FFT_SIZE]);
        for (v, h) in y.iter_mut().zip(&est.channel) {
            *v /= h;
        }
        t.idft(&y)
    };
    let mut eq = derot.clone();
    for b in 0..n / SYMBOL_LEN {
        let s = start + b * SYMBOL_LEN;
        let head = equalise(s);
        eq[s..s + CP_LEN].copy_from_slice(&head[..CP_LEN]);
        let body = equalise(s + CP_LEN);
        eq[s + CP_LEN..s + SYMBOL_LEN].copy_from_slice(&body);
    }
    for (e, v) in eq[start..start + n].iter_mut().zip(&s_hat.samples) {
        *e -= v;
    }
    let window = opts.window.clone().unwrap_or_else(|| default_window(est, s_hat, r.len()));
    check_window(&window, r.len())?;
    let ref_power = power(&s_hat.samples[window.start - start..window.end - start]);
    let suppression_db = power_to_db(power(&eq[window]) / ref_power);
    Ok((
        r.with_samples(eq),
        CancellationReport {
            suppression_db,
            ofdm_bit_errors: None,
            scale_applied: 1.0,
            phase_applied: 0.0,
            mode: CancelMode::Inverse,
            degraded: false,
        },
    ))
}

/// Result of the full covert receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovertRecovery {
    pub bits: Vec<u8>,
    pub soft: Vec<f64>,
    pub report: CancellationReport,
    pub estimates: Option<RxEstimates>,
    /// What the covert receiver despread: the residue, or `r` itself on the
    /// degraded path.
    #[serde(skip)]
    pub residue: Option<ComplexBuffer>,
}

/// Detect → demodulate → remodulate → re-impair → refine → subtract →
/// despread. Without a demodulated packet the covert receiver runs on `r`.
pub fn recover_covert(
    r: &ComplexBuffer,
    ofdm_cfg: &OfdmConfig,
    covert_cfg: &CovertConfig,
    n_bits: usize,
    format: Option<FrameFormat>,
    truth_psdu: Option<&[u8]>,
) -> Result<CovertRecovery> {
    recover_covert_from(r, 0, ofdm_cfg, covert_cfg, n_bits, format, truth_psdu)
}

/// [`recover_covert`] for the first packet at or after `search_from`.
pub fn recover_covert_from(
    r: &ComplexBuffer,
    search_from: usize,
    ofdm_cfg: &OfdmConfig,
    covert_cfg: &CovertConfig,
    n_bits: usize,
    format: Option<FrameFormat>,
    truth_psdu: Option<&[u8]>,
) -> Result<CovertRecovery> {
    let span = covert_cfg.start_offset..covert_cfg.start_offset + n_bits * covert_cfg.symbol_len();
    let demod = demodulate_from(r, search_from, format, ofdm_cfg)?;
    let Some(d) = demod else {
        log::debug!("no OFDM packet decoded; despreading the raw buffer");
        let (bits, soft) = covert_demodulate(r, covert_cfg, n_bits)?;
        return Ok(CovertRecovery {
            bits,
            soft,
            report: CancellationReport {
                suppression_db: 0.0,
                ofdm_bit_errors: None,
                scale_applied: 0.0,
                phase_applied: 0.0,
                mode: CancelMode::Forward,
                degraded: true,
            },
            estimates: None,
            residue: None,
        });
    };
    let s_hat = remodulate(&d.psdu, d.format.mcs, d.scrambler_seed, ofdm_cfg)?;
    let opts = CancelOptions {
        refine: true,
        window: (n_bits > 0 && span.end <= r.len()).then_some(span),
    };
    let (residue, mut report) = cancel_forward(r, &d.estimates, &s_hat, &opts)?;
    report.ofdm_bit_errors = truth_psdu.map(|t| bit_errors(t, &d.psdu));
    let (bits, soft) = covert_demodulate(&residue, covert_cfg, n_bits)?;
    Ok(CovertRecovery {
        bits,
        soft,
        report,
        estimates: Some(d.estimates),
        residue: Some(residue),
    })
}

/// Differing bits between two octet strings; length differences count as
/// errors.
pub fn bit_errors(a: &[u8], b: &[u8]) -> usize {
    let common: usize = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum();
    common + 8 * a.len().abs_diff(b.len())
}

/// Flips `positions` (PSDU bit indices, LSB-first within octets).
pub fn flip_bits(psdu: &[u8], positions: &[usize]) -> Vec<u8> {
    let mut out = psdu.to_vec();
    let n = octets_to_bits(psdu).len();
    for &p in positions {
        if p < n {
            out[p / 8] ^= 1 << (p % 8);
        }
    }
    out
}
