//! Packet detection, timing and carrier-offset estimation.
//!
//! Detection and coarse timing come from the lag-16 autocorrelation of the
//! short training field, which also yields a coarse CFO estimate. Fine
//! timing comes from cross-correlating with the known long training symbol,
//! and the two LTF periods (plus the cyclic half of the guard) refine the
//! CFO at lag 64.

use num_complex::Complex64;

use super::params::*;
use super::preamble::ltf_symbol;
use super::rx::RxEstimates;
use super::transform::Transforms;
use crate::sigcore::ComplexBuffer;

const STF_LAG: usize = 16;
const DETECT_WINDOW: usize = 64;
const DETECT_THRESHOLD: f64 = 0.5;
const PLATEAU: usize = 48;
/// Minimum normalised LTF correlation for a detection to stand.
const LTF_MIN_CORR: f64 = 0.5;

/// Offset of LTF period 1 from the packet start.
const LTF1_OFFSET: usize = STF_LEN + 32;

fn detect(r: &[Complex64], from: usize) -> Option<(usize, Complex64)> {
    let span = DETECT_WINDOW + STF_LAG;
    if r.len() < from + span + PLATEAU {
        return None;
    }
    let pair = |i: usize| r[i + STF_LAG] * r[i].conj();
    let energy = |i: usize| 0.5 * (r[i].norm_sqr() + r[i + STF_LAG].norm_sqr());

    let mut p: Complex64 = (from..from + DETECT_WINDOW).map(pair).sum();
    let mut e: f64 = (from..from + DETECT_WINDOW).map(energy).sum();
    let mut run = 0usize;
    let mut run_start = from;
    let mut history: Vec<Complex64> = Vec::new();
    let last = r.len() - span;
    for n in from..=last {
        if n > from {
            let out = n - 1;
            let inn = n + DETECT_WINDOW - 1;
            p += pair(inn) - pair(out);
            e += energy(inn) - energy(out);
        }
        let m = if e > 1e-30 { p.norm() / e } else { 0.0 };
        if m >= DETECT_THRESHOLD {
            if run == 0 {
                run_start = n;
                history.clear();
            }
            run += 1;
            history.push(p);
            if run >= PLATEAU {
                // average the correlator over the confirmed plateau
                let acc: Complex64 = history[PLATEAU / 2..].iter().sum();
                return Some((run_start, acc));
            }
        } else {
            run = 0;
        }
    }
    None
}

fn ltf_corr(r: &[Complex64], n: usize, ltf: &[Complex64]) -> Complex64 {
    r[n..n + FFT_SIZE]
        .iter()
        .zip(ltf)
        .map(|(a, b)| a * b.conj())
        .sum()
}

/// Finds the first packet at or after `search_from`.
///
/// Returns estimates with timing and CFO filled in; the channel fields stay
/// empty until [`super::estimate_channel`] runs. `None` means no packet.
pub fn detect_and_sync(r: &ComplexBuffer, cfg: &OfdmConfig, search_from: usize) -> Option<RxEstimates> {
    let _ = cfg;
    let x = &r.samples;
    let (coarse, p_acc) = detect(x, search_from)?;
    let coarse_omega = p_acc.arg() / STF_LAG as f64;

    let t = Transforms::new();
    let ltf = ltf_symbol(&t);

    // fine timing on the coarse-corrected signal
    let lo = coarse + LTF1_OFFSET - 96.min(coarse + LTF1_OFFSET);
    let hi = (coarse + LTF1_OFFSET + 160).min(x.len().saturating_sub(2 * FFT_SIZE));
    if hi <= lo {
        return None;
    }
    let seg_end = (hi + 2 * FFT_SIZE).min(x.len());
    let corrected: Vec<Complex64> = (lo..seg_end)
        .map(|k| x[k] * Complex64::from_polar(1.0, -coarse_omega * k as f64))
        .collect();
    let (best, _) = (0..hi - lo)
        .map(|i| {
            let c = ltf_corr(&corrected, i, &ltf).norm_sqr()
                + ltf_corr(&corrected, i + FFT_SIZE, &ltf).norm_sqr();
            (i, c)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let ltf1 = lo + best;
    if ltf1 < LTF1_OFFSET {
        return None;
    }
    let start = ltf1 - LTF1_OFFSET;

    let ltf_energy: f64 = x[ltf1..ltf1 + FFT_SIZE].iter().map(|v| v.norm_sqr()).sum();
    let ref_energy: f64 = ltf.iter().map(|v| v.norm_sqr()).sum();
    let rho = ltf_corr(&corrected, best, &ltf).norm() / (ltf_energy * ref_energy).sqrt().max(1e-30);
    if rho < LTF_MIN_CORR {
        return None;
    }

    // fine CFO at lag 64 over the cyclic guard half and LTF period 1
    let from = start + STF_LEN + 8;
    let to = ltf1 + FFT_SIZE;
    if to + FFT_SIZE > x.len() {
        return None;
    }
    let acc: Complex64 = (from..to)
        .map(|k| {
            let a = x[k] * Complex64::from_polar(1.0, -coarse_omega * k as f64);
            let b = x[k + FFT_SIZE] * Complex64::from_polar(1.0, -coarse_omega * (k + FFT_SIZE) as f64);
            b * a.conj()
        })
        .sum();
    let omega = coarse_omega + acc.arg() / FFT_SIZE as f64;

    Some(RxEstimates {
        coarse_timing: coarse,
        fine_timing: start,
        cfo_omega: omega,
        cfo_phi: 0.0,
        channel: Vec::new(),
        snr_db: f64::NAN,
        symbol_phases: Vec::new(),
    })
}
