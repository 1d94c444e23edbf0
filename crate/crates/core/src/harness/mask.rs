use serde::{Deserialize, Serialize};

use super::config::MaskSpec;
use crate::error::{Error, Result};
use crate::ofdm::{detect_and_sync, OfdmConfig, Transforms, CP_LEN, HEADER_LEN, SAMPLE_RATE_HZ, SYMBOL_LEN};
use crate::sigcore::{power_to_db, psd_estimate, resample, ComplexBuffer};

/// Worst-case margin over one mask segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakpointMargin {
    /// Segment `(from_hz, to_hz]` of absolute offset.
    pub from_hz: f64,
    pub to_hz: f64,
    /// Smallest `limit − PSD` in the segment, dB; negative is a violation.
    pub margin_db: f64,
    /// Offset where the smallest margin occurs.
    pub worst_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub pass: bool,
    pub margins: Vec<BreakpointMargin>,
    /// Average DC-bin power over the average occupied-bin power, measured on
    /// symbol-aligned windows of the detected packet; `None` without one.
    pub dc_delta_db: Option<f64>,
    pub dc_flagged: bool,
}

impl MaskReport {
    pub fn worst_margin_db(&self) -> f64 {
        self.margins.iter().map(|m| m.margin_db).fold(f64::INFINITY, f64::min)
    }
}

/// Mask limit in dBr at absolute offset `f`.
pub fn mask_limit_dbr(spec: &MaskSpec, f: f64) -> f64 {
    let bp = &spec.breakpoints;
    let f = f.abs();
    if f <= bp[0][0] {
        return bp[0][1];
    }
    for w in bp.windows(2) {
        let ([f0, l0], [f1, l1]) = (w[0], w[1]);
        if f <= f1 {
            return l0 + (l1 - l0) * (f - f0) / (f1 - f0);
        }
    }
    bp[bp.len() - 1][1]
}

/// DC-bin power relative to the occupied-bin average, on the symbol grid
/// of the first packet in a 20 MSPS buffer.
fn dc_delta_db(x20: &ComplexBuffer) -> Option<f64> {
    let cfg = OfdmConfig::default();
    let est = detect_and_sync(x20, &cfg, 0)?;
    let t = Transforms::new();
    let occupied = cfg.occupied_bins();
    let (mut dc, mut occ) = (0.0, 0.0);
    let mut s = est.fine_timing + HEADER_LEN;
    let mut n = 0;
    while s + SYMBOL_LEN <= x20.len() {
        let y = t.dft(&x20.samples[s + CP_LEN..s + SYMBOL_LEN]);
        let o = occupied.iter().map(|&m| y[m].norm_sqr()).sum::<f64>() / occupied.len() as f64;
        // the packet has ended once a symbol falls well below the running mean
        if o == 0.0 || (n > 0 && o < 0.1 * occ / n as f64) {
            break;
        }
        dc += y[0].norm_sqr();
        occ += o;
        n += 1;
        s += SYMBOL_LEN;
    }
    (n > 0).then(|| power_to_db(dc / occ))
}

/// PSD of `x` against the transmit mask. 0 dBr is the largest PSD bin
/// inside the first breakpoint.
pub fn check_spectral_mask(x: &ComplexBuffer, spec: &MaskSpec) -> Result<MaskReport> {
    let xa = resample(x, spec.analysis_rate_hz)?;
    if xa.len() < spec.nfft * 4 {
        return Err(Error::TooShort {
            needed: spec.nfft * 4,
            available: xa.len(),
        });
    }
    let psd = psd_estimate(&xa, spec.nfft, 0.5)?;
    let inband = spec.breakpoints[0][0];
    let reference = (0..psd.nfft())
        .filter(|&i| psd.freq_hz(i).abs() <= inband)
        .map(|i| psd.bins_db[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if !reference.is_finite() {
        return Err(Error::ZeroPower("no in-band power for the mask reference".into()));
    }
    let nyquist = spec.analysis_rate_hz / 2.0;
    let mut edges: Vec<f64> = spec.breakpoints.iter().map(|b| b[0]).filter(|&f| f < nyquist).collect();
    edges.push(nyquist);
    let margins = edges
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let (margin_db, worst_hz) = (0..psd.nfft())
                .filter(|&i| {
                    let f = psd.freq_hz(i).abs();
                    f > lo && f <= hi
                })
                .map(|i| {
                    let f = psd.freq_hz(i);
                    (mask_limit_dbr(spec, f) - (psd.bins_db[i] - reference), f)
                })
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
            BreakpointMargin {
                from_hz: lo,
                to_hz: hi,
                margin_db,
                worst_hz,
            }
        })
        .collect::<Vec<_>>();
    let x20 = resample(x, SAMPLE_RATE_HZ)?;
    let dc = dc_delta_db(&x20);
    Ok(MaskReport {
        pass: margins.iter().all(|m| m.margin_db >= 0.0),
        margins,
        dc_flagged: dc.is_some_and(|d| d > spec.dc_flag_db),
        dc_delta_db: dc,
    })
}
