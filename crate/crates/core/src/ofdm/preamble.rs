//! Short and long training fields.

use num_complex::Complex64;

use super::params::{bin, FFT_SIZE};
use super::transform::Transforms;

/// Long training sequence L_{-26..26}.
const LTF_SEQ: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1,
    -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

/// Nonzero short-training subcarriers and their sign (value is ±(1+j)).
const STF_TONES: [(i32, f64); 12] = [
    (-24, 1.0),
    (-20, -1.0),
    (-16, 1.0),
    (-12, -1.0),
    (-8, -1.0),
    (-4, 1.0),
    (4, -1.0),
    (8, -1.0),
    (12, 1.0),
    (16, 1.0),
    (20, 1.0),
    (24, 1.0),
];

/// LTF frequency vector in FFT-bin order.
pub fn ltf_freq() -> [Complex64; FFT_SIZE] {
    let mut x = [Complex64::new(0.0, 0.0); FFT_SIZE];
    for (i, &v) in LTF_SEQ.iter().enumerate() {
        x[bin(i as i32 - 26)] = Complex64::new(v as f64, 0.0);
    }
    x
}

pub fn stf_freq() -> [Complex64; FFT_SIZE] {
    let mut x = [Complex64::new(0.0, 0.0); FFT_SIZE];
    let g = (13.0f64 / 6.0).sqrt();
    for &(k, s) in &STF_TONES {
        x[bin(k)] = Complex64::new(s * g, s * g);
    }
    x
}

/// One 64-sample LTF period.
pub fn ltf_symbol(t: &Transforms) -> Vec<Complex64> {
    t.to_time(&ltf_freq()).to_vec()
}

/// 160-sample short training field: ten 16-sample periods.
pub fn stf_time(t: &Transforms) -> Vec<Complex64> {
    let body = t.to_time(&stf_freq());
    (0..160).map(|k| body[k % FFT_SIZE]).collect()
}

/// 160-sample long training field: 32-sample guard then two LTF periods.
pub fn ltf_time(t: &Transforms) -> Vec<Complex64> {
    let body = ltf_symbol(t);
    let mut out = Vec::with_capacity(160);
    out.extend_from_slice(&body[32..]);
    out.extend_from_slice(&body);
    out.extend_from_slice(&body);
    out
}

pub fn preamble_time(t: &Transforms) -> Vec<Complex64> {
    let mut p = stf_time(t);
    p.extend(ltf_time(t));
    p
}
