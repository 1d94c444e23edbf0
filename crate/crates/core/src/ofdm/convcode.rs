//! K=7 convolutional code (generators 133, 171 octal), 802.11 puncturing and
//! a soft-decision Viterbi decoder.
//!
//! Soft values follow one convention throughout: positive means "bit is 1",
//! zero means "no information" (used for punctured positions).

use super::params::CodeRate;

const G0: u8 = 0o133;
const G1: u8 = 0o171;
const STATES: usize = 64;

fn parity(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Outputs (A, B) for the 7-bit register `input << 6 | state`.
fn branch_outputs(reg: u8) -> (u8, u8) {
    (parity(reg & G0), parity(reg & G1))
}

/// Rate-1/2 mother code; the encoder starts in the all-zero state.
pub fn encode(bits: &[u8]) -> Vec<u8> {
    let mut state = 0u8;
    let mut out = Vec::with_capacity(bits.len() * 2);
    for &b in bits {
        let reg = (b << 6) | state;
        let (a, c) = branch_outputs(reg);
        out.push(a);
        out.push(c);
        state = reg >> 1;
    }
    out
}

/// Keep-mask over one puncturing period of (A, B) pairs.
fn pattern(rate: CodeRate) -> &'static [bool] {
    match rate {
        CodeRate::Half => &[true, true],
        CodeRate::TwoThirds => &[true, true, true, false],
        CodeRate::ThreeQuarters => &[true, true, true, false, false, true],
    }
}

pub fn puncture(coded: &[u8], rate: CodeRate) -> Vec<u8> {
    let p = pattern(rate);
    coded
        .iter()
        .enumerate()
        .filter(|(i, _)| p[i % p.len()])
        .map(|(_, &b)| b)
        .collect()
}

/// Re-inserts zero soft values at stolen positions. `n_mother` is the
/// length of the rate-1/2 stream to rebuild.
pub fn depuncture(soft: &[f64], rate: CodeRate, n_mother: usize) -> Vec<f64> {
    let p = pattern(rate);
    let mut it = soft.iter();
    (0..n_mother)
        .map(|i| {
            if p[i % p.len()] {
                *it.next().unwrap_or(&0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Maximum-likelihood path through the trellis for `soft.len() / 2` input
/// bits. The path starts in state 0; the end state is left free since pad
/// bits follow the tail.
pub fn viterbi_decode(soft: &[f64]) -> Vec<u8> {
    let steps = soft.len() / 2;
    if steps == 0 {
        return Vec::new();
    }
    // expected output sign per (input, state): +1 for 1, -1 for 0
    let mut out_sign = [(0.0f64, 0.0f64); 128];
    for (reg, o) in out_sign.iter_mut().enumerate() {
        let (a, b) = branch_outputs(reg as u8);
        *o = (2.0 * a as f64 - 1.0, 2.0 * b as f64 - 1.0);
    }

    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut next = [0.0f64; STATES];
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);

    for t in 0..steps {
        let (sa, sb) = (soft[2 * t], soft[2 * t + 1]);
        let mut dec = 0u64;
        for (ns, slot) in next.iter_mut().enumerate() {
            let input = (ns >> 5) as u8;
            let base = (ns & 0x1f) << 1;
            let mut best = f64::NEG_INFINITY;
            let mut pick = 0u64;
            for x in 0..2 {
                let s = base | x;
                let reg = ((input << 6) as usize) | s;
                let (oa, ob) = out_sign[reg];
                let m = metric[s] + oa * sa + ob * sb;
                if m > best {
                    best = m;
                    pick = x as u64;
                }
            }
            *slot = best;
            dec |= pick << ns;
        }
        decisions.push(dec);
        // keep metrics bounded
        let top = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (m, n) in metric.iter_mut().zip(next.iter()) {
            *m = n - top;
        }
    }

    let mut state = metric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut bits = vec![0u8; steps];
    for t in (0..steps).rev() {
        bits[t] = (state >> 5) as u8;
        let x = ((decisions[t] >> state) & 1) as usize;
        state = ((state & 0x1f) << 1) | x;
    }
    bits
}

/// Hard-decision decoding: bits mapped to ±1 soft values.
pub fn viterbi_decode_hard(coded: &[u8]) -> Vec<u8> {
    let soft: Vec<f64> = coded.iter().map(|&b| 2.0 * b as f64 - 1.0).collect();
    viterbi_decode(&soft)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::Rng;

    #[test]
    fn impulse_response_matches_generators() {
        // a single 1 followed by zeros emits the generator taps
        let mut bits = vec![1u8];
        bits.extend([0; 6]);
        let out = encode(&bits);
        let a: Vec<u8> = out.iter().step_by(2).cloned().collect();
        let b: Vec<u8> = out.iter().skip(1).step_by(2).cloned().collect();
        // g0 = 1011011, g1 = 1111001 (current input first)
        assert_eq!(a, [1, 0, 1, 1, 0, 1, 1]);
        assert_eq!(b, [1, 1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn puncturing_lengths() {
        let coded = vec![0u8; 2 * 216];
        assert_eq!(puncture(&coded, CodeRate::Half).len(), 432);
        assert_eq!(puncture(&coded, CodeRate::TwoThirds).len(), 324);
        assert_eq!(puncture(&coded, CodeRate::ThreeQuarters).len(), 288);
    }

    #[test]
    fn three_quarter_pattern_keeps_a0_b0_a1_b2() {
        let coded: Vec<u8> = (0..6).collect(); // A0 B0 A1 B1 A2 B2
        assert_eq!(puncture(&coded, CodeRate::ThreeQuarters), [0, 1, 2, 5]);
        let coded: Vec<u8> = (0..4).collect();
        assert_eq!(puncture(&coded, CodeRate::TwoThirds), [0, 1, 2]);
    }

    #[test]
    fn clean_round_trip_all_rates() {
        let mut rng = Rng::new(5);
        for rate in [CodeRate::Half, CodeRate::TwoThirds, CodeRate::ThreeQuarters] {
            let mut bits = rng.bits(600);
            bits.extend([0; 6]);
            let tx = puncture(&encode(&bits), rate);
            let soft: Vec<f64> = tx.iter().map(|&b| 2.0 * b as f64 - 1.0).collect();
            let rx = depuncture(&soft, rate, bits.len() * 2);
            assert_eq!(viterbi_decode(&rx), bits, "{rate:?}");
        }
    }

    #[test]
    fn corrects_scattered_hard_errors() {
        let mut rng = Rng::new(9);
        let mut bits = rng.bits(500);
        bits.extend([0; 6]);
        let mut coded = encode(&bits);
        for i in (10..coded.len()).step_by(37) {
            coded[i] ^= 1;
        }
        assert_eq!(viterbi_decode_hard(&coded), bits);
    }
}
