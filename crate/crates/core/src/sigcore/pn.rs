//! PN sequence generation and the 64-chip covert spreading code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial over GF(2); bit `i` holds the coefficient of `z^i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GfPoly(pub u32);

impl GfPoly {
    pub fn degree(self) -> Option<u32> {
        (self.0 != 0).then(|| 31 - self.0.leading_zeros())
    }
}

/// `z^6 + z + 1`
pub const CODE_POLY: GfPoly = GfPoly(0b100_0011);
/// Register contents `[r1 .. r6]`; r6 is the first output bit.
pub const CODE_SEED: [u8; 6] = [0, 0, 0, 0, 0, 1];
pub const CODE_LENGTH: usize = 64;

/// First `n` output bits of a Fibonacci LFSR.
///
/// The register is `[r1, .., rD]` for a degree-D polynomial. Each step emits
/// `rD`, shifts right and feeds `r1` with the XOR of the registers selected
/// by the low-order coefficients, so the output obeys the linear recurrence
/// whose characteristic polynomial is `taps`. With `z^6+z+1` this gives
/// `a[n+6] = a[n+1] ^ a[n]`.
pub fn lfsr_sequence(taps: GfPoly, init_state: &[u8], n: usize) -> Result<Vec<u8>> {
    let degree = taps
        .degree()
        .filter(|&d| d >= 1)
        .ok_or_else(|| Error::InvalidInput("LFSR polynomial must have degree >= 1".into()))?
        as usize;
    if init_state.len() != degree {
        return Err(Error::InvalidInput(format!(
            "initial state has {} bits, polynomial degree is {degree}",
            init_state.len()
        )));
    }
    if init_state.iter().any(|&b| b > 1) {
        return Err(Error::InvalidInput("initial state must be binary".into()));
    }
    if init_state.iter().all(|&b| b == 0) {
        return Err(Error::DegenerateLfsr);
    }
    if n == 0 {
        return Err(Error::InvalidInput("sequence length must be >= 1".into()));
    }

    let mut reg = init_state.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(reg[degree - 1]);
        // a[n+i] sits in reg[degree-1-i]
        let fb = (0..degree)
            .filter(|i| taps.0 >> i & 1 == 1)
            .fold(0u8, |acc, i| acc ^ reg[degree - 1 - i]);
        reg.rotate_right(1);
        reg[0] = fb;
    }
    Ok(out)
}

/// ±1 spreading chips.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadingCode {
    chips: Vec<i8>,
}

impl SpreadingCode {
    pub fn from_chips(chips: Vec<i8>) -> Result<Self> {
        if chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidInput("chips must be +1 or -1".into()));
        }
        if chips.is_empty() {
            return Err(Error::InvalidInput("spreading code cannot be empty".into()));
        }
        Ok(Self { chips })
    }

    /// Maps LFSR bits 0 → +1, 1 → −1.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        Self::from_chips(bits.iter().map(|&b| if b == 0 { 1 } else { -1 }).collect())
    }

    /// A code from an arbitrary nonzero seed of the standard polynomial. Used
    /// to model a receiver holding the wrong code.
    pub fn from_seed(seed: &[u8]) -> Result<Self> {
        Self::from_bits(&lfsr_sequence(CODE_POLY, seed, CODE_LENGTH)?)
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

/// The 64-chip covert code: 64 consecutive outputs of the `z^6+z+1` LFSR
/// seeded with `[0 0 0 0 0 1]`.
///
/// The m-sequence has period 63, so the 64th chip is the first chip of the
/// next period; free-running continuation and periodic extension coincide.
pub fn build_spreading_code() -> SpreadingCode {
    let bits = lfsr_sequence(CODE_POLY, &CODE_SEED, CODE_LENGTH).expect("constant parameters");
    SpreadingCode::from_bits(&bits).expect("binary input")
}

/// Aperiodic autocorrelation for lags `-(N-1) ..= N-1`; index `N-1` is lag 0.
pub fn aperiodic_acf(chips: &[i8]) -> Vec<i32> {
    let n = chips.len() as isize;
    (-(n - 1)..n)
        .map(|lag| {
            (0..n)
                .filter_map(|i| {
                    let j = i + lag;
                    (0..n)
                        .contains(&j)
                        .then(|| chips[j as usize] as i32 * chips[i as usize] as i32)
                })
                .sum()
        })
        .collect()
}

/// Peak side-lobe ratio of the aperiodic autocorrelation, in dB.
pub fn pslr_db(code: &SpreadingCode) -> f64 {
    let acf = aperiodic_acf(code.chips());
    let zero = code.len() - 1;
    let peak = acf[zero].abs() as f64;
    let side = acf
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != zero)
        .map(|(_, v)| v.abs())
        .max()
        .unwrap_or(0) as f64;
    if side == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / side).log10()
    }
}
