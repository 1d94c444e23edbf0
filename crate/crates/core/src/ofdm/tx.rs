//! Transmitter and remodulator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::convcode::{encode, puncture};
use super::interleave::{interleave, permutation};
use super::mapping::map_bits;
use super::params::*;
use super::preamble::preamble_time;
use super::scrambler::{pilot_polarity, Scrambler, DEFAULT_SEED};
use super::transform::Transforms;
use crate::error::{Error, Result};
use crate::sigcore::ComplexBuffer;

/// A modulated packet and the intermediate values needed to reason about it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OfdmPacket {
    /// Preamble, SIGNAL symbol and data symbols at 20 MSPS.
    pub samples: ComplexBuffer,
    pub mcs: Mcs,
    pub psdu: Vec<u8>,
    pub scrambler_seed: u8,
    /// Frequency-domain vector of every symbol after the preamble (SIGNAL
    /// first), in FFT-bin order, pilots and nulls included.
    pub symbol_vectors: Vec<Vec<Complex64>>,
}

impl OfdmPacket {
    pub fn n_data_symbols(&self) -> usize {
        self.symbol_vectors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time samples (cyclic prefix included) of symbol `p` after the
    /// preamble; `p = 0` is SIGNAL.
    pub fn symbol(&self, p: usize) -> &[Complex64] {
        let s = PREAMBLE_LEN + p * SYMBOL_LEN;
        &self.samples.samples[s..s + SYMBOL_LEN]
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.duration_s()
    }
}

/// PSDU octets to bits, least significant bit first.
pub fn octets_to_bits(octets: &[u8]) -> Vec<u8> {
    octets
        .iter()
        .flat_map(|&o| (0..8).map(move |i| (o >> i) & 1))
        .collect()
}

pub fn bits_to_octets(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << i)))
        .collect()
}

/// Builds one frequency vector with data, pilots (polarity `p_n`) and nulls.
fn assemble_symbol(cfg: &OfdmConfig, data: &[Complex64], polarity: f64) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    for (&k, &d) in cfg.data_subcarriers.iter().zip(data) {
        x[bin(k)] = d;
    }
    for (&k, &v) in cfg.pilot_subcarriers.iter().zip(PILOT_VALUES.iter()) {
        x[bin(k)] = Complex64::new(v * polarity, 0.0);
    }
    x
}

fn with_cp(body: &[Complex64; FFT_SIZE]) -> impl Iterator<Item = Complex64> + '_ {
    body[FFT_SIZE - CP_LEN..].iter().chain(body.iter()).copied()
}

fn signal_bits(mcs: Mcs, octets: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(24);
    bits.extend(mcs.rate_bits());
    bits.push(0);
    bits.extend((0..12).map(|i| ((octets >> i) & 1) as u8));
    let parity = bits.iter().fold(0, |a, b| a ^ b);
    bits.push(parity);
    bits.extend([0; TAIL_BITS]);
    bits
}

/// Scrambled, tail-zeroed DATA field bits ready for the encoder.
pub(crate) fn data_field_bits(psdu: &[u8], mcs: Mcs, seed: u8) -> Vec<u8> {
    let n_sym = mcs.n_symbols(psdu.len());
    let total = n_sym * mcs.n_dbps();
    let mut bits = vec![0u8; SERVICE_BITS];
    bits.extend(octets_to_bits(psdu));
    let tail_at = bits.len();
    bits.resize(total, 0);
    Scrambler::new(seed).apply(&mut bits);
    bits[tail_at..tail_at + TAIL_BITS].fill(0);
    bits
}

/// Scramble → encode → puncture → interleave → map → pilots → IFFT → CP,
/// prefixed by the training fields. No windowing is applied, so the same
/// call serves as the remodulator.
pub fn modulate_with_seed(psdu: &[u8], mcs: Mcs, seed: u8, cfg: &OfdmConfig) -> Result<OfdmPacket> {
    cfg.validate()?;
    if psdu.len() > MAX_PSDU_OCTETS {
        return Err(Error::OversizePsdu(psdu.len()));
    }
    if seed & 0x7f == 0 {
        return Err(Error::InvalidInput("scrambler seed must be nonzero".into()));
    }
    let t = Transforms::new();
    let pol = pilot_polarity();
    let n_sym = mcs.n_symbols(psdu.len());

    let mut samples = preamble_time(&t);
    samples.reserve((n_sym + 1) * SYMBOL_LEN);
    let mut vectors = Vec::with_capacity(n_sym + 1);

    // SIGNAL: BPSK rate 1/2, unscrambled
    let sig_mcs = Mcs::new(0)?;
    let sig = encode(&signal_bits(mcs, psdu.len()));
    let sig = interleave(&sig, &permutation(48, 1));
    let sig_vec = assemble_symbol(cfg, &map_bits(sig_mcs.modulation(), &sig), pol[0]);
    samples.extend(with_cp(&t.to_time(&sig_vec)));
    vectors.push(sig_vec);

    let coded = puncture(&encode(&data_field_bits(psdu, mcs, seed)), mcs.code_rate());
    let perm = permutation(mcs.n_cbps(), mcs.n_bpsc());
    for (n, block) in coded.chunks(mcs.n_cbps()).enumerate() {
        let points = map_bits(mcs.modulation(), &interleave(block, &perm));
        let v = assemble_symbol(cfg, &points, pol[(n + 1) % 127]);
        samples.extend(with_cp(&t.to_time(&v)));
        vectors.push(v);
    }

    Ok(OfdmPacket {
        samples: ComplexBuffer::new(samples, cfg.sample_rate_hz)?,
        mcs,
        psdu: psdu.to_vec(),
        scrambler_seed: seed,
        symbol_vectors: vectors,
    })
}

pub fn modulate(psdu: &[u8], mcs: Mcs, cfg: &OfdmConfig) -> Result<OfdmPacket> {
    modulate_with_seed(psdu, mcs, DEFAULT_SEED, cfg)
}

/// `ŝ = g_s(bits)`: regenerates the transmitted waveform from demodulated
/// PSDU octets and the recovered scrambler seed.
pub fn remodulate(psdu: &[u8], mcs: Mcs, seed: u8, cfg: &OfdmConfig) -> Result<ComplexBuffer> {
    Ok(modulate_with_seed(psdu, mcs, seed, cfg)?.samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::Rng;

    #[test]
    fn mcs7_thousand_octets_layout() {
        let cfg = OfdmConfig::default();
        let psdu = Rng::new(1).bytes(1000);
        let p = modulate(&psdu, Mcs::new(7).unwrap(), &cfg).unwrap();
        // 8022 data bits / 216 per symbol -> 38 symbols; 288 coded bits each
        let coded_bits = (16 + 8000 + 6) * 4 / 3;
        assert_eq!(p.n_data_symbols(), (coded_bits as f64 / 288.0).ceil() as usize);
        assert_eq!(p.len(), PREAMBLE_LEN + 39 * 80);
        assert!((p.samples.power() - 1.0).abs() < 0.05);
    }

    #[test]
    fn dc_and_nulls_empty_in_every_symbol() {
        let cfg = OfdmConfig::default();
        let t = Transforms::new();
        let p = modulate(&Rng::new(2).bytes(300), Mcs::new(4).unwrap(), &cfg).unwrap();
        for s in 0..p.symbol_vectors.len() {
            let y = t.to_freq(&p.symbol(s)[CP_LEN..]);
            for &k in &cfg.null_subcarriers {
                assert!(y[bin(k)].norm() < 1e-12, "symbol {s} subcarrier {k}");
            }
            for &k in &cfg.pilot_subcarriers {
                assert!((y[bin(k)].re.abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_psdu_is_header_plus_one_symbol() {
        let p = modulate(&[], Mcs::new(0).unwrap(), &OfdmConfig::default()).unwrap();
        assert_eq!(p.len(), HEADER_LEN + SYMBOL_LEN);
    }

    #[test]
    fn oversize_rejected() {
        let r = modulate(&vec![0; 4096], Mcs::new(0).unwrap(), &OfdmConfig::default());
        assert!(matches!(r, Err(Error::OversizePsdu(4096))));
    }

    #[test]
    fn remodulation_is_bit_identical() {
        let cfg = OfdmConfig::default();
        let psdu = Rng::new(3).bytes(200);
        let m = Mcs::new(5).unwrap();
        let a = modulate_with_seed(&psdu, m, 17, &cfg).unwrap();
        let b = remodulate(&psdu, m, 17, &cfg).unwrap();
        assert_eq!(a.samples, b);
    }

    #[test]
    fn octet_bit_order_is_lsb_first() {
        assert_eq!(octets_to_bits(&[0b0000_0101]), [1, 0, 1, 0, 0, 0, 0, 0]);
        assert_eq!(bits_to_octets(&octets_to_bits(&[7, 200, 0])), [7, 200, 0]);
    }

    #[test]
    fn signal_field_parity_even() {
        let b = signal_bits(Mcs::new(7).unwrap(), 1000);
        assert_eq!(b.len(), 24);
        assert_eq!(b[..18].iter().fold(0, |a, x| a ^ x), 0);
    }
}
