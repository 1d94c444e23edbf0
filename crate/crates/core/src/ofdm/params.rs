//! 802.11a/g OFDM numerology and the MCS table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FFT_SIZE: usize = 64;
pub const CP_LEN: usize = 16;
pub const SYMBOL_LEN: usize = FFT_SIZE + CP_LEN;
pub const SAMPLE_RATE_HZ: f64 = 20e6;
pub const STF_LEN: usize = 160;
pub const LTF_LEN: usize = 160;
pub const PREAMBLE_LEN: usize = STF_LEN + LTF_LEN;
/// Preamble plus SIGNAL symbol.
pub const HEADER_LEN: usize = PREAMBLE_LEN + SYMBOL_LEN;
pub const MAX_PSDU_OCTETS: usize = 4095;
pub const SERVICE_BITS: usize = 16;
pub const TAIL_BITS: usize = 6;

pub const PILOT_SUBCARRIERS: [i32; 4] = [-21, -7, 7, 21];
pub const PILOT_VALUES: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// FFT bin index (0..64) of logical subcarrier `k` (-32..32).
pub const fn bin(k: i32) -> usize {
    k.rem_euclid(FFT_SIZE as i32) as usize
}

/// Logical subcarrier of an FFT bin.
pub const fn subcarrier(bin: usize) -> i32 {
    if bin < FFT_SIZE / 2 {
        bin as i32
    } else {
        bin as i32 - FFT_SIZE as i32
    }
}

/// Static OFDM numerology: 64-point transform, 16-sample cyclic prefix,
/// 48 data and 4 pilot subcarriers, 20 MSPS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    /// Logical subcarrier indices in data-symbol order.
    pub data_subcarriers: Vec<i32>,
    pub pilot_subcarriers: Vec<i32>,
    pub null_subcarriers: Vec<i32>,
    pub sample_rate_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        let data = (-26..=26)
            .filter(|k| *k != 0 && !PILOT_SUBCARRIERS.contains(k))
            .collect();
        let null = (-32..32).filter(|k: &i32| *k == 0 || k.abs() > 26).collect();
        Self {
            fft_size: FFT_SIZE,
            cp_len: CP_LEN,
            data_subcarriers: data,
            pilot_subcarriers: PILOT_SUBCARRIERS.to_vec(),
            null_subcarriers: null,
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }
}

impl OfdmConfig {
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate_hz
    }

    /// Bins carrying data or pilots (52).
    pub fn occupied_bins(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .data_subcarriers
            .iter()
            .chain(&self.pilot_subcarriers)
            .map(|&k| bin(k))
            .collect();
        v.sort_unstable();
        v
    }

    /// The transmitter and receiver are written for the 802.11 20 MHz layout.
    pub fn validate(&self) -> Result<()> {
        if *self != Self::default() {
            return Err(Error::Config(
                "only the 802.11a/g 20 MHz OFDM layout is supported".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeRate {
    Half,
    TwoThirds,
    ThreeQuarters,
}

impl CodeRate {
    /// (numerator, denominator)
    pub fn ratio(self) -> (usize, usize) {
        match self {
            CodeRate::Half => (1, 2),
            CodeRate::TwoThirds => (2, 3),
            CodeRate::ThreeQuarters => (3, 4),
        }
    }
}

/// Modulation and coding scheme, index 0..=7 of the 802.11a/g rate table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Mcs(u8);

impl TryFrom<u8> for Mcs {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Mcs::new(v)
    }
}

impl From<Mcs> for u8 {
    fn from(m: Mcs) -> u8 {
        m.0
    }
}

impl Mcs {
    pub fn new(index: u8) -> Result<Self> {
        if index > 7 {
            return Err(Error::InvalidMcs(index));
        }
        Ok(Self(index))
    }

    pub fn all() -> impl Iterator<Item = Mcs> {
        (0..8).map(Mcs)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn modulation(self) -> Modulation {
        match self.0 {
            0 | 1 => Modulation::Bpsk,
            2 | 3 => Modulation::Qpsk,
            4 | 5 => Modulation::Qam16,
            _ => Modulation::Qam64,
        }
    }

    pub fn code_rate(self) -> CodeRate {
        match self.0 {
            0 | 2 | 4 => CodeRate::Half,
            6 => CodeRate::TwoThirds,
            _ => CodeRate::ThreeQuarters,
        }
    }

    /// Coded bits per subcarrier.
    pub fn n_bpsc(self) -> usize {
        self.modulation().bits_per_symbol()
    }

    /// Coded bits per OFDM symbol.
    pub fn n_cbps(self) -> usize {
        48 * self.n_bpsc()
    }

    /// Data bits per OFDM symbol.
    pub fn n_dbps(self) -> usize {
        let (num, den) = self.code_rate().ratio();
        self.n_cbps() * num / den
    }

    pub fn data_rate_mbps(self) -> f64 {
        self.n_dbps() as f64 / 4.0
    }

    /// RATE field bits R1..R4.
    pub fn rate_bits(self) -> [u8; 4] {
        match self.0 {
            0 => [1, 1, 0, 1],
            1 => [1, 1, 1, 1],
            2 => [0, 1, 0, 1],
            3 => [0, 1, 1, 1],
            4 => [1, 0, 0, 1],
            5 => [1, 0, 1, 1],
            6 => [0, 0, 0, 1],
            _ => [0, 0, 1, 1],
        }
    }

    /// Receiver sensitivity from the 802.11 OFDM PHY table (dBm), for a
    /// 1000-octet PSDU at 10% PER.
    pub fn sensitivity_dbm(self) -> f64 {
        [-82.0, -81.0, -79.0, -77.0, -74.0, -70.0, -66.0, -65.0][self.0 as usize]
    }

    /// SNR implied by the sensitivity table: thermal noise over 20 MHz
    /// (−101 dBm) plus the standard's assumed 10 dB noise figure.
    pub fn sensitivity_snr_db(self) -> f64 {
        self.sensitivity_dbm() + 91.0
    }

    /// Number of data OFDM symbols for a PSDU of `octets`.
    pub fn n_symbols(self, octets: usize) -> usize {
        (SERVICE_BITS + 8 * octets + TAIL_BITS).div_ceil(self.n_dbps())
    }
}

/// Samples in a full packet (preamble, SIGNAL, data).
pub fn packet_len(mcs: Mcs, octets: usize) -> usize {
    HEADER_LEN + mcs.n_symbols(octets) * SYMBOL_LEN
}
