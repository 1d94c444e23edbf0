//! 802.11a/g OFDM physical layer: transmitter, receiver and remodulator.

mod convcode;
mod interleave;
mod mapping;
mod params;
mod preamble;
mod rx;
mod scrambler;
mod sync;
mod transform;
mod tx;

pub use convcode::{depuncture, encode, puncture, viterbi_decode, viterbi_decode_hard};
pub use interleave::{deinterleave, interleave, permutation};
pub use mapping::{demap_point, kmod, map_bits, map_point};
pub use params::*;
pub use preamble::{ltf_freq, ltf_symbol, ltf_time, preamble_time, stf_freq, stf_time};
pub use rx::{
    correct_cfo, demodulate, demodulate_at, demodulate_from, estimate_channel, fcs_ok, Demodulated, FrameFormat,
    RxEstimates, FFT_BACKOFF,
};
pub use scrambler::{pilot_polarity, recover_seed, Scrambler, DEFAULT_SEED};
pub use sync::detect_and_sync;
pub use transform::Transforms;
pub use tx::{bits_to_octets, modulate, modulate_with_seed, octets_to_bits, remodulate, OfdmPacket};
