//! Foundational DSP primitives shared by every other module.

mod buffer;
mod correlate;
mod pn;
mod resample;
mod rng;
mod spectrum;

pub use buffer::{measure_power_db, power_to_db, ComplexBuffer};
pub use correlate::xcorr;
pub use pn::{
    aperiodic_acf, build_spreading_code, lfsr_sequence, pslr_db, GfPoly, SpreadingCode,
    CODE_LENGTH, CODE_POLY, CODE_SEED,
};
pub use resample::{resample, Resampler};
pub use rng::{derive_seed, Rng};
pub use spectrum::{psd_estimate, Psd};
