//! Covert DSSS signalling underneath 802.11a/g OFDM packets.
//!
//! A 156.25 kbaud BPSK signal spread by a 64-chip PN code at 10 Mcps is added
//! to an OFDM packet, centred on the unused DC subcarrier and well below the
//! OFDM power. The covert receiver demodulates the OFDM packet, rebuilds it
//! from the decoded bits, re-applies the estimated channel and frequency
//! offset, subtracts it, and despreads the residue.
//!
//! Module map:
//!
//! - [`sigcore`]: sample buffers, PN codes, correlation, PSD, resampling, RNG
//! - [`ofdm`]: 802.11 OFDM transmitter, receiver and remodulator
//! - [`channel`]: multipath, carrier offset, timing offset and AWGN
//! - [`covert`]: spreading, injection and despreading of the hidden signal
//! - [`canceller`]: remodulate-and-subtract cancellation
//! - [`harness`]: Monte-Carlo experiments, IQ files, mask checks, CSV/SVG

pub mod canceller;
pub mod channel;
pub mod covert;
pub mod error;
pub mod harness;
pub mod ofdm;
pub mod sigcore;

pub use error::{Error, Result};
pub use num_complex::Complex64;
