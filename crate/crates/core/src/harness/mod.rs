//! Monte-Carlo experiments, IQ files, spectral-mask checks and CSV/SVG
//! output.

mod config;
mod experiments;
mod iq;
mod mask;
mod ota;
mod output;
mod parallel;
mod stats;

pub use config::{ChannelProfile, CovertSpec, ExperimentKind, ExperimentSpec, MaskSpec, OtaSpec, OutputSpec};
pub use experiments::{
    aggregate, count_bit_errors, point_seed, run, run_baseline_per, run_covert_ber, run_mask_check, run_per_vs_sir,
    run_trial, simulate_packet, PacketReport, RunResult, SimulatedPacket, TrialMode,
};
pub use iq::{read_iq, sidecar_path, write_iq, IqMetadata, IqRecording};
pub use mask::{check_spectral_mask, mask_limit_dbr, BreakpointMargin, MaskReport};
pub use ota::{run_ota_replay, run_ota_replay_from_spec, synth_ota_corpus, synth_ota_recording};
pub use output::{curves_csv, curves_svg, packets_csv, write_outputs, OutputPaths, CSV_HEADER, PACKET_CSV_HEADER};
pub use parallel::{par_map, thread_cap, THREADS_ENV};
pub use stats::{wilson_ci95, Axis, Curve, CurvePoint};
