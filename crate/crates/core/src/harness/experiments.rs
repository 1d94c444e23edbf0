use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentKind, ExperimentSpec};
use super::mask::check_spectral_mask;
use super::parallel::par_map;
use super::stats::{Axis, Curve, CurvePoint};
use crate::canceller::recover_covert;
use crate::channel::{add_noise, apply_channel, ChannelRealization};
use crate::covert::{capacity_samples, covert_demodulate, covert_gain, covert_modulate, CovertConfig};
use crate::error::{Error, Result};
use crate::ofdm::{demodulate, modulate, FrameFormat, Mcs, OfdmConfig, SAMPLE_RATE_HZ};
use crate::sigcore::{derive_seed, power_to_db, ComplexBuffer, Rng};

/// What is measured on each simulated packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// OFDM packet error.
    Per,
    /// Covert bit errors, despreading the raw buffer.
    CovertRaw,
    /// Covert bit errors through the canceller.
    CovertCancel,
    /// Spectral mask compliance.
    Mask,
}

/// One row of the per-packet report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketReport {
    pub experiment: String,
    pub mcs: u8,
    pub snr_db: f64,
    pub sir_db: f64,
    /// Trial index within the point, or recording index for replays.
    pub trial: u64,
    pub detected: bool,
    pub packet_error: Option<bool>,
    pub covert_bits: usize,
    pub covert_errors: usize,
    /// Residue power (injected covert frame excluded) over model power, dB.
    pub suppression_db: Option<f64>,
    pub ofdm_bit_errors: Option<usize>,
    pub scale_applied: Option<f64>,
    pub phase_applied: Option<f64>,
    pub mask_margin_db: Option<f64>,
    pub dc_delta_db: Option<f64>,
}

impl PacketReport {
    pub(crate) fn new(experiment: &str, mcs: Mcs, snr_db: f64, sir_db: f64, trial: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            mcs: mcs.index(),
            snr_db,
            sir_db,
            trial,
            detected: true,
            packet_error: None,
            covert_bits: 0,
            covert_errors: 0,
            suppression_db: None,
            ofdm_bit_errors: None,
            scale_applied: None,
            phase_applied: None,
            mask_margin_db: None,
            dc_delta_db: None,
        }
    }

    /// Errors and trials this packet contributes to its curve point.
    fn counts(&self) -> Option<(u64, u64)> {
        if !self.detected {
            return None;
        }
        match self.packet_error {
            Some(e) => Some((e as u64, 1)),
            None => Some((self.covert_errors as u64, self.covert_bits as u64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: ExperimentSpec,
    pub curves: Vec<Curve>,
    pub packets: Vec<PacketReport>,
    /// Recordings without a detectable packet (replays only).
    pub skipped_recordings: usize,
}

impl RunResult {
    pub fn curve(&self, experiment: &str, fixed_db: Option<f64>) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.experiment == experiment && c.fixed_db == fixed_db)
    }
}

/// A simulated received buffer and what went into it.
#[derive(Clone, Debug)]
pub struct SimulatedPacket {
    pub rx: ComplexBuffer,
    pub psdu: Vec<u8>,
    pub mcs: Mcs,
    /// First packet sample in `rx`.
    pub start: usize,
    /// Covert receiver settings with the absolute start, and the bits sent.
    pub covert: Option<(CovertConfig, Vec<u8>)>,
    /// The covert waveform as added, over the covert span.
    pub covert_added: Vec<Complex64>,
}

/// Builds one received buffer: random PSDU, channel without noise, covert
/// frame at `sir_db` below the received packet power, then noise `snr_db`
/// below the received packet power.
pub fn simulate_packet(spec: &ExperimentSpec, mcs: Mcs, snr_db: f64, sir_db: f64, rng: &mut Rng) -> Result<SimulatedPacket> {
    let cfg = OfdmConfig::default();
    let psdu = rng.bytes(spec.psdu_octets);
    let pkt = modulate(&psdu, mcs, &cfg)?;
    let ch_spec = &spec.channel;
    let start = ch_spec.guard_samples + rng.index(ch_spec.timing_jitter + 1);
    let mut host = vec![Complex64::new(0.0, 0.0); start];
    host.extend_from_slice(&pkt.samples.samples);
    host.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), ch_spec.tail_samples));
    let taps = match &ch_spec.multipath {
        Some(m) => m.draw(rng),
        None => ch_spec.fixed_taps(),
    };
    let cfo_hz = if ch_spec.cfo_hz_max > 0.0 {
        rng.uniform_range(-ch_spec.cfo_hz_max, ch_spec.cfo_hz_max)
    } else {
        0.0
    };
    let ch = ChannelRealization {
        taps,
        cfo_phi: rng.uniform_range(-PI, PI),
        ..ChannelRealization::identity()
    }
    .with_cfo_hz(cfo_hz, SAMPLE_RATE_HZ);
    let mut rx = apply_channel(&ComplexBuffer::new(host, SAMPLE_RATE_HZ)?, &ch, rng)?;
    let packet_span = start..start + pkt.len();
    let p_rx = rx.power_in(packet_span.clone());

    let mut covert = None;
    let mut covert_added = Vec::new();
    if sir_db.is_finite() {
        let ccfg = CovertConfig {
            code: spec.covert.code()?,
            ..CovertConfig::default()
        }
        .with_start(start + spec.covert.start_offset);
        let n = capacity_samples(packet_span.end, &ccfg);
        if n > 0 {
            let bits = rng.bits(n);
            let frame = covert_modulate(&bits, &ccfg)?;
            let g = covert_gain(&rx, &frame, sir_db)?;
            covert_added = frame.waveform.samples.iter().map(|w| w * g).collect();
            for (o, c) in rx.samples[frame.span()].iter_mut().zip(&covert_added) {
                *o += c;
            }
            covert = Some((ccfg, bits));
        }
    }
    if snr_db.is_finite() {
        rx = add_noise(&rx, p_rx / 10f64.powf(snr_db / 10.0), rng)?;
    }
    Ok(SimulatedPacket {
        rx,
        psdu,
        mcs,
        start,
        covert,
        covert_added,
    })
}

/// Suppression with the injected covert frame taken out of the residue, so
/// the figure reflects only what is left of the OFDM packet.
pub(crate) fn suppression_without_covert(
    residue: &ComplexBuffer,
    window: std::ops::Range<usize>,
    reported_db: f64,
    covert_added: &[Complex64],
) -> f64 {
    let res = &residue.samples[window.clone()];
    let n = res.len().max(1) as f64;
    let p_res = res.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let p_model = p_res / 10f64.powf(reported_db / 10.0);
    let p_clean = res
        .iter()
        .enumerate()
        .map(|(i, v)| (v - covert_added.get(i).copied().unwrap_or_default()).norm_sqr())
        .sum::<f64>()
        / n;
    power_to_db(p_clean / p_model)
}

/// Runs a single trial. The outcome depends only on the arguments, so
/// trials may execute in any order.
pub fn run_trial(
    spec: &ExperimentSpec,
    mode: TrialMode,
    mcs: Mcs,
    snr_db: f64,
    sir_db: f64,
    seed: u64,
    trial: u64,
) -> Result<PacketReport> {
    let mut rng = Rng::for_trial(seed, trial);
    let sim = simulate_packet(spec, mcs, snr_db, sir_db, &mut rng)?;
    let cfg = OfdmConfig::default();
    let format = FrameFormat {
        mcs,
        psdu_octets: spec.psdu_octets,
    };
    let mut rep = PacketReport::new(spec.kind.name(), mcs, snr_db, sir_db, trial);
    match mode {
        TrialMode::Per => {
            let d = demodulate(&sim.rx, Some(format), &cfg)?;
            rep.packet_error = Some(d.is_none_or(|d| d.psdu != sim.psdu));
        }
        TrialMode::CovertRaw => {
            if let Some((ccfg, bits)) = &sim.covert {
                let (hat, _) = covert_demodulate(&sim.rx, ccfg, bits.len())?;
                rep.covert_bits = bits.len();
                rep.covert_errors = count_bit_errors(bits, &hat);
            }
        }
        TrialMode::CovertCancel => {
            if let Some((ccfg, bits)) = &sim.covert {
                let rec = recover_covert(&sim.rx, &cfg, ccfg, bits.len(), Some(format), Some(&sim.psdu))?;
                rep.detected = !rec.report.degraded;
                rep.covert_bits = bits.len();
                rep.covert_errors = count_bit_errors(bits, &rec.bits);
                rep.ofdm_bit_errors = rec.report.ofdm_bit_errors;
                if let Some(residue) = &rec.residue {
                    let span = ccfg.start_offset..ccfg.start_offset + sim.covert_added.len();
                    rep.suppression_db = Some(suppression_without_covert(
                        residue,
                        span,
                        rec.report.suppression_db,
                        &sim.covert_added,
                    ));
                    rep.scale_applied = Some(rec.report.scale_applied);
                    rep.phase_applied = Some(rec.report.phase_applied);
                }
            }
        }
        TrialMode::Mask => {
            let m = check_spectral_mask(&sim.rx, &spec.mask)?;
            rep.packet_error = Some(!m.pass);
            rep.mask_margin_db = Some(m.worst_margin_db());
            rep.dc_delta_db = m.dc_delta_db;
        }
    }
    Ok(rep)
}

/// Hard-bit disagreements between two equal-length 0/1 vectors.
pub fn count_bit_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| (**x ^ **y) & 1 != 0).count() + a.len().abs_diff(b.len())
}

/// Folds per-packet reports into one curve point.
pub fn aggregate(x_db: f64, reports: &[PacketReport]) -> CurvePoint {
    let (mut errors, mut trials, mut missed) = (0, 0, 0);
    for r in reports {
        match r.counts() {
            Some((e, t)) => {
                errors += e;
                trials += t;
            }
            None => missed += 1,
        }
    }
    let supp: Vec<f64> = reports.iter().filter_map(|r| r.suppression_db).collect();
    let mut p = CurvePoint::new(x_db, trials, errors);
    p.detection_failures = missed;
    p.mean_suppression_db = (!supp.is_empty()).then(|| supp.iter().sum::<f64>() / supp.len() as f64);
    p
}

/// Seed of one sweep point.
pub fn point_seed(seed: u64, mcs: Mcs, snr_index: usize, sir_index: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, mcs.index() as u64), snr_index as u64), sir_index as u64)
}

/// Every `(mcs, snr, sir)` point with its trials, flattened so the whole
/// run shares one parallel pass.
struct Job {
    mcs: Mcs,
    snr_index: usize,
    sir_index: usize,
    trial: u64,
}

fn sweep(spec: &ExperimentSpec, mode: TrialMode, snrs: &[f64], sirs: &[f64]) -> Result<Vec<Vec<PacketReport>>> {
    let mcs = spec.mcs_list()?;
    let mut jobs = Vec::new();
    for &m in &mcs {
        for si in 0..snrs.len() {
            for ii in 0..sirs.len() {
                for t in 0..spec.packets_per_point as u64 {
                    jobs.push(Job {
                        mcs: m,
                        snr_index: si,
                        sir_index: ii,
                        trial: t,
                    });
                }
            }
        }
    }
    let reports = par_map(&jobs, |j| {
        run_trial(
            spec,
            mode,
            j.mcs,
            snrs[j.snr_index],
            sirs[j.sir_index],
            point_seed(spec.seed, j.mcs, j.snr_index, j.sir_index),
            j.trial,
        )
    })?;
    Ok(reports
        .chunks(spec.packets_per_point)
        .map(|c| c.to_vec())
        .collect())
}

fn label_for(axis: Axis, fixed: f64) -> String {
    match axis {
        Axis::Snr => "AWGN".to_string(),
        Axis::Sir if fixed.is_infinite() => "no noise".to_string(),
        Axis::Sir => format!("SNR {fixed} dB"),
    }
}

/// PER against SNR per MCS, AWGN only.
pub fn run_baseline_per(spec: &ExperimentSpec) -> Result<RunResult> {
    expect_kind(spec, &[ExperimentKind::BaselinePer])?;
    let points = sweep(spec, TrialMode::Per, &spec.snr_db, &[f64::INFINITY])?;
    let mut curves = Vec::new();
    let mut packets = Vec::new();
    let mut it = points.into_iter();
    for m in spec.mcs_list()? {
        let mut pts = Vec::new();
        for &snr in &spec.snr_db {
            let r = it.next().expect("one point per grid entry");
            pts.push(aggregate(snr, &r));
            packets.extend(r);
        }
        curves.push(Curve {
            experiment: spec.kind.name().into(),
            label: format!("MCS {}", m.index()),
            mcs: Some(m.index()),
            axis: Axis::Snr,
            fixed_db: Some(f64::INFINITY),
            points: pts,
        });
    }
    Ok(RunResult {
        spec: spec.clone(),
        curves,
        packets,
        skipped_recordings: 0,
    })
}

/// Curves over SIR, one per (MCS, SNR), measuring `mode`.
fn run_sir_sweep(spec: &ExperimentSpec, mode: TrialMode, snrs: &[f64]) -> Result<RunResult> {
    let points = sweep(spec, mode, snrs, &spec.sir_db)?;
    let mut curves = Vec::new();
    let mut packets = Vec::new();
    let mut it = points.into_iter();
    for m in spec.mcs_list()? {
        for &snr in snrs {
            let mut pts = Vec::new();
            for &sir in &spec.sir_db {
                let r = it.next().expect("one point per grid entry");
                pts.push(aggregate(sir, &r));
                packets.extend(r);
            }
            curves.push(Curve {
                experiment: spec.kind.name().into(),
                label: label_for(Axis::Sir, snr),
                mcs: Some(m.index()),
                axis: Axis::Sir,
                fixed_db: Some(snr),
                points: pts,
            });
        }
    }
    Ok(RunResult {
        spec: spec.clone(),
        curves,
        packets,
        skipped_recordings: 0,
    })
}

/// OFDM PER against covert SIR, one curve per SNR.
pub fn run_per_vs_sir(spec: &ExperimentSpec) -> Result<RunResult> {
    expect_kind(spec, &[ExperimentKind::PerVsSir])?;
    run_sir_sweep(spec, TrialMode::Per, &spec.snr_db)
}

/// Covert BER against SIR, with or without the canceller.
pub fn run_covert_ber(spec: &ExperimentSpec, with_cancellation: bool) -> Result<RunResult> {
    expect_kind(spec, &[ExperimentKind::CovertBerNocancel, ExperimentKind::CovertBerCancel])?;
    let mode = if with_cancellation {
        TrialMode::CovertCancel
    } else {
        TrialMode::CovertRaw
    };
    run_sir_sweep(spec, mode, &spec.snr_db)
}

/// Mask failures against SIR. Without an SNR grid the packets are
/// noiseless.
pub fn run_mask_check(spec: &ExperimentSpec) -> Result<RunResult> {
    expect_kind(spec, &[ExperimentKind::MaskCheck])?;
    let snrs = if spec.snr_db.is_empty() {
        vec![f64::INFINITY]
    } else {
        spec.snr_db.clone()
    };
    run_sir_sweep(spec, TrialMode::Mask, &snrs)
}

fn expect_kind(spec: &ExperimentSpec, kinds: &[ExperimentKind]) -> Result<()> {
    spec.validate()?;
    if kinds.contains(&spec.kind) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "experiment kind {} cannot run here",
            spec.kind.name()
        )))
    }
}

/// Runs whatever `spec.kind` names.
pub fn run(spec: &ExperimentSpec) -> Result<RunResult> {
    log::info!(
        "running {} ({} packets/point, seed {})",
        spec.kind.name(),
        spec.packets_per_point,
        spec.seed
    );
    match spec.kind {
        ExperimentKind::BaselinePer => run_baseline_per(spec),
        ExperimentKind::PerVsSir => run_per_vs_sir(spec),
        ExperimentKind::CovertBerNocancel => run_covert_ber(spec, false),
        ExperimentKind::CovertBerCancel => run_covert_ber(spec, true),
        ExperimentKind::MaskCheck => run_mask_check(spec),
        ExperimentKind::OtaReplay => super::ota::run_ota_replay_from_spec(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covert::capacity_samples;
    use crate::ofdm::packet_len;

    fn spec(kind: ExperimentKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(kind);
        s.packets_per_point = 6;
        s.psdu_octets = 200;
        s.snr_db = vec![25.0];
        s.sir_db = vec![30.0];
        s
    }

    #[test]
    fn baseline_far_above_and_below_sensitivity() {
        let mut s = spec(ExperimentKind::BaselinePer);
        s.mcs = vec![0, 7];
        s.snr_db = vec![0.0, 30.0];
        let r = run(&s).unwrap();
        assert_eq!(r.curves.len(), 2);
        let mcs0 = &r.curves[0];
        let mcs7 = &r.curves[1];
        assert_eq!(mcs0.point_at(30.0).unwrap().errors, 0);
        assert_eq!(mcs7.point_at(30.0).unwrap().errors, 0);
        assert_eq!(mcs7.point_at(0.0).unwrap().errors, 6);
        assert_eq!(r.packets.len(), 8 * 3);
    }

    #[test]
    fn simulated_packet_layout() {
        let mut s = spec(ExperimentKind::PerVsSir);
        s.channel.timing_jitter = 50;
        let mcs = Mcs::new(7).unwrap();
        let mut rng = Rng::new(5);
        let p = simulate_packet(&s, mcs, f64::INFINITY, 20.0, &mut rng).unwrap();
        assert!(p.start >= 200 && p.start <= 250);
        let (ccfg, bits) = p.covert.as_ref().unwrap();
        assert_eq!(ccfg.start_offset, p.start + 320);
        assert_eq!(bits.len(), capacity_samples(p.start + packet_len(mcs, 200), ccfg));
        // the added frame sits 20 dB under the packet
        let span = ccfg.start_offset..ccfg.start_offset + p.covert_added.len();
        let pc = p.covert_added.iter().map(|v| v.norm_sqr()).sum::<f64>() / p.covert_added.len() as f64;
        let host: f64 = p.rx.samples[span.clone()]
            .iter()
            .zip(&p.covert_added)
            .map(|(r, c)| (r - c).norm_sqr())
            .sum::<f64>()
            / span.len() as f64;
        assert!((power_to_db(host / pc) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn covert_bits_conserved() {
        let mut s = spec(ExperimentKind::CovertBerCancel);
        s.sir_db = vec![20.0, 30.0];
        s.channel.timing_jitter = 40;
        let r = run(&s).unwrap();
        let mcs = Mcs::new(7).unwrap();
        for (curve_pts, chunk) in r.curves[0].points.iter().zip(r.packets.chunks(6)) {
            let expected: u64 = chunk
                .iter()
                .filter(|p| p.detected)
                .map(|_| {
                    let cfg = CovertConfig::default().with_start(320);
                    capacity_samples(packet_len(mcs, 200), &cfg) as u64
                })
                .sum();
            assert_eq!(curve_pts.trials, expected);
            assert!(chunk.iter().all(|p| p.suppression_db.is_some()));
        }
    }

    #[test]
    fn trial_order_does_not_matter() {
        let s = spec(ExperimentKind::CovertBerNocancel);
        let mcs = Mcs::new(7).unwrap();
        let seed = point_seed(s.seed, mcs, 0, 0);
        let fwd: Vec<_> = (0..6)
            .map(|t| run_trial(&s, TrialMode::CovertRaw, mcs, 25.0, 10.0, seed, t).unwrap())
            .collect();
        let mut rev: Vec<_> = (0..6)
            .rev()
            .map(|t| run_trial(&s, TrialMode::CovertRaw, mcs, 25.0, 10.0, seed, t).unwrap())
            .collect();
        rev.reverse();
        assert_eq!(aggregate(10.0, &fwd), aggregate(10.0, &rev));
        assert_eq!(fwd, rev);
    }

    #[test]
    fn runs_are_deterministic() {
        let s = spec(ExperimentKind::PerVsSir);
        assert_eq!(run(&s).unwrap(), run(&s).unwrap());
    }

    #[test]
    fn wrong_kind_rejected() {
        let s = spec(ExperimentKind::PerVsSir);
        assert!(run_baseline_per(&s).is_err());
        assert!(run_covert_ber(&s, true).is_err());
    }

    #[test]
    fn suppression_excludes_injected_frame() {
        let residue = ComplexBuffer::new(vec![Complex64::new(2.0, 0.0); 10], 20e6).unwrap();
        let added = vec![Complex64::new(1.0, 0.0); 10];
        // model power 400 (reported −20 dB against residue power 4)
        let s = suppression_without_covert(&residue, 0..10, -20.0, &added);
        assert!((s - power_to_db(1.0 / 400.0)).abs() < 1e-12);
    }
}
