use std::f64::consts::PI;

use num_complex::Complex64;

use super::config::{ExperimentKind, ExperimentSpec};
use super::experiments::{aggregate, PacketReport, RunResult};
use super::iq::{read_iq, IqRecording};
use super::parallel::par_map;
use super::stats::{Axis, Curve};
use crate::canceller::{cancel_forward, recover_covert, CancelOptions};
use crate::channel::{add_noise, apply_channel, ChannelRealization};
use crate::covert::{capacity_samples, covert_demodulate, covert_gain, covert_modulate, CovertConfig};
use crate::error::{Error, Result};
use crate::harness::experiments::count_bit_errors;
use crate::ofdm::{demodulate, modulate, packet_len, remodulate, OfdmConfig, SAMPLE_RATE_HZ};
use crate::sigcore::{derive_seed, resample, ComplexBuffer, Rng};

/// Stream index separating corpus synthesis from everything else drawn
/// from the experiment seed.
const CORPUS_STREAM: u64 = 0x07a0;

/// Synthesises recording `index` of the OTA-like corpus: one packet at
/// `ota.capture_rate_hz` through random multipath and CFO, with noise at an
/// in-band SNR drawn from the configured range.
pub fn synth_ota_recording(spec: &ExperimentSpec, index: u64) -> Result<IqRecording> {
    let ota = &spec.ota;
    let mut rng = Rng::for_trial(derive_seed(spec.seed, CORPUS_STREAM), index);
    let mcs = spec.mcs_list()?[0];
    let psdu = rng.bytes(spec.psdu_octets);
    let pkt = modulate(&psdu, mcs, &OfdmConfig::default())?;
    let guard = spec.channel.guard_samples / 2 + rng.index(spec.channel.guard_samples / 2 + 1);
    let mut host = vec![Complex64::new(0.0, 0.0); guard];
    host.extend_from_slice(&pkt.samples.samples);
    host.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), spec.channel.tail_samples));
    let up = resample(&ComplexBuffer::new(host, SAMPLE_RATE_HZ)?, ota.capture_rate_hz)?;
    let ratio = ota.capture_rate_hz / SAMPLE_RATE_HZ;

    let cfo_hz = rng.uniform_range(-ota.cfo_hz_max, ota.cfo_hz_max);
    let ch = ChannelRealization {
        taps: ota.multipath.draw(&mut rng),
        cfo_phi: rng.uniform_range(-PI, PI),
        ..ChannelRealization::identity()
    }
    .with_cfo_hz(cfo_hz, ota.capture_rate_hz);
    let y = apply_channel(&up, &ch, &mut rng)?;
    let span = (guard as f64 * ratio) as usize..((guard + pkt.len()) as f64 * ratio) as usize;
    let snr_db = rng.uniform_range(ota.snr_min_db, ota.snr_max_db);
    // the packet occupies 1/ratio of the captured band, so white noise of
    // this power gives `snr_db` inside the channel
    let noise = ratio * y.power_in(span) / 10f64.powf(snr_db / 10.0);
    let x = add_noise(&y, noise, &mut rng)?;

    let mut rec = IqRecording::new(x, format!("synthetic OTA-like capture {index}"));
    let extra = &mut rec.metadata.extra;
    extra.insert("mcs".into(), mcs.index().into());
    extra.insert("psdu_octets".into(), spec.psdu_octets.into());
    extra.insert("snr_db".into(), snr_db.into());
    extra.insert("cfo_hz".into(), cfo_hz.into());
    extra.insert("taps".into(), ch.taps.len().into());
    Ok(rec)
}

/// The whole synthetic corpus, `packets_per_point` recordings.
pub fn synth_ota_corpus(spec: &ExperimentSpec) -> Result<Vec<IqRecording>> {
    let idx: Vec<u64> = (0..spec.packets_per_point as u64).collect();
    par_map(&idx, |&i| synth_ota_recording(spec, i))
}

/// Per-recording outcome: covert-free suppression and, per SIR, the reports
/// of both covert receivers.
struct Replay {
    suppression_db: f64,
    raw: Vec<PacketReport>,
    cancel: Vec<PacketReport>,
}

fn replay_one(spec: &ExperimentSpec, index: usize, rec: &IqRecording) -> Result<Option<Replay>> {
    if rec.samples.is_empty() {
        log::warn!("recording {index} is empty; skipped");
        return Ok(None);
    }
    let cfg = OfdmConfig::default();
    let x = resample(&rec.samples, SAMPLE_RATE_HZ)?;
    let Some(d) = demodulate(&x, None, &cfg)? else {
        log::warn!("recording {index}: no packet detected; skipped");
        return Ok(None);
    };
    let start = d.estimates.fine_timing;
    let ccfg = CovertConfig {
        code: spec.covert.code()?,
        ..CovertConfig::default()
    }
    .with_start(start + spec.covert.start_offset);
    let end = (start + packet_len(d.format.mcs, d.format.psdu_octets)).min(x.len());
    let n = capacity_samples(end, &ccfg);
    if n == 0 {
        log::warn!("recording {index}: packet too short for a covert bit; skipped");
        return Ok(None);
    }
    let span = ccfg.start_offset..ccfg.start_offset + n * ccfg.symbol_len();

    let s_hat = remodulate(&d.psdu, d.format.mcs, d.scrambler_seed, &cfg)?;
    let (_, base) = cancel_forward(
        &x,
        &d.estimates,
        &s_hat,
        &CancelOptions {
            refine: true,
            window: Some(span),
        },
    )?;

    let mut raw = Vec::new();
    let mut cancel = Vec::new();
    for (si, &sir) in spec.sir_db.iter().enumerate() {
        let mcs = d.format.mcs;
        let mut r_raw = PacketReport::new(ExperimentKind::OtaReplay.name(), mcs, f64::NAN, sir, index as u64);
        r_raw.suppression_db = Some(base.suppression_db);
        let mut r_can = r_raw.clone();
        if sir.is_finite() {
            let bits = Rng::for_trial(derive_seed(spec.seed, si as u64), index as u64).bits(n);
            let frame = covert_modulate(&bits, &ccfg)?;
            let g = covert_gain(&x, &frame, sir)?;
            let mut xi = x.clone();
            for (o, w) in xi.samples[frame.span()].iter_mut().zip(&frame.waveform.samples) {
                *o += w * g;
            }
            let (hat, _) = covert_demodulate(&xi, &ccfg, n)?;
            r_raw.covert_bits = n;
            r_raw.covert_errors = count_bit_errors(&bits, &hat);
            let rc = recover_covert(&xi, &cfg, &ccfg, n, None, None)?;
            r_can.detected = !rc.report.degraded;
            r_can.covert_bits = n;
            r_can.covert_errors = count_bit_errors(&bits, &rc.bits);
            r_can.scale_applied = Some(rc.report.scale_applied);
            r_can.phase_applied = Some(rc.report.phase_applied);
        }
        raw.push(r_raw);
        cancel.push(r_can);
    }
    Ok(Some(Replay {
        suppression_db: base.suppression_db,
        raw,
        cancel,
    }))
}

/// Injects covert frames into each recording at every SIR of the grid and
/// runs both covert receivers. Suppression is measured on the recording
/// before injection, over the span the covert frame would occupy.
pub fn run_ota_replay(spec: &ExperimentSpec, recordings: &[IqRecording]) -> Result<RunResult> {
    spec.validate()?;
    let indexed: Vec<(usize, &IqRecording)> = recordings.iter().enumerate().collect();
    let replays = par_map(&indexed, |(i, r)| replay_one(spec, *i, r))?;
    let skipped = replays.iter().filter(|r| r.is_none()).count();
    let done: Vec<Replay> = replays.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(Error::InvalidInput(format!(
            "none of the {} recordings contained a detectable packet",
            recordings.len()
        )));
    }
    log::info!(
        "replayed {} recordings ({} skipped), mean suppression {:.2} dB",
        done.len(),
        skipped,
        done.iter().map(|r| r.suppression_db).sum::<f64>() / done.len() as f64
    );
    let mut curves = Vec::new();
    let mut packets = Vec::new();
    for (name, label, pick) in [
        ("ota_replay_nocancel", "no cancellation", 0),
        ("ota_replay_cancel", "cancellation", 1),
    ] {
        let mut points = Vec::new();
        for (si, &sir) in spec.sir_db.iter().enumerate() {
            let reports: Vec<PacketReport> = done
                .iter()
                .map(|r| {
                    let mut p = if pick == 0 { r.raw[si].clone() } else { r.cancel[si].clone() };
                    p.experiment = name.to_string();
                    p
                })
                .collect();
            let mut pt = aggregate(sir, &reports);
            pt.detection_failures += skipped as u64;
            points.push(pt);
            packets.extend(reports);
        }
        curves.push(Curve {
            experiment: name.into(),
            label: label.into(),
            mcs: spec.mcs.first().copied(),
            axis: Axis::Sir,
            fixed_db: None,
            points,
        });
    }
    Ok(RunResult {
        spec: spec.clone(),
        curves,
        packets,
        skipped_recordings: skipped,
    })
}

/// Replays the recordings listed in the spec, or a freshly synthesised
/// corpus when there are none.
pub fn run_ota_replay_from_spec(spec: &ExperimentSpec) -> Result<RunResult> {
    if spec.kind != ExperimentKind::OtaReplay {
        return Err(Error::Config(format!("experiment kind {} is not ota_replay", spec.kind.name())));
    }
    let recordings = if spec.ota.recordings.is_empty() {
        synth_ota_corpus(spec)?
    } else {
        spec.ota.recordings.iter().map(read_iq).collect::<Result<Vec<_>>>()?
    };
    run_ota_replay(spec, &recordings)
}
