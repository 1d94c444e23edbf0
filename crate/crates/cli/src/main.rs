use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use covertlink::canceller::recover_covert_from;
use covertlink::covert::{capacity_samples, covert_modulate, inject, CovertConfig};
use covertlink::harness::{
    check_spectral_mask, read_iq, run, synth_ota_recording, write_iq, write_outputs, ExperimentKind, ExperimentSpec,
    IqRecording,
};
use covertlink::ofdm::{demodulate_from, packet_len, OfdmConfig, SAMPLE_RATE_HZ};
use covertlink::sigcore::{resample, ComplexBuffer, SpreadingCode};
use covertlink::{Error, Result as CoreResult};

#[derive(Parser, Debug)]
#[command(name = "covertlink", version, about = "Covert DSSS signalling under 802.11 OFDM packets")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override `key=value`; dotted keys reach nested fields.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Replaces the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Errors only.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Debug logging.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by --config.
    Run,
    /// Add a covert frame to the first packet of an IQ file.
    Inject(InjectArgs),
    /// Cancel the OFDM packets of an IQ file and despread the residue.
    Recover(RecoverArgs),
    /// Check an IQ file against the transmit spectral mask; exits 1 on a violation.
    Maskcheck(MaskArgs),
    /// Write the synthetic OTA-like corpus as IQ files.
    SynthOta(SynthArgs),
}

#[derive(Args, Debug, Clone)]
struct CovertArgs {
    /// Spreading-code generator seed as six binary digits.
    #[arg(long, default_value = "000001")]
    code_seed: String,
    /// First covert sample relative to the packet start.
    #[arg(long, default_value_t = 320)]
    start_offset: usize,
}

#[derive(Args, Debug)]
struct InjectArgs {
    /// Input IQ file (sidecar `<name>.json` alongside).
    input: PathBuf,
    /// Output IQ file.
    output: PathBuf,
    /// Covert payload as hex; bits are taken MSB first.
    #[arg(long, conflicts_with = "payload_file", required_unless_present = "payload_file")]
    payload: Option<String>,
    /// Covert payload as a binary file.
    #[arg(long)]
    payload_file: Option<PathBuf>,
    /// OFDM power over covert power, dB; `inf` copies the input.
    #[arg(long, allow_hyphen_values = true)]
    sir: f64,
    #[command(flatten)]
    covert: CovertArgs,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// Input IQ file.
    input: PathBuf,
    /// Covert bits per packet; defaults to the sidecar's `covert_bits`,
    /// else the packet's capacity.
    #[arg(long)]
    bits: Option<usize>,
    /// Expected payload as hex, for BER.
    #[arg(long, conflicts_with = "truth_file")]
    truth: Option<String>,
    /// Expected payload as a binary file.
    #[arg(long)]
    truth_file: Option<PathBuf>,
    /// Write the recovered bits of every packet here, one hex line each.
    #[arg(long)]
    bits_out: Option<PathBuf>,
    #[command(flatten)]
    covert: CovertArgs,
}

#[derive(Args, Debug)]
struct MaskArgs {
    /// Input IQ file.
    input: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of recordings; defaults to the config's packets_per_point.
    #[arg(long)]
    count: Option<usize>,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn config(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, err: err.into() }
    }
    fn injection(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, err: err.into() }
    }
    fn detection(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 4, err: err.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Self { code: 1, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = if matches!(err, Error::Config(_)) { 2 } else { 1 };
        Self { code, err: err.into() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet {
        log::LevelFilter::Error
    } else if cli.global.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("COVERTLINK_LOG")
        .format_timestamp(None)
        .init();
    let res = match &cli.command {
        Command::Run => cmd_run(&cli.global),
        Command::Inject(a) => cmd_inject(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Maskcheck(a) => cmd_maskcheck(&cli.global, a),
        Command::SynthOta(a) => cmd_synth_ota(&cli.global, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

/// Config file (or the kind's defaults), then overrides, seed and output
/// directory.
fn load_spec(g: &Global, default_kind: Option<ExperimentKind>) -> CliResult<ExperimentSpec> {
    let mut spec = match (&g.config, default_kind) {
        (Some(p), _) => ExperimentSpec::load(p).map_err(|e| Failure::config(anyhow!(e)))?,
        (None, Some(k)) => ExperimentSpec::new(k),
        (None, None) => return Err(Failure::config(anyhow!("--config is required"))),
    };
    if !g.overrides.is_empty() {
        spec = spec.with_overrides(&g.overrides).map_err(Failure::config)?;
    }
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    if let Some(o) = &g.out {
        spec.output.dir = o.clone();
    }
    Ok(spec)
}

fn cmd_run(g: &Global) -> CliResult<()> {
    let spec = load_spec(g, None)?;
    spec.validate().map_err(Failure::config)?;
    let result = run(&spec)?;
    if result.skipped_recordings > 0 {
        log::warn!("{} recordings had no detectable packet", result.skipped_recordings);
    }
    let paths = write_outputs(&result, &spec.output.dir, &spec.name())?;
    for c in &result.curves {
        for p in &c.points {
            log::info!(
                "{} {}: x = {} dB, {}/{} errors, rate {:.3e}{}",
                c.experiment,
                c.label,
                p.x_db,
                p.errors,
                p.trials,
                p.rate,
                p.mean_suppression_db
                    .map(|s| format!(", suppression {s:.2} dB"))
                    .unwrap_or_default()
            );
        }
    }
    println!("{}", paths.csv.display());
    println!("{}", paths.packets_csv.display());
    println!("{}", paths.svg.display());
    Ok(())
}

fn parse_code_seed(s: &str) -> CliResult<(SpreadingCode, [u8; 6])> {
    let digits: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Failure::config(anyhow!("code seed {s:?} must be six binary digits"))),
        })
        .collect::<CliResult<_>>()?;
    let seed: [u8; 6] = digits
        .try_into()
        .map_err(|_| Failure::config(anyhow!("code seed {s:?} must be six binary digits")))?;
    let code = SpreadingCode::from_seed(&seed).map_err(Failure::config)?;
    Ok((code, seed))
}

fn read_payload(hex_text: Option<&str>, file: Option<&Path>) -> CliResult<Vec<u8>> {
    let bytes = match (hex_text, file) {
        (Some(h), _) => hex::decode(h.trim().trim_start_matches("0x"))
            .map_err(|e| Failure::config(anyhow!("payload is not hex: {e}")))?,
        (None, Some(p)) => std::fs::read(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(Failure::config)?,
        (None, None) => Vec::new(),
    };
    Ok(bytes)
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
}

fn bits_to_hex(bits: &[u8]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect();
    hex::encode(bytes)
}

fn to_20msps(rec: &IqRecording) -> CoreResult<ComplexBuffer> {
    resample(&rec.samples, SAMPLE_RATE_HZ)
}

fn cmd_inject(a: &InjectArgs) -> CliResult<()> {
    let (code, seed) = parse_code_seed(&a.covert.code_seed)?;
    let payload = read_payload(a.payload.as_deref(), a.payload_file.as_deref())?;
    let bits = bytes_to_bits(&payload);
    if bits.is_empty() {
        return Err(Failure::injection(anyhow!("covert payload is empty")));
    }
    let rec = read_iq(&a.input)?;
    if a.sir == f64::INFINITY {
        let mut out = rec.clone();
        out.metadata.extra.insert("covert_sir_db".into(), "inf".into());
        write_iq(&a.output, &out)?;
        log::info!("SIR inf: samples copied unchanged");
        return Ok(());
    }
    if a.sir.is_nan() {
        return Err(Failure::config(anyhow!("--sir must be a number or inf")));
    }
    let x = to_20msps(&rec)?;
    let cfg = OfdmConfig::default();
    let d = demodulate_from(&x, 0, None, &cfg)?
        .ok_or_else(|| Failure::detection(anyhow!("no OFDM packet found in {}", a.input.display())))?;
    let start = d.estimates.fine_timing;
    let ccfg = CovertConfig {
        code,
        ..CovertConfig::default()
    }
    .with_start(start + a.covert.start_offset);
    let end = (start + packet_len(d.format.mcs, d.format.psdu_octets)).min(x.len());
    let cap = capacity_samples(end, &ccfg);
    if bits.len() > cap {
        return Err(Failure::injection(anyhow!(
            "payload of {} bits exceeds the packet's covert capacity of {cap} bits",
            bits.len()
        )));
    }
    let frame = covert_modulate(&bits, &ccfg).map_err(Failure::injection)?;
    let y = inject(&x, &frame, a.sir).map_err(Failure::injection)?;
    let mut out = IqRecording::new(y, rec.metadata.description.clone());
    out.metadata.center_freq_hz = rec.metadata.center_freq_hz;
    out.metadata.extra = rec.metadata.extra.clone();
    let e = &mut out.metadata.extra;
    e.insert("covert_sir_db".into(), a.sir.into());
    e.insert("covert_bits".into(), bits.len().into());
    e.insert("covert_start_offset".into(), a.covert.start_offset.into());
    e.insert("covert_code_seed".into(), seed.iter().map(|b| b.to_string()).collect::<String>().into());
    e.insert("packet_start".into(), start.into());
    write_iq(&a.output, &out)?;
    log::info!(
        "injected {} bits at SIR {} dB into the MCS {} packet at sample {start}",
        bits.len(),
        a.sir,
        d.format.mcs.index()
    );
    println!("{}", a.output.display());
    Ok(())
}

fn cmd_recover(a: &RecoverArgs) -> CliResult<()> {
    let (code, _) = parse_code_seed(&a.covert.code_seed)?;
    let truth = read_payload(a.truth.as_deref(), a.truth_file.as_deref())?;
    let truth_bits = (!truth.is_empty()).then(|| bytes_to_bits(&truth));
    let rec = read_iq(&a.input)?;
    let x = to_20msps(&rec)?;
    let cfg = OfdmConfig::default();
    let sidecar_bits = rec.metadata.extra.get("covert_bits").and_then(|v| v.as_u64()).map(|v| v as usize);
    let mut from = 0;
    let mut lines = Vec::new();
    let (mut total_bits, mut total_errors) = (0usize, 0usize);
    while let Some(d) = demodulate_from(&x, from, None, &cfg)? {
        let start = d.estimates.fine_timing;
        let end = (start + packet_len(d.format.mcs, d.format.psdu_octets)).min(x.len());
        let ccfg = CovertConfig {
            code: code.clone(),
            ..CovertConfig::default()
        }
        .with_start(start + a.covert.start_offset);
        let cap = capacity_samples(end, &ccfg);
        let n = a.bits.or(sidecar_bits).or(truth_bits.as_ref().map(|t| t.len())).unwrap_or(cap).min(cap);
        let r = recover_covert_from(&x, from, &cfg, &ccfg, n, Some(d.format), None)?;
        let mut line = format!(
            "packet at sample {start}: MCS {}, {} octets, suppression {:.2} dB, {n} covert bits",
            d.format.mcs.index(),
            d.format.psdu_octets,
            r.report.suppression_db
        );
        if let Some(t) = &truth_bits {
            let m = n.min(t.len());
            let errors = r.bits[..m].iter().zip(&t[..m]).filter(|(x, y)| x != y).count();
            total_bits += m;
            total_errors += errors;
            line += &format!(", BER {:.4e} ({errors}/{m})", errors as f64 / m.max(1) as f64);
        }
        println!("{line}");
        lines.push(bits_to_hex(&r.bits));
        from = end.max(start + 1);
    }
    if lines.is_empty() {
        return Err(Failure::detection(anyhow!("no OFDM packets detected in {}", a.input.display())));
    }
    if truth_bits.is_some() {
        println!(
            "total: {} packets, BER {:.4e} ({total_errors}/{total_bits})",
            lines.len(),
            total_errors as f64 / total_bits.max(1) as f64
        );
    }
    if let Some(p) = &a.bits_out {
        std::fs::write(p, lines.join("\n") + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_maskcheck(g: &Global, a: &MaskArgs) -> CliResult<()> {
    let spec = load_spec(g, Some(ExperimentKind::MaskCheck))?.mask;
    let rec = read_iq(&a.input)?;
    let r = check_spectral_mask(&rec.samples, &spec)?;
    for m in &r.margins {
        println!(
            "{:>5.1}-{:<5.1} MHz: margin {:7.2} dB at {:+.2} MHz",
            m.from_hz / 1e6,
            m.to_hz / 1e6,
            m.margin_db,
            m.worst_hz / 1e6
        );
    }
    match r.dc_delta_db {
        Some(d) => println!("DC delta {d:.2} dB{}", if r.dc_flagged { " (flagged)" } else { "" }),
        None => println!("DC delta: no packet detected"),
    }
    if r.pass {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(anyhow!("spectral mask violated").into())
    }
}

fn cmd_synth_ota(g: &Global, a: &SynthArgs) -> CliResult<()> {
    let spec = load_spec(g, Some(ExperimentKind::OtaReplay))?;
    // the SIR grid plays no part in the corpus
    let mut check = spec.clone();
    if check.sir_db.is_empty() {
        check.sir_db.push(f64::INFINITY);
    }
    check.validate().map_err(Failure::config)?;
    let dir = g.out.clone().unwrap_or_else(|| spec.output.dir.clone());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let n = a.count.unwrap_or(spec.packets_per_point);
    for i in 0..n {
        let rec = synth_ota_recording(&spec, i as u64)?;
        let path = dir.join(format!("ota_{i:04}.iq"));
        write_iq(&path, &rec)?;
        log::debug!("wrote {}", path.display());
    }
    log::info!("wrote {n} recordings to {}", dir.display());
    println!("{}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use covertlink::sigcore::CODE_SEED;

    #[test]
    fn hex_bit_order_round_trips() {
        let bits = bytes_to_bits(&[0xa5, 0x01]);
        assert_eq!(&bits[..8], &[1, 0, 1, 0, 0, 1, 0, 1]);
        assert_eq!(bits_to_hex(&bits), "a501");
    }

    #[test]
    fn code_seed_parsing() {
        assert_eq!(parse_code_seed("000001").unwrap().1, CODE_SEED);
        assert!(parse_code_seed("00001").is_err());
        assert!(parse_code_seed("000000").is_err());
        assert!(parse_code_seed("00a001").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
