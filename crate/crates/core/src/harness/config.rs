use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::MultipathProfile;
use crate::error::{Error, Result};
use crate::ofdm::{Mcs, MAX_PSDU_OCTETS, PREAMBLE_LEN};
use crate::sigcore::{SpreadingCode, CODE_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BaselinePer,
    PerVsSir,
    CovertBerNocancel,
    CovertBerCancel,
    OtaReplay,
    MaskCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BaselinePer => "baseline_per",
            Self::PerVsSir => "per_vs_sir",
            Self::CovertBerNocancel => "covert_ber_nocancel",
            Self::CovertBerCancel => "covert_ber_cancel",
            Self::OtaReplay => "ota_replay",
            Self::MaskCheck => "mask_check",
        }
    }
}

/// dB grids in JSON: numbers, or the strings `"inf"` / `"-inf"`.
mod db_grid {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_finite() {
                seq.serialize_element(x)?;
            } else if *x > 0.0 {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element("-inf")?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Value>::deserialize(d)?;
        raw.into_iter()
            .map(|v| match v {
                Value::Number(n) => n.as_f64().ok_or_else(|| D::Error::custom("bad number")),
                Value::String(s) => match s.trim() {
                    "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                    "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                    other => other
                        .parse::<f64>()
                        .map_err(|_| D::Error::custom(format!("not a dB value: {other:?}"))),
                },
                other => Err(D::Error::custom(format!("not a dB value: {other}"))),
            })
            .collect()
    }
}

/// Channel applied to simulated packets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelProfile {
    /// Fixed impulse response as `[re, im]` pairs.
    pub taps: Vec<[f64; 2]>,
    /// Random multipath drawn per trial; replaces `taps` when set.
    pub multipath: Option<MultipathProfile>,
    /// CFO drawn uniformly from `±cfo_hz_max` per trial.
    pub cfo_hz_max: f64,
    /// Leading idle samples before the packet.
    pub guard_samples: usize,
    /// Extra random leading samples, uniform in `0..=timing_jitter`.
    pub timing_jitter: usize,
    /// Idle samples after the packet.
    pub tail_samples: usize,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self {
            taps: vec![[1.0, 0.0]],
            multipath: None,
            cfo_hz_max: 0.0,
            guard_samples: 200,
            timing_jitter: 0,
            tail_samples: 200,
        }
    }
}

impl ChannelProfile {
    pub fn fixed_taps(&self) -> Vec<Complex64> {
        self.taps.iter().map(|t| Complex64::new(t[0], t[1])).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.taps.is_empty() || (self.taps[0][0] == 0.0 && self.taps[0][1] == 0.0) {
            return Err(Error::Config("channel.taps needs a nonzero first tap".into()));
        }
        if let Some(m) = &self.multipath {
            m.validate()?;
        }
        if !(self.cfo_hz_max.is_finite() && self.cfo_hz_max >= 0.0) {
            return Err(Error::Config("channel.cfo_hz_max must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovertSpec {
    /// First covert sample relative to the packet start.
    pub start_offset: usize,
    /// Seed of the code generator; the default gives the standard code.
    pub code_seed: [u8; 6],
}

impl Default for CovertSpec {
    fn default() -> Self {
        Self {
            start_offset: PREAMBLE_LEN,
            code_seed: CODE_SEED,
        }
    }
}

impl CovertSpec {
    pub fn code(&self) -> Result<SpreadingCode> {
        SpreadingCode::from_seed(&self.code_seed).map_err(|e| Error::Config(format!("covert.code_seed: {e}")))
    }
}

/// Parameters of the synthetic over-the-air corpus, or a list of captures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtaSpec {
    /// IQ files to replay; empty means synthesise `packets_per_point`
    /// recordings.
    pub recordings: Vec<PathBuf>,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub cfo_hz_max: f64,
    pub multipath: MultipathProfile,
    pub capture_rate_hz: f64,
}

impl Default for OtaSpec {
    fn default() -> Self {
        Self {
            recordings: Vec::new(),
            snr_min_db: 29.0,
            snr_max_db: 31.0,
            cfo_hz_max: 40e3,
            multipath: MultipathProfile {
                min_taps: 2,
                max_taps: 4,
                decay_db_per_tap: 6.0,
            },
            capture_rate_hz: 40e6,
        }
    }
}

/// Transmit mask as `[offset_hz, level_dbr]` breakpoints, linearly
/// interpolated and held flat beyond the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSpec {
    pub breakpoints: Vec<[f64; 2]>,
    /// Rate the buffer is resampled to before the PSD, so the mask can be
    /// checked out to its last breakpoint.
    pub analysis_rate_hz: f64,
    pub nfft: usize,
    /// DC delta above this (dB relative to the occupied-bin average) is flagged.
    pub dc_flag_db: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            breakpoints: vec![[9e6, 0.0], [11e6, -20.0], [20e6, -28.0], [30e6, -40.0]],
            analysis_rate_hz: 80e6,
            nfft: 1024,
            dc_flag_db: -30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; defaults to the experiment kind.
    pub name: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            name: None,
        }
    }
}

fn default_mcs() -> Vec<u8> {
    vec![7]
}

fn default_packets() -> usize {
    200
}

fn default_octets() -> usize {
    1000
}

fn default_seed() -> u64 {
    1
}

/// One experiment, as read from its JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_mcs")]
    pub mcs: Vec<u8>,
    #[serde(default, with = "db_grid")]
    pub snr_db: Vec<f64>,
    #[serde(default, with = "db_grid")]
    pub sir_db: Vec<f64>,
    #[serde(default = "default_packets")]
    pub packets_per_point: usize,
    #[serde(default = "default_octets")]
    pub psdu_octets: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelProfile,
    #[serde(default)]
    pub covert: CovertSpec,
    #[serde(default)]
    pub ota: OtaSpec,
    #[serde(default)]
    pub mask: MaskSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn check_grid(name: &str, g: &[f64], required: bool) -> Result<()> {
    if required && g.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if g.iter().any(|v| v.is_nan()) {
        return Err(Error::Config(format!("{name} contains NaN")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn mcs_list(&self) -> Result<Vec<Mcs>> {
        self.mcs.iter().map(|&m| Mcs::new(m).map_err(|e| Error::Config(e.to_string()))).collect()
    }

    pub fn name(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        self.mcs_list()?;
        if self.mcs.is_empty() {
            return Err(Error::Config("mcs must not be empty".into()));
        }
        if self.packets_per_point == 0 {
            return Err(Error::Config("packets_per_point must be >= 1".into()));
        }
        if self.psdu_octets == 0 || self.psdu_octets > MAX_PSDU_OCTETS {
            return Err(Error::Config(format!("psdu_octets must be in 1..={MAX_PSDU_OCTETS}")));
        }
        let needs_snr = matches!(self.kind, BaselinePer | PerVsSir | CovertBerNocancel | CovertBerCancel);
        let needs_sir = matches!(self.kind, PerVsSir | CovertBerNocancel | CovertBerCancel | OtaReplay | MaskCheck);
        check_grid("snr_db", &self.snr_db, needs_snr)?;
        check_grid("sir_db", &self.sir_db, needs_sir)?;
        self.channel.validate()?;
        self.covert.code()?;
        let o = &self.ota;
        if !(o.snr_min_db.is_finite() && o.snr_max_db.is_finite() && o.snr_min_db <= o.snr_max_db) {
            return Err(Error::Config("ota SNR range must be finite with min <= max".into()));
        }
        o.multipath.validate()?;
        if !(o.capture_rate_hz > 0.0 && o.cfo_hz_max >= 0.0) {
            return Err(Error::Config("ota.capture_rate_hz must be > 0 and cfo_hz_max >= 0".into()));
        }
        let m = &self.mask;
        if m.breakpoints.is_empty() || m.breakpoints.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::Config("mask.breakpoints must be nonempty with increasing offsets".into()));
        }
        if m.nfft < 64 || !m.nfft.is_power_of_two() {
            return Err(Error::Config("mask.nfft must be a power of two >= 64".into()));
        }
        Ok(())
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the JSON
    /// form of the spec and must already exist; values are parsed as JSON,
    /// falling back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let value = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
            let mut slot = &mut doc;
            for part in key.trim().split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|m| m.get_mut(part))
                    .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
            }
            *slot = value;
        }
        let spec: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let s = ExperimentSpec::from_json(r#"{"kind": "baseline_per", "mcs": [0, 7], "snr_db": [5, 10.5]}"#).unwrap();
        assert_eq!(s.packets_per_point, 200);
        assert_eq!(s.psdu_octets, 1000);
        assert_eq!(s.snr_db, vec![5.0, 10.5]);
        assert_eq!(s.name(), "baseline_per");
    }

    #[test]
    fn infinite_grid_values_round_trip() {
        let s = ExperimentSpec::from_json(
            r#"{"kind": "per_vs_sir", "snr_db": [21, 23, "inf"], "sir_db": [0, 30, "inf"]}"#,
        )
        .unwrap();
        assert_eq!(s.snr_db[2], f64::INFINITY);
        let back = ExperimentSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            r#"{"kind": "baseline_per", "snr_db": []}"#,
            r#"{"kind": "baseline_per", "snr_db": [3, 3]}"#,
            r#"{"kind": "baseline_per", "snr_db": [3], "packets_per_point": 0}"#,
            r#"{"kind": "baseline_per", "snr_db": [3], "mcs": [8]}"#,
            r#"{"kind": "baseline_per", "snr_db": [3], "bogus": 1}"#,
            r#"{"kind": "per_vs_sir", "snr_db": [3]}"#,
            r#"{"kind": "nope"}"#,
        ] {
            assert!(ExperimentSpec::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides() {
        let s = ExperimentSpec::from_json(r#"{"kind": "baseline_per", "snr_db": [3]}"#).unwrap();
        let t = s
            .with_overrides(&["packets_per_point=50", "channel.cfo_hz_max=1000", "sir_db=[1, \"inf\"]"])
            .unwrap();
        assert_eq!(t.packets_per_point, 50);
        assert_eq!(t.channel.cfo_hz_max, 1000.0);
        assert_eq!(t.sir_db, vec![1.0, f64::INFINITY]);
        let t = s.with_overrides(&["output.name=run1"]).unwrap();
        assert_eq!(t.name(), "run1");
        assert!(s.with_overrides(&["nonexistent=1"]).is_err());
        assert!(s.with_overrides(&["channel.nonexistent=1"]).is_err());
        assert!(s.with_overrides(&["packets_per_point"]).is_err());
        assert!(s.with_overrides(&["packets_per_point=0"]).is_err());
    }
}
