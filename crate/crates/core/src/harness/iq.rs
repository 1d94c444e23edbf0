use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::ComplexBuffer;

/// Sidecar metadata stored as `<name>.json` next to the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqMetadata {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    pub description: String,
    /// Anything else a writer wants to record (injection parameters, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty", flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqRecording {
    pub samples: ComplexBuffer,
    pub metadata: IqMetadata,
}

impl IqRecording {
    pub fn new(samples: ComplexBuffer, description: impl Into<String>) -> Self {
        let metadata = IqMetadata {
            sample_rate_hz: samples.sample_rate_hz(),
            center_freq_hz: 0.0,
            description: description.into(),
            extra: Default::default(),
        };
        Self { samples, metadata }
    }
}

/// `capture.iq` → `capture.json`; `capture` → `capture.json`.
pub fn sidecar_path(iq: &Path) -> PathBuf {
    iq.with_extension("json")
}

/// Raw interleaved little-endian f32 I/Q pairs plus the JSON sidecar.
pub fn write_iq(path: impl AsRef<Path>, rec: &IqRecording) -> Result<()> {
    let path = path.as_ref();
    if (rec.metadata.sample_rate_hz - rec.samples.sample_rate_hz()).abs() > 1e-9 * rec.metadata.sample_rate_hz {
        return Err(Error::InvalidInput("sidecar sample rate disagrees with the buffer".into()));
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for s in &rec.samples.samples {
        w.write_all(&(s.re as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
        w.write_all(&(s.im as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&rec.metadata)?;
    std::fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_iq(path: impl AsRef<Path>) -> Result<IqRecording> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let metadata: IqMetadata =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", side.display())))?;
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(f).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidInput(format!(
            "{}: {} bytes is not a whole number of f32 I/Q pairs",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(IqRecording {
        samples: ComplexBuffer::new(samples, metadata.sample_rate_hz)?,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.iq");
        let x: Vec<Complex64> = (0..100).map(|i| Complex64::new(i as f64 * 0.25, -(i as f64) / 8.0)).collect();
        let mut rec = IqRecording::new(ComplexBuffer::new(x.clone(), 40e6).unwrap(), "test capture");
        rec.metadata.extra.insert("sir_db".into(), 35.0.into());
        write_iq(&path, &rec).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 800);
        let back = read_iq(&path).unwrap();
        assert_eq!(back, rec);
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("cap.json")).unwrap()).unwrap();
        assert_eq!(side["sample_rate_hz"], 40e6);
        assert_eq!(side["description"], "test capture");
    }

    #[test]
    fn missing_sidecar_or_ragged_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        std::fs::write(&path, [0u8; 12]).unwrap();
        assert!(read_iq(&path).is_err());
        std::fs::write(
            dir.path().join("x.json"),
            r#"{"sample_rate_hz": 20e6, "center_freq_hz": 0, "description": ""}"#,
        )
        .unwrap();
        assert!(read_iq(&path).is_err());
        std::fs::write(&path, [0u8; 16]).unwrap();
        assert_eq!(read_iq(&path).unwrap().samples.len(), 2);
    }
}
