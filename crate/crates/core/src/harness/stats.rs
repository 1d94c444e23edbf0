use serde::{Deserialize, Serialize};

/// Wilson score interval at 95% for `errors` out of `trials`.
pub fn wilson_ci95(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub rate: f64,
    pub wilson_ci95: (f64, f64),
    pub mean_suppression_db: Option<f64>,
    /// Packets the receiver never found; excluded from `trials`.
    pub detection_failures: u64,
}

impl CurvePoint {
    pub fn new(x_db: f64, trials: u64, errors: u64) -> Self {
        Self {
            x_db,
            trials,
            errors,
            rate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            wilson_ci95: wilson_ci95(errors, trials),
            mean_suppression_db: None,
            detection_failures: 0,
        }
    }

    pub fn ci_lo(&self) -> f64 {
        self.wilson_ci95.0
    }

    pub fn ci_hi(&self) -> f64 {
        self.wilson_ci95.1
    }

    /// The two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &CurvePoint) -> bool {
        self.ci_hi() < other.ci_lo() || other.ci_hi() < self.ci_lo()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Snr,
    Sir,
}

/// One line of a figure: points swept along `axis` with the other
/// parameters fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub experiment: String,
    pub label: String,
    pub mcs: Option<u8>,
    pub axis: Axis,
    /// The parameter held fixed along the curve (SNR on SIR sweeps and vice
    /// versa); `None` if not applicable.
    pub fixed_db: Option<f64>,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn point_at(&self, x_db: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.x_db == x_db)
    }
}
