use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiments::{PacketReport, RunResult};
use super::stats::{Axis, Curve};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "experiment,mcs,snr_db,sir_db,trials,errors,rate,ci_lo,ci_hi,mean_suppression_db,seed";

pub const PACKET_CSV_HEADER: &str = "experiment,mcs,snr_db,sir_db,trial,detected,packet_error,covert_bits,\
covert_errors,suppression_db,ofdm_bit_errors,scale_applied,phase_applied,mask_margin_db,dc_delta_db";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub packets_csv: PathBuf,
    pub svg: PathBuf,
    pub config: PathBuf,
}

/// `inf`/`-inf` for infinities, empty for NaN, otherwise the shortest
/// representation that round-trips.
fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn check_curves(curves: &[Curve]) -> Result<()> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::InvalidInput("no curves to write".into()));
    }
    Ok(())
}

fn to_csv(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory CSV");
    for r in rows {
        w.write_record(&r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8 fields")
}

/// One row per curve point.
pub fn curves_csv(curves: &[Curve], seed: u64) -> Result<String> {
    check_curves(curves)?;
    let rows = curves.iter().flat_map(|c| {
        c.points.iter().map(move |p| {
            let (snr, sir) = match c.axis {
                Axis::Snr => (Some(p.x_db), c.fixed_db),
                Axis::Sir => (c.fixed_db, Some(p.x_db)),
            };
            vec![
                c.experiment.clone(),
                opt(c.mcs),
                opt_num(snr),
                opt_num(sir),
                p.trials.to_string(),
                p.errors.to_string(),
                num(p.rate),
                num(p.ci_lo()),
                num(p.ci_hi()),
                opt_num(p.mean_suppression_db),
                seed.to_string(),
            ]
        })
    });
    Ok(to_csv(CSV_HEADER, rows))
}

pub fn packets_csv(packets: &[PacketReport]) -> String {
    let rows = packets.iter().map(|p| {
        vec![
            p.experiment.clone(),
            p.mcs.to_string(),
            num(p.snr_db),
            num(p.sir_db),
            p.trial.to_string(),
            p.detected.to_string(),
            opt(p.packet_error),
            p.covert_bits.to_string(),
            p.covert_errors.to_string(),
            opt_num(p.suppression_db),
            opt(p.ofdm_bit_errors),
            opt_num(p.scale_applied),
            opt_num(p.phase_applied),
            opt_num(p.mask_margin_db),
            opt_num(p.dc_delta_db),
        ]
    });
    to_csv(PACKET_CSV_HEADER, rows)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Error rate against the swept axis on a log scale. Zero rates are drawn
/// on the bottom edge; an infinite x (no noise / no interference) is drawn
/// one grid step past the largest finite value.
pub fn curves_svg(curves: &[Curve], title: &str) -> Result<String> {
    check_curves(curves)?;
    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 170.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let finite: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.x_db))
        .filter(|x| x.is_finite())
        .collect();
    let (mut x0, mut x1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    let has_inf = curves.iter().any(|c| c.points.iter().any(|p| p.x_db.is_infinite()));
    let step = ((x1 - x0) / 10.0).max(1.0);
    let x_inf = x1 + step;
    if has_inf {
        x1 = x_inf;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let positive = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.rate))
        .filter(|&r| r > 0.0)
        .fold(1.0f64, f64::min);
    let decade_lo = positive.log10().floor().min(-1.0) - 1.0;
    let y_of = |r: f64| {
        let l = if r > 0.0 { r.log10().max(decade_lo) } else { decade_lo };
        mt + ph * (0.0 - l) / (0.0 - decade_lo)
    };
    let x_of = |x: f64| {
        let x = if x.is_infinite() { x_inf } else { x };
        ml + pw * (x - x0) / (x1 - x0)
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        ml + pw / 2.0,
        xml_escape(title)
    )
    .unwrap();
    let mut d = decade_lo as i32;
    while d <= 0 {
        let y = y_of(10f64.powi(d));
        writeln!(
            s,
            r##"<line x1="{ml:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            ml + pw,
            ml - 6.0,
            y + 4.0
        )
        .unwrap();
        d += 1;
    }
    let mut xt = x0;
    while xt <= x1 - if has_inf { step } else { 0.0 } + 1e-9 {
        let x = x_of(xt);
        writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{mt:.1}" x2="{x:.1}" y2="{:.1}" stroke="#eee"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            mt + ph,
            mt + ph + 16.0,
            num((xt * 100.0).round() / 100.0)
        )
        .unwrap();
        xt += step;
    }
    if has_inf {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">inf</text>"#,
            x_of(f64::INFINITY),
            mt + ph + 16.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    let xlabel = match curves[0].axis {
        Axis::Snr => "SNR (dB)",
        Axis::Sir => "SIR (dB)",
    };
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
        ml + pw / 2.0,
        h - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">error rate</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    )
    .unwrap();
    for (i, c) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x_of(p.x_db), y_of(p.rate)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{colour}"/>"#).unwrap();
        }
        let ly = mt + 14.0 + 18.0 * i as f64;
        let label = match c.mcs {
            Some(m) if !c.label.starts_with("MCS") => format!("MCS {m}, {}", c.label),
            _ => c.label.clone(),
        };
        writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ml + pw + 10.0,
            ml + pw + 30.0,
            ml + pw + 36.0,
            ly + 4.0,
            xml_escape(&label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<name>.csv`, `<name>_packets.csv`, `<name>.svg` and the resolved
/// `<name>.config.json` under `dir`.
pub fn write_outputs(result: &RunResult, dir: impl AsRef<Path>, name: &str) -> Result<OutputPaths> {
    let dir = dir.as_ref();
    let csv = curves_csv(&result.curves, result.spec.seed)?;
    let svg = curves_svg(&result.curves, name)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        csv: dir.join(format!("{name}.csv")),
        packets_csv: dir.join(format!("{name}_packets.csv")),
        svg: dir.join(format!("{name}.svg")),
        config: dir.join(format!("{name}.config.json")),
    };
    write_file(&paths.csv, &csv)?;
    write_file(&paths.packets_csv, &packets_csv(&result.packets))?;
    write_file(&paths.svg, &svg)?;
    write_file(&paths.config, &(result.spec.to_json() + "\n"))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentKind, ExperimentSpec};
    use crate::harness::stats::CurvePoint;

    fn curve(label: &str, fixed: f64) -> Curve {
        let mut p = CurvePoint::new(30.0, 200, 3);
        p.mean_suppression_db = Some(-21.25);
        Curve {
            experiment: "per_vs_sir".into(),
            label: label.into(),
            mcs: Some(7),
            axis: Axis::Sir,
            fixed_db: Some(fixed),
            points: vec![CurvePoint::new(0.0, 200, 200), p, CurvePoint::new(f64::INFINITY, 200, 0)],
        }
    }

    fn result(curves: Vec<Curve>) -> RunResult {
        RunResult {
            spec: ExperimentSpec::new(ExperimentKind::PerVsSir),
            curves,
            packets: Vec::new(),
            skipped_recordings: 0,
        }
    }

    #[test]
    fn csv_schema() {
        let csv = curves_csv(&[curve("no noise", f64::INFINITY)], 42).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("per_vs_sir,7,inf,0,200,200,1,"), "{}", lines[1]);
        assert!(lines[2].contains(",-21.25,42"), "{}", lines[2]);
        assert!(lines[3].starts_with("per_vs_sir,7,inf,inf,200,0,0,0,"), "{}", lines[3]);
        for l in &lines {
            assert_eq!(l.split(',').count(), 11);
        }
    }

    #[test]
    fn empty_curve_set_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_outputs(&result(Vec::new()), dir.path(), "x").is_err());
        let mut c = curve("a", 21.0);
        c.points.clear();
        assert!(write_outputs(&result(vec![c]), dir.path(), "x").is_err());
    }

    #[test]
    fn four_curve_svg() {
        let curves: Vec<Curve> = [f64::INFINITY, 21.0, 23.0, 25.0]
            .iter()
            .map(|&s| curve(if s.is_infinite() { "no noise" } else { "SNR" }, s))
            .collect();
        let svg = curves_svg(&curves, "PER vs SIR").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("SIR (dB)"));
    }

    #[test]
    fn writes_files_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let r = result(vec![curve("a", 21.0)]);
        let p1 = write_outputs(&r, dir.path().join("a"), "run").unwrap();
        let p2 = write_outputs(&r, dir.path().join("b"), "run").unwrap();
        for (a, b) in [(&p1.csv, &p2.csv), (&p1.svg, &p2.svg), (&p1.packets_csv, &p2.packets_csv)] {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
        let spec: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(&p1.config).unwrap()).unwrap();
        assert_eq!(spec, r.spec);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        assert!(write_outputs(&result(vec![curve("a", 21.0)]), blocker.join("sub"), "run").is_err());
    }
}
