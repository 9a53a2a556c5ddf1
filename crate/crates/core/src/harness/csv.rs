//! Curve points and their CSV form.
//!
//! Floats are written with 17 significant digits, so a parse of an emitted
//! file returns the exact bits that were written.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "snr_db,metric,value,ci_halfwidth,trials";

/// One value of one metric at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub metric: String,
    pub value: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

fn point_order(a: &CurvePoint, b: &CurvePoint) -> Ordering {
    a.metric
        .cmp(&b.metric)
        .then_with(|| a.snr_db.total_cmp(&b.snr_db))
}

/// Renders points sorted by (metric, snr_db).
pub fn to_csv_string(points: &[CurvePoint]) -> String {
    let mut sorted: Vec<&CurvePoint> = points.iter().collect();
    sorted.sort_by(|a, b| point_order(a, b));
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in sorted {
        writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{}",
            p.snr_db, p.metric, p.value, p.ci_halfwidth, p.trials
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn emit_csv(points: &[CurvePoint], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(points)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv_str(text: &str, path: &Path) -> Result<Vec<CurvePoint>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(parse_err(
                1,
                format!("expected header `{CSV_HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                lineno,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let float = |s: &str, name: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("{name}: {e}")))
        };
        points.push(CurvePoint {
            snr_db: float(fields[0], "snr_db")?,
            metric: fields[1].trim().to_string(),
            value: float(fields[2], "value")?,
            ci_halfwidth: float(fields[3], "ci_halfwidth")?,
            trials: fields[4]
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("trials: {e}")))?,
        });
    }
    Ok(points)
}

pub fn parse_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv_str(&text, path)
}

/// Points of one metric, ordered by SNR.
pub fn metric_curve(points: &[CurvePoint], metric: &str) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = points
        .iter()
        .filter(|p| p.metric == metric)
        .cloned()
        .collect();
    out.sort_by(point_order);
    out
}
