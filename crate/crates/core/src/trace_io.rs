//! Conversion of raw bandwidth logs into the canonical `time_s,throughput_kbps` CSV.

use std::fmt::Write as _;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw capture in the LTE dataset's column layout: timestamp in column 0,
/// downlink kbps in column 12. Synthetic stand-in averaging 4500 kbps over its
/// first 200 s.
pub const STATIC_A_RAW: &str = include_str!("../data/static_a_raw.csv");
pub const STATIC_A_TIME_COL: usize = 0;
pub const STATIC_A_RATE_COL: usize = 12;

/// Timestamp layout of the dataset, e.g. `2018.02.12_16.14.02`.
const DATASET_TIME_FORMAT: &str = "%Y.%m.%d_%H.%M.%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    Kbps,
    Mbps,
}

impl RateUnit {
    fn to_kbps(self, x: f64) -> f64 {
        match self {
            RateUnit::Kbps => x,
            RateUnit::Mbps => x * 1000.0,
        }
    }
}

impl std::str::FromStr for RateUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kbps" => Ok(RateUnit::Kbps),
            "mbps" => Ok(RateUnit::Mbps),
            other => Err(Error::Config(format!(
                "rate unit must be kbps or mbps, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvertOptions {
    /// Zero-based column indices.
    pub time_col: usize,
    pub rate_col: usize,
    pub rate_unit: RateUnit,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            time_col: 0,
            rate_col: 1,
            rate_unit: RateUnit::Kbps,
        }
    }
}

fn split_row(line: &str) -> Vec<&str> {
    for d in [',', '\t', ';'] {
        if line.contains(d) {
            return line.split(d).map(str::trim).collect();
        }
    }
    line.split_whitespace().collect()
}

/// Seconds from a numeric cell or a dataset-style timestamp.
fn parse_time(cell: &str) -> Option<f64> {
    if let Ok(x) = cell.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    NaiveDateTime::parse_from_str(cell, DATASET_TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc().timestamp() as f64)
}

/// Extracts `(time_s, kbps)` pairs with times rebased to start at 0.
///
/// A first line whose selected cells are not numeric is taken as a header.
/// Any later non-numeric cell is an error naming its 1-based line number.
pub fn parse_raw(text: &str, opts: ConvertOptions) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let header_allowed = std::mem::take(&mut first);
        let cells = split_row(line);
        let cell = |c: usize| {
            cells.get(c).copied().ok_or_else(|| {
                Error::Trace(format!(
                    "line {line_no}: missing column {c} ({} columns)",
                    cells.len()
                ))
            })
        };
        let (tc, rc) = (cell(opts.time_col)?, cell(opts.rate_col)?);
        let parsed = (
            parse_time(tc),
            rc.parse::<f64>().ok().filter(|r| r.is_finite()),
        );
        match parsed {
            (Some(t), Some(r)) => rows.push((t, opts.rate_unit.to_kbps(r))),
            _ if header_allowed => continue,
            (None, _) => {
                return Err(Error::Trace(format!(
                    "line {line_no}: non-numeric time `{tc}`"
                )))
            }
            (_, None) => {
                return Err(Error::Trace(format!(
                    "line {line_no}: non-numeric rate `{rc}`"
                )))
            }
        }
    }
    let Some(&(t0, _)) = rows.first() else {
        return Err(Error::Trace("no data rows".into()));
    };
    for r in &mut rows {
        r.0 -= t0;
    }
    Ok(rows)
}

fn fmt_num(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

/// Converts a raw log into canonical CSV text.
pub fn convert(text: &str, opts: ConvertOptions) -> Result<String> {
    let rows = parse_raw(text, opts)?;
    let mut out = String::from("time_s,throughput_kbps\n");
    for (t, r) in rows {
        let _ = writeln!(out, "{},{}", fmt_num(t), fmt_num(r));
    }
    Ok(out)
}

/// Canonical CSV for a bundled trace name.
pub fn bundled_trace(name: &str) -> Option<String> {
    match name {
        "static-a" => convert(
            STATIC_A_RAW,
            ConvertOptions {
                time_col: STATIC_A_TIME_COL,
                rate_col: STATIC_A_RATE_COL,
                rate_unit: RateUnit::Kbps,
            },
        )
        .ok(),
        _ => None,
    }
}

pub const BUNDLED_TRACES: &[&str] = &["static-a"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netem::BandwidthTrace;
    use crate::sim::SimTime;

    #[test]
    fn canonical_input_is_identity() {
        let text = "time_s,throughput_kbps\n0,4500\n1,4200.5\n2,3900\n";
        assert_eq!(convert(text, ConvertOptions::default()).unwrap(), text);
    }

    #[test]
    fn mbps_scaled_to_kbps() {
        let text = "t,rate\n10,4.5\n11,2\n";
        let out = convert(
            text,
            ConvertOptions {
                rate_unit: RateUnit::Mbps,
                ..ConvertOptions::default()
            },
        )
        .unwrap();
        assert_eq!(out, "time_s,throughput_kbps\n0,4500\n1,2000\n");
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let text = "t,rate\n0,100\n1,abc\n";
        let err = convert(text, ConvertOptions::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn whitespace_and_tab_delimiters() {
        let a = convert("0 10\n1 20\n", ConvertOptions::default()).unwrap();
        let b = convert("0\t10\n1\t20\n", ConvertOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_capture_averages_4500_over_200s() {
        let csv = bundled_trace("static-a").unwrap();
        let trace = BandwidthTrace::from_csv_str(&csv).unwrap();
        let mean_kbps = trace.mean_rate(SimTime::ZERO, SimTime::from_secs(200)) / 1e3;
        assert!((mean_kbps - 4500.0).abs() < 1.0, "{mean_kbps}");
        assert_eq!(trace.samples()[0].0, SimTime::ZERO);
    }
}
