//! Output writers: summary JSON plus plot-ready CSV.
//!
//! Throughput is printed with 3 decimals and JFI with 4.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{Parameter, RunResult, SweepPoint};

/// Identifies a run in its outputs.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunMeta {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_figure: Option<String>,
    pub seed: u64,
    pub repetitions: u32,
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    meta: &'a RunMeta,
    result: &'a RunResult,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    #[serde(flatten)]
    meta: &'a RunMeta,
    parameter: &'a str,
    points: &'a [SweepPoint],
}

/// One line of `sweep.csv`: one sweep point and one flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub parameter: String,
    pub value: String,
    pub flow_id: usize,
    pub connectivity: String,
    pub throughput_mean_mbps: String,
    pub throughput_std_mbps: String,
    pub combined_mean_mbps: String,
    pub jfi: String,
    pub retransmissions: String,
    pub buffer_drops: String,
    pub timer_expiries: String,
    pub window_violations: String,
    pub flagged: bool,
    pub seed: u64,
}

fn mbps(x: f64) -> String {
    format!("{x:.3}")
}

fn count(x: f64) -> String {
    format!("{x:.1}")
}

pub fn jfi_str(x: f64) -> String {
    format!("{x:.4}")
}

fn time_str(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    format!("{r}")
}

/// `time_s,flow_id,throughput_mbps`, one row per bin and flow; `time_s` is the bin start.
pub fn throughput_csv(r: &RunResult) -> String {
    let mut out = String::from("time_s,flow_id,throughput_mbps\n");
    let bins = r
        .flows
        .iter()
        .map(|f| f.series_mbps.len())
        .max()
        .unwrap_or(0);
    for b in 0..bins {
        for f in &r.flows {
            let v = f.series_mbps.get(b).copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{},{},{}",
                time_str(b as f64 * r.bin_s),
                f.flow_id,
                mbps(v)
            );
        }
    }
    out
}

/// `time_s,link_id,utilization` with link ids 1 and 2.
pub fn utilization_csv(r: &RunResult) -> String {
    let mut out = String::from("time_s,link_id,utilization\n");
    let bins = r
        .links
        .iter()
        .map(|l| l.utilization.len())
        .max()
        .unwrap_or(0);
    for b in 0..bins {
        for l in &r.links {
            let v = l.utilization.get(b).copied().unwrap_or(0.0);
            let _ = writeln!(out, "{},{},{v:.4}", time_str(b as f64 * r.bin_s), l.link_id);
        }
    }
    out
}

pub fn summary_json(meta: &RunMeta, r: &RunResult) -> Result<String> {
    serde_json::to_string_pretty(&Summary { meta, result: r }).map_err(|e| Error::Io(e.to_string()))
}

pub fn report_rows(scenario: &str, parameter: Parameter, points: &[SweepPoint]) -> Vec<ReportRow> {
    points
        .iter()
        .flat_map(|p| {
            let r = &p.result;
            r.flows.iter().map(move |f| ReportRow {
                scenario: scenario.to_string(),
                parameter: parameter.name().to_string(),
                value: p.value.clone(),
                flow_id: f.flow_id,
                connectivity: f.connectivity.clone(),
                throughput_mean_mbps: mbps(f.throughput_mbps.mean),
                throughput_std_mbps: mbps(f.throughput_mbps.std),
                combined_mean_mbps: mbps(f.combined_mbps.mean),
                jfi: r.jfi.map(|j| jfi_str(j.mean)).unwrap_or_default(),
                retransmissions: count(f.counters.retransmissions),
                buffer_drops: count(f.counters.buffer_drops),
                timer_expiries: count(f.counters.timer_expiries),
                window_violations: count(f.counters.window_violations),
                flagged: r.flagged,
                seed: r.seed,
            })
        })
        .collect()
}

pub fn rows_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Writes `summary.json`, `throughput.csv` and `utilization.csv` into `dir`.
pub fn write_run(dir: &Path, meta: &RunMeta, r: &RunResult) -> Result<()> {
    ensure_dir(dir)?;
    write(dir, "summary.json", &summary_json(meta, r)?)?;
    write(dir, "throughput.csv", &throughput_csv(r))?;
    write(dir, "utilization.csv", &utilization_csv(r))
}

pub fn sweep_json(meta: &RunMeta, parameter: Parameter, points: &[SweepPoint]) -> Result<String> {
    serde_json::to_string_pretty(&SweepSummary {
        meta,
        parameter: parameter.name(),
        points,
    })
    .map_err(|e| Error::Io(e.to_string()))
}

/// Writes `sweep.csv` and `summary.json` into `dir`.
pub fn write_sweep(
    dir: &Path,
    meta: &RunMeta,
    parameter: Parameter,
    points: &[SweepPoint],
) -> Result<()> {
    ensure_dir(dir)?;
    let rows = report_rows(&meta.scenario, parameter, points);
    write(dir, "sweep.csv", &rows_csv(&rows)?)?;
    write(dir, "summary.json", &sweep_json(meta, parameter, points)?)
}
