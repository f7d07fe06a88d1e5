//! One-parameter-at-a-time sweeps over a base scenario.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{run_scenario, RunResult};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::netem::LinkRate;
use crate::pdcp::DcMode;
use crate::sim::SimTime;
use crate::transport::{CcAlgorithm, DEFAULT_RECV_BUFFER, ENLARGED_RECV_BUFFER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    BatchSize,
    /// `a:b` packets per batch on link 1 and link 2.
    SplitRatio,
    /// Percentage of each batch sent on link 1.
    SplitPct,
    /// `a:b` link rates, aggregate held at the base scenario's sum.
    BandwidthRatio,
    /// Like `BandwidthRatio`, with the split ratio set to match.
    BandwidthRatioMatchedSplit,
    /// `a:b` mean delays, sum held; jitter stays at 10 % of each mean.
    DelayRatio,
    /// Loss probability on both links.
    LossProb,
    /// Duplicate mode with the given loss probability on both links.
    DuplicationLoss,
    CcAlgorithm,
    /// `default`, `enlarged`, `unbounded` or a size in bytes.
    RecvBuffer,
    /// Rate of both links in Mbps.
    BandwidthMbps,
    /// Mean delay of both links in ms.
    DelayMs,
    /// Drop-tail limit of both link queues, packets.
    QueueLimit,
}

impl Parameter {
    pub const ALL: [Parameter; 13] = [
        Parameter::BatchSize,
        Parameter::SplitRatio,
        Parameter::SplitPct,
        Parameter::BandwidthRatio,
        Parameter::BandwidthRatioMatchedSplit,
        Parameter::DelayRatio,
        Parameter::LossProb,
        Parameter::DuplicationLoss,
        Parameter::CcAlgorithm,
        Parameter::RecvBuffer,
        Parameter::BandwidthMbps,
        Parameter::DelayMs,
        Parameter::QueueLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::BatchSize => "batch_size",
            Parameter::SplitRatio => "split_ratio",
            Parameter::SplitPct => "split_pct",
            Parameter::BandwidthRatio => "bandwidth_ratio",
            Parameter::BandwidthRatioMatchedSplit => "bandwidth_ratio_matched_split",
            Parameter::DelayRatio => "delay_ratio",
            Parameter::LossProb => "loss_prob",
            Parameter::DuplicationLoss => "duplication_loss",
            Parameter::CcAlgorithm => "cc_algorithm",
            Parameter::RecvBuffer => "recv_buffer",
            Parameter::BandwidthMbps => "bandwidth_mbps",
            Parameter::DelayMs => "delay_ms",
            Parameter::QueueLimit => "queue_limit",
        }
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(self, base: &Scenario, value: &str) -> Result<Scenario> {
        let invalid = |reason: &str| Error::InvalidValue {
            parameter: self.name().into(),
            value: value.into(),
            reason: reason.into(),
        };
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| invalid("expected a number"))
        };
        let prob = || {
            let p = num()?;
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(invalid("probability must be in [0,1]"))
            }
        };
        let mut s = base.clone();
        match self {
            Parameter::BatchSize => {
                let b = value
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| invalid("expected a positive integer"))?;
                if b == 0 {
                    return Err(invalid("batch size must be at least 1"));
                }
                s.splitter.batch_size = b;
            }
            Parameter::SplitRatio => {
                s.splitter.ratio = parse_int_ratio(value).ok_or_else(|| invalid("expected a:b"))?;
            }
            Parameter::SplitPct => {
                let p = num()?;
                if !(0.0..=100.0).contains(&p) || p.fract() != 0.0 {
                    return Err(invalid("expected an integer percentage in [0,100]"));
                }
                s.splitter.ratio = (p as u32, 100 - p as u32);
            }
            Parameter::BandwidthRatio | Parameter::BandwidthRatioMatchedSplit => {
                let (a, b) = parse_ratio(value).ok_or_else(|| invalid("expected a:b"))?;
                let total: f64 = base
                    .links
                    .iter()
                    .map(|l| match l.rate {
                        LinkRate::Fixed(r) => Ok(r),
                        LinkRate::Trace(_) => Err(invalid("base links must have fixed rates")),
                    })
                    .sum::<Result<f64>>()?;
                s.links[0].rate = LinkRate::Fixed(total * a / (a + b));
                s.links[1].rate = LinkRate::Fixed(total * b / (a + b));
                if self == Parameter::BandwidthRatioMatchedSplit {
                    s.splitter.ratio = parse_int_ratio(value)
                        .ok_or_else(|| invalid("matched split needs an integer ratio"))?;
                }
            }
            Parameter::DelayRatio => {
                let (a, b) = parse_ratio(value).ok_or_else(|| invalid("expected a:b"))?;
                let total = (base.links[0].delay_mean + base.links[1].delay_mean).as_secs_f64();
                for (link, share) in s.links.iter_mut().zip([a, b]) {
                    link.delay_mean = SimTime::from_secs_f64(total * share / (a + b));
                    link.delay_std = link.delay_mean.mul_f64(0.1);
                }
            }
            Parameter::LossProb => {
                let p = prob()?;
                s.links.iter_mut().for_each(|l| l.loss_prob = p);
            }
            Parameter::DuplicationLoss => {
                let p = prob()?;
                s.links.iter_mut().for_each(|l| l.loss_prob = p);
                s.splitter.mode = DcMode::Duplicate;
            }
            Parameter::CcAlgorithm => {
                let cc = CcAlgorithm::from_str(value).map_err(|e| invalid(&e))?;
                s.flows.iter_mut().for_each(|f| f.transport.cc = cc);
            }
            Parameter::RecvBuffer => {
                let buf = parse_recv_buffer(value).ok_or_else(|| {
                    invalid("expected default, enlarged, unbounded or a byte count")
                })?;
                s.flows
                    .iter_mut()
                    .for_each(|f| f.transport.recv_buffer = buf);
            }
            Parameter::BandwidthMbps => {
                let r = num()?;
                if r <= 0.0 {
                    return Err(invalid("rate must be positive"));
                }
                s.links
                    .iter_mut()
                    .for_each(|l| l.rate = LinkRate::Fixed(r * 1e6));
            }
            Parameter::DelayMs => {
                let d = num()?;
                if d < 0.0 {
                    return Err(invalid("delay must be non-negative"));
                }
                for l in &mut s.links {
                    l.delay_mean = SimTime::from_millis_f64(d);
                    l.delay_std = l.delay_mean.mul_f64(0.1);
                }
            }
            Parameter::QueueLimit => {
                let q = value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| invalid("expected a packet count"))?;
                s.links.iter_mut().for_each(|l| l.queue_limit = q);
            }
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = match s.trim() {
            "split_percent" => Parameter::SplitPct,
            "loss" => Parameter::LossProb,
            "cc" => Parameter::CcAlgorithm,
            "bandwidth" => Parameter::BandwidthMbps,
            "delay" => Parameter::DelayMs,
            other => *Parameter::ALL
                .iter()
                .find(|p| p.name() == other)
                .ok_or_else(|| Error::UnknownParameter(other.into()))?,
        };
        Ok(p)
    }
}

/// `"a:b"` with positive reals, or a bare number meaning `a:1`.
pub fn parse_ratio(s: &str) -> Option<(f64, f64)> {
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.trim().parse().ok()?, b.trim().parse().ok()?),
        None => (s.trim().parse().ok()?, 1.0),
    };
    (a >= 0.0 && b >= 0.0 && a + b > 0.0 && f64::is_finite(a + b)).then_some((a, b))
}

/// `"a:b"` with non-negative integers, not both zero.
pub fn parse_int_ratio(s: &str) -> Option<(u32, u32)> {
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.trim().parse().ok()?, b.trim().parse().ok()?),
        None => (s.trim().parse().ok()?, 1),
    };
    (a + b > 0).then_some((a, b))
}

/// Receive buffer by name or byte count; `Some(None)` means unbounded.
pub fn parse_recv_buffer(s: &str) -> Option<Option<u64>> {
    match s.trim() {
        "default" => Some(Some(DEFAULT_RECV_BUFFER)),
        "enlarged" => Some(Some(ENLARGED_RECV_BUFFER)),
        "unbounded" => Some(None),
        n => n.parse::<u64>().ok().filter(|b| *b > 0).map(Some),
    }
}

/// Expands a value list: comma-separated items, each either a literal or
/// an inclusive numeric range `lo..hi step k`.
pub fn parse_values(spec: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = match rest.split_once("step") {
                Some((hi, step)) => (hi, step.trim()),
                None => (rest, "1"),
            };
            let bad = || Error::Config(format!("bad range `{item}`, expected `lo..hi step k`"));
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let step: f64 = step.parse().map_err(|_| bad())?;
            if step <= 0.0 || hi < lo {
                return Err(bad());
            }
            let n = ((hi - lo) / step + 1e-9).floor() as u64;
            out.extend((0..=n).map(|i| format_number(lo + step * i as f64)));
        } else {
            out.push(item.to_string());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty value list".into()));
    }
    Ok(out)
}

fn format_number(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub result: RunResult,
}

/// Runs `base` once per value of `parameter`.
pub fn sweep(base: &Scenario, parameter: Parameter, values: &[String]) -> Result<Vec<SweepPoint>> {
    let scenarios = values
        .iter()
        .map(|v| parameter.apply(base, v).map(|s| (v.clone(), s)))
        .collect::<Result<Vec<_>>>()?;
    scenarios
        .into_par_iter()
        .map(|(value, s)| {
            Ok(SweepPoint {
                value,
                result: run_scenario(&s)?,
            })
        })
        .collect()
}
