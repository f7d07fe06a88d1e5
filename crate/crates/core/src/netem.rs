//! Downlink path emulation: rate shaping (fixed or trace-driven), drop-tail
//! queue, Bernoulli loss at egress and normally distributed propagation delay.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RngStream, SimTime};

/// Default drop-tail limit, in packets.
pub const DEFAULT_QUEUE_LIMIT: usize = 1000;

/// Step-function bandwidth trace. Sample times are strictly increasing and
/// start at zero; replay loops once the span is exceeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    samples: Vec<(SimTime, f64)>,
    span: SimTime,
}

impl BandwidthTrace {
    /// Builds a trace from `(time, bits/second)` samples. The span is the last
    /// sample time plus the final sample's duration (the median sample spacing).
    pub fn new(samples: Vec<(SimTime, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Trace("trace has no samples".into()));
        }
        if samples[0].0 != SimTime::ZERO {
            return Err(Error::Trace("trace must start at t=0".into()));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Trace(format!(
                    "sample times not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some((t, r)) = samples.iter().find(|(_, r)| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Trace(format!("non-positive rate {r} at {t}")));
        }
        let last_step = if samples.len() > 1 {
            let mut gaps: Vec<u64> = samples
                .windows(2)
                .map(|w| (w[1].0 - w[0].0).as_micros())
                .collect();
            gaps.sort_unstable();
            SimTime::from_micros(gaps[gaps.len() / 2])
        } else {
            SimTime::from_secs(1)
        };
        let span = samples.last().expect("non-empty").0 + last_step;
        Ok(BandwidthTrace { samples, span })
    }

    /// Reads a canonical `time_s,throughput_kbps` CSV.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Trace(e.to_string()))?
            .clone();
        if headers.len() < 2 || &headers[0] != "time_s" || &headers[1] != "throughput_kbps" {
            return Err(Error::Trace(format!(
                "expected header `time_s,throughput_kbps`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Trace(e.to_string()))?;
            let row = i + 2;
            let t: f64 = rec[0]
                .parse()
                .map_err(|_| Error::Trace(format!("row {row}: bad time `{}`", &rec[0])))?;
            let kbps: f64 = rec[1]
                .parse()
                .map_err(|_| Error::Trace(format!("row {row}: bad rate `{}`", &rec[1])))?;
            samples.push((SimTime::from_secs_f64(t), kbps * 1e3));
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[(SimTime, f64)] {
        &self.samples
    }

    pub fn span(&self) -> SimTime {
        self.span
    }

    /// Rate of the last sample at or before `t` (looping).
    pub fn rate_at(&self, t: SimTime) -> f64 {
        let t = SimTime::from_micros(t.as_micros() % self.span.as_micros());
        let idx = self.samples.partition_point(|(st, _)| *st <= t);
        self.samples[idx - 1].1
    }

    /// Time of the next rate change strictly after `t`.
    fn next_change_after(&self, t: SimTime) -> SimTime {
        let span = self.span.as_micros();
        let base = t.as_micros() / span * span;
        let local = SimTime::from_micros(t.as_micros() - base);
        let idx = self.samples.partition_point(|(st, _)| *st <= local);
        let next_local = if idx < self.samples.len() {
            self.samples[idx].0.as_micros()
        } else {
            span
        };
        SimTime::from_micros(base + next_local)
    }

    /// Integral of the rate over `[from, to)`, in bits.
    pub fn bits_between(&self, from: SimTime, to: SimTime) -> f64 {
        let mut bits = 0.0;
        let mut t = from;
        while t < to {
            let next = self.next_change_after(t).min(to);
            bits += self.rate_at(t) * (next - t).as_secs_f64();
            t = next;
        }
        bits
    }

    /// Mean rate over `[from, to)`.
    pub fn mean_rate(&self, from: SimTime, to: SimTime) -> f64 {
        if to <= from {
            return self.rate_at(from);
        }
        self.bits_between(from, to) / (to - from).as_secs_f64()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BandwidthTrace {
            samples: self.samples.iter().map(|(t, r)| (*t, r * factor)).collect(),
            span: self.span,
        }
    }
}

/// Link capacity: a fixed rate or a replayed trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinkRate {
    Fixed(f64),
    Trace(BandwidthTrace),
}

impl LinkRate {
    pub fn rate_at(&self, t: SimTime) -> f64 {
        match self {
            LinkRate::Fixed(bps) => *bps,
            LinkRate::Trace(tr) => tr.rate_at(t),
        }
    }

    pub fn bits_between(&self, from: SimTime, to: SimTime) -> f64 {
        match self {
            LinkRate::Fixed(bps) => bps * (to.saturating_sub(from)).as_secs_f64(),
            LinkRate::Trace(tr) => tr.bits_between(from, to),
        }
    }

    /// Long-run average rate (whole trace span for traces).
    pub fn mean_rate(&self) -> f64 {
        match self {
            LinkRate::Fixed(bps) => *bps,
            LinkRate::Trace(tr) => tr.mean_rate(SimTime::ZERO, tr.span()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub rate: LinkRate,
    pub delay_mean: SimTime,
    pub delay_std: SimTime,
    pub loss_prob: f64,
    pub queue_limit: usize,
    /// Deliveries never overtake earlier deliveries on the same link.
    pub non_overtaking: bool,
}

impl LinkConfig {
    pub fn fixed(rate_bps: f64, delay_mean: SimTime) -> Self {
        LinkConfig {
            rate: LinkRate::Fixed(rate_bps),
            delay_mean,
            delay_std: delay_mean.mul_f64(0.1),
            loss_prob: 0.0,
            queue_limit: DEFAULT_QUEUE_LIMIT,
            non_overtaking: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LinkRate::Fixed(bps) = self.rate {
            if !(bps > 0.0 && bps.is_finite()) {
                return Err(Error::Config(format!(
                    "link rate must be positive, got {bps}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::Config(format!(
                "loss probability must be in [0,1], got {}",
                self.loss_prob
            )));
        }
        if self.queue_limit == 0 {
            return Err(Error::Config("queue_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_loss: u64,
    pub bytes_departed: u64,
    pub bytes_delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingress {
    /// Tail drop: the queue was full.
    QueueDrop,
    /// Serialized, then lost at egress.
    Lost { depart_at: SimTime },
    Deliver {
        depart_at: SimTime,
        deliver_at: SimTime,
    },
}

/// A contiguous stretch of service at one rate.
#[derive(Debug, Clone, Copy)]
struct Busy {
    start: SimTime,
    end: SimTime,
    rate: f64,
}

/// Runtime state of one emulated path.
#[derive(Debug)]
pub struct Link {
    cfg: LinkConfig,
    departures: VecDeque<SimTime>,
    last_departure: SimTime,
    last_delivery: SimTime,
    jitter: RngStream,
    loss: RngStream,
    counters: LinkCounters,
    busy: Vec<Busy>,
}

impl Link {
    /// `name` keys the link's jitter and loss streams.
    pub fn new(cfg: LinkConfig, name: &str, seed: u64) -> Self {
        Link {
            cfg,
            departures: VecDeque::new(),
            last_departure: SimTime::ZERO,
            last_delivery: SimTime::ZERO,
            jitter: RngStream::new(format!("{name}.jitter"), seed),
            loss: RngStream::new(format!("{name}.loss"), seed),
            counters: LinkCounters::default(),
            busy: Vec::new(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    pub fn rate_at(&self, t: SimTime) -> f64 {
        self.cfg.rate.rate_at(t)
    }

    /// Packets queued or in service at `t`.
    pub fn occupancy(&mut self, t: SimTime) -> usize {
        while self.departures.front().is_some_and(|d| *d <= t) {
            self.departures.pop_front();
        }
        self.departures.len()
    }

    pub fn last_departure(&self) -> SimTime {
        self.last_departure
    }

    /// Offers a packet of `size` bytes to the link at time `t`.
    pub fn ingress(&mut self, size: u32, t: SimTime) -> Ingress {
        self.counters.sent += 1;
        if self.occupancy(t) >= self.cfg.queue_limit {
            self.counters.dropped_queue += 1;
            return Ingress::QueueDrop;
        }
        let start = t.max(self.last_departure);
        let rate = self.rate_at(start);
        let service =
            SimTime::from_secs_f64(f64::from(size) * 8.0 / rate).max(SimTime::from_micros(1));
        let depart_at = start + service;
        self.last_departure = depart_at;
        self.departures.push_back(depart_at);
        self.counters.bytes_departed += u64::from(size);
        self.record_busy(start, depart_at, rate);

        if self.loss.bernoulli(self.cfg.loss_prob) {
            self.counters.dropped_loss += 1;
            return Ingress::Lost { depart_at };
        }
        let mut deliver_at = depart_at
            + self
                .jitter
                .draw_delay(self.cfg.delay_mean, self.cfg.delay_std);
        if self.cfg.non_overtaking {
            deliver_at = deliver_at.max(self.last_delivery);
        }
        self.last_delivery = self.last_delivery.max(deliver_at);
        self.counters.delivered += 1;
        self.counters.bytes_delivered += u64::from(size);
        Ingress::Deliver {
            depart_at,
            deliver_at,
        }
    }

    fn record_busy(&mut self, start: SimTime, end: SimTime, rate: f64) {
        if let Some(last) = self.busy.last_mut() {
            if last.end == start && last.rate == rate {
                last.end = end;
                return;
            }
        }
        self.busy.push(Busy { start, end, rate });
    }

    /// Bits serialized during `[from, to)`.
    pub fn bits_served(&self, from: SimTime, to: SimTime) -> f64 {
        let first = self.busy.partition_point(|b| b.end <= from);
        self.busy[first..]
            .iter()
            .take_while(|b| b.start < to)
            .map(|b| {
                let s = b.start.max(from);
                let e = b.end.min(to);
                if e > s {
                    (e - s).as_secs_f64() * b.rate
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Fraction of capacity used during `[from, to)`.
    pub fn utilization(&self, from: SimTime, to: SimTime) -> f64 {
        let capacity = self.cfg.rate.bits_between(from, to);
        if capacity <= 0.0 {
            return 0.0;
        }
        (self.bits_served(from, to) / capacity).clamp(0.0, 1.0)
    }
}
