use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::cc::{new_controller, CongestionControl};
use super::{AckFrame, RangeSet, TransportConfig, TransportPacket, PACKET_THRESHOLD};
use crate::sim::SimTime;

const INITIAL_RTT: SimTime = SimTime::from_millis(333);
const GRANULARITY: SimTime = SimTime::from_millis(1);

/// Smoothed RTT estimator with gains 1/8 and 1/4.
#[derive(Debug, Clone, Copy)]
pub struct RttEstimator {
    pub srtt: SimTime,
    pub rttvar: SimTime,
    pub min_rtt: SimTime,
    pub latest_rtt: SimTime,
    pub has_sample: bool,
}

impl Default for RttEstimator {
    fn default() -> Self {
        RttEstimator {
            srtt: INITIAL_RTT,
            rttvar: SimTime::from_micros(INITIAL_RTT.as_micros() / 2),
            min_rtt: SimTime::MAX,
            latest_rtt: SimTime::ZERO,
            has_sample: false,
        }
    }
}

impl RttEstimator {
    pub fn update(&mut self, latest: SimTime, ack_delay: SimTime) {
        self.latest_rtt = latest;
        if !self.has_sample {
            self.has_sample = true;
            self.min_rtt = latest;
            self.srtt = latest;
            self.rttvar = SimTime::from_micros(latest.as_micros() / 2);
            return;
        }
        self.min_rtt = self.min_rtt.min(latest);
        let adjusted = if latest >= self.min_rtt + ack_delay {
            latest - ack_delay
        } else {
            latest
        };
        let (srtt, adj) = (self.srtt.as_micros() as i64, adjusted.as_micros() as i64);
        let var = (3 * self.rttvar.as_micros() as i64 + (srtt - adj).abs()) / 4;
        self.rttvar = SimTime::from_micros(var as u64);
        self.srtt = SimTime::from_micros(((7 * srtt + adj) / 8) as u64);
    }

    /// `srtt + max(4 rttvar, 1 ms) + max_ack_delay`, before backoff.
    pub fn pto_period(&self, max_ack_delay: SimTime) -> SimTime {
        let var4 = SimTime::from_micros(4 * self.rttvar.as_micros());
        self.srtt + var4.max(GRANULARITY) + max_ack_delay
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderCounters {
    pub packets_sent: u64,
    pub bytes_sent: u64,
    pub retransmissions: u64,
    pub lost: u64,
    pub congestion_events: u64,
    pub pto_fired: u64,
    pub unknown_acks: u64,
}

/// Bulk-transfer sender for one flow.
#[derive(Debug)]
pub struct Sender {
    cfg: TransportConfig,
    cc: Box<dyn CongestionControl>,
    file_size: Option<u64>,
    next_pkt_num: u64,
    next_offset: u64,
    retx: VecDeque<(u64, u32)>,
    acked_data: RangeSet,
    unacked: BTreeMap<u64, TransportPacket>,
    bytes_in_flight: u64,
    rtt: RttEstimator,
    largest_acked: Option<u64>,
    loss_time: Option<SimTime>,
    pto_count: u32,
    last_ack_eliciting_sent: Option<SimTime>,
    pacing_next_send: SimTime,
    recovery_start_pkt: Option<u64>,
    pending_probes: u32,
    counters: SenderCounters,
}

impl Sender {
    /// `file_size` of `None` sends forever.
    pub fn new(cfg: TransportConfig, file_size: Option<u64>) -> Self {
        let mss = cfg.max_datagram();
        let cc = new_controller(
            cfg.cc,
            mss,
            cfg.initial_window_packets * mss,
            cfg.min_window_packets * mss,
            cfg.cubic_tcp_friendly,
        );
        Self::with_controller(cfg, file_size, cc)
    }

    pub fn with_controller(
        cfg: TransportConfig,
        file_size: Option<u64>,
        cc: Box<dyn CongestionControl>,
    ) -> Self {
        Sender {
            cfg,
            cc,
            file_size,
            next_pkt_num: 0,
            next_offset: 0,
            retx: VecDeque::new(),
            acked_data: RangeSet::new(),
            unacked: BTreeMap::new(),
            bytes_in_flight: 0,
            rtt: RttEstimator::default(),
            largest_acked: None,
            loss_time: None,
            pto_count: 0,
            last_ack_eliciting_sent: None,
            pacing_next_send: SimTime::ZERO,
            recovery_start_pkt: None,
            pending_probes: 0,
            counters: SenderCounters::default(),
        }
    }

    pub fn config(&self) -> &TransportConfig {
        &self.cfg
    }

    pub fn cwnd(&self) -> u64 {
        self.cc.cwnd()
    }

    pub fn ssthresh(&self) -> u64 {
        self.cc.ssthresh()
    }

    pub fn controller(&self) -> &dyn CongestionControl {
        self.cc.as_ref()
    }

    pub fn bytes_in_flight(&self) -> u64 {
        self.bytes_in_flight
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    pub fn counters(&self) -> SenderCounters {
        self.counters
    }

    pub fn pacing_next_send(&self) -> SimTime {
        self.pacing_next_send
    }

    pub fn largest_acked(&self) -> Option<u64> {
        self.largest_acked
    }

    pub fn unacked_pkt_nums(&self) -> Vec<u64> {
        self.unacked.keys().copied().collect()
    }

    /// Contiguous acknowledged application bytes from offset zero.
    pub fn flow_progress(&self) -> u64 {
        self.acked_data.contiguous_from_zero()
    }

    pub fn is_complete(&self) -> bool {
        self.file_size
            .is_some_and(|size| self.acked_data.contiguous_from_zero() >= size)
    }

    /// Bytes per second; `None` before the first RTT sample (unlimited).
    pub fn pacing_rate(&self) -> Option<f64> {
        if !self.cfg.pacing || !self.rtt.has_sample {
            return None;
        }
        let srtt = self.rtt.srtt.as_secs_f64().max(1e-6);
        Some(self.cfg.pacing_gain * self.cc.cwnd() as f64 / srtt)
    }

    fn peek_chunk_len(&mut self) -> Option<u32> {
        while let Some(&(off, len)) = self.retx.front() {
            if self.acked_data.contains_range(off, off + u64::from(len)) {
                self.retx.pop_front();
                continue;
            }
            return Some(len);
        }
        let remaining = match self.file_size {
            Some(size) => size.saturating_sub(self.next_offset),
            None => u64::MAX,
        };
        if remaining == 0 {
            return None;
        }
        Some(remaining.min(u64::from(self.cfg.payload_bytes)) as u32)
    }

    fn take_chunk(&mut self) -> Option<(u64, u32, bool)> {
        let len = self.peek_chunk_len()?;
        if let Some((off, len)) = self.retx.pop_front() {
            return Some((off, len, true));
        }
        let off = self.next_offset;
        self.next_offset += u64::from(len);
        Some((off, len, false))
    }

    pub fn has_data(&mut self) -> bool {
        self.peek_chunk_len().is_some()
    }

    fn emit(&mut self, offset: u64, len: u32, retransmission: bool, t: SimTime) -> TransportPacket {
        let pkt = TransportPacket {
            pkt_num: self.next_pkt_num,
            offset,
            payload_bytes: len,
            overhead_bytes: self.cfg.overhead_bytes,
            sent_at: t,
            retransmission,
        };
        self.next_pkt_num += 1;
        let size = u64::from(pkt.wire_size());
        self.bytes_in_flight += size;
        self.unacked.insert(pkt.pkt_num, pkt);
        self.last_ack_eliciting_sent = Some(t);
        self.counters.packets_sent += 1;
        self.counters.bytes_sent += size;
        if retransmission {
            self.counters.retransmissions += 1;
        }
        if let Some(rate) = self.pacing_rate() {
            let gap = SimTime::from_secs_f64(size as f64 / rate);
            self.pacing_next_send = self.pacing_next_send.max(t) + gap;
        }
        pkt
    }

    /// Emits every packet that cwnd and the pacer allow at `t`.
    pub fn maybe_send(&mut self, t: SimTime) -> Vec<TransportPacket> {
        let mut out = Vec::new();
        while self.pending_probes > 0 {
            self.pending_probes -= 1;
            let chunk = self.take_chunk().or_else(|| {
                self.unacked
                    .values()
                    .next()
                    .map(|p| (p.offset, p.payload_bytes, true))
            });
            if let Some((off, len, retx)) = chunk {
                out.push(self.emit(off, len, retx, t));
            }
        }
        while let Some(len) = self.peek_chunk_len() {
            let size = u64::from(len + self.cfg.overhead_bytes);
            if self.bytes_in_flight + size > self.cc.cwnd() {
                break;
            }
            if self.pacing_rate().is_some() && t < self.pacing_next_send {
                break;
            }
            let (off, len, retx) = self.take_chunk().expect("peeked");
            out.push(self.emit(off, len, retx, t));
        }
        out
    }

    /// Processes an acknowledgement arriving at `t`. Returns packets declared lost.
    pub fn on_ack(&mut self, ack: &AckFrame, t: SimTime) -> Vec<u64> {
        if ack.largest_acked >= self.next_pkt_num {
            self.counters.unknown_acks += 1;
            return Vec::new();
        }
        let mut newly: Vec<TransportPacket> = Vec::new();
        for &(lo, hi) in &ack.ack_ranges {
            let keys: Vec<u64> = self.unacked.range(lo..=hi).map(|(k, _)| *k).collect();
            for k in keys {
                newly.push(self.unacked.remove(&k).expect("key from range"));
            }
        }
        self.largest_acked = Some(
            self.largest_acked
                .map_or(ack.largest_acked, |l| l.max(ack.largest_acked)),
        );
        if newly.is_empty() {
            return Vec::new();
        }
        if let Some(largest) = newly.iter().find(|p| p.pkt_num == ack.largest_acked) {
            let sample = t - largest.sent_at;
            let ack_delay = ack.ack_delay.min(self.cfg.max_ack_delay);
            self.rtt.update(sample, ack_delay);
        }
        newly.sort_unstable_by_key(|p| p.pkt_num);
        for p in &newly {
            let size = u64::from(p.wire_size());
            self.bytes_in_flight -= size;
            self.acked_data
                .insert(p.offset, p.offset + u64::from(p.payload_bytes));
            let in_recovery = self.recovery_start_pkt.is_some_and(|r| p.pkt_num < r);
            if !in_recovery {
                self.cc.on_ack(size, t);
            }
        }
        self.pto_count = 0;
        self.detect_losses(t)
    }

    fn loss_delay(&self) -> SimTime {
        let base = self.rtt.srtt.max(self.rtt.latest_rtt);
        SimTime::from_micros(base.as_micros() * 9 / 8).max(GRANULARITY)
    }

    /// Declares packets lost by packet or time threshold and re-queues their data.
    pub fn detect_losses(&mut self, t: SimTime) -> Vec<u64> {
        self.loss_time = None;
        let Some(largest) = self.largest_acked else {
            return Vec::new();
        };
        let delay = self.loss_delay();
        let mut lost = Vec::new();
        for (&pn, p) in self.unacked.range(..largest) {
            if pn + PACKET_THRESHOLD <= largest || p.sent_at + delay <= t {
                lost.push(pn);
            } else {
                let at = p.sent_at + delay;
                self.loss_time = Some(self.loss_time.map_or(at, |l| l.min(at)));
            }
        }
        if lost.is_empty() {
            return lost;
        }
        let mut new_event = false;
        for pn in &lost {
            let p = self.unacked.remove(pn).expect("lost packet is unacked");
            self.bytes_in_flight -= u64::from(p.wire_size());
            self.retx.push_back((p.offset, p.payload_bytes));
            self.counters.lost += 1;
            if self.recovery_start_pkt.is_none_or(|r| *pn >= r) {
                new_event = true;
            }
        }
        if new_event {
            self.cc.on_congestion_event(t);
            self.recovery_start_pkt = Some(self.next_pkt_num);
            self.counters.congestion_events += 1;
        }
        lost
    }

    pub fn pto_deadline(&self) -> Option<SimTime> {
        if self.unacked.is_empty() {
            return None;
        }
        let sent = self.last_ack_eliciting_sent?;
        let period = self.rtt.pto_period(self.cfg.max_ack_delay);
        Some(sent + SimTime::from_micros(period.as_micros() << self.pto_count.min(20)))
    }

    /// Earliest time the sender needs to be woken up.
    pub fn next_timer(&mut self, now: SimTime) -> Option<SimTime> {
        let recovery = self.loss_time.or_else(|| self.pto_deadline());
        let pacing = if self.pacing_rate().is_some() && self.pacing_next_send > now {
            match self.peek_chunk_len() {
                Some(len)
                    if self.bytes_in_flight + u64::from(len + self.cfg.overhead_bytes)
                        <= self.cc.cwnd() =>
                {
                    Some(self.pacing_next_send)
                }
                _ => None,
            }
        } else {
            None
        };
        match (recovery, pacing) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Runs expired loss-detection or probe timers.
    pub fn on_timer(&mut self, t: SimTime) -> Vec<u64> {
        if let Some(lt) = self.loss_time {
            if lt <= t {
                return self.detect_losses(t);
            }
            return Vec::new();
        }
        if self.pto_deadline().is_some_and(|d| d <= t) {
            self.pto_fire(t);
        }
        Vec::new()
    }

    /// Probe timeout: one probe packet goes out on the next `maybe_send`;
    /// cwnd is left alone.
    pub fn pto_fire(&mut self, _t: SimTime) {
        self.pto_count += 1;
        self.pending_probes = 1;
        self.counters.pto_fired += 1;
    }

    pub fn pto_count(&self) -> u32 {
        self.pto_count
    }
}
