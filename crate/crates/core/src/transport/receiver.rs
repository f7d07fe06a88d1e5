use serde::{Deserialize, Serialize};

use super::{AckFrame, RangeSet, TransportConfig, TransportPacket, MAX_ACK_RANGES};
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverCounters {
    pub admitted: u64,
    pub buffer_drops: u64,
    pub duplicate_packets: u64,
    pub acks_sent: u64,
}

/// Client endpoint: a draining socket buffer in front of an acknowledging
/// transport receiver.
#[derive(Debug)]
pub struct Receiver {
    capacity: Option<u64>,
    drain_rate: f64,
    occupancy: f64,
    last_drain: SimTime,
    max_ack_delay: SimTime,
    ack_every: u32,
    received: RangeSet,
    largest_received: Option<(u64, SimTime)>,
    packets_since_ack: u32,
    ack_deadline: Option<SimTime>,
    data: RangeSet,
    counters: ReceiverCounters,
}

impl Receiver {
    pub fn new(cfg: &TransportConfig) -> Self {
        Receiver {
            capacity: cfg.recv_buffer,
            drain_rate: cfg.drain_rate,
            occupancy: 0.0,
            last_drain: SimTime::ZERO,
            max_ack_delay: cfg.max_ack_delay,
            ack_every: cfg.ack_every.max(1),
            received: RangeSet::new(),
            largest_received: None,
            packets_since_ack: 0,
            ack_deadline: None,
            data: RangeSet::new(),
            counters: ReceiverCounters::default(),
        }
    }

    pub fn counters(&self) -> ReceiverCounters {
        self.counters
    }

    pub fn ack_deadline(&self) -> Option<SimTime> {
        self.ack_deadline
    }

    /// Buffer occupancy in bytes at `t`.
    pub fn occupancy(&mut self, t: SimTime) -> f64 {
        self.drain(t);
        self.occupancy
    }

    /// Application bytes delivered in order.
    pub fn delivered_bytes(&self) -> u64 {
        self.data.contiguous_from_zero()
    }

    fn drain(&mut self, t: SimTime) {
        if t > self.last_drain {
            let dt = (t - self.last_drain).as_secs_f64();
            self.occupancy = (self.occupancy - self.drain_rate * dt).max(0.0);
            self.last_drain = t;
        }
    }

    /// Handles a packet handed up by the reorderer. Returns an ACK if one is due.
    pub fn receiver_on_packet(&mut self, pkt: &TransportPacket, t: SimTime) -> Option<AckFrame> {
        self.drain(t);
        let size = f64::from(pkt.wire_size());
        if let Some(cap) = self.capacity {
            if self.occupancy + size > cap as f64 {
                self.counters.buffer_drops += 1;
                return None;
            }
        }
        self.occupancy += size;
        self.counters.admitted += 1;
        if self.received.insert(pkt.pkt_num, pkt.pkt_num + 1) == 0 {
            self.counters.duplicate_packets += 1;
        }
        if self.largest_received.is_none_or(|(l, _)| pkt.pkt_num > l) {
            self.largest_received = Some((pkt.pkt_num, t));
        }
        self.data
            .insert(pkt.offset, pkt.offset + u64::from(pkt.payload_bytes));
        self.packets_since_ack += 1;
        if self.packets_since_ack >= self.ack_every {
            return Some(self.build_ack(t));
        }
        if self.ack_deadline.is_none() {
            self.ack_deadline = Some(t + self.max_ack_delay);
        }
        None
    }

    /// Delayed-ACK timer. Returns an ACK if one was pending at `t`.
    pub fn on_ack_timer(&mut self, t: SimTime) -> Option<AckFrame> {
        match self.ack_deadline {
            Some(d) if d <= t && self.packets_since_ack > 0 => Some(self.build_ack(t)),
            _ => None,
        }
    }

    fn build_ack(&mut self, t: SimTime) -> AckFrame {
        let (largest, at) = self.largest_received.expect("ack without packets");
        self.packets_since_ack = 0;
        self.ack_deadline = None;
        self.counters.acks_sent += 1;
        AckFrame {
            largest_acked: largest,
            ack_ranges: self.received.iter_desc().take(MAX_ACK_RANGES).collect(),
            ack_delay: t - at,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(n: u64) -> TransportPacket {
        TransportPacket {
            pkt_num: n,
            offset: n * 1200,
            payload_bytes: 1200,
            overhead_bytes: 48,
            sent_at: SimTime::ZERO,
            retransmission: false,
        }
    }

    fn receiver(capacity: Option<u64>) -> Receiver {
        Receiver::new(&TransportConfig {
            recv_buffer: capacity,
            ..TransportConfig::default()
        })
    }

    #[test]
    fn default_buffer_overflows_on_burst() {
        let mut r = receiver(Some(212_992));
        let t = SimTime::from_millis(100);
        for n in 0..200 {
            r.receiver_on_packet(&pkt(n), t);
        }
        // floor(212992 / 1248) = 170
        assert_eq!(r.counters().admitted, 170);
        assert_eq!(r.counters().buffer_drops, 30);
    }

    #[test]
    fn drain_frees_space() {
        let mut r = receiver(Some(2 * 1248));
        assert!(r.receiver_on_packet(&pkt(0), SimTime::ZERO).is_none());
        r.receiver_on_packet(&pkt(1), SimTime::ZERO);
        r.receiver_on_packet(&pkt(2), SimTime::ZERO);
        assert_eq!(r.counters().buffer_drops, 1);
        // 150 MB/s drains 1248 B in ~8.3 us
        r.receiver_on_packet(&pkt(3), SimTime::from_micros(10));
        assert_eq!(r.counters().buffer_drops, 1);
    }

    #[test]
    fn ack_every_second_packet() {
        let mut r = receiver(None);
        assert!(r.receiver_on_packet(&pkt(0), SimTime::ZERO).is_none());
        let ack = r
            .receiver_on_packet(&pkt(1), SimTime::from_millis(1))
            .expect("ack");
        assert_eq!(ack.largest_acked, 1);
        assert_eq!(ack.ack_ranges, vec![(0, 1)]);
        assert_eq!(r.counters().acks_sent, 1);
    }

    #[test]
    fn lone_packet_acked_after_max_delay() {
        let mut r = receiver(None);
        r.receiver_on_packet(&pkt(0), SimTime::from_millis(3));
        assert_eq!(r.ack_deadline(), Some(SimTime::from_millis(28)));
        assert!(r.on_ack_timer(SimTime::from_millis(27)).is_none());
        let ack = r
            .on_ack_timer(SimTime::from_millis(28))
            .expect("delayed ack");
        assert_eq!(ack.ack_delay, SimTime::from_millis(25));
    }

    #[test]
    fn ranges_report_gaps() {
        let mut r = receiver(None);
        r.receiver_on_packet(&pkt(0), SimTime::ZERO);
        r.receiver_on_packet(&pkt(1), SimTime::ZERO);
        r.receiver_on_packet(&pkt(4), SimTime::ZERO);
        let ack = r.receiver_on_packet(&pkt(5), SimTime::ZERO).unwrap();
        assert_eq!(ack.ack_ranges, vec![(4, 5), (0, 1)]);
        assert_eq!(r.delivered_bytes(), 2400);
    }
}
