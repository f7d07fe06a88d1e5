//! Simplified QUIC-like bulk transfer: a paced sender with pluggable
//! congestion control and QUIC-style loss recovery, and a receiver with a
//! finite socket buffer and delayed acknowledgements.

pub mod cc;
mod ranges;
mod receiver;
mod sender;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

pub use cc::{cubic_k, cubic_window, CcAlgorithm, CongestionControl, Cubic, NewReno};
pub use ranges::RangeSet;
pub use receiver::{Receiver, ReceiverCounters};
pub use sender::{RttEstimator, Sender, SenderCounters};

pub const DEFAULT_PAYLOAD_BYTES: u32 = 1200;
pub const DEFAULT_OVERHEAD_BYTES: u32 = 48;
/// Linux default UDP receive buffer (`net.core.rmem_default`).
pub const DEFAULT_RECV_BUFFER: u64 = 212_992;
pub const ENLARGED_RECV_BUFFER: u64 = 4 * 1024 * 1024;
pub const DEFAULT_DRAIN_RATE: f64 = 150e6;
pub const DEFAULT_MAX_ACK_DELAY: SimTime = SimTime::from_millis(25);
pub const PACKET_THRESHOLD: u64 = 3;
/// Ranges carried per ACK frame.
pub const MAX_ACK_RANGES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportPacket {
    pub pkt_num: u64,
    /// Application byte range `[offset, offset + payload_bytes)`.
    pub offset: u64,
    pub payload_bytes: u32,
    pub overhead_bytes: u32,
    pub sent_at: SimTime,
    pub retransmission: bool,
}

impl TransportPacket {
    pub fn wire_size(&self) -> u32 {
        self.payload_bytes + self.overhead_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AckFrame {
    pub largest_acked: u64,
    /// Inclusive `(lo, hi)` ranges, highest first.
    pub ack_ranges: Vec<(u64, u64)>,
    pub ack_delay: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub cc: CcAlgorithm,
    pub pacing: bool,
    pub pacing_gain: f64,
    pub payload_bytes: u32,
    pub overhead_bytes: u32,
    pub initial_window_packets: u64,
    pub min_window_packets: u64,
    pub max_ack_delay: SimTime,
    pub ack_every: u32,
    /// Receive socket buffer in bytes; `None` is unbounded.
    pub recv_buffer: Option<u64>,
    pub drain_rate: f64,
    pub cubic_tcp_friendly: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            cc: CcAlgorithm::NewReno,
            pacing: true,
            pacing_gain: 1.25,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            overhead_bytes: DEFAULT_OVERHEAD_BYTES,
            initial_window_packets: 10,
            min_window_packets: 2,
            max_ack_delay: DEFAULT_MAX_ACK_DELAY,
            ack_every: 2,
            recv_buffer: Some(ENLARGED_RECV_BUFFER),
            drain_rate: DEFAULT_DRAIN_RATE,
            cubic_tcp_friendly: true,
        }
    }
}

impl TransportConfig {
    /// TCP stand-in: unpaced, kernel-autotuned (unbounded) buffer.
    pub fn tcp_like() -> Self {
        TransportConfig {
            pacing: false,
            recv_buffer: None,
            ..Self::default()
        }
    }

    /// Full-size datagram on the wire; the congestion controller's MSS.
    pub fn max_datagram(&self) -> u64 {
        u64::from(self.payload_bytes + self.overhead_bytes)
    }
}
