//! PDCP-style split bearer: a server-side splitter that stamps 16-bit
//! sequence numbers and routes batches (or duplicates) over two links, and a
//! client-side reorderer that restores order with a t-Reordering timer.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimTime;

/// Bytes the sequence number adds to every packet on the wire.
pub const PDCP_HEADER_BYTES: u32 = 2;

pub const SN_MODULUS: u32 = 1 << 16;
pub const HALF_WINDOW: u32 = 1 << 15;

pub const DEFAULT_T_REORDERING: SimTime = SimTime::from_millis(200);
/// One-way latency of each proxy; the pair adds about 1 ms to the RTT.
pub const DEFAULT_PROXY_DELAY: SimTime = SimTime::from_micros(500);

/// `true` iff `y` comes after `x` within half the sequence space.
pub fn sn_after(x: u16, y: u16) -> bool {
    let d = u32::from(y.wrapping_sub(x));
    (1..HALF_WINDOW).contains(&d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u8);

pub const LINK1: LinkId = LinkId(0);
pub const LINK2: LinkId = LinkId(1);

impl LinkId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdcpPdu<P> {
    pub sn: u16,
    pub payload: P,
    /// Wire size including the sequence number.
    pub size: u32,
    pub stamped_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcMode {
    Split,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitterConfig {
    pub batch_size: u32,
    /// Share of each batch for link 1 and link 2, as `a:b`.
    pub ratio: (u32, u32),
    pub mode: DcMode,
    pub proxy_delay: SimTime,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        SplitterConfig {
            batch_size: 100,
            ratio: (1, 1),
            mode: DcMode::Split,
            proxy_delay: DEFAULT_PROXY_DELAY,
        }
    }
}

impl SplitterConfig {
    /// Single connectivity: everything on `link`.
    pub fn single(link: LinkId, proxy_delay: SimTime) -> Self {
        SplitterConfig {
            batch_size: 1,
            ratio: if link == LINK1 { (1, 0) } else { (0, 1) },
            mode: DcMode::Split,
            proxy_delay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.ratio.0 == 0 && self.ratio.1 == 0 {
            return Err(Error::Config("split ratio must not be 0:0".into()));
        }
        Ok(())
    }

    /// Packets per batch sent on link 1: `round(batch * a / (a + b))`, halves up.
    pub fn link1_share(&self) -> u32 {
        let (a, b) = (u64::from(self.ratio.0), u64::from(self.ratio.1));
        let n = u64::from(self.batch_size);
        ((2 * n * a + (a + b)) / (2 * (a + b))) as u32
    }
}

/// Server-side proxy: numbers packets and picks their link(s).
#[derive(Debug, Clone)]
pub struct Splitter {
    cfg: SplitterConfig,
    link1_share: u32,
    next_sn: u16,
    batch_pos: u32,
}

pub type Emissions<P> = ArrayVec<(LinkId, PdcpPdu<P>), 2>;

impl Splitter {
    pub fn new(cfg: SplitterConfig) -> Self {
        let link1_share = cfg.link1_share();
        Splitter {
            cfg,
            link1_share,
            next_sn: 0,
            batch_pos: 0,
        }
    }

    pub fn config(&self) -> &SplitterConfig {
        &self.cfg
    }

    pub fn next_sn(&self) -> u16 {
        self.next_sn
    }

    /// Wraps `pkt` (of `payload_size` bytes) into PDUs and assigns links.
    /// The caller applies `proxy_delay` before handing them to the links.
    pub fn split_route<P: Clone>(&mut self, pkt: P, payload_size: u32, t: SimTime) -> Emissions<P> {
        let sn = self.next_sn;
        self.next_sn = self.next_sn.wrapping_add(1);
        let pdu = PdcpPdu {
            sn,
            payload: pkt,
            size: payload_size + PDCP_HEADER_BYTES,
            stamped_at: t,
        };
        let mut out = ArrayVec::new();
        match self.cfg.mode {
            DcMode::Duplicate => {
                out.push((LINK1, pdu.clone()));
                out.push((LINK2, pdu));
            }
            DcMode::Split => {
                let link = if self.batch_pos < self.link1_share {
                    LINK1
                } else {
                    LINK2
                };
                self.batch_pos += 1;
                if self.batch_pos >= self.cfg.batch_size {
                    self.batch_pos = 0;
                }
                out.push((link, pdu));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderCounters {
    pub received: u64,
    pub delivered: u64,
    pub duplicates: u64,
    pub window_violations: u64,
    pub timer_expiries: u64,
    /// Sequence numbers skipped over by timer expiries.
    pub skipped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiveOutcome {
    /// Delivered this PDU and `n - 1` buffered successors.
    Delivered(usize),
    Buffered,
    Duplicate,
    WindowViolation,
}

#[derive(Debug)]
struct Held<P> {
    pdu: PdcpPdu<P>,
    arrived: SimTime,
}

/// Client-side reordering window.
///
/// Sequence numbers are tracked internally as 64-bit counts so the window
/// state never wraps; the 16-bit SN is mapped onto the count space relative to
/// `rx_deliv`.
#[derive(Debug)]
pub struct Reorderer<P> {
    t_reordering: SimTime,
    rx_deliv: u64,
    rx_next: u64,
    rx_reord: Option<u64>,
    timer_deadline: Option<SimTime>,
    buffer: BTreeMap<u64, Held<P>>,
    // (arrival, count) in arrival order; stale entries are pruned lazily
    arrivals: VecDeque<(SimTime, u64)>,
    // bit set when the count occupying this SN slot was delivered
    delivered_bits: Vec<u64>,
    counters: ReorderCounters,
}

impl<P> Reorderer<P> {
    pub fn new(t_reordering: SimTime) -> Self {
        Reorderer {
            t_reordering,
            rx_deliv: 0,
            rx_next: 0,
            rx_reord: None,
            timer_deadline: None,
            buffer: BTreeMap::new(),
            arrivals: VecDeque::new(),
            delivered_bits: vec![0; (SN_MODULUS / 64) as usize],
            counters: ReorderCounters::default(),
        }
    }

    pub fn rx_deliv(&self) -> u16 {
        self.rx_deliv as u16
    }

    pub fn rx_next(&self) -> u16 {
        self.rx_next as u16
    }

    pub fn rx_reord(&self) -> Option<u16> {
        self.rx_reord.map(|c| c as u16)
    }

    pub fn timer_deadline(&self) -> Option<SimTime> {
        self.timer_deadline
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffered_sns(&self) -> Vec<u16> {
        self.buffer.keys().map(|c| *c as u16).collect()
    }

    pub fn counters(&self) -> ReorderCounters {
        self.counters
    }

    fn bit(&self, sn: u16) -> bool {
        let i = usize::from(sn);
        self.delivered_bits[i / 64] & (1 << (i % 64)) != 0
    }

    fn set_bit(&mut self, count: u64, delivered: bool) {
        let i = (count % u64::from(SN_MODULUS)) as usize;
        if delivered {
            self.delivered_bits[i / 64] |= 1 << (i % 64);
        } else {
            self.delivered_bits[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Moves `rx_deliv` forward to `to`, marking passed counts as skipped.
    fn skip_to(&mut self, to: u64) {
        while self.rx_deliv < to {
            self.set_bit(self.rx_deliv, false);
            self.counters.skipped += 1;
            self.rx_deliv += 1;
        }
    }

    fn deliver_count(&mut self, count: u64, out: &mut Vec<PdcpPdu<P>>) {
        let held = self.buffer.remove(&count).expect("buffered count");
        self.skip_to(count);
        self.set_bit(count, true);
        self.rx_deliv = count + 1;
        self.counters.delivered += 1;
        out.push(held.pdu);
    }

    fn deliver_consecutive(&mut self, out: &mut Vec<PdcpPdu<P>>) -> usize {
        let mut n = 0;
        while self.buffer.contains_key(&self.rx_deliv) {
            self.deliver_count(self.rx_deliv, out);
            n += 1;
        }
        n
    }

    fn earliest_held_arrival(&mut self) -> Option<SimTime> {
        while let Some(&(at, count)) = self.arrivals.front() {
            if count >= self.rx_deliv && self.buffer.contains_key(&count) {
                return Some(at);
            }
            self.arrivals.pop_front();
        }
        None
    }

    fn maybe_start_timer(&mut self, t: SimTime) {
        if self.timer_deadline.is_none() && self.rx_deliv < self.rx_next {
            self.rx_reord = Some(self.rx_next);
            // Anchor on the oldest held PDU so no PDU waits longer than t_reordering.
            let oldest = self.earliest_held_arrival().unwrap_or(t);
            self.timer_deadline = Some((oldest + self.t_reordering).max(t));
        }
    }

    /// Processes one arriving PDU, appending deliverable PDUs to `out` in order.
    pub fn reorder_receive(
        &mut self,
        pdu: PdcpPdu<P>,
        t: SimTime,
        out: &mut Vec<PdcpPdu<P>>,
    ) -> ReceiveOutcome {
        self.counters.received += 1;
        let ahead = u32::from(pdu.sn.wrapping_sub(self.rx_deliv as u16));
        if ahead >= HALF_WINDOW {
            if self.bit(pdu.sn) {
                self.counters.duplicates += 1;
                return ReceiveOutcome::Duplicate;
            }
            self.counters.window_violations += 1;
            return ReceiveOutcome::WindowViolation;
        }
        let count = self.rx_deliv + u64::from(ahead);
        if self.buffer.contains_key(&count) {
            self.counters.duplicates += 1;
            return ReceiveOutcome::Duplicate;
        }
        self.buffer.insert(count, Held { pdu, arrived: t });
        self.arrivals.push_back((t, count));
        if count >= self.rx_next {
            self.rx_next = count + 1;
        }
        let outcome = if count == self.rx_deliv {
            ReceiveOutcome::Delivered(self.deliver_consecutive(out))
        } else {
            ReceiveOutcome::Buffered
        };
        if let Some(reord) = self.rx_reord {
            if self.rx_deliv >= reord {
                self.rx_reord = None;
                self.timer_deadline = None;
            }
        }
        self.maybe_start_timer(t);
        outcome
    }

    /// Handles t-Reordering expiry at `t`. A call when no timer is due is a no-op.
    pub fn on_reordering_timer(&mut self, t: SimTime, out: &mut Vec<PdcpPdu<P>>) -> usize {
        let mut n = 0;
        while let Some(deadline) = self.timer_deadline {
            if deadline > t {
                break;
            }
            self.counters.timer_expiries += 1;
            let reord = self
                .rx_reord
                .take()
                .expect("timer running without rx_reord");
            self.timer_deadline = None;
            let below: Vec<u64> = self.buffer.range(..reord).map(|(c, _)| *c).collect();
            for c in below {
                self.deliver_count(c, out);
                n += 1;
            }
            self.skip_to(reord);
            n += self.deliver_consecutive(out);
            self.maybe_start_timer(t);
        }
        n
    }

    /// Arrival time of each currently held PDU, for diagnostics.
    pub fn held_arrivals(&self) -> impl Iterator<Item = (u16, SimTime)> + '_ {
        self.buffer.iter().map(|(c, h)| (*c as u16, h.arrived))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pdu(sn: u16) -> PdcpPdu<u16> {
        PdcpPdu {
            sn,
            payload: sn,
            size: 100,
            stamped_at: SimTime::ZERO,
        }
    }

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn sns(v: &[PdcpPdu<u16>]) -> Vec<u16> {
        v.iter().map(|p| p.sn).collect()
    }

    #[test]
    fn serial_comparison() {
        assert!(sn_after(0, 1));
        assert!(sn_after(65535, 0));
        assert!(!sn_after(0, 40000));
        assert!(!sn_after(7, 7));
        assert!(sn_after(0, 32767));
        assert!(!sn_after(0, 32768));
    }

    fn route_links(cfg: SplitterConfig, n: usize) -> Vec<LinkId> {
        let mut s = Splitter::new(cfg);
        (0..n)
            .flat_map(|i| {
                s.split_route(i, 1200, SimTime::ZERO)
                    .into_iter()
                    .map(|(l, _)| l)
            })
            .collect()
    }

    #[test]
    fn ninety_ten_batches() {
        let cfg = SplitterConfig {
            ratio: (9, 1),
            ..SplitterConfig::default()
        };
        let links = route_links(cfg, 200);
        for (i, l) in links.iter().enumerate() {
            let expect = if i % 100 < 90 { LINK1 } else { LINK2 };
            assert_eq!(*l, expect, "packet {i}");
        }
    }

    #[test]
    fn even_batches_alternate_fifty() {
        let links = route_links(SplitterConfig::default(), 300);
        for (i, l) in links.iter().enumerate() {
            let expect = if (i / 50) % 2 == 0 { LINK1 } else { LINK2 };
            assert_eq!(*l, expect);
        }
    }

    #[test]
    fn one_to_zero_is_single_connectivity() {
        let cfg = SplitterConfig {
            ratio: (1, 0),
            ..SplitterConfig::default()
        };
        assert!(route_links(cfg, 500).iter().all(|l| *l == LINK1));
    }

    #[test]
    fn share_rounds_half_up() {
        let cfg = |batch, a, b| SplitterConfig {
            batch_size: batch,
            ratio: (a, b),
            ..SplitterConfig::default()
        };
        assert_eq!(cfg(3, 1, 1).link1_share(), 2);
        assert_eq!(cfg(1, 1, 1).link1_share(), 1);
        assert_eq!(cfg(100, 5, 1).link1_share(), 83);
        assert_eq!(cfg(100, 0, 1).link1_share(), 0);
    }

    #[test]
    fn duplicate_mode_emits_both() {
        let mut s = Splitter::new(SplitterConfig {
            mode: DcMode::Duplicate,
            ..SplitterConfig::default()
        });
        let mut got = Vec::new();
        for i in 0..3 {
            for (l, p) in s.split_route(i, 1200, SimTime::ZERO) {
                got.push((l, p.sn));
            }
        }
        assert_eq!(
            got,
            vec![
                (LINK1, 0),
                (LINK2, 0),
                (LINK1, 1),
                (LINK2, 1),
                (LINK1, 2),
                (LINK2, 2)
            ]
        );
    }

    #[test]
    fn sn_wraps() {
        let mut s = Splitter::new(SplitterConfig::default());
        let mut last = 0;
        for i in 0..70_000u32 {
            last = s.split_route(i, 10, SimTime::ZERO)[0].1.sn;
        }
        assert_eq!(last, (69_999 % 65_536) as u16);
    }

    #[test]
    fn in_order_passthrough() {
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        for sn in 0..3 {
            assert_eq!(
                r.reorder_receive(pdu(sn), ms(sn as u64), &mut out),
                ReceiveOutcome::Delivered(1)
            );
        }
        assert_eq!(sns(&out), vec![0, 1, 2]);
        assert_eq!(r.buffered(), 0);
        assert_eq!(r.timer_deadline(), None);
    }

    #[test]
    fn gap_filled_before_deadline() {
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        r.reorder_receive(pdu(0), ms(0), &mut out);
        assert_eq!(
            r.reorder_receive(pdu(2), ms(1), &mut out),
            ReceiveOutcome::Buffered
        );
        assert_eq!(r.timer_deadline(), Some(ms(201)));
        assert_eq!(r.rx_reord(), Some(3));
        out.clear();
        r.reorder_receive(pdu(1), ms(50), &mut out);
        assert_eq!(sns(&out), vec![1, 2]);
        assert_eq!(r.timer_deadline(), None);
    }

    #[test]
    fn timer_expiry_releases_after_missing() {
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        r.reorder_receive(pdu(0), ms(0), &mut out);
        r.reorder_receive(pdu(2), ms(10), &mut out);
        r.reorder_receive(pdu(3), ms(11), &mut out);
        out.clear();
        assert_eq!(r.on_reordering_timer(ms(209), &mut out), 0);
        assert_eq!(r.on_reordering_timer(ms(210), &mut out), 2);
        assert_eq!(sns(&out), vec![2, 3]);
        assert_eq!(r.rx_deliv(), 4);
        assert_eq!(r.timer_deadline(), None);
        assert_eq!(r.counters().skipped, 1);

        // the missing PDU turns up late: it has already been skipped
        out.clear();
        assert_eq!(
            r.reorder_receive(pdu(1), ms(300), &mut out),
            ReceiveOutcome::WindowViolation
        );
        assert!(out.is_empty());
    }

    #[test]
    fn expiry_without_remaining_gap() {
        // buffer {2,3}, rx_deliv=1, rx_reord=4
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        r.reorder_receive(pdu(0), ms(0), &mut out);
        r.reorder_receive(pdu(3), ms(0), &mut out);
        r.reorder_receive(pdu(2), ms(0), &mut out);
        assert_eq!((r.rx_deliv(), r.rx_reord()), (1, Some(4)));
        out.clear();
        r.on_reordering_timer(ms(200), &mut out);
        assert_eq!(sns(&out), vec![2, 3]);
        assert_eq!(r.rx_deliv(), 4);
        assert_eq!(r.timer_deadline(), None);
    }

    #[test]
    fn expiry_restarts_for_secondary_gap() {
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        r.reorder_receive(pdu(0), ms(0), &mut out);
        r.reorder_receive(pdu(2), ms(0), &mut out);
        r.reorder_receive(pdu(3), ms(0), &mut out);
        r.reorder_receive(pdu(7), ms(20), &mut out);
        assert_eq!(r.buffered_sns(), vec![2, 3, 7]);
        out.clear();
        r.on_reordering_timer(ms(200), &mut out);
        assert_eq!(sns(&out), vec![2, 3]);
        assert_eq!(r.rx_deliv(), 4);
        assert_eq!(r.rx_reord(), Some(8));
        // anchored on 7's arrival
        assert_eq!(r.timer_deadline(), Some(ms(220)));
        out.clear();
        r.on_reordering_timer(ms(220), &mut out);
        assert_eq!(sns(&out), vec![7]);
        assert_eq!(r.buffered(), 0);
    }

    #[test]
    fn closing_gap_stops_timer() {
        let mut r: Reorderer<u16> = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        r.reorder_receive(pdu(1), ms(0), &mut out);
        // 1 held, waiting for 0
        r.reorder_receive(pdu(0), ms(5), &mut out);
        assert_eq!(r.timer_deadline(), None);
        assert_eq!(sns(&out), vec![0, 1]);
    }

    #[test]
    fn duplicates_delivered_once() {
        let mut r = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        for sn in 0..5 {
            r.reorder_receive(pdu(sn), ms(0), &mut out);
        }
        r.reorder_receive(pdu(5), ms(1), &mut out);
        assert_eq!(
            r.reorder_receive(pdu(5), ms(2), &mut out),
            ReceiveOutcome::Duplicate
        );
        // buffered duplicate
        r.reorder_receive(pdu(7), ms(3), &mut out);
        assert_eq!(
            r.reorder_receive(pdu(7), ms(4), &mut out),
            ReceiveOutcome::Duplicate
        );
        assert_eq!(sns(&out), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(r.counters().duplicates, 2);
    }

    #[test]
    fn far_ahead_sn_is_window_violation() {
        let mut r: Reorderer<u16> = Reorderer::new(DEFAULT_T_REORDERING);
        let mut out = Vec::new();
        assert_eq!(
            r.reorder_receive(pdu(40_000), ms(0), &mut out),
            ReceiveOutcome::WindowViolation
        );
        assert_eq!(r.counters().window_violations, 1);
    }
}
