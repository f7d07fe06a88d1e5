//! Deterministic discrete-event engine: integer virtual clock, a
//! `(fire_at, seq)` ordered event queue and named random streams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Simulated time in microseconds since the start of a run.
///
/// Also used for durations (delays, timer lengths).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond; negative and NaN inputs map to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * 1e6).round().min(u64::MAX as f64) as u64)
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Self::from_secs_f64(ms / 1e3)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn mul_f64(self, k: f64) -> SimTime {
        SimTime::from_secs_f64(self.as_secs_f64() * k)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

/// A scheduled occurrence. `seq` is assigned by the queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

struct Entry<P>(Event<P>);

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.fire_at == other.0.fire_at && self.0.seq == other.0.seq
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_at, other.0.seq).cmp(&(self.0.fire_at, self.0.seq))
    }
}

/// Event queue with a virtual clock. Events are dispatched in
/// lexicographic `(fire_at, seq)` order.
pub struct EventQueue<P> {
    heap: BinaryHeap<Entry<P>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Number of events handed out so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.fire_at)
    }

    /// Schedules `payload` at `fire_at` and returns its sequence number.
    ///
    /// # Panics
    ///
    /// Scheduling before `now()` is a contract violation and aborts the run.
    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> u64 {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: fire_at={fire_at:?} now={:?}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event {
            fire_at,
            seq,
            payload,
        }));
        seq
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> u64 {
        let at = self.now + delay;
        self.schedule(at, payload)
    }

    /// Pops the next event if it fires at or before `t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        match self.heap.peek() {
            Some(e) if e.0.fire_at <= t_end => {
                let Entry(ev) = self.heap.pop().expect("peeked");
                self.now = ev.fire_at;
                self.dispatched += 1;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Dispatches every event with `fire_at <= t_end` to `handler`, then sets
    /// the clock to `t_end`. Handlers may schedule further events.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, Event<P>),
    {
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
        }
        if t_end > self.now {
            self.now = t_end;
        }
    }
}

/// A named, individually seeded random stream.
///
/// The generator is ChaCha8 keyed by the run seed with the stream id derived
/// from the name, so draws do not depend on what other streams do.
#[derive(Clone)]
pub struct RngStream {
    name: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream")
            .field("name", &self.name)
            .field("seed", &self.seed)
            .finish()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngStream {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        let name = name.into();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(name.as_bytes()));
        RngStream { name, seed, rng }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `true` with probability `p`. `p <= 0` never fires, `p >= 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// One normal draw clamped below at zero.
    pub fn draw_normal(&mut self, mean: f64, std: f64) -> f64 {
        assert!(std >= 0.0, "negative standard deviation {std}");
        if std == 0.0 {
            return mean.max(0.0);
        }
        let normal = Normal::new(mean, std).expect("finite normal parameters");
        normal.sample(&mut self.rng).max(0.0)
    }

    /// Normal delay draw in simulated time, clamped at zero.
    pub fn draw_delay(&mut self, mean: SimTime, std: SimTime) -> SimTime {
        if std == SimTime::ZERO {
            return mean;
        }
        let us = self.draw_normal(mean.as_micros() as f64, std.as_micros() as f64);
        SimTime::from_micros(us.round() as u64)
    }

    pub fn range_u64(&mut self, lo: u64, hi_inclusive: u64) -> u64 {
        self.rng.random_range(lo..=hi_inclusive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_tie_break() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(5), "A");
        q.schedule(SimTime::from_micros(5), "B");
        let mut seen = Vec::new();
        q.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec!["A", "B"]);
    }

    #[test]
    fn schedule_at_now_dispatches_before_clock_advances() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(10), 0u32);
        q.schedule(SimTime::from_micros(20), 2u32);
        let mut log = Vec::new();
        q.run_until(SimTime::from_micros(30), |q, ev| {
            log.push((q.now(), ev.payload));
            if ev.payload == 0 {
                let now = q.now();
                q.schedule(now, 1);
            }
        });
        assert_eq!(
            log,
            vec![
                (SimTime::from_micros(10), 0),
                (SimTime::from_micros(10), 1),
                (SimTime::from_micros(20), 2)
            ]
        );
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run_until(SimTime::from_secs(10), |_, _| panic!("nothing to dispatch"));
        assert_eq!(q.now(), SimTime::from_secs(10));
        assert_eq!(q.dispatched(), 0);
    }

    #[test]
    fn boundary_is_inclusive() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(2), ());
        q.schedule(SimTime::from_secs(2) + SimTime::from_micros(1), ());
        let mut n = 0;
        q.run_until(SimTime::from_secs(2), |_, _| n += 1);
        assert_eq!(n, 1);
        assert_eq!(q.len(), 1);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn past_schedule_aborts() {
        let mut q = EventQueue::new();
        q.run_until(SimTime::from_secs(1), |_, _: Event<()>| {});
        q.schedule(SimTime::from_millis(10), ());
    }

    #[test]
    fn million_random_events_dispatch_sorted() {
        let mut rng = RngStream::new("times", 42);
        let mut q = EventQueue::new();
        let mut expected = Vec::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            let t = SimTime::from_micros(rng.range_u64(0, 10_000_000));
            let seq = q.schedule(t, i);
            expected.push((t, seq));
        }
        // sort oracle over the scheduled set
        expected.sort();
        let mut got = Vec::with_capacity(expected.len());
        q.run_until(SimTime::MAX, |_, ev| got.push((ev.fire_at, ev.seq)));
        assert_eq!(got, expected);
    }

    #[test]
    fn zero_std_is_exact_mean() {
        let mut s = RngStream::new("jitter", 1);
        for _ in 0..100 {
            assert_eq!(s.draw_normal(10.0, 0.0), 10.0);
        }
    }

    #[test]
    fn normal_sample_mean() {
        let mut s = RngStream::new("jitter", 3);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| s.draw_normal(10e-3, 1e-3)).sum::<f64>() / n as f64;
        assert!((mean - 10e-3).abs() < 0.01 * 10e-3, "mean {mean}");
    }

    #[test]
    fn clamp_prevents_negative_draws() {
        let mut s = RngStream::new("jitter", 9);
        for _ in 0..10_000 {
            assert!(s.draw_normal(1e-6, 1e-3) >= 0.0);
        }
    }

    #[test]
    fn streams_independent_of_interleaving() {
        let mut a1 = RngStream::new("link1.jitter", 7);
        let solo: Vec<f64> = (0..50).map(|_| a1.uniform()).collect();

        let mut a2 = RngStream::new("link1.jitter", 7);
        let mut b = RngStream::new("link1.loss", 7);
        let mut mixed = Vec::new();
        for i in 0..50 {
            if i % 3 == 0 {
                b.uniform();
            }
            mixed.push(a2.uniform());
        }
        assert_eq!(solo, mixed);

        let mut c = RngStream::new("link2.jitter", 7);
        assert_ne!(solo[0], c.uniform());
    }

    #[test]
    fn simtime_conversions() {
        assert_eq!(SimTime::from_secs_f64(0.0006), SimTime::from_micros(600));
        assert_eq!(SimTime::from_secs_f64(-1.0), SimTime::ZERO);
        assert_eq!(SimTime::from_millis(3).as_millis_f64(), 3.0);
    }
}
