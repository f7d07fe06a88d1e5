//! Splitter -> two emulated links -> reorderer, driven without the transport layer.
//!
//! Used to check the PDCP delivery guarantees on randomized instances.

use crate::netem::{Ingress, Link, LinkConfig};
use crate::pdcp::{
    DcMode, PdcpPdu, ReceiveOutcome, Reorderer, Splitter, SplitterConfig, DEFAULT_T_REORDERING,
};
use crate::sim::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub packets: usize,
    pub batch: u32,
    pub ratio: (u32, u32),
    pub mode: DcMode,
    pub links: [LinkConfig; 2],
    /// Gap between consecutive sends.
    pub send_gap: SimTime,
    pub payload_bytes: usize,
    pub seed: u64,
}

impl PipelineSpec {
    /// Small random instance: batch 1..=500, any ratio, loss up to 20 %, jitter.
    pub fn random<R: Rng>(rng: &mut R, packets: usize) -> Self {
        let link = |rng: &mut R| {
            let delay = SimTime::from_micros(rng.random_range(0..60_000));
            let mut l = LinkConfig::fixed(rng.random_range(2e6..100e6), delay);
            l.delay_std = SimTime::from_micros(rng.random_range(0..=delay.as_micros() / 2 + 1));
            l.loss_prob = if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..0.2)
            };
            l.non_overtaking = rng.random_bool(0.5);
            l.queue_limit = rng.random_range(10..2000);
            l
        };
        let ratio = loop {
            let r = (rng.random_range(0..6), rng.random_range(0..6));
            if r != (0, 0) {
                break r;
            }
        };
        PipelineSpec {
            packets,
            batch: rng.random_range(1..=500),
            ratio,
            mode: if rng.random_bool(0.25) {
                DcMode::Duplicate
            } else {
                DcMode::Split
            },
            links: [link(rng), link(rng)],
            send_gap: SimTime::from_micros(rng.random_range(50..2_000)),
            payload_bytes: rng.random_range(1..64),
            seed: rng.random(),
        }
    }
}

#[derive(Debug, Default)]
pub struct PipelineTrace {
    /// Unwrapped index of each delivered packet, in delivery order.
    pub delivered: Vec<u64>,
    pub delivered_payload: Vec<u8>,
    pub input_payload: Vec<u8>,
    /// `(index, arrived, delivered)` for every window-accepted PDU.
    pub accepted: Vec<(u64, SimTime, Option<SimTime>)>,
    pub lost: usize,
}

type Payload = (u64, Vec<u8>);

pub fn run_pipeline(inst: &PipelineSpec) -> PipelineTrace {
    let cfg = SplitterConfig {
        batch_size: inst.batch,
        ratio: inst.ratio,
        mode: inst.mode,
        proxy_delay: SimTime::ZERO,
    };
    let mut splitter = Splitter::new(cfg);
    let mut links = [
        Link::new(inst.links[0].clone(), "link1", inst.seed),
        Link::new(inst.links[1].clone(), "link2", inst.seed),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let mut out = PipelineTrace::default();
    let mut arrivals: Vec<(SimTime, u8, PdcpPdu<Payload>)> = Vec::new();
    let mut t = SimTime::ZERO;
    for i in 0..inst.packets as u64 {
        let bytes: Vec<u8> = (0..inst.payload_bytes).map(|_| rng.random()).collect();
        out.input_payload.extend_from_slice(&bytes);
        for (link, pdu) in splitter.split_route((i, bytes), 100, t) {
            match links[link.index()].ingress(pdu.size, t) {
                Ingress::Deliver { deliver_at, .. } => arrivals.push((deliver_at, link.0, pdu)),
                _ => out.lost += 1,
            }
        }
        t += inst.send_gap;
    }
    // stable: equal times keep link-then-send order
    arrivals.sort_by_key(|(at, link, pdu)| (*at, *link, pdu.payload.0));

    let mut reorderer: Reorderer<Payload> = Reorderer::new(DEFAULT_T_REORDERING);
    let mut index_of_accepted = HashMap::new();
    let mut buf = Vec::new();
    let record = |buf: &mut Vec<PdcpPdu<Payload>>,
                  at: SimTime,
                  out: &mut PipelineTrace,
                  map: &HashMap<u64, usize>| {
        for pdu in buf.drain(..) {
            out.delivered.push(pdu.payload.0);
            out.delivered_payload.extend_from_slice(&pdu.payload.1);
            if let Some(&k) = map.get(&pdu.payload.0) {
                out.accepted[k].2.get_or_insert(at);
            }
        }
    };
    for (at, _, pdu) in arrivals {
        while let Some(d) = reorderer.timer_deadline().filter(|d| *d <= at) {
            reorderer.on_reordering_timer(d, &mut buf);
            record(&mut buf, d, &mut out, &index_of_accepted);
        }
        let idx = pdu.payload.0;
        let outcome = reorderer.reorder_receive(pdu, at, &mut buf);
        if matches!(
            outcome,
            ReceiveOutcome::Delivered(_) | ReceiveOutcome::Buffered
        ) {
            index_of_accepted.insert(idx, out.accepted.len());
            out.accepted.push((idx, at, None));
        }
        record(&mut buf, at, &mut out, &index_of_accepted);
    }
    while let Some(d) = reorderer.timer_deadline() {
        reorderer.on_reordering_timer(d, &mut buf);
        record(&mut buf, d, &mut out, &index_of_accepted);
    }
    out
}

impl PipelineTrace {
    /// Checks ordering, uniqueness and the delivery deadline; describes the first violation.
    pub fn check(&self) -> Result<(), String> {
        if let Some(w) = self.delivered.windows(2).find(|w| w[0] >= w[1]) {
            return Err(format!("delivery order {} then {}", w[0], w[1]));
        }
        let bound = DEFAULT_T_REORDERING + SimTime::from_micros(1);
        for &(idx, arrived, delivered) in &self.accepted {
            match delivered {
                None => return Err(format!("accepted packet {idx} never delivered")),
                Some(d) if d - arrived > bound => {
                    return Err(format!(
                        "packet {idx} held {} ms",
                        (d - arrived).as_millis_f64()
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
