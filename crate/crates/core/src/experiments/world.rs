//! One repetition of a scenario: wires senders, splitters, links,
//! reorderers and receivers together on a single event queue.

use serde::{Deserialize, Serialize};

use super::scenario::{Connectivity, Scenario};
use crate::netem::{Ingress, Link, LinkCounters};
use crate::pdcp::{LinkId, PdcpPdu, ReorderCounters, Reorderer, Splitter, SplitterConfig};
use crate::sim::{EventQueue, SimTime};
use crate::transport::{
    AckFrame, Receiver, ReceiverCounters, Sender, SenderCounters, TransportPacket,
};

type Pdu = PdcpPdu<TransportPacket>;

#[derive(Debug)]
enum Ev {
    SenderWake { flow: usize, gen: u64 },
    LinkIngress { flow: usize, link: LinkId, pdu: Pdu },
    LinkArrive { flow: usize, pdu: Pdu },
    ReorderTimer { flow: usize },
    AppArrive { flow: usize, pkt: TransportPacket },
    AckTimer { flow: usize },
    AckArrive { flow: usize, ack: AckFrame },
}

struct Flow {
    sender: Sender,
    receiver: Receiver,
    splitter: Splitter,
    reorderer: Reorderer<TransportPacket>,
    /// SC flows carry no sequence-number gaps worth waiting for and skip reordering.
    reorder: bool,
    proxy_delay: SimTime,
    uplink_delay: SimTime,
    file_size: u64,
    wake: Option<(SimTime, u64)>,
    wake_gen: u64,
    reorder_armed: Option<SimTime>,
    ack_armed: Option<SimTime>,
    completed_at: Option<SimTime>,
    delivered: u64,
    bins: Vec<u64>,
    /// Payload bytes of copies arriving from the links, inside the measurement span.
    link_payload: u64,
    scratch: Vec<Pdu>,
}

/// Per-flow outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRun {
    pub throughput_mbps: f64,
    /// Payload arriving over both interfaces, Mbps.
    pub combined_mbps: f64,
    pub completion_s: Option<f64>,
    pub delivered_bytes: u64,
    pub series_mbps: Vec<f64>,
    pub sender: SenderCounters,
    pub receiver: ReceiverCounters,
    pub reorder: ReorderCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRun {
    pub utilization: Vec<f64>,
    pub mean_utilization: f64,
    pub counters: LinkCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub seed: u64,
    pub flows: Vec<FlowRun>,
    pub links: Vec<LinkRun>,
    pub end_s: f64,
    /// Some flow failed to finish within the run-length cap.
    pub flagged: bool,
    pub events: u64,
}

pub struct World {
    queue: EventQueue<Ev>,
    links: Vec<Link>,
    flows: Vec<Flow>,
    bin_width: SimTime,
    measure_end: SimTime,
}

impl World {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        let links = scenario
            .links
            .iter()
            .enumerate()
            .map(|(i, cfg)| Link::new(cfg.clone(), &format!("link{}", i + 1), seed))
            .collect();
        let flows = scenario
            .flows
            .iter()
            .map(|spec| {
                let splitter_cfg = match spec.connectivity {
                    Connectivity::Dc => scenario.splitter.clone(),
                    Connectivity::Sc(l) => SplitterConfig::single(l, scenario.splitter.proxy_delay),
                };
                let uplink = match spec.connectivity {
                    Connectivity::Dc => scenario.links[0].delay_mean,
                    Connectivity::Sc(l) => scenario.links[l.index()].delay_mean,
                };
                let file_size = spec.file_size;
                Flow {
                    sender: Sender::new(spec.transport.clone(), Some(file_size)),
                    receiver: Receiver::new(&spec.transport),
                    proxy_delay: splitter_cfg.proxy_delay,
                    splitter: Splitter::new(splitter_cfg),
                    reorderer: Reorderer::new(scenario.t_reordering),
                    reorder: spec.connectivity == Connectivity::Dc,
                    uplink_delay: uplink,
                    file_size,
                    wake: None,
                    wake_gen: 0,
                    reorder_armed: None,
                    ack_armed: None,
                    completed_at: None,
                    delivered: 0,
                    bins: Vec::new(),
                    link_payload: 0,
                    scratch: Vec::new(),
                }
            })
            .collect();
        World {
            queue: EventQueue::new(),
            links,
            flows,
            bin_width: scenario.bin_width,
            measure_end: if scenario.is_windowed() {
                scenario.measure_window
            } else {
                SimTime::MAX
            },
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn all_complete(&self) -> bool {
        self.flows.iter().all(|f| f.completed_at.is_some())
    }

    /// Runs until every flow completes or `t_end`, whichever is first.
    /// Returns the time the run stopped.
    pub fn run(&mut self, t_end: SimTime) -> SimTime {
        for i in 0..self.flows.len() {
            self.flow_send(i);
        }
        while let Some(ev) = self.queue.pop_until(t_end) {
            self.dispatch(ev.payload);
            if self.all_complete() {
                return self.queue.now();
            }
        }
        t_end
    }

    fn dispatch(&mut self, ev: Ev) {
        let now = self.queue.now();
        match ev {
            Ev::SenderWake { flow, gen } => {
                let f = &mut self.flows[flow];
                if f.wake.is_none_or(|(_, g)| g != gen) {
                    return;
                }
                f.wake = None;
                f.sender.on_timer(now);
                self.flow_send(flow);
            }
            Ev::LinkIngress { flow, link, pdu } => {
                if let Ingress::Deliver { deliver_at, .. } =
                    self.links[link.index()].ingress(pdu.size, now)
                {
                    self.queue
                        .schedule(deliver_at, Ev::LinkArrive { flow, pdu });
                }
            }
            Ev::LinkArrive { flow, pdu } => {
                let measure_end = self.measure_end;
                let f = &mut self.flows[flow];
                if now <= measure_end && f.completed_at.is_none() {
                    f.link_payload += u64::from(pdu.payload.payload_bytes);
                }
                let mut out = std::mem::take(&mut f.scratch);
                if f.reorder {
                    f.reorderer.reorder_receive(pdu, now, &mut out);
                } else {
                    out.push(pdu);
                }
                self.forward_to_app(flow, &mut out);
                self.flows[flow].scratch = out;
                self.arm_reorder_timer(flow);
            }
            Ev::ReorderTimer { flow } => {
                let f = &mut self.flows[flow];
                if f.reorder_armed == Some(now) {
                    f.reorder_armed = None;
                }
                let mut out = std::mem::take(&mut f.scratch);
                f.reorderer.on_reordering_timer(now, &mut out);
                self.forward_to_app(flow, &mut out);
                self.flows[flow].scratch = out;
                self.arm_reorder_timer(flow);
            }
            Ev::AppArrive { flow, pkt } => {
                let ack = self.flows[flow].receiver.receiver_on_packet(&pkt, now);
                self.record_progress(flow, now);
                self.handle_ack_out(flow, ack);
            }
            Ev::AckTimer { flow } => {
                let f = &mut self.flows[flow];
                if f.ack_armed == Some(now) {
                    f.ack_armed = None;
                }
                let ack = f.receiver.on_ack_timer(now);
                self.handle_ack_out(flow, ack);
            }
            Ev::AckArrive { flow, ack } => {
                self.flows[flow].sender.on_ack(&ack, now);
                self.flow_send(flow);
            }
        }
    }

    fn forward_to_app(&mut self, flow: usize, out: &mut Vec<Pdu>) {
        let delay = self.flows[flow].proxy_delay;
        for pdu in out.drain(..) {
            self.queue.schedule_in(
                delay,
                Ev::AppArrive {
                    flow,
                    pkt: pdu.payload,
                },
            );
        }
    }

    fn arm_reorder_timer(&mut self, flow: usize) {
        let f = &mut self.flows[flow];
        if let Some(d) = f.reorderer.timer_deadline() {
            if f.reorder_armed != Some(d) {
                f.reorder_armed = Some(d);
                self.queue.schedule(d, Ev::ReorderTimer { flow });
            }
        }
    }

    fn handle_ack_out(&mut self, flow: usize, ack: Option<AckFrame>) {
        let f = &mut self.flows[flow];
        if let Some(ack) = ack {
            let delay = f.uplink_delay;
            self.queue.schedule_in(delay, Ev::AckArrive { flow, ack });
        } else if let Some(d) = f.receiver.ack_deadline() {
            if f.ack_armed != Some(d) {
                f.ack_armed = Some(d);
                self.queue.schedule(d, Ev::AckTimer { flow });
            }
        }
    }

    fn record_progress(&mut self, flow: usize, now: SimTime) {
        let bin_width = self.bin_width.as_micros();
        let measure_end = self.measure_end;
        let f = &mut self.flows[flow];
        let delivered = f.receiver.delivered_bytes();
        if delivered > f.delivered {
            if now <= measure_end {
                let bin = (now.as_micros() / bin_width) as usize;
                if f.bins.len() <= bin {
                    f.bins.resize(bin + 1, 0);
                }
                f.bins[bin] += delivered - f.delivered;
            }
            f.delivered = delivered;
        }
        if f.completed_at.is_none() && f.delivered >= f.file_size {
            f.completed_at = Some(now);
        }
    }

    fn flow_send(&mut self, flow: usize) {
        let now = self.queue.now();
        let f = &mut self.flows[flow];
        if f.completed_at.is_some() {
            return;
        }
        for pkt in f.sender.maybe_send(now) {
            let size = pkt.wire_size();
            for (link, pdu) in f.splitter.split_route(pkt, size, now) {
                self.queue
                    .schedule_in(f.proxy_delay, Ev::LinkIngress { flow, link, pdu });
            }
        }
        if let Some(at) = f.sender.next_timer(now) {
            let at = at.max(now);
            if f.wake.is_none_or(|(armed, _)| at < armed) {
                f.wake_gen += 1;
                f.wake = Some((at, f.wake_gen));
                self.queue.schedule(
                    at,
                    Ev::SenderWake {
                        flow,
                        gen: f.wake_gen,
                    },
                );
            }
        }
    }

    /// Collects metrics after `run` stopped at `end`.
    pub fn finish(self, scenario: &Scenario, seed: u64, end: SimTime, cap_hit: bool) -> RepResult {
        let windowed = scenario.is_windowed();
        let span = if windowed {
            scenario.measure_window.min(end)
        } else {
            end
        };
        let bin = self.bin_width;
        let nbins = span.as_micros().div_ceil(bin.as_micros()).max(1) as usize;
        let flows = self
            .flows
            .iter()
            .map(|f| {
                let (bytes, secs) = if windowed {
                    let b: u64 = f.bins.iter().sum();
                    (b, span.as_secs_f64())
                } else {
                    match f.completed_at {
                        Some(t) => (f.file_size, t.as_secs_f64()),
                        None => (f.delivered, end.as_secs_f64()),
                    }
                };
                let secs = secs.max(1e-9);
                let mut series: Vec<f64> = f
                    .bins
                    .iter()
                    .map(|b| *b as f64 * 8.0 / bin.as_secs_f64() / 1e6)
                    .collect();
                series.resize(nbins, 0.0);
                FlowRun {
                    throughput_mbps: bytes as f64 * 8.0 / secs / 1e6,
                    combined_mbps: f.link_payload as f64 * 8.0 / secs / 1e6,
                    completion_s: f.completed_at.map(|t| t.as_secs_f64()),
                    delivered_bytes: bytes,
                    series_mbps: series,
                    sender: f.sender.counters(),
                    receiver: f.receiver.counters(),
                    reorder: f.reorderer.counters(),
                }
            })
            .collect();
        let links = self
            .links
            .iter()
            .map(|l| {
                let utilization = (0..nbins)
                    .map(|i| {
                        let from = SimTime::from_micros(i as u64 * bin.as_micros());
                        let to = (from + bin).min(span.max(SimTime::from_micros(1)));
                        if to <= from {
                            0.0
                        } else {
                            l.utilization(from, to)
                        }
                    })
                    .collect();
                LinkRun {
                    utilization,
                    mean_utilization: l
                        .utilization(SimTime::ZERO, span.max(SimTime::from_micros(1))),
                    counters: l.counters(),
                }
            })
            .collect();
        RepResult {
            seed,
            flows,
            links,
            end_s: end.as_secs_f64(),
            flagged: cap_hit,
            events: self.queue.dispatched(),
        }
    }
}

/// Runs one repetition with `seed`.
pub fn run_once(scenario: &Scenario, seed: u64) -> RepResult {
    let mut world = World::new(scenario, seed);
    let t_end = if scenario.is_windowed() {
        scenario.measure_window
    } else {
        run_cap(scenario)
    };
    let end = world.run(t_end);
    let cap_hit = !scenario.is_windowed() && !world.all_complete();
    world.finish(scenario, seed, end, cap_hit)
}

/// Ten times the ideal transfer time of the slowest flow, at least one second.
pub fn run_cap(scenario: &Scenario) -> SimTime {
    let ideal = scenario
        .flows
        .iter()
        .map(|f| scenario.ideal_transfer_time(f))
        .max()
        .unwrap_or(SimTime::ZERO);
    SimTime::from_micros(ideal.as_micros() * 10).max(SimTime::from_secs(1))
}
