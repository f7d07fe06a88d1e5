use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netem::{LinkConfig, LinkRate};
use crate::pdcp::{LinkId, SplitterConfig, DEFAULT_T_REORDERING, LINK1, LINK2};
use crate::sim::SimTime;
use crate::transport::TransportConfig;

pub const MB: u64 = 1_000_000;
pub const THROUGHPUT_FILE_SIZE: u64 = 100 * MB;
pub const FAIRNESS_FILE_SIZE: u64 = 1000 * MB;
pub const FAIRNESS_WINDOW: SimTime = SimTime::from_secs(180);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// One DC client downloading a file to completion.
    Throughput,
    /// One DC flow competing with one SC flow per link over a fixed window.
    Fairness,
    /// Two SC flows sharing link 1 over a fixed window.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Dc,
    Sc(LinkId),
}

impl Connectivity {
    pub fn label(&self) -> String {
        match self {
            Connectivity::Dc => "dc".into(),
            Connectivity::Sc(l) => format!("sc{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub connectivity: Connectivity,
    pub transport: TransportConfig,
    pub file_size: u64,
    /// Free-form tag for reports ("quic", "tcp").
    pub stack: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub links: [LinkConfig; 2],
    pub splitter: SplitterConfig,
    pub t_reordering: SimTime,
    pub flows: Vec<FlowSpec>,
    /// Fairness and pairwise runs measure delivered bytes over this window.
    pub measure_window: SimTime,
    pub bin_width: SimTime,
    pub seed: u64,
    pub repetitions: u32,
}

impl Scenario {
    fn default_links() -> [LinkConfig; 2] {
        let link = LinkConfig::fixed(20e6, SimTime::from_millis(10));
        [link.clone(), link]
    }

    /// Two 20 Mbps links, 10 ms +- 10 % delay, batch 100 at 1:1, NewReno with
    /// pacing and the enlarged receive buffer, one 100 MB download.
    pub fn throughput_default() -> Self {
        Scenario {
            name: "throughput".into(),
            topology: Topology::Throughput,
            links: Self::default_links(),
            splitter: SplitterConfig::default(),
            t_reordering: DEFAULT_T_REORDERING,
            flows: vec![FlowSpec {
                connectivity: Connectivity::Dc,
                transport: TransportConfig::default(),
                file_size: THROUGHPUT_FILE_SIZE,
                stack: "quic".into(),
            }],
            measure_window: FAIRNESS_WINDOW,
            bin_width: SimTime::from_secs(1),
            seed: 1,
            repetitions: 10,
        }
    }

    /// DC flow plus one SC flow per link, each downloading 1 GB, measured for 180 s.
    pub fn fairness_default() -> Self {
        let flow = |connectivity| FlowSpec {
            connectivity,
            transport: TransportConfig::default(),
            file_size: FAIRNESS_FILE_SIZE,
            stack: "quic".into(),
        };
        Scenario {
            name: "fairness".into(),
            topology: Topology::Fairness,
            flows: vec![
                flow(Connectivity::Dc),
                flow(Connectivity::Sc(LINK1)),
                flow(Connectivity::Sc(LINK2)),
            ],
            ..Self::throughput_default()
        }
    }

    pub fn pairwise_default() -> Self {
        let flow = FlowSpec {
            connectivity: Connectivity::Sc(LINK1),
            transport: TransportConfig::default(),
            file_size: FAIRNESS_FILE_SIZE,
            stack: "quic".into(),
        };
        Scenario {
            name: "pairwise".into(),
            topology: Topology::Pairwise,
            flows: vec![flow.clone(), flow],
            ..Self::throughput_default()
        }
    }

    /// Fixed-window topologies stop at `measure_window`.
    pub fn is_windowed(&self) -> bool {
        self.topology != Topology::Throughput
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.links {
            l.validate()?;
        }
        self.splitter.validate()?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.bin_width == SimTime::ZERO {
            return Err(Error::Config("bin width must be positive".into()));
        }
        let dc = self
            .flows
            .iter()
            .filter(|f| f.connectivity == Connectivity::Dc)
            .count();
        let sc = |l| {
            self.flows
                .iter()
                .filter(|f| f.connectivity == Connectivity::Sc(l))
                .count()
        };
        match self.topology {
            Topology::Throughput if self.flows.len() != 1 || dc != 1 => Err(Error::Config(
                "throughput scenarios have exactly one DC flow".into(),
            )),
            Topology::Fairness
                if self.flows.len() != 3 || dc != 1 || sc(LINK1) != 1 || sc(LINK2) != 1 =>
            {
                Err(Error::Config(
                    "fairness scenarios have one DC flow and one SC flow per link".into(),
                ))
            }
            Topology::Pairwise if self.flows.len() != 2 || dc != 0 => Err(Error::Config(
                "pairwise scenarios have exactly two SC flows".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Transfer time at full capacity for `flow`, used for the run-length cap.
    pub fn ideal_transfer_time(&self, flow: &FlowSpec) -> SimTime {
        let rate = match flow.connectivity {
            Connectivity::Dc => self.links.iter().map(|l| l.rate.mean_rate()).sum::<f64>(),
            Connectivity::Sc(l) => self.links[l.index()].rate.mean_rate(),
        };
        SimTime::from_secs_f64(flow.file_size as f64 * 8.0 / rate)
    }

    /// Sum of the links' mean rates in bits/second.
    pub fn aggregate_rate(&self) -> f64 {
        self.links.iter().map(|l| l.rate.mean_rate()).sum()
    }

    pub fn link_rate_fixed(&self, link: LinkId) -> Option<f64> {
        match self.links[link.index()].rate {
            LinkRate::Fixed(r) => Some(r),
            LinkRate::Trace(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Scenario::throughput_default().validate().unwrap();
        Scenario::fairness_default().validate().unwrap();
        Scenario::pairwise_default().validate().unwrap();
    }

    #[test]
    fn fairness_shape_enforced() {
        let mut s = Scenario::fairness_default();
        s.flows.pop();
        assert!(s.validate().is_err());
        let mut t = Scenario::throughput_default();
        t.flows[0].connectivity = Connectivity::Sc(LINK1);
        assert!(t.validate().is_err());
    }

    #[test]
    fn ideal_time_uses_both_links_for_dc() {
        let s = Scenario::throughput_default();
        assert_eq!(s.ideal_transfer_time(&s.flows[0]), SimTime::from_secs(20));
    }
}
