use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::world::{run_once, RepResult};
use crate::error::{Error, Result};
use crate::pdcp::DcMode;

/// Jain's fairness index `(Σx)² / (n·Σx²)`.
pub fn jain_index(xs: &[f64]) -> Result<f64> {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sq == 0.0 || xs.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::UndefinedFairness);
    }
    Ok(sum * sum / (xs.len() as f64 * sq))
}

/// Goodput expected from combined throughput `b` when every packet is
/// duplicated and each copy is lost with probability `p`.
pub fn expected_duplication_goodput(b: f64, p: f64) -> f64 {
    b * (1.0 + p) / 2.0
}

/// Chance that a packet reaches the receiver through at least one copy.
pub fn delivery_probability(p: f64, mode: Option<DcMode>) -> f64 {
    match mode {
        Some(DcMode::Duplicate) => 1.0 - p * p,
        _ => 1.0 - p,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation; std is 0 for a single value.
    pub fn of(xs: &[f64]) -> Stat {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Counters averaged over repetitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowCounters {
    pub packets_sent: f64,
    pub retransmissions: f64,
    pub lost_packets: f64,
    pub congestion_events: f64,
    pub pto_fired: f64,
    pub buffer_drops: f64,
    pub timer_expiries: f64,
    pub window_violations: f64,
    pub pdcp_duplicates: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow_id: usize,
    pub connectivity: String,
    pub stack: String,
    /// Application goodput X.
    pub throughput_mbps: Stat,
    /// Payload arriving over the interfaces, B.
    pub combined_mbps: Stat,
    pub completion_s: Option<Stat>,
    pub series_mbps: Vec<f64>,
    pub counters: FlowCounters,
}

impl FlowSummary {
    /// Measured X/B, averaged per repetition.
    pub fn goodput_ratio(&self) -> f64 {
        if self.combined_mbps.mean > 0.0 {
            self.throughput_mbps.mean / self.combined_mbps.mean
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub link_id: usize,
    pub mean_utilization: Stat,
    pub utilization: Vec<f64>,
    pub queue_drops: f64,
    pub loss_drops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub repetitions: u32,
    /// Width of the series bins, seconds.
    pub bin_s: f64,
    pub flows: Vec<FlowSummary>,
    pub links: Vec<LinkSummary>,
    /// Fairness across flows, for multi-flow topologies.
    pub jfi: Option<Stat>,
    pub flagged: bool,
    #[serde(skip)]
    pub reps: Vec<RepResult>,
}

impl RunResult {
    /// Mean throughput of the first flow, the DC flow in throughput and fairness runs.
    pub fn throughput(&self) -> f64 {
        self.flows.first().map_or(0.0, |f| f.throughput_mbps.mean)
    }

    pub fn jfi_mean(&self) -> Option<f64> {
        self.jfi.map(|s| s.mean)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    Stat::of(&v).mean
}

fn mean_series<'a>(series: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let all: Vec<&Vec<f64>> = series.collect();
    let len = all.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| mean(all.iter().map(|s| s.get(i).copied().unwrap_or(0.0))))
        .collect()
}

/// Aggregates per-repetition results into means and standard deviations.
pub fn aggregate(scenario: &Scenario, reps: Vec<RepResult>) -> RunResult {
    let flows = scenario
        .flows
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let runs: Vec<_> = reps.iter().map(|r| &r.flows[i]).collect();
            let tp: Vec<f64> = runs.iter().map(|f| f.throughput_mbps).collect();
            let comb: Vec<f64> = runs.iter().map(|f| f.combined_mbps).collect();
            let completion: Option<Vec<f64>> = runs.iter().map(|f| f.completion_s).collect();
            let c =
                |g: &dyn Fn(&super::world::FlowRun) -> u64| mean(runs.iter().map(|f| g(f) as f64));
            FlowSummary {
                flow_id: i,
                connectivity: spec.connectivity.label(),
                stack: spec.stack.clone(),
                throughput_mbps: Stat::of(&tp),
                combined_mbps: Stat::of(&comb),
                completion_s: completion
                    .filter(|_| !scenario.is_windowed())
                    .map(|v| Stat::of(&v)),
                series_mbps: mean_series(runs.iter().map(|f| &f.series_mbps)),
                counters: FlowCounters {
                    packets_sent: c(&|f| f.sender.packets_sent),
                    retransmissions: c(&|f| f.sender.retransmissions),
                    lost_packets: c(&|f| f.sender.lost),
                    congestion_events: c(&|f| f.sender.congestion_events),
                    pto_fired: c(&|f| f.sender.pto_fired),
                    buffer_drops: c(&|f| f.receiver.buffer_drops),
                    timer_expiries: c(&|f| f.reorder.timer_expiries),
                    window_violations: c(&|f| f.reorder.window_violations),
                    pdcp_duplicates: c(&|f| f.reorder.duplicates),
                },
            }
        })
        .collect();
    let links = (0..scenario.links.len())
        .map(|i| {
            let runs: Vec<_> = reps.iter().map(|r| &r.links[i]).collect();
            let util: Vec<f64> = runs.iter().map(|l| l.mean_utilization).collect();
            LinkSummary {
                link_id: i + 1,
                mean_utilization: Stat::of(&util),
                utilization: mean_series(runs.iter().map(|l| &l.utilization)),
                queue_drops: mean(runs.iter().map(|l| l.counters.dropped_queue as f64)),
                loss_drops: mean(runs.iter().map(|l| l.counters.dropped_loss as f64)),
            }
        })
        .collect();
    let jfi = (scenario.flows.len() > 1).then(|| {
        let per_rep: Vec<f64> = reps
            .iter()
            .map(|r| {
                let xs: Vec<f64> = r.flows.iter().map(|f| f.throughput_mbps).collect();
                jain_index(&xs).unwrap_or(0.0)
            })
            .collect();
        Stat::of(&per_rep)
    });
    RunResult {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        repetitions: scenario.repetitions,
        bin_s: scenario.bin_width.as_secs_f64(),
        flows,
        links,
        jfi,
        flagged: reps.iter().any(|r| r.flagged),
        reps,
    }
}

/// Runs `repetitions` independent repetitions seeded `seed + i` and aggregates them.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let reps: Vec<RepResult> = (0..u64::from(scenario.repetitions))
        .into_par_iter()
        .map(|i| run_once(scenario, scenario.seed.wrapping_add(i)))
        .collect();
    Ok(aggregate(scenario, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jain_examples() {
        assert_abs_diff_eq!(
            jain_index(&[20.0, 20.0, 20.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(jain_index(&[30.0, 10.0]).unwrap(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(
            jain_index(&[7.0, 0.0, 0.0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            jain_index(&[0.0, 0.0]),
            Err(Error::UndefinedFairness)
        ));
        assert!(jain_index(&[]).is_err());
    }

    #[test]
    fn duplication_goodput_examples() {
        assert_abs_diff_eq!(expected_duplication_goodput(40.0, 0.0), 20.0);
        assert_abs_diff_eq!(
            expected_duplication_goodput(40.0, 0.05),
            21.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected_duplication_goodput(33.0, 1.0), 33.0);
    }

    #[test]
    fn delivery_probability_examples() {
        assert_abs_diff_eq!(
            delivery_probability(0.1, Some(DcMode::Duplicate)),
            0.99,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(delivery_probability(0.1, None), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(
            delivery_probability(0.1, Some(DcMode::Split)),
            0.9,
            epsilon = 1e-12
        );
        assert_eq!(delivery_probability(0.0, Some(DcMode::Duplicate)), 1.0);
        assert_eq!(delivery_probability(0.0, None), 1.0);
    }

    #[test]
    fn stat_uses_sample_std() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.std, 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(Stat::of(&[5.0]).std, 0.0);
    }
}
