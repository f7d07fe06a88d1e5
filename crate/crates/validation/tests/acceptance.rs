//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use dcsim::catalog::CATALOG;
use dcsim::experiments::{run_scenario, Parameter, RunResult, Scenario};
use dcsim::netem::LinkConfig;
use dcsim::pipeline::{run_pipeline, PipelineSpec};
use dcsim::report::{self, RunMeta};
use dcsim::sim::SimTime;
use dcsim::transport::cc::{cubic_k, CongestionControl, Cubic, NewReno};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPS: u32 = 10;
const SEED: u64 = 1;

const PDCP_INSTANCES: usize = 10_000;
const PDCP_MAX_PACKETS: usize = 400;
const PDCP_BUDGET: Duration = Duration::from_secs(30);
const IDENTITY_INSTANCES: usize = 1_000;
const IDENTITY_BUDGET: Duration = Duration::from_secs(5);
const BATCH_PENALTY_MAX_RATIO: f64 = 0.8;
const SINGLE_LINK_MBPS: f64 = 20.0;
const BATCH_BUDGET: Duration = Duration::from_secs(120);
const MATCHED_SPLIT_MIN_GAIN: f64 = 1.1;
const SYMMETRIC_MIN_JFI: f64 = 0.99;
const GOODPUT_REL_TOL: f64 = 0.05;
const DUP_MAX_JFI: f64 = 0.7;
const DUP_MIN_JFI_DROP: f64 = 0.15;
const SYMMETRIC_MAX_BUFFER_GAP: f64 = 0.10;
const CC_BUDGET: Duration = Duration::from_secs(1);
const MSS: u64 = 1248;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(s: &Scenario) -> RunResult {
    run_scenario(s).expect("valid scenario")
}

fn point(base: &Scenario, p: Parameter, value: &str) -> Scenario {
    let mut s = p.apply(base, value).expect("valid sweep value");
    s.repetitions = REPS;
    s.seed = SEED;
    s
}

fn throughput_at(base: &Scenario, p: Parameter, value: &str) -> f64 {
    run(&point(base, p, value)).throughput()
}

fn pdcp_exactly_once() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = Vec::new();
    for i in 0..PDCP_INSTANCES {
        let packets = rng.random_range(1..=PDCP_MAX_PACKETS);
        let inst = PipelineSpec::random(&mut rng, packets);
        if let Err(e) = run_pipeline(&inst).check() {
            bad.push(format!("#{i}: {e}"));
        }
    }
    let took = t0.elapsed();
    verdict(
        bad.is_empty() && took < PDCP_BUDGET,
        format!(
            "{PDCP_INSTANCES} instances, {} violations{}, {took:.1?}",
            bad.len(),
            bad.first()
                .map(|b| format!(" (first {b})"))
                .unwrap_or_default()
        ),
    )
}

fn ideal_path_identity() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut mismatches = 0;
    for _ in 0..IDENTITY_INSTANCES {
        let packets = rng.random_range(1..=PDCP_MAX_PACKETS);
        let mut inst = PipelineSpec::random(&mut rng, packets);
        for l in &mut inst.links {
            let delay = SimTime::from_micros(rng.random_range(0..50_000));
            *l = LinkConfig::fixed(1e9, delay);
            l.delay_std = SimTime::ZERO;
            l.queue_limit = usize::MAX;
        }
        let out = run_pipeline(&inst);
        if out.lost != 0 || out.delivered_payload != out.input_payload {
            mismatches += 1;
        }
    }
    let took = t0.elapsed();
    verdict(
        mismatches == 0 && took < IDENTITY_BUDGET,
        format!("{IDENTITY_INSTANCES} instances, {mismatches} mismatches, {took:.1?}"),
    )
}

fn batch_size_trend() -> Verdict {
    let t0 = Instant::now();
    let base = Scenario::throughput_default();
    let t: Vec<f64> = ["50", "100", "500"]
        .iter()
        .map(|b| throughput_at(&base, Parameter::BatchSize, b))
        .collect();
    let took = t0.elapsed();
    let ratio = t[2] / t[1];
    verdict(
        ratio <= BATCH_PENALTY_MAX_RATIO && t[1] > SINGLE_LINK_MBPS && took < BATCH_BUDGET,
        format!(
            "T(50)={:.3} T(100)={:.3} T(500)={:.3} Mbps, T(500)/T(100)={ratio:.3} (need <= {BATCH_PENALTY_MAX_RATIO}), {took:.1?}",
            t[0], t[1], t[2]
        ),
    )
}

fn split_peak() -> Verdict {
    let base = Scenario::throughput_default();
    let pcts = ["10", "30", "50", "70", "90"];
    let t: Vec<f64> = pcts
        .iter()
        .map(|p| throughput_at(&base, Parameter::SplitPct, p))
        .collect();
    let rising = t[0] < t[1] && t[1] < t[2];
    let falling = t[2] > t[3] && t[3] > t[4];
    let shown: Vec<String> = pcts
        .iter()
        .zip(&t)
        .map(|(p, v)| format!("{p}%={v:.3}"))
        .collect();
    verdict(rising && falling, shown.join(" "))
}

fn matched_split() -> Verdict {
    let base = Scenario::throughput_default();
    let even = throughput_at(&base, Parameter::BandwidthRatio, "5:1");
    let matched = throughput_at(&base, Parameter::BandwidthRatioMatchedSplit, "5:1");
    verdict(
        matched >= MATCHED_SPLIT_MIN_GAIN * even,
        format!("5:1 matched {matched:.3} vs 50/50 {even:.3} Mbps, gain {:.3} (need >= {MATCHED_SPLIT_MIN_GAIN})", matched / even),
    )
}

fn symmetric_fairness() -> Verdict {
    let mut s = Scenario::fairness_default();
    s.repetitions = REPS;
    s.seed = SEED;
    let r = run(&s);
    let jfi = r.jfi_mean().unwrap_or(0.0);
    let flows: Vec<String> = r
        .flows
        .iter()
        .map(|f| format!("{}={:.3}", f.connectivity, f.throughput_mbps.mean))
        .collect();
    verdict(
        jfi >= SYMMETRIC_MIN_JFI,
        format!(
            "JFI {} (need >= {SYMMETRIC_MIN_JFI}), {}",
            report::jfi_str(jfi),
            flows.join(" ")
        ),
    )
}

fn duplication_goodput() -> Verdict {
    let base = Scenario::throughput_default();
    let mut ok = true;
    let mut shown = Vec::new();
    for p in ["0", "0.01", "0.05"] {
        let r = run(&point(&base, Parameter::DuplicationLoss, p));
        let measured = r.flows[0].goodput_ratio();
        let expected = (1.0 + p.parse::<f64>().unwrap()) / 2.0;
        ok &= (measured - expected).abs() <= GOODPUT_REL_TOL * expected;
        shown.push(format!("p={p}: X/B={measured:.4} vs {expected:.4}"));
    }
    verdict(
        ok,
        format!(
            "{} (tolerance {:.0}%)",
            shown.join(", "),
            GOODPUT_REL_TOL * 100.0
        ),
    )
}

fn duplication_unfairness() -> Verdict {
    let base = Scenario::fairness_default();
    let mut ok = true;
    let mut shown = Vec::new();
    for p in ["0.01", "0.05"] {
        let dup = run(&point(&base, Parameter::DuplicationLoss, p))
            .jfi_mean()
            .unwrap_or(1.0);
        let split = run(&point(&base, Parameter::LossProb, p))
            .jfi_mean()
            .unwrap_or(0.0);
        ok &= dup <= DUP_MAX_JFI && dup <= split - DUP_MIN_JFI_DROP;
        shown.push(format!(
            "p={p}: dup {} split {}",
            report::jfi_str(dup),
            report::jfi_str(split)
        ));
    }
    verdict(
        ok,
        format!(
            "{} (need dup <= {DUP_MAX_JFI} and >= {DUP_MIN_JFI_DROP} below split)",
            shown.join(", ")
        ),
    )
}

fn buffer_effect() -> Verdict {
    let asym = point(
        &Scenario::throughput_default(),
        Parameter::BandwidthRatio,
        "5:1",
    );
    let asym_default = throughput_at(&asym, Parameter::RecvBuffer, "default");
    let asym_enlarged = throughput_at(&asym, Parameter::RecvBuffer, "enlarged");
    let sym = Scenario::throughput_default();
    let sym_default = throughput_at(&sym, Parameter::RecvBuffer, "default");
    let sym_enlarged = throughput_at(&sym, Parameter::RecvBuffer, "enlarged");
    let gap = (sym_enlarged - sym_default).abs() / sym_enlarged;
    verdict(
        asym_default < asym_enlarged && gap <= SYMMETRIC_MAX_BUFFER_GAP,
        format!(
            "5:1 default {asym_default:.3} vs enlarged {asym_enlarged:.3} Mbps (need strictly lower); \
             1:1 default {sym_default:.3} vs enlarged {sym_enlarged:.3}, gap {:.1}% (need <= {:.0}%)",
            gap * 100.0,
            SYMMETRIC_MAX_BUFFER_GAP * 100.0
        ),
    )
}

fn high_delay_degradation() -> Verdict {
    let mut base = Scenario::fairness_default();
    for l in &mut base.links {
        l.delay_mean = SimTime::from_millis(100);
        l.delay_std = SimTime::from_millis(10);
    }
    let even = run(&point(&base, Parameter::DelayRatio, "1:1"));
    let skewed = run(&point(&base, Parameter::DelayRatio, "5:1"));
    let (t1, t5) = (even.throughput(), skewed.throughput());
    let (j1, j5) = (
        even.jfi_mean().unwrap_or(0.0),
        skewed.jfi_mean().unwrap_or(1.0),
    );
    verdict(
        t5 < t1 && j5 < j1,
        format!(
            "DC {t1:.3} -> {t5:.3} Mbps, JFI {} -> {} (1:1 -> 5:1, 200 ms sum)",
            report::jfi_str(j1),
            report::jfi_str(j5)
        ),
    )
}

fn cc_oracles() -> Verdict {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let now = SimTime::ZERO;

    // slow start: a full window acked per round doubles cwnd
    let mut reno = NewReno::new(MSS, 10 * MSS, 2 * MSS);
    for round in 1..=4 {
        let w = reno.cwnd();
        for _ in 0..w / MSS {
            reno.on_ack(MSS, now);
        }
        if reno.cwnd() != 2 * w {
            failures.push(format!(
                "slow start round {round}: {} != {}",
                reno.cwnd(),
                2 * w
            ));
        }
    }
    // avoidance: +1 MSS per window of acked bytes
    let mut reno = NewReno::with_state(MSS, 20 * MSS, 20 * MSS);
    for round in 1..=5 {
        let w = reno.cwnd();
        for _ in 0..w / MSS {
            reno.on_ack(MSS, now);
        }
        if reno.cwnd() != w + MSS {
            failures.push(format!(
                "avoidance round {round}: {} != {}",
                reno.cwnd(),
                w + MSS
            ));
        }
    }

    // CUBIC against the closed form C (t - K)^3 + w_max
    let w_max_pkts = 100.0;
    let k = (w_max_pkts * 0.3 / 0.4f64).cbrt();
    let closed = |t: f64| (0.4 * (t - k).powi(3) + w_max_pkts) * MSS as f64;
    if (cubic_k(w_max_pkts * MSS as f64, MSS as f64) - k).abs() > 1e-9 {
        failures.push("K mismatch".into());
    }
    for frac in [0.0, 0.5, 1.0] {
        let mut c = Cubic::new(MSS, 100 * MSS, 2 * MSS, false);
        c.on_congestion_event(SimTime::ZERO);
        let t = frac * k;
        if frac > 0.0 {
            c.on_ack(MSS, SimTime::from_secs_f64(t));
        }
        let err = (c.cwnd() as f64 - closed(t)).abs();
        if err > MSS as f64 {
            failures.push(format!(
                "cubic t={t:.3}s off by {:.2} MSS",
                err / MSS as f64
            ));
        }
    }
    let took = t0.elapsed();
    verdict(
        failures.is_empty() && took < CC_BUDGET,
        if failures.is_empty() {
            format!("NewReno doubling and +1 MSS exact, CUBIC within 1 MSS at 0, K/2, K={k:.3}s, {took:.1?}")
        } else {
            failures.join("; ")
        },
    )
}

fn catalog_outputs(
    id: &str,
    doc: &dcsim::config::ConfigDocument,
    dir: &Path,
) -> Vec<(String, Vec<u8>)> {
    let mut s = doc.to_scenario(Path::new(".")).expect("catalog scenario");
    s.repetitions = 1;
    let meta = RunMeta {
        scenario: s.name.clone(),
        paper_figure: doc.figure.clone(),
        seed: s.seed,
        repetitions: s.repetitions,
    };
    let out = dir.join(id);
    match doc.sweep_spec().expect("catalog sweep") {
        Some((p, values)) => {
            let points = dcsim::experiments::sweep(&s, p, &values).expect("sweep");
            report::write_sweep(&out, &meta, p, &points).expect("write");
        }
        None => report::write_run(&out, &meta, &run(&s)).expect("write"),
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("read"),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let mut differing = Vec::new();
    for e in CATALOG {
        let doc = e.document().expect("catalog entry parses");
        if catalog_outputs(e.id, &doc, a.path()) != catalog_outputs(e.id, &doc, b.path()) {
            differing.push(e.id);
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} catalog configs run twice at 1 repetition, {} differ {:?}",
            CATALOG.len(),
            differing.len(),
            differing
        ),
    )
}

fn trace_scenario() -> Verdict {
    let doc = dcsim::config::ConfigDocument::from_toml_str(
        "[link1]\ntrace = \"bundled:static-a\"\n[link2]\ntrace = \"bundled:static-a\"\n",
    )
    .expect("trace config");
    let base = doc.to_scenario(Path::new(".")).expect("trace scenario");
    let t100 = throughput_at(&base, Parameter::BatchSize, "100");
    let t500 = throughput_at(&base, Parameter::BatchSize, "500");
    verdict(
        t500 <= t100,
        format!("T(100)={t100:.3} T(500)={t500:.3} Mbps"),
    )
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("pdcp exactly-once in-order delivery", pdcp_exactly_once),
        ("ideal-path identity", ideal_path_identity),
        ("batch-size penalty", batch_size_trend),
        ("split-ratio peak at 50%", split_peak),
        ("matched split beats 50/50 at 5:1", matched_split),
        ("symmetric fairness", symmetric_fairness),
        ("duplication goodput law", duplication_goodput),
        ("duplication unfairness", duplication_unfairness),
        ("receive-buffer effect", buffer_effect),
        ("high-delay degradation", high_delay_degradation),
        ("congestion-control oracles", cc_oracles),
        ("catalog determinism", determinism),
        ("trace-driven batch trend", trace_scenario),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1?}]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t0.elapsed()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
