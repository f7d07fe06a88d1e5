//! TOML scenario files.
//!
//! Every key is optional. Missing keys take the defaults of the chosen
//! topology: two 20 Mbps links with 10 ms mean delay and 10 % jitter, no
//! loss, batch 100 at 1:1 in split mode, NewReno with pacing and the
//! enlarged 4 MiB receive buffer.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    parse_int_ratio, parse_recv_buffer, Connectivity, FlowSpec, Parameter, Scenario, Topology, MB,
};
use crate::netem::{BandwidthTrace, LinkConfig, LinkRate};
use crate::pdcp::{DcMode, LINK1, LINK2};
use crate::sim::SimTime;
use crate::trace_io;
use crate::transport::{CcAlgorithm, TransportConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Figure tag this config reproduces, e.g. `fig4a`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_size_mb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_window_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_reordering_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link1: Option<LinkDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link2: Option<LinkDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitter: Option<SplitterDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<FlowDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_mbps: Option<f64>,
    /// Canonical trace CSV path (relative to the config file) or `bundled:<name>`.
    /// Takes precedence over `rate_mbps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<f64>,
    /// Defaults to 10 % of `delay_ms`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_std_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queue_limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_overtaking: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitterDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u32>,
    /// `"a:b"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<DcMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proxy_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportDoc {
    /// `quic` (default) or `tcp`; `tcp` starts from unpaced, unbounded-buffer settings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stack: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cc: Option<CcAlgorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pacing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pacing_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_bytes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overhead_bytes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_window_packets: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_window_packets: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ack_delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ack_every: Option<u32>,
    /// `default`, `enlarged`, `unbounded` or a byte count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recv_buffer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drain_rate_mbytes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cubic_tcp_friendly: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    /// `dc`, `sc1` or `sc2`.
    pub connectivity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_size_mb: Option<f64>,
    /// Overrides on top of the top-level `[transport]` table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub parameter: String,
    /// `"1,50,100"` or `"10..90 step 10"`.
    pub values: String,
}

fn ms(x: f64, key: &str) -> Result<SimTime> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Config(format!(
            "{key} must be a non-negative number of milliseconds"
        )));
    }
    Ok(SimTime::from_millis_f64(x))
}

fn positive(x: f64, key: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {x}")))
    }
}

fn bytes_from_mb(x: f64, key: &str) -> Result<u64> {
    Ok((positive(x, key)? * MB as f64).round() as u64)
}

impl LinkDoc {
    fn apply(&self, link: &mut LinkConfig, base_dir: &Path, key: &str) -> Result<()> {
        if let Some(r) = self.rate_mbps {
            link.rate = LinkRate::Fixed(positive(r, &format!("{key}.rate_mbps"))? * 1e6);
        }
        if let Some(t) = &self.trace {
            link.rate = LinkRate::Trace(load_trace(t, base_dir)?);
        }
        if let Some(d) = self.delay_ms {
            link.delay_mean = ms(d, &format!("{key}.delay_ms"))?;
            link.delay_std = link.delay_mean.mul_f64(0.1);
        }
        if let Some(s) = self.delay_std_ms {
            link.delay_std = ms(s, &format!("{key}.delay_std_ms"))?;
        }
        if let Some(p) = self.loss {
            link.loss_prob = p;
        }
        if let Some(q) = self.queue_limit {
            link.queue_limit = q;
        }
        if let Some(n) = self.non_overtaking {
            link.non_overtaking = n;
        }
        link.validate()
            .map_err(|e| Error::Config(format!("[{key}]: {e}")))
    }
}

/// Resolves `bundled:<name>` or a path relative to `base_dir`.
pub fn load_trace(spec: &str, base_dir: &Path) -> Result<BandwidthTrace> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        let text = trace_io::bundled_trace(name)
            .ok_or_else(|| Error::Config(format!("no bundled trace named `{name}`")))?;
        return BandwidthTrace::from_csv_str(&text);
    }
    let p = PathBuf::from(spec);
    let p = if p.is_absolute() { p } else { base_dir.join(p) };
    BandwidthTrace::from_csv_path(&p)
}

impl TransportDoc {
    fn apply(&self, cfg: &mut TransportConfig, key: &str) -> Result<()> {
        if let Some(stack) = &self.stack {
            *cfg = match stack.as_str() {
                "quic" => TransportConfig::default(),
                "tcp" => TransportConfig::tcp_like(),
                other => {
                    return Err(Error::Config(format!(
                        "{key}.stack must be `quic` or `tcp`, got `{other}`"
                    )))
                }
            };
        }
        if let Some(cc) = self.cc {
            cfg.cc = cc;
        }
        if let Some(p) = self.pacing {
            cfg.pacing = p;
        }
        if let Some(g) = self.pacing_gain {
            cfg.pacing_gain = positive(g, &format!("{key}.pacing_gain"))?;
        }
        if let Some(b) = self.payload_bytes {
            if b == 0 {
                return Err(Error::Config(format!(
                    "{key}.payload_bytes must be positive"
                )));
            }
            cfg.payload_bytes = b;
        }
        if let Some(b) = self.overhead_bytes {
            cfg.overhead_bytes = b;
        }
        if let Some(n) = self.initial_window_packets {
            cfg.initial_window_packets = n;
        }
        if let Some(n) = self.min_window_packets {
            cfg.min_window_packets = n;
        }
        if let Some(d) = self.max_ack_delay_ms {
            cfg.max_ack_delay = ms(d, &format!("{key}.max_ack_delay_ms"))?;
        }
        if let Some(n) = self.ack_every {
            if n == 0 {
                return Err(Error::Config(format!("{key}.ack_every must be at least 1")));
            }
            cfg.ack_every = n;
        }
        if let Some(b) = &self.recv_buffer {
            cfg.recv_buffer = parse_recv_buffer(b).ok_or_else(|| {
                Error::Config(format!(
                    "{key}.recv_buffer must be default, enlarged, unbounded or a byte count, got `{b}`"
                ))
            })?;
        }
        if let Some(r) = self.drain_rate_mbytes {
            cfg.drain_rate = positive(r, &format!("{key}.drain_rate_mbytes"))? * 1e6;
        }
        if let Some(f) = self.cubic_tcp_friendly {
            cfg.cubic_tcp_friendly = f;
        }
        if cfg.min_window_packets == 0 || cfg.initial_window_packets < cfg.min_window_packets {
            return Err(Error::Config(format!(
                "{key}: initial window must be at least the minimum window, and the minimum at least 1"
            )));
        }
        Ok(())
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity> {
    match s {
        "dc" => Ok(Connectivity::Dc),
        "sc1" => Ok(Connectivity::Sc(LINK1)),
        "sc2" => Ok(Connectivity::Sc(LINK2)),
        other => Err(Error::Config(format!(
            "flow connectivity must be dc, sc1 or sc2, got `{other}`"
        ))),
    }
}

impl ConfigDocument {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the scenario; relative trace paths resolve against `base_dir`.
    pub fn to_scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let topology = self.topology.unwrap_or(Topology::Throughput);
        let mut s = match topology {
            Topology::Throughput => Scenario::throughput_default(),
            Topology::Fairness => Scenario::fairness_default(),
            Topology::Pairwise => Scenario::pairwise_default(),
        };
        if let Some(n) = &self.name {
            s.name = n.clone();
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(r) = self.repetitions {
            s.repetitions = r;
        }
        if let Some(w) = self.measure_window_s {
            s.measure_window = SimTime::from_secs_f64(positive(w, "measure_window_s")?);
        }
        if let Some(b) = self.bin_s {
            s.bin_width = SimTime::from_secs_f64(positive(b, "bin_s")?);
        }
        if let Some(t) = self.t_reordering_ms {
            s.t_reordering = ms(t, "t_reordering_ms")?;
        }
        for (i, (doc, key)) in [(&self.link1, "link1"), (&self.link2, "link2")]
            .into_iter()
            .enumerate()
        {
            if let Some(doc) = doc {
                doc.apply(&mut s.links[i], base_dir, key)?;
            }
        }
        if let Some(sp) = &self.splitter {
            if let Some(b) = sp.batch_size {
                s.splitter.batch_size = b;
            }
            if let Some(r) = &sp.ratio {
                s.splitter.ratio = parse_int_ratio(r).ok_or_else(|| {
                    Error::Config(format!("splitter.ratio must look like `a:b`, got `{r}`"))
                })?;
            }
            if let Some(m) = sp.mode {
                s.splitter.mode = m;
            }
            if let Some(d) = sp.proxy_delay_ms {
                s.splitter.proxy_delay = ms(d, "splitter.proxy_delay_ms")?;
            }
        }
        let mut transport = TransportConfig::default();
        if let Some(t) = &self.transport {
            t.apply(&mut transport, "transport")?;
        }
        let file_size = self
            .file_size_mb
            .map(|m| bytes_from_mb(m, "file_size_mb"))
            .transpose()?;
        let stack_of = |t: &Option<TransportDoc>, fallback: &str| {
            t.as_ref()
                .and_then(|t| t.stack.clone())
                .unwrap_or_else(|| fallback.to_string())
        };
        let top_stack = stack_of(&self.transport, "quic");
        if self.flows.is_empty() {
            for f in &mut s.flows {
                f.transport = transport.clone();
                f.stack = top_stack.clone();
                if let Some(size) = file_size {
                    f.file_size = size;
                }
            }
        } else {
            let default_size = s.flows[0].file_size;
            s.flows = self
                .flows
                .iter()
                .enumerate()
                .map(|(i, fd)| {
                    let mut t = transport.clone();
                    if let Some(td) = &fd.transport {
                        td.apply(&mut t, &format!("flows[{i}].transport"))?;
                    }
                    Ok(FlowSpec {
                        connectivity: parse_connectivity(&fd.connectivity)?,
                        transport: t,
                        file_size: match fd.file_size_mb {
                            Some(m) => bytes_from_mb(m, &format!("flows[{i}].file_size_mb"))?,
                            None => file_size.unwrap_or(default_size),
                        },
                        stack: stack_of(&fd.transport, &top_stack),
                    })
                })
                .collect::<Result<_>>()?;
        }
        s.validate()?;
        Ok(s)
    }

    /// The `[sweep]` table, if present, as a parameter and value list.
    pub fn sweep_spec(&self) -> Result<Option<(Parameter, Vec<String>)>> {
        self.sweep
            .as_ref()
            .map(|sw| {
                Ok((
                    sw.parameter.parse()?,
                    crate::experiments::parse_values(&sw.values)?,
                ))
            })
            .transpose()
    }
}
