//! Loss-based congestion controllers: NewReno and CUBIC.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcAlgorithm {
    NewReno,
    Cubic,
}

impl fmt::Display for CcAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CcAlgorithm::NewReno => "newreno",
            CcAlgorithm::Cubic => "cubic",
        })
    }
}

impl FromStr for CcAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "newreno" | "reno" => Ok(CcAlgorithm::NewReno),
            "cubic" => Ok(CcAlgorithm::Cubic),
            other => Err(format!("unknown congestion controller `{other}`")),
        }
    }
}

pub trait CongestionControl: fmt::Debug + Send {
    fn cwnd(&self) -> u64;
    fn ssthresh(&self) -> u64;
    /// `acked_bytes` newly acknowledged at `now`, outside recovery.
    fn on_ack(&mut self, acked_bytes: u64, now: SimTime);
    /// One call per loss event.
    fn on_congestion_event(&mut self, now: SimTime);
    fn in_slow_start(&self) -> bool {
        self.cwnd() < self.ssthresh()
    }
}

#[derive(Debug, Clone)]
pub struct NewReno {
    mss: u64,
    min_cwnd: u64,
    cwnd: u64,
    ssthresh: u64,
    // bytes acked in congestion avoidance since the last increase
    ca_acked: u64,
}

impl NewReno {
    pub fn new(mss: u64, initial_cwnd: u64, min_cwnd: u64) -> Self {
        NewReno {
            mss,
            min_cwnd,
            cwnd: initial_cwnd,
            ssthresh: u64::MAX,
            ca_acked: 0,
        }
    }

    pub fn with_state(mss: u64, cwnd: u64, ssthresh: u64) -> Self {
        NewReno {
            mss,
            min_cwnd: 2 * mss,
            cwnd,
            ssthresh,
            ca_acked: 0,
        }
    }
}

impl CongestionControl for NewReno {
    fn cwnd(&self) -> u64 {
        self.cwnd
    }

    fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    fn on_ack(&mut self, acked_bytes: u64, _now: SimTime) {
        if self.cwnd < self.ssthresh {
            self.cwnd += acked_bytes;
            return;
        }
        // +1 MSS per cwnd of acknowledged bytes
        self.ca_acked += acked_bytes;
        while self.ca_acked >= self.cwnd {
            self.ca_acked -= self.cwnd;
            self.cwnd += self.mss;
        }
    }

    fn on_congestion_event(&mut self, _now: SimTime) {
        self.ssthresh = (self.cwnd / 2).max(self.min_cwnd);
        self.cwnd = self.ssthresh;
        self.ca_acked = 0;
    }
}

pub const CUBIC_C: f64 = 0.4;
pub const CUBIC_BETA: f64 = 0.7;

/// Seconds until the cubic curve returns to `w_max` (bytes).
pub fn cubic_k(w_max: f64, mss: f64) -> f64 {
    (w_max / mss * (1.0 - CUBIC_BETA) / CUBIC_C).cbrt()
}

/// `C (t - K)^3 + w_max`, with C in MSS per second cubed; returns bytes.
pub fn cubic_window(w_max: f64, t: f64, mss: f64) -> f64 {
    let k = cubic_k(w_max, mss);
    (CUBIC_C * (t - k).powi(3) + w_max / mss) * mss
}

#[derive(Debug, Clone)]
pub struct Cubic {
    mss: u64,
    min_cwnd: u64,
    cwnd: u64,
    ssthresh: u64,
    tcp_friendly: bool,
    w_max: f64,
    k: f64,
    epoch_start: Option<SimTime>,
    w_est: f64,
}

impl Cubic {
    pub fn new(mss: u64, initial_cwnd: u64, min_cwnd: u64, tcp_friendly: bool) -> Self {
        Cubic {
            mss,
            min_cwnd,
            cwnd: initial_cwnd,
            ssthresh: u64::MAX,
            tcp_friendly,
            w_max: 0.0,
            k: 0.0,
            epoch_start: None,
            w_est: 0.0,
        }
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn w_est(&self) -> f64 {
        self.w_est
    }
}

impl CongestionControl for Cubic {
    fn cwnd(&self) -> u64 {
        self.cwnd
    }

    fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    fn on_ack(&mut self, acked_bytes: u64, now: SimTime) {
        if self.cwnd < self.ssthresh {
            self.cwnd += acked_bytes;
            return;
        }
        let mss = self.mss as f64;
        let epoch = *self.epoch_start.get_or_insert_with(|| {
            // entered avoidance without a loss
            self.w_max = self.cwnd as f64;
            self.k = 0.0;
            self.w_est = self.cwnd as f64;
            now
        });
        let t = (now - epoch).as_secs_f64();
        let mut target = cubic_window(self.w_max, t, mss);
        // Reno-equivalent growth from beta * w_max
        self.w_est += mss * (3.0 * (1.0 - CUBIC_BETA) / (1.0 + CUBIC_BETA)) * acked_bytes as f64
            / self.cwnd as f64;
        if self.tcp_friendly {
            target = target.max(self.w_est);
        }
        let target = target.max(self.min_cwnd as f64) as u64;
        self.cwnd = self.cwnd.max(target);
    }

    fn on_congestion_event(&mut self, now: SimTime) {
        self.w_max = self.cwnd as f64;
        self.cwnd = ((self.cwnd as f64 * CUBIC_BETA) as u64).max(self.min_cwnd);
        self.ssthresh = self.cwnd;
        self.k = cubic_k(self.w_max, self.mss as f64);
        self.epoch_start = Some(now);
        self.w_est = self.cwnd as f64;
    }
}

pub fn new_controller(
    algo: CcAlgorithm,
    mss: u64,
    initial_cwnd: u64,
    min_cwnd: u64,
    tcp_friendly: bool,
) -> Box<dyn CongestionControl> {
    match algo {
        CcAlgorithm::NewReno => Box::new(NewReno::new(mss, initial_cwnd, min_cwnd)),
        CcAlgorithm::Cubic => Box::new(Cubic::new(mss, initial_cwnd, min_cwnd, tcp_friendly)),
    }
}
