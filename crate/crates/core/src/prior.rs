//! Speed-limit based prior and its pseudo-sample representation.

use serde::{Deserialize, Serialize};

use crate::gamma::GammaParams;
use crate::network::{Link, RoadNetwork};
use crate::special::digamma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Prior mean speed as a fraction of the speed limit.
    pub speed_fraction: f64,
    pub min_stddev_s: f64,
    /// Prior standard deviation as a fraction of the prior mean.
    pub stddev_fraction: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            speed_fraction: 0.7,
            min_stddev_s: 60.0,
            stddev_fraction: 0.5,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.speed_fraction > 0.0 && self.speed_fraction.is_finite()) {
            return Err("speed_fraction must be positive".into());
        }
        if !(self.min_stddev_s >= 0.0 && self.stddev_fraction >= 0.0) {
            return Err("prior stddev settings must be non-negative".into());
        }
        if self.min_stddev_s == 0.0 && self.stddev_fraction == 0.0 {
            return Err("prior stddev would be zero".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorMoments {
    pub mean_s: f64,
    pub stddev_s: f64,
}

pub fn prior_params(link: &Link, cfg: &PriorConfig) -> PriorMoments {
    let mean_s = link.length_m / (cfg.speed_fraction * link.speed_limit_mps);
    PriorMoments {
        mean_s,
        stddev_s: cfg.min_stddev_s.max(cfg.stddev_fraction * mean_s),
    }
}

impl PriorMoments {
    pub fn gamma(&self) -> GammaParams {
        GammaParams::from_moments(self.mean_s, self.stddev_s).expect("prior moments are positive")
    }

    /// Two weighted points whose mean, variance and mean log equal those of
    /// the moment-matched Gamma, so a weighted fit to them alone returns it
    /// exactly. Weights sum to `strength`.
    pub fn pseudo_samples(&self, strength: f64) -> [(f64, f64); 2] {
        let m = self.mean_s;
        let v = self.stddev_s * self.stddev_s;
        let g = self.gamma();
        let target = digamma(g.k) + g.theta.ln();
        // Points m - a and m + v/a with weights keeping mean m and variance v.
        let points = |a: f64| {
            let b = v / a;
            let p = b / (a + b);
            ((m - a, p), (m + b, 1.0 - p))
        };
        let mean_log = |a: f64| {
            let ((x1, p1), (x2, p2)) = points(a);
            p1 * x1.ln() + p2 * x2.ln()
        };
        // mean_log falls from ln m towards -inf as a goes from 0 to m.
        let (mut lo, mut hi) = (0.0, m);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_log(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * m {
                break;
            }
        }
        let ((x1, p1), (x2, p2)) = points(0.5 * (lo + hi));
        [(x1, p1 * strength), (x2, p2 * strength)]
    }
}

/// Prior moments for every link of a network, by dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    moments: Vec<PriorMoments>,
}

impl PriorTable {
    pub fn new(net: &RoadNetwork, cfg: &PriorConfig) -> Self {
        Self {
            moments: net.links().iter().map(|l| prior_params(l, cfg)).collect(),
        }
    }

    pub fn moments(&self, link: usize) -> PriorMoments {
        self.moments[link]
    }

    pub fn gamma(&self, link: usize) -> GammaParams {
        self.moments[link].gamma()
    }

    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }
}
