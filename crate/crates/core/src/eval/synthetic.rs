use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use crate::gamma::GammaParams;
use crate::network::{Link, RoadNetwork};
use crate::seed::rng_for;

/// Parameters of a synthetic road network and trip feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_links: usize,
    pub length_min_m: f64,
    pub length_max_m: f64,
    /// Speed limits assigned uniformly at random to links.
    pub speed_limits_mps: Vec<f64>,
    /// Bounds of the true mean speed as a fraction of the limit.
    pub speed_fraction_min: f64,
    pub speed_fraction_max: f64,
    pub shape_min: f64,
    pub shape_max: f64,
    pub trips_per_hour: f64,
    pub duration_h: f64,
    pub start_time: f64,
    pub trip_links_min: usize,
    pub trip_links_max: usize,
    /// Shape of a per-trip multiplicative slowdown with mean 1, shared by
    /// every link of the trip. `None` keeps links independent.
    pub correlation_shape: Option<f64>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_links: 100,
            length_min_m: 300.0,
            length_max_m: 1500.0,
            speed_limits_mps: vec![8.9, 13.4, 17.9, 24.6],
            speed_fraction_min: 0.5,
            speed_fraction_max: 0.9,
            shape_min: 2.0,
            shape_max: 8.0,
            trips_per_hour: 600.0,
            duration_h: 2.0,
            // Monday 2024-01-01 00:00 UTC.
            start_time: 1_704_067_200.0,
            trip_links_min: 4,
            trip_links_max: 20,
            correlation_shape: None,
            test_fraction: 0.2,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        check(self.n_links >= 2, "n_links must be >= 2")?;
        check(
            self.length_min_m > 0.0 && self.length_max_m >= self.length_min_m,
            "length bounds must satisfy 0 < min <= max",
        )?;
        check(
            !self.speed_limits_mps.is_empty() && self.speed_limits_mps.iter().all(|&v| v > 0.0),
            "speed_limits_mps must be non-empty and positive",
        )?;
        check(
            self.speed_fraction_min > 0.0 && self.speed_fraction_max >= self.speed_fraction_min,
            "speed fraction bounds must satisfy 0 < min <= max",
        )?;
        check(
            self.shape_min > 0.0 && self.shape_max >= self.shape_min,
            "shape bounds must satisfy 0 < min <= max",
        )?;
        check(self.trips_per_hour > 0.0 && self.duration_h > 0.0, "trip rate and duration must be positive")?;
        check(
            self.trip_links_min >= 1 && self.trip_links_max >= self.trip_links_min,
            "trip link bounds must satisfy 1 <= min <= max",
        )?;
        check(
            self.correlation_shape.is_none_or(|s| s > 0.0),
            "correlation_shape must be positive",
        )?;
        check((0.0..1.0).contains(&self.test_fraction), "test_fraction must lie in [0, 1)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One simulated vehicle trip with the realized time on every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTrip {
    pub id: String,
    pub split: Split,
    pub start_time: f64,
    pub links: Vec<usize>,
    /// Time to traverse each link in full; the trip covers only part of
    /// the first and last.
    pub full_link_times: Vec<f64>,
    pub offset_start_m: f64,
    pub offset_end_m: f64,
}

impl SyntheticTrip {
    /// Time spent on each link of the path.
    pub fn covered_times(&self, net: &RoadNetwork) -> Vec<f64> {
        let n = self.links.len();
        (0..n)
            .map(|i| {
                let len = net.link(self.links[i]).length_m;
                let from = if i == 0 { self.offset_start_m } else { 0.0 };
                let to = if i == n - 1 { self.offset_end_m } else { len };
                self.full_link_times[i] * (to - from) / len
            })
            .collect()
    }

    pub fn duration_s(&self, net: &RoadNetwork) -> f64 {
        self.covered_times(net).iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub network: RoadNetwork,
    pub truth: Vec<GammaParams>,
    /// Sorted by start time.
    pub trips: Vec<SyntheticTrip>,
}

/// Build a random network where every node has two outgoing links, draw
/// true Gamma parameters per link and simulate random-walk trips arriving
/// as a Poisson process.
pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = rng_for(spec.seed, &[&"network"]);
    let nodes = spec.n_links.div_ceil(2);
    let mut links = Vec::with_capacity(spec.n_links);
    let mut truth = Vec::with_capacity(spec.n_links);
    for i in 0..spec.n_links {
        let from = i / 2;
        let mut to = rng.random_range(0..nodes);
        if to == from {
            to = (to + 1) % nodes;
        }
        let length_m = uniform(&mut rng, spec.length_min_m, spec.length_max_m);
        let speed_limit_mps = spec.speed_limits_mps[rng.random_range(0..spec.speed_limits_mps.len())];
        let fraction = uniform(&mut rng, spec.speed_fraction_min, spec.speed_fraction_max);
        let k = uniform(&mut rng, spec.shape_min, spec.shape_max);
        let mean = length_m / (fraction * speed_limit_mps);
        truth.push(GammaParams { k, theta: mean / k });
        links.push(Link {
            id: format!("L{i:05}"),
            from_node: format!("N{from:05}"),
            to_node: format!("N{to:05}"),
            length_m,
            speed_limit_mps,
        });
    }
    let outgoing: Vec<Vec<usize>> = (0..nodes).map(|n| (2 * n..(2 * n + 2).min(spec.n_links)).collect()).collect();
    let heads: Vec<usize> = links.iter().map(|l| l.to_node[1..].parse().unwrap()).collect();
    let network = RoadNetwork::new(links).expect("generated links are valid");
    let dists: Vec<Gamma<f64>> = truth.iter().map(|p| Gamma::new(p.k, p.theta).unwrap()).collect();
    let slowdown = spec.correlation_shape.map(|s| Gamma::new(s, 1.0 / s).unwrap());

    let mut arrivals = rng_for(spec.seed, &[&"arrivals"]);
    let gap = Exp::new(spec.trips_per_hour / 3600.0).unwrap();
    let end = spec.start_time + spec.duration_h * 3600.0;
    let mut t = spec.start_time + gap.sample(&mut arrivals);
    let mut trips = Vec::new();
    while t < end {
        let id = format!("trip-{:07}", trips.len());
        let mut r = rng_for(spec.seed, &[&"trip", &id.as_str()]);
        let split = if r.random::<f64>() < spec.test_fraction {
            Split::Test
        } else {
            Split::Train
        };
        let target = r.random_range(spec.trip_links_min..=spec.trip_links_max);
        let mut path = vec![r.random_range(0..spec.n_links)];
        while path.len() < target {
            let here = heads[*path.last().unwrap()];
            let options: Vec<usize> = outgoing[here].iter().copied().filter(|l| !path.contains(l)).collect();
            if options.is_empty() {
                break;
            }
            path.push(options[r.random_range(0..options.len())]);
        }
        let factor = slowdown.map_or(1.0, |g| g.sample(&mut r));
        let full_link_times: Vec<f64> = path.iter().map(|&l| factor * dists[l].sample(&mut r)).collect();
        let first_len = network.link(path[0]).length_m;
        let last_len = network.link(*path.last().unwrap()).length_m;
        let (offset_start_m, offset_end_m) = if path.len() == 1 {
            let a = r.random::<f64>() * first_len;
            let b = r.random::<f64>() * first_len;
            (a.min(b), a.max(b))
        } else {
            (r.random::<f64>() * first_len, r.random::<f64>() * last_len)
        };
        trips.push(SyntheticTrip {
            id,
            split,
            start_time: t,
            links: path,
            full_link_times,
            offset_start_m,
            offset_end_m,
        });
        t += gap.sample(&mut arrivals);
    }
    SyntheticData { network, truth, trips }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        let spec = SyntheticSpec {
            duration_h: 0.5,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate(&spec), generate(&spec));
        let other = generate(&SyntheticSpec { seed: 2, ..spec.clone() });
        assert_ne!(other.trips, generate(&spec).trips);
    }

    #[test]
    fn structure() {
        let spec = SyntheticSpec::default();
        let data = generate(&spec);
        assert_eq!(data.network.len(), 100);
        assert!(data.truth.iter().all(|p| (2.0..8.0).contains(&p.k)));
        let n = data.trips.len() as f64;
        assert!((n - 1200.0).abs() < 4.0 * 1200f64.sqrt(), "{n} trips");
        let test = data.trips.iter().filter(|t| t.split == Split::Test).count() as f64;
        assert!((test / n - 0.2).abs() < 0.05);
        for t in &data.trips {
            assert!(!t.links.is_empty() && t.links.len() <= 20);
            for w in t.links.windows(2) {
                assert_eq!(data.network.link(w[0]).to_node, data.network.link(w[1]).from_node);
            }
            let d = t.duration_s(&data.network);
            let direct: f64 = t.covered_times(&data.network).iter().sum();
            assert!(d > 0.0 && (d - direct).abs() < 1e-9);
        }
        assert!(data.trips.windows(2).all(|w| w[0].start_time <= w[1].start_time));
    }
}
