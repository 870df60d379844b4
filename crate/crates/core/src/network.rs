//! Road links, trajectory measurements and the sparse observations the
//! estimator consumes.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observations whose total activation mass is below this are rejected.
pub const MIN_TOTAL_MASS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("link {id}: {reason}")]
    InvalidLink { id: String, reason: String },
    #[error("duplicate link id {0}")]
    DuplicateLink(String),
    #[error("unknown link id {0}")]
    UnknownLink(String),
    #[error("link {0} appears more than once in a path")]
    RepeatedLink(String),
    #[error("trajectory {0} has an empty path")]
    EmptyPath(String),
    #[error("trajectory {id} has invalid duration {duration}")]
    InvalidDuration { id: String, duration: f64 },
    #[error("trajectory {id}: offset {offset} outside [0, {length}] on link {link}")]
    OffsetOutOfRange {
        id: String,
        link: String,
        offset: f64,
        length: f64,
    },
    #[error("trajectory {0} covers no distance on its only link")]
    DegenerateSpan(String),
    #[error("trajectory {id} has negligible total activation {mass}")]
    NegligibleMass { id: String, mass: f64 },
    #[error("observation at {obs_time} is later than current time {current_time}")]
    FutureObservation { obs_time: f64, current_time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from_node: String,
    pub to_node: String,
    pub length_m: f64,
    pub speed_limit_mps: f64,
}

impl Link {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |reason: &str| DataError::InvalidLink {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(bad("length_m must be positive"));
        }
        if !(self.speed_limit_mps.is_finite() && self.speed_limit_mps > 0.0) {
            return Err(bad("speed_limit_mps must be positive"));
        }
        Ok(())
    }
}

/// Validated set of links with a dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    links: Vec<Link>,
    index: HashMap<String, usize>,
}

impl RoadNetwork {
    pub fn new(links: Vec<Link>) -> Result<Self, DataError> {
        let mut index = HashMap::with_capacity(links.len());
        for (i, link) in links.iter().enumerate() {
            link.validate()?;
            if index.insert(link.id.clone(), i).is_some() {
                return Err(DataError::DuplicateLink(link.id.clone()));
            }
        }
        Ok(Self { links, index })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn link(&self, index: usize) -> &Link {
        &self.links[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// One map-matched segment between two position fixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeasurement {
    pub id: String,
    pub start_time: f64,
    pub duration_s: f64,
    pub path: Vec<String>,
    pub offset_start_m: f64,
    pub offset_end_m: f64,
}

/// Path activation vector together with the observed duration.
///
/// `weights` holds `(link index, alpha)` pairs in path order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: Arc<str>,
    pub weights: Vec<(usize, f64)>,
    pub duration_s: f64,
    pub time: f64,
}

impl Observation {
    pub fn links(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().map(|&(l, _)| l)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().map(|&(_, a)| a).sum()
    }
}

/// Convert a trajectory measurement into the fraction of each link it covers.
///
/// Travel time along a link is taken as proportional to distance, so the
/// first link contributes `1 - o_start/L`, the last `o_end/L` and every
/// interior link 1. A single-link measurement covers `(o_end - o_start)/L`.
pub fn activation_vector(traj: &TrajectoryMeasurement, net: &RoadNetwork) -> Result<Observation, DataError> {
    let id = &traj.id;
    if traj.path.is_empty() {
        return Err(DataError::EmptyPath(id.clone()));
    }
    if !(traj.duration_s.is_finite() && traj.duration_s > 0.0) {
        return Err(DataError::InvalidDuration {
            id: id.clone(),
            duration: traj.duration_s,
        });
    }
    let mut indices = Vec::with_capacity(traj.path.len());
    for link_id in &traj.path {
        let i = net.index_of(link_id).ok_or_else(|| DataError::UnknownLink(link_id.clone()))?;
        if indices.contains(&i) {
            return Err(DataError::RepeatedLink(link_id.clone()));
        }
        indices.push(i);
    }
    let first = net.link(indices[0]);
    let last = net.link(*indices.last().unwrap());
    let check = |offset: f64, link: &Link| {
        if offset.is_finite() && (0.0..=link.length_m).contains(&offset) {
            Ok(())
        } else {
            Err(DataError::OffsetOutOfRange {
                id: id.clone(),
                link: link.id.clone(),
                offset,
                length: link.length_m,
            })
        }
    };
    check(traj.offset_start_m, first)?;
    check(traj.offset_end_m, last)?;

    let m = indices.len();
    let mut weights = Vec::with_capacity(m);
    if m == 1 {
        if traj.offset_end_m <= traj.offset_start_m {
            return Err(DataError::DegenerateSpan(id.clone()));
        }
        weights.push((indices[0], (traj.offset_end_m - traj.offset_start_m) / first.length_m));
    } else {
        for (pos, &i) in indices.iter().enumerate() {
            let alpha = if pos == 0 {
                1.0 - traj.offset_start_m / first.length_m
            } else if pos == m - 1 {
                traj.offset_end_m / last.length_m
            } else {
                1.0
            };
            if alpha > 0.0 {
                weights.push((i, alpha));
            }
        }
    }
    let obs = Observation {
        id: Arc::from(id.as_str()),
        weights,
        duration_s: traj.duration_s,
        time: traj.start_time,
    };
    let mass = obs.total_mass();
    if mass < MIN_TOTAL_MASS {
        return Err(DataError::NegligibleMass { id: id.clone(), mass });
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(id: &str, len: f64) -> Link {
        Link {
            id: id.into(),
            from_node: format!("{id}-a"),
            to_node: format!("{id}-b"),
            length_m: len,
            speed_limit_mps: 10.0,
        }
    }

    fn net(lens: &[f64]) -> RoadNetwork {
        RoadNetwork::new(lens.iter().enumerate().map(|(i, &l)| link(&format!("l{i}"), l)).collect()).unwrap()
    }

    fn traj(path: &[&str], o_start: f64, o_end: f64) -> TrajectoryMeasurement {
        TrajectoryMeasurement {
            id: "t".into(),
            start_time: 0.0,
            duration_s: 30.0,
            path: path.iter().map(|s| s.to_string()).collect(),
            offset_start_m: o_start,
            offset_end_m: o_end,
        }
    }

    fn alphas(o: &Observation) -> Vec<f64> {
        o.weights.iter().map(|w| w.1).collect()
    }

    #[test]
    fn three_link_path() {
        let n = net(&[100.0, 200.0, 50.0]);
        let o = activation_vector(&traj(&["l0", "l1", "l2"], 25.0, 10.0), &n).unwrap();
        assert_eq!(alphas(&o), vec![0.75, 1.0, 0.2]);
        assert_eq!(o.links().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn single_link_cases() {
        let n = net(&[100.0]);
        assert_eq!(alphas(&activation_vector(&traj(&["l0"], 0.0, 100.0), &n).unwrap()), vec![1.0]);
        let o = activation_vector(&traj(&["l0"], 20.0, 80.0), &n).unwrap();
        assert!((alphas(&o)[0] - 0.6).abs() < 1e-15);
        assert_eq!(
            activation_vector(&traj(&["l0"], 50.0, 50.0), &n),
            Err(DataError::DegenerateSpan("t".into()))
        );
    }

    #[test]
    fn zero_entries_dropped() {
        let n = net(&[100.0, 100.0]);
        let o = activation_vector(&traj(&["l0", "l1"], 0.0, 0.0), &n).unwrap();
        assert_eq!(o.weights, vec![(0, 1.0)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let n = net(&[100.0, 100.0]);
        assert!(matches!(
            activation_vector(&traj(&["l0", "zz"], 0.0, 1.0), &n),
            Err(DataError::UnknownLink(id)) if id == "zz"
        ));
        assert!(matches!(
            activation_vector(&traj(&["l0", "l1"], 150.0, 1.0), &n),
            Err(DataError::OffsetOutOfRange { .. })
        ));
        assert!(matches!(
            activation_vector(&traj(&["l0", "l1", "l0"], 1.0, 1.0), &n),
            Err(DataError::RepeatedLink(_))
        ));
        assert!(matches!(activation_vector(&traj(&[], 0.0, 0.0), &n), Err(DataError::EmptyPath(_))));
        assert!(matches!(
            activation_vector(&traj(&["l0", "l1"], 100.0, 1e-5), &n),
            Err(DataError::NegligibleMass { .. })
        ));
        let mut t = traj(&["l0"], 0.0, 1.0);
        t.duration_s = 0.0;
        assert!(matches!(activation_vector(&t, &n), Err(DataError::InvalidDuration { .. })));
    }

    #[test]
    fn network_invariants() {
        assert!(matches!(
            RoadNetwork::new(vec![link("a", 1.0), link("a", 2.0)]),
            Err(DataError::DuplicateLink(id)) if id == "a"
        ));
        assert!(RoadNetwork::new(vec![link("a", 0.0)]).is_err());
        let mut l = link("a", 1.0);
        l.speed_limit_mps = f64::NAN;
        assert!(RoadNetwork::new(vec![l]).is_err());
        let n = net(&[1.0, 2.0, 3.0]);
        assert_eq!(n.index_of("l2"), Some(2));
        assert_eq!(n.index_of("l3"), None);
    }
}
