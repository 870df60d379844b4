use rand::Rng;

use super::synthetic::SyntheticTrip;
use crate::network::{RoadNetwork, TrajectoryMeasurement};

const CONTIGUITY_TOL_S: f64 = 1e-6;

/// Split a trip into consecutive pieces lasting `piece_s` each, from the
/// start of the trip. A final remainder shorter than `piece_s` is dropped.
pub fn cut_trip(trip: &SyntheticTrip, net: &RoadNetwork, piece_s: f64) -> Vec<TrajectoryMeasurement> {
    assert!(piece_s > 0.0, "piece length must be positive");
    let covered = trip.covered_times(net);
    let total: f64 = covered.iter().sum();
    let mut exits = Vec::with_capacity(covered.len());
    let mut acc = 0.0;
    for c in &covered {
        acc += c;
        exits.push(acc);
    }
    let n = trip.links.len();
    // Position at elapsed time `tau`. At a link boundary, a piece start
    // belongs to the next link and a piece end to the previous one.
    let locate = |tau: f64, is_end: bool| -> (usize, f64) {
        let i = if is_end {
            exits.iter().position(|&e| tau <= e).unwrap_or(n - 1)
        } else {
            exits.iter().position(|&e| tau < e).unwrap_or(n - 1)
        };
        let entered = if i == 0 { 0.0 } else { exits[i - 1] };
        let len = net.link(trip.links[i]).length_m;
        let entry_offset = if i == 0 { trip.offset_start_m } else { 0.0 };
        let offset = entry_offset + (tau - entered) / trip.full_link_times[i] * len;
        (i, offset.clamp(0.0, len))
    };
    let count = (total / piece_s + 1e-9).floor() as usize;
    (0..count)
        .map(|p| {
            let t0 = p as f64 * piece_s;
            let (i0, o0) = locate(t0, false);
            let (i1, o1) = locate(t0 + piece_s, true);
            TrajectoryMeasurement {
                id: format!("{}/{}/{}", trip.id, piece_s, p),
                start_time: trip.start_time + t0,
                duration_s: piece_s,
                path: trip.links[i0..=i1].iter().map(|&l| net.link(l).id.clone()).collect(),
                offset_start_m: o0,
                offset_end_m: o1,
            }
        })
        .collect()
}

/// Pieces of every trip at each of the given lengths.
pub fn cut_trajectories(trips: &[SyntheticTrip], net: &RoadNetwork, piece_lengths_s: &[f64]) -> Vec<TrajectoryMeasurement> {
    piece_lengths_s
        .iter()
        .flat_map(|&len| trips.iter().flat_map(move |t| cut_trip(t, net, len)))
        .collect()
}

/// Join back-to-back readings of one vehicle into a single measurement.
/// Returns `None` if the readings are empty or not contiguous in time and
/// position.
pub fn concatenate_readings(readings: &[TrajectoryMeasurement]) -> Option<TrajectoryMeasurement> {
    let first = readings.first()?;
    let mut joined = first.clone();
    for r in &readings[1..] {
        if (joined.start_time + joined.duration_s - r.start_time).abs() > CONTIGUITY_TOL_S {
            return None;
        }
        let last = joined.path.last()?;
        let mut tail = r.path.iter();
        if r.path.first() == Some(last) {
            if (r.offset_start_m - joined.offset_end_m).abs() > 1e-6 {
                return None;
            }
            tail.next();
        } else if joined.path.contains(&r.path[0]) {
            return None;
        }
        joined.path.extend(tail.cloned());
        joined.duration_s += r.duration_s;
        joined.offset_end_m = r.offset_end_m;
    }
    Some(joined)
}

/// Group consecutive readings of one vehicle `n` at a time and join each
/// group; a trailing incomplete group is dropped.
pub fn cut_readings(readings: &[TrajectoryMeasurement], n: usize) -> Vec<TrajectoryMeasurement> {
    assert!(n > 0, "group size must be positive");
    readings.chunks_exact(n).filter_map(concatenate_readings).collect()
}

/// Split the fully traversed links of a trip into disjoint runs of
/// `1..=max_links` links and report each run as one measurement with
/// random offsets into its end links.
///
/// Unlike [`cut_trip`], the covered fractions do not depend on the realized
/// travel times, and no two measurements share a traversal.
pub fn segment_trip<R: Rng + ?Sized>(
    trip: &SyntheticTrip,
    net: &RoadNetwork,
    max_links: usize,
    rng: &mut R,
) -> Vec<TrajectoryMeasurement> {
    assert!(max_links > 0, "segments need at least one link");
    let covered = trip.covered_times(net);
    let n = trip.links.len();
    let mut out = Vec::new();
    let mut elapsed = covered.first().copied().unwrap_or(0.0);
    let mut i = 1;
    while i + 1 < n {
        let run = rng.random_range(1..=max_links).min(n - 1 - i);
        let links = &trip.links[i..i + run];
        let first_len = net.link(links[0]).length_m;
        let last_len = net.link(links[run - 1]).length_m;
        let o_start = rng.random_range(0.0..0.5) * first_len;
        let o_end = rng.random_range(0.5..1.0) * last_len;
        let lead = trip.full_link_times[i] * o_start / first_len;
        let duration = if run == 1 {
            trip.full_link_times[i] * (o_end - o_start) / first_len
        } else {
            let inner: f64 = trip.full_link_times[i + 1..i + run - 1].iter().sum();
            trip.full_link_times[i] - lead + inner + trip.full_link_times[i + run - 1] * o_end / last_len
        };
        out.push(TrajectoryMeasurement {
            id: format!("{}/seg/{}", trip.id, out.len()),
            start_time: trip.start_time + elapsed + lead,
            duration_s: duration,
            path: links.iter().map(|&l| net.link(l).id.clone()).collect(),
            offset_start_m: o_start,
            offset_end_m: o_end,
        });
        elapsed += covered[i..i + run].iter().sum::<f64>();
        i += run;
    }
    out
}
