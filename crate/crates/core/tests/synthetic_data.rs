use traffic_core::em::ModelState;
use traffic_core::eval::{evaluate, generate, SyntheticSpec};
use traffic_core::{GammaParams, Observation, SeriesConfig};

#[test]
fn link_times_follow_ground_truth() {
    let data = generate(&SyntheticSpec {
        n_links: 10,
        trips_per_hour: 250_000.0,
        duration_h: 1.0,
        trip_links_min: 10,
        trip_links_max: 10,
        seed: 11,
        ..SyntheticSpec::default()
    });
    let mut sums = [(0.0, 0usize); 10];
    for trip in &data.trips {
        for (&l, &x) in trip.links.iter().zip(&trip.full_link_times) {
            sums[l].0 += x;
            sums[l].1 += 1;
        }
    }
    let busy: Vec<_> = sums.iter().enumerate().filter(|(_, s)| s.1 >= 100_000).collect();
    assert!(busy.len() >= 5, "{sums:?}");
    for (l, &(sum, n)) in busy {
        let want = data.truth[l].mean();
        let got = sum / n as f64;
        assert!((got - want).abs() < 0.02 * want, "link {l}: {got} vs {want}");
    }
}

#[test]
fn trip_duration_is_the_covered_share_of_link_times() {
    let data = generate(&SyntheticSpec {
        duration_h: 0.2,
        ..SyntheticSpec::default()
    });
    for trip in &data.trips {
        let n = trip.links.len();
        let first = data.network.link(trip.links[0]).length_m;
        let last = data.network.link(trip.links[n - 1]).length_m;
        let mut want: f64 = trip.full_link_times[1..n - 1].iter().sum();
        want += trip.full_link_times[0] * (1.0 - trip.offset_start_m / first);
        want += trip.full_link_times[n - 1] * trip.offset_end_m / last;
        let got = trip.duration_s(&data.network);
        assert!((got - want).abs() < 1e-9 * want, "{}: {got} vs {want}", trip.id);
    }
}

#[test]
fn intervals_narrow_with_duplicated_pieces() {
    let mut model = ModelState::new(0.0);
    model.insert(0, GammaParams::new(4.0, 30.0).unwrap(), 1.0);
    let pieces: Vec<Observation> = (0..40)
        .map(|i| Observation {
            id: format!("p{i}").into(),
            weights: vec![(0, 1.0)],
            duration_s: 80.0 + 2.5 * i as f64,
            time: 0.0,
        })
        .collect();
    let width = |copies: usize| {
        let many: Vec<_> = (0..copies).flat_map(|_| pieces.iter().cloned()).collect();
        let r = evaluate(&model, &many, &SeriesConfig::default());
        let m = r.buckets[0].l1.unwrap();
        m.ci_high - m.ci_low
    };
    let (w1, w4) = (width(1), width(4));
    let ratio = w1 / w4;
    let want = (159.0f64 / 39.0).sqrt();
    assert!((ratio - want).abs() < 1e-9, "{ratio} vs {want}");
}
