use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traffic_core::eval::{generate, SyntheticSpec};
use traffic_core::io::{
    load_network, read_estimates, read_trajectories, write_network, write_trajectories, EstimateWriter, HistoricalStore,
    IoError, ReplayBatches,
};
use traffic_core::{activation_vector, em::ModelState, GammaParams, TrajectoryMeasurement};

#[test]
fn network_at_metro_scale_loads_and_indexes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.csv");
    let n = 506_685;
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    writeln!(f, "# format_version=1\nid,from,to,length_m,speed_limit_mps").unwrap();
    for i in 0..n {
        writeln!(f, "L{i},N{i},N{},{},{}", i + 1, 50 + i % 400, 8 + i % 20).unwrap();
    }
    drop(f);
    let net = load_network(&path).unwrap();
    assert_eq!(net.len(), n);
    assert_eq!(net.index_of("L0"), Some(0));
    assert_eq!(net.index_of("L506684"), Some(n - 1));
    assert_eq!(net.link(12345).length_m, (50 + 12345 % 400) as f64);
}

#[test]
fn synthetic_files_round_trip() {
    let data = generate(&SyntheticSpec {
        duration_h: 0.2,
        ..SyntheticSpec::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("net.csv");
    write_network(&data.network, &net_path).unwrap();
    assert_eq!(load_network(&net_path).unwrap(), data.network);

    let trajs: Vec<TrajectoryMeasurement> = data
        .trips
        .iter()
        .map(|t| TrajectoryMeasurement {
            id: t.id.clone(),
            start_time: t.start_time,
            duration_s: t.duration_s(&data.network),
            path: t.links.iter().map(|&l| data.network.link(l).id.clone()).collect(),
            offset_start_m: t.offset_start_m,
            offset_end_m: t.offset_end_m,
        })
        .collect();
    let path = dir.path().join("t.jsonl");
    write_trajectories(&path, &trajs).unwrap();
    let back: Vec<_> = read_trajectories(&path).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(back, trajs);
    for t in &back {
        activation_vector(t, &data.network).unwrap();
    }
}

fn record(i: usize, t: f64) -> TrajectoryMeasurement {
    TrajectoryMeasurement {
        id: format!("r{i}"),
        start_time: t,
        duration_s: 30.0,
        path: vec!["a".into()],
        offset_start_m: 0.0,
        offset_end_m: 1.0,
    }
}

#[test]
fn replay_matches_offline_binning() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut t = 1_000_003.7;
    let records: Vec<_> = (0..5000)
        .map(|i| {
            t += rng.random_range(0.0..0.9f64).powi(3) * 20.0;
            record(i, t)
        })
        .collect();
    let interval = 5.0;
    let origin = (records[0].start_time / interval).floor() * interval;
    let mut expected: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for r in &records {
        expected.entry(((r.start_time - origin) / interval).floor() as u64).or_default().push(r.id.clone());
    }
    for rate in [1.0, 10.0] {
        let mut replay = ReplayBatches::from_records(records.clone(), interval, rate).unwrap();
        let mut got: BTreeMap<u64, Vec<String>> = BTreeMap::new();
        while let Some(b) = replay.next_records() {
            let (i, recs) = b.unwrap();
            if !recs.is_empty() {
                got.insert(i, recs.into_iter().map(|r| r.id).collect());
            }
        }
        assert_eq!(got, expected);
        assert!((replay.available_at(3).as_secs_f64() - 4.0 * interval / rate).abs() < 1e-9);
    }
}

#[test]
fn unsorted_replay_names_first_offender() {
    let recs = vec![record(0, 10.0), record(1, 12.0), record(2, 11.0), record(3, 9.0)];
    let mut replay = ReplayBatches::from_records(recs, 5.0, 1.0).unwrap();
    let err = loop {
        match replay.next_records() {
            Some(Ok(_)) => continue,
            Some(Err(e)) => break e,
            None => panic!("unsorted input accepted"),
        }
    };
    assert!(matches!(err, IoError::Unsorted { index: 2, .. }), "{err:?}");
}

#[test]
fn estimates_append_in_time_order() {
    let data = generate(&SyntheticSpec {
        n_links: 6,
        duration_h: 0.01,
        ..SyntheticSpec::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("est.jsonl");
    let mut w = EstimateWriter::create(&path).unwrap();
    for step in 0..3 {
        let mut s = ModelState::new(1200.0 * step as f64);
        for l in 0..6 {
            s.insert(l, GammaParams::new(2.0 + l as f64, 10.0 + step as f64).unwrap(), 5.0);
        }
        w.write_state(&s, &data.network).unwrap();
    }
    assert!(!path.exists());
    w.finish().unwrap();
    let recs = read_estimates(&path).unwrap();
    assert_eq!(recs.len(), 18);
    assert!(recs.windows(2).all(|p| p[0].time <= p[1].time));
    for r in &recs {
        assert!((r.mean_s - r.k * r.theta).abs() < 1e-9 * r.mean_s);
    }
}

#[test]
fn store_lookback_respects_week_limit() {
    let store = HistoricalStore::in_memory(1200.0, 0);
    let t = 1_710_000_000.0;
    let obs: Vec<_> = (0..14)
        .map(|w| traffic_core::Observation {
            id: format!("w{w}").into(),
            weights: vec![(0, 1.0)],
            duration_s: 10.0,
            time: t - w as f64 * 7.0 * 86_400.0,
        })
        .collect();
    store.insert(obs).unwrap();
    let key = store.key_for(t);
    let back = store.lookback(key, 10);
    assert_eq!(back.len(), 10);
    assert!(back.iter().all(|(k, v)| k.weekday() == key.weekday() && k.slot == key.slot && v.len() == 1));
    assert_eq!(store.query(key.weekday(), key.slot).len(), 14);
}
