use std::sync::Arc;

use hrson_core::map::{synth_map, MapContext, PoiCounts};
use hrson_core::mobility::{build_profiles, Activity, Mobility, MobilityParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DAY: f64 = 86_400.0;

fn small_world(seed: u64) -> Mobility {
    let graph = synth_map(500.0, 500.0, 50.0, 11).unwrap();
    let counts = PoiCounts {
        houses: 24,
        offices: 9,
        evening_spots: 6,
        bus_stops: 12,
    };
    let map = MapContext::build(graph, &counts, 10_000.0, 5).unwrap();
    let params = MobilityParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles = build_profiles(60, [12; 5], &map.pois, params.car_probability, &mut rng).unwrap();
    Mobility::new(Arc::new(map), profiles, params, rng).unwrap()
}

#[test]
fn daily_routine_over_several_days() {
    let mut m = small_world(3);
    let n = m.node_count();
    let bounds = m.map().graph.bounds();
    let max_step = 10.0 + 1e-6;
    let days = 4;
    let mut office_arrival = vec![None; n];
    let mut office_stays = Vec::new();
    let mut evening_visits = vec![vec![false; days]; n];
    let mut rider_ticks = 0usize;
    let mut prev: Vec<_> = (0..n).map(|i| (m.position(i), m.state(i).activity)).collect();

    let ticks = (days as f64 * DAY) as usize;
    for tick in 0..ticks {
        let now = tick as f64;
        if (now % DAY - 28_740.0).abs() < 0.5 {
            for i in 0..n {
                assert_eq!(m.state(i).activity, Activity::AtHouse, "node {i} at 07:59");
                assert_eq!(m.position(i), m.map().poi_position(m.profile(i).house));
            }
        }
        m.step(now, 1.0);
        let day = (now / DAY) as usize;
        for i in 0..n {
            let (p, a) = (m.position(i), m.state(i).activity);
            assert!(prev[i].0.distance(p) <= max_step, "node {i} jumped at {now}");
            assert!(bounds.contains(p));
            if a == Activity::AtOffice && prev[i].1 != Activity::AtOffice {
                office_arrival[i] = Some(now + 1.0);
            }
            if a != Activity::AtOffice && prev[i].1 == Activity::AtOffice {
                office_stays.push(now - office_arrival[i].take().unwrap());
            }
            if a == Activity::AtEveningSpot {
                evening_visits[i][day] = true;
            }
            if let Some(bus) = m.state(i).riding() {
                assert_eq!(p, m.buses()[bus].position);
                rider_ticks += 1;
            }
            prev[i] = (p, a);
        }
    }
    assert!(office_stays.len() >= n * (days - 1));
    for s in &office_stays {
        assert!((s - 28_800.0).abs() <= 1.0, "office stay {s}");
    }
    let visits = evening_visits.iter().flatten().filter(|&&v| v).count();
    let frac = visits as f64 / (n * days) as f64;
    assert!((frac - 0.5).abs() < 0.1, "evening fraction {frac}");
    assert!(rider_ticks > 0, "no node ever rode a bus");
}

#[test]
fn same_seed_same_trajectory() {
    let mut a = small_world(9);
    let mut b = small_world(9);
    for t in 28_000..40_000 {
        a.step(t as f64, 1.0);
        b.step(t as f64, 1.0);
    }
    for i in 0..a.node_count() {
        assert_eq!(a.position(i), b.position(i));
    }
}
