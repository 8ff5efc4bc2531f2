use std::collections::BTreeMap;

use rand::Rng;

use super::{uniform, MobilityParams, NodeProfile};
use crate::map::PoiId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveningVisit {
    pub spot: PoiId,
    /// Stay once every group member has arrived.
    pub stay: f64,
    pub group: Option<usize>,
}

/// One node's schedule for a single day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyPlan {
    pub day: u32,
    /// Absolute time the node leaves its house.
    pub departure: f64,
    /// Office presence counted from arrival.
    pub work_duration: f64,
    pub evening: Option<EveningVisit>,
}

impl DailyPlan {
    /// Ordered `(location, minimum stay)` stops after leaving the house.
    pub fn stops(&self, profile: &NodeProfile) -> Vec<(PoiId, f64)> {
        let mut out = vec![(profile.office, self.work_duration)];
        if let Some(ev) = self.evening {
            out.push((ev.spot, ev.stay));
        }
        out.push((profile.house, 0.0));
        out
    }
}

/// Draws a day's plan: leave at the departure hour, work, and with the
/// configured probability visit the evening spot before returning home.
pub fn schedule_day<R: Rng + ?Sized>(
    profile: &NodeProfile,
    day: u32,
    day_start: f64,
    params: &MobilityParams,
    rng: &mut R,
) -> DailyPlan {
    let goes_out = rng.gen::<f64>() < params.evening_probability;
    let stay = uniform(rng, params.evening_stay);
    DailyPlan {
        day,
        departure: day_start + params.departure_time,
        work_duration: params.working_hours,
        evening: goes_out.then_some(EveningVisit {
            spot: profile.evening_spot,
            stay,
            group: None,
        }),
    }
}

/// Friends meeting at one evening spot; the stay timer starts once all arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct EveningGroup {
    pub spot: PoiId,
    pub members: Vec<usize>,
    pub stay: f64,
    pub arrived: usize,
    pub started_at: Option<f64>,
}

impl EveningGroup {
    pub fn ends_at(&self) -> Option<f64> {
        self.started_at.map(|s| s + self.stay)
    }
}

/// Greedily chunks the nodes going out to the same spot into groups whose
/// sizes are drawn uniformly from the configured range. Each member's
/// planned stay is replaced by the group's (its first member's) stay.
pub fn form_evening_groups<R: Rng + ?Sized>(
    plans: &mut [DailyPlan],
    params: &MobilityParams,
    rng: &mut R,
) -> Vec<EveningGroup> {
    let mut by_spot: BTreeMap<PoiId, Vec<usize>> = BTreeMap::new();
    for (node, plan) in plans.iter().enumerate() {
        if let Some(ev) = plan.evening {
            by_spot.entry(ev.spot).or_default().push(node);
        }
    }
    let [gmin, gmax] = params.evening_group_size;
    let mut groups = Vec::new();
    for (spot, nodes) in by_spot {
        let mut rest = &nodes[..];
        while !rest.is_empty() {
            let size = rng.gen_range(gmin..=gmax).min(rest.len());
            let (members, tail) = rest.split_at(size);
            rest = tail;
            let stay = plans[members[0]].evening.expect("evening").stay;
            let id = groups.len();
            for &m in members {
                let ev = plans[m].evening.as_mut().expect("evening");
                ev.stay = stay;
                ev.group = Some(id);
            }
            groups.push(EveningGroup {
                spot,
                members: members.to_vec(),
                stay,
                arrived: 0,
                started_at: None,
            });
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(node: usize, spot: PoiId) -> NodeProfile {
        NodeProfile {
            node,
            group: Group::A,
            house: 0,
            office: 1,
            evening_spot: spot,
            owns_car: false,
        }
    }

    #[test]
    fn plan_without_evening_goes_straight_home() {
        let params = MobilityParams {
            evening_probability: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = profile(0, 2);
        let plan = schedule_day(&p, 0, 0.0, &params, &mut rng);
        assert_eq!(plan.departure, 28_800.0);
        assert_eq!(plan.work_duration, 28_800.0);
        assert_eq!(plan.stops(&p), vec![(1, 28_800.0), (0, 0.0)]);
    }

    #[test]
    fn evening_stay_in_range() {
        let params = MobilityParams {
            evening_probability: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for day in 0..200 {
            let plan = schedule_day(&profile(0, 2), day, day as f64 * 86_400.0, &params, &mut rng);
            let stay = plan.evening.unwrap().stay;
            assert!((3600.0..=7200.0).contains(&stay));
            assert_eq!(plan.departure, day as f64 * 86_400.0 + 28_800.0);
        }
    }

    #[test]
    fn groups_share_spot_and_stay() {
        let params = MobilityParams {
            evening_probability: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let profiles: Vec<_> = (0..30).map(|i| profile(i, 10 + i % 3)).collect();
        let mut plans: Vec<_> = profiles
            .iter()
            .map(|p| schedule_day(p, 0, 0.0, &params, &mut rng))
            .collect();
        let groups = form_evening_groups(&mut plans, &params, &mut rng);
        let mut covered = 0;
        for (gid, g) in groups.iter().enumerate() {
            assert!((1..=3).contains(&g.members.len()));
            covered += g.members.len();
            for &m in &g.members {
                let ev = plans[m].evening.unwrap();
                assert_eq!(ev.spot, g.spot);
                assert_eq!(ev.group, Some(gid));
                assert_eq!(ev.stay, g.stay);
            }
        }
        assert_eq!(covered, 30);
        assert!(groups.iter().any(|g| g.members.len() >= 2));
    }
}
