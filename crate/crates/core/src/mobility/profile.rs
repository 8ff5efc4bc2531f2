use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::map::{PoiId, PoiKind, PointOfInterest, Segment};

/// Node group; D and E live where A overlaps B and C respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
    E,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::A, Group::B, Group::C, Group::D, Group::E];

    /// Segments whose points of interest the group may use.
    pub fn segments(self) -> &'static [Segment] {
        match self {
            Group::A => &[Segment::A],
            Group::B => &[Segment::B],
            Group::C => &[Segment::C],
            Group::D => &[Segment::A, Segment::B],
            Group::E => &[Segment::A, Segment::C],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeProfile {
    pub node: usize,
    pub group: Group,
    pub house: PoiId,
    pub office: PoiId,
    pub evening_spot: PoiId,
    pub owns_car: bool,
}

/// Assigns every node a group, its three locations, and car ownership.
///
/// Node ids are dense and allocated group by group (all of A first).
pub fn build_profiles<R: Rng + ?Sized>(
    n: usize,
    group_sizes: [usize; 5],
    pois: &[PointOfInterest],
    car_probability: f64,
    rng: &mut R,
) -> Result<Vec<NodeProfile>> {
    let sum: usize = group_sizes.iter().sum();
    if sum != n {
        return Err(SimError::GroupSizeMismatch { sum, expected: n });
    }
    let mut profiles = Vec::with_capacity(n);
    for (group, &size) in Group::ALL.iter().zip(&group_sizes) {
        if size == 0 {
            continue;
        }
        let candidates = |kind: PoiKind| -> Result<Vec<PoiId>> {
            let ids: Vec<PoiId> = pois
                .iter()
                .filter(|p| p.kind == kind && group.segments().contains(&p.segment))
                .map(|p| p.id)
                .collect();
            if ids.is_empty() {
                return Err(SimError::MissingPoi {
                    segment: format!("{group:?}"),
                    kind: kind.to_string(),
                });
            }
            Ok(ids)
        };
        let houses = candidates(PoiKind::House)?;
        let offices = candidates(PoiKind::Office)?;
        let spots = candidates(PoiKind::EveningSpot)?;
        for _ in 0..size {
            profiles.push(NodeProfile {
                node: profiles.len(),
                group: *group,
                house: *houses.choose(rng).expect("nonempty"),
                office: *offices.choose(rng).expect("nonempty"),
                evening_spot: *spots.choose(rng).expect("nonempty"),
                owns_car: rng.gen_bool(car_probability),
            });
        }
    }
    Ok(profiles)
}
