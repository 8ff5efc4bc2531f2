//! Working Day Movement Model.
//!
//! Every node owns a house, an office, and an evening spot inside its group's
//! map segment. Each day it leaves home at 08:00, works for a fixed number of
//! hours (wandering inside the office square between long pauses), optionally
//! joins a small group at its evening spot, and returns home. Trips are made
//! by car, by bus, or on foot along shortest road paths.

mod bus;
mod model;
mod plan;
mod profile;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bus::{build_bus_lines, BusLine, BusPhase, BusVehicle, LineId};
pub use model::{move_along, Activity, Mobility, MobilityState, Transport};
pub use plan::{form_evening_groups, schedule_day, DailyPlan, EveningGroup, EveningVisit};
pub use profile::{build_profiles, Group, NodeProfile};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Movement model parameters; defaults follow the reference parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityParams {
    /// Seconds after midnight at which nodes leave home.
    pub departure_time: f64,
    pub working_hours: f64,
    pub office_area: f64,
    pub office_pause: [f64; 2],
    pub evening_probability: f64,
    pub evening_group_size: [usize; 2],
    pub evening_stay: [f64; 2],
    pub car_probability: f64,
    pub bus_wait: [f64; 2],
    pub vehicle_speed: [f64; 2],
    pub walk_speed: [f64; 2],
    /// A bus is used only if both trip ends lie this close to stops of one line.
    pub bus_stop_radius: f64,
    pub buses_per_line: usize,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            departure_time: 8.0 * 3600.0,
            working_hours: 28_800.0,
            office_area: crate::map::DEFAULT_OFFICE_AREA,
            office_pause: [10.0, 100_000.0],
            evening_probability: 0.5,
            evening_group_size: [1, 3],
            evening_stay: [3600.0, 7200.0],
            car_probability: 0.5,
            bus_wait: [10.0, 30.0],
            vehicle_speed: [7.0, 10.0],
            walk_speed: [0.8, 1.4],
            bus_stop_radius: 200.0,
            buses_per_line: 2,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::SimError;
        let range = |key: &str, r: [f64; 2], positive: bool| {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1])
                || (positive && r[0] <= 0.0)
                || r[0] < 0.0
            {
                Err(SimError::config(
                    format!("mobility.{key}"),
                    format!("invalid range [{}, {}]", r[0], r[1]),
                ))
            } else {
                Ok(())
            }
        };
        range("office_pause", self.office_pause, true)?;
        range("evening_stay", self.evening_stay, false)?;
        range("bus_wait", self.bus_wait, false)?;
        range("vehicle_speed", self.vehicle_speed, true)?;
        range("walk_speed", self.walk_speed, true)?;
        for (key, p) in [
            ("evening_probability", self.evening_probability),
            ("car_probability", self.car_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::config(format!("mobility.{key}"), "must lie in [0, 1]"));
            }
        }
        let [gmin, gmax] = self.evening_group_size;
        if gmin == 0 || gmin > gmax {
            return Err(SimError::config(
                "mobility.evening_group_size",
                "needs 1 <= min <= max",
            ));
        }
        if !(0.0..SECONDS_PER_DAY).contains(&self.departure_time) {
            return Err(SimError::config(
                "mobility.departure_time",
                "must lie within one day",
            ));
        }
        if !(self.working_hours >= 0.0 && self.office_area > 0.0 && self.bus_stop_radius >= 0.0) {
            return Err(SimError::config(
                "mobility",
                "working_hours, office_area and bus_stop_radius must be nonnegative",
            ));
        }
        Ok(())
    }
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] >= r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

/// Draw whose logarithm is uniform over `[ln r0, ln r1]`.
pub(crate) fn log_uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] >= r[1] {
        r[0]
    } else {
        rng.gen_range(r[0].ln()..=r[1].ln()).exp()
    }
}

/// True at the node's house, office, or evening spot; never in transit.
pub fn is_at_home(state: &MobilityState) -> bool {
    state.activity.is_home()
}
