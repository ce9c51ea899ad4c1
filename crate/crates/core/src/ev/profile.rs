//! Hourly nodal EV demand from simulated sessions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::MINUTES_PER_DAY;
use super::fleet::FleetEvent;
use crate::network::{EvWeight, Profile, HORIZON};

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("allocation weights: {0}")]
    Weights(String),
    #[error("profile needs at least one simulated day")]
    NoDays,
}

/// Bus by hour EV demand at 100% penetration, MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvDemandProfile {
    pub demand: BTreeMap<u32, Profile>,
    pub seed: Option<u64>,
    pub model_ids: Vec<String>,
}

impl EvDemandProfile {
    pub fn from_demand(demand: BTreeMap<u32, Profile>) -> EvDemandProfile {
        EvDemandProfile {
            demand,
            seed: None,
            model_ids: Vec::new(),
        }
    }

    /// Daily energy over all buses, MWh.
    pub fn daily_energy_mwh(&self) -> f64 {
        self.demand.values().map(|p| p.sum()).sum()
    }

    /// Sum over buses for each hour, MW.
    pub fn system_profile(&self) -> Profile {
        let mut out = Profile::ZERO;
        for p in self.demand.values() {
            for (o, v) in out.0.iter_mut().zip(p.0) {
                *o += v;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        crate::network::write_ev_csv(&self.demand)
    }
}

pub fn check_weights(weights: &[EvWeight]) -> Result<(), ProfileError> {
    if weights.is_empty() {
        return Err(ProfileError::Weights("no buses".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for w in weights {
        if !(w.weight >= 0.0 && w.weight.is_finite()) {
            return Err(ProfileError::Weights(format!("bus {} has weight {}", w.bus, w.weight)));
        }
        if !seen.insert(w.bus) {
            return Err(ProfileError::Weights(format!("bus {} listed twice", w.bus)));
        }
    }
    let total: f64 = weights.iter().map(|w| w.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ProfileError::Weights(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Mean day of the simulated sessions on a 24-hour clock, split over buses.
///
/// Each session's energy lands in the hours it overlaps; the part after
/// midnight wraps to the early hours, so the day's energy times `days`
/// equals the sampled session energy. Hour `h` covers `[h-1, h)`.
pub fn build_demand_profile(
    events: &[FleetEvent],
    weights: &[EvWeight],
    days: usize,
) -> Result<EvDemandProfile, ProfileError> {
    check_weights(weights)?;
    if days == 0 {
        return Err(ProfileError::NoDays);
    }
    let mut kwh = [0.0f64; HORIZON];
    for e in events {
        let p = e.power_kw();
        let mut a = e.start_min.rem_euclid(MINUTES_PER_DAY);
        let mut left = e.duration_min;
        while left > 0.0 {
            let h = ((a / 60.0).floor() as usize).min(HORIZON - 1);
            let edge = (h + 1) as f64 * 60.0;
            let span = (edge - a).min(left);
            kwh[h] += p * span / 60.0;
            left -= span;
            a = if edge >= MINUTES_PER_DAY { 0.0 } else { edge };
        }
    }
    // kWh per day in a one-hour bucket is the bucket's mean kW; /1000 gives MW.
    let system = Profile(kwh.map(|v| v / days as f64 / 1000.0));
    let demand = weights
        .iter()
        .filter(|w| w.weight > 0.0)
        .map(|w| (w.bus, system.scaled(w.weight)))
        .collect();
    Ok(EvDemandProfile::from_demand(demand))
}
