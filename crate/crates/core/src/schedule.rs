//! Solved dispatch plans.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::NetworkInstance;

/// Decisions for one hour. Maps are keyed by element id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HourDispatch {
    pub hour: usize,
    /// MW imported per substation.
    pub imports: BTreeMap<u32, f64>,
    /// MW per generator.
    pub generation: BTreeMap<u32, f64>,
    /// MW curtailed per PV unit.
    pub curtailment: BTreeMap<u32, f64>,
    /// MW per BESS.
    pub charge: BTreeMap<u32, f64>,
    pub discharge: BTreeMap<u32, f64>,
    /// Stored energy at the end of the hour, MWh.
    pub soc: BTreeMap<u32, f64>,
    /// MW, positive from `from_bus` to `to_bus`.
    pub flows: BTreeMap<u32, f64>,
    pub angles: BTreeMap<u32, f64>,
    pub closed_lines: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    #[serde(rename = "hour")]
    pub hours: Vec<HourDispatch>,
    /// End-of-day stored energy per BESS, MWh.
    pub e_final: BTreeMap<u32, f64>,
    /// Whether charge/discharge exclusivity was enforced with binaries.
    pub exact_bess: bool,
    /// Import plus generation cost, $.
    pub total_cost: f64,
}

impl DispatchSchedule {
    pub fn hour(&self, hour: usize) -> Option<&HourDispatch> {
        self.hours.iter().find(|h| h.hour == hour)
    }

    /// Cost of the recorded imports and generation at the instance's prices.
    pub fn evaluate_cost(&self, inst: &NetworkInstance) -> f64 {
        let mut total = 0.0;
        for h in &self.hours {
            for s in &inst.substations {
                total += s.price_profile.at(h.hour) * h.imports.get(&s.id).copied().unwrap_or(0.0);
            }
            for g in &inst.generators {
                total += g.cost_profile.at(h.hour) * h.generation.get(&g.id).copied().unwrap_or(0.0);
            }
        }
        total
    }

    /// Per-hour closed state of `line`.
    pub fn line_closed(&self, line: u32) -> Vec<(usize, bool)> {
        self.hours
            .iter()
            .map(|h| (h.hour, h.closed_lines.contains(&line)))
            .collect()
    }
}
