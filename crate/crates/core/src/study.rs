//! The four-configuration comparison across EV penetration levels: cell
//! summaries, cost-ordering checks, the feasibility frontier and the
//! switching pattern of one designated line.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ev::{run_pipeline, EvDemandProfile, EvError, PipelineSpec};
use crate::network::{Configuration, NetworkInstance};
use crate::solve::{CaseResult, CaseStatus};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PENETRATIONS: [f64; 5] = [0.0, 0.1, 0.4, 0.7, 1.0];
/// Relative slack allowed in cost comparisons.
pub const ORDERING_TOL: f64 = 1e-6;
/// Hours from this one onward count as late in the day.
pub const FIRST_LATE_HOUR: usize = 17;
/// Substation-adjacent switchable line whose schedule is tabulated.
pub const DEFAULT_DESIGNATED_LINE: u32 = 1;

/// The 100%-penetration EV profile used for studies: the default pipeline
/// under `seed`, spread over the instance's EV allocation.
pub fn reference_ev_profile(inst: &NetworkInstance, seed: u64) -> Result<EvDemandProfile, EvError> {
    Ok(run_pipeline(&PipelineSpec::default(), &inst.ev_allocation, seed)?.profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Feasible,
    Infeasible,
    LimitReached,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub configuration: Configuration,
    pub penetration: f64,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_usd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incumbent_cost_usd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub nodes: usize,
    /// Left out of serialized reports so that reruns compare equal.
    #[serde(skip)]
    pub wall_ms: u64,
    /// Closed state of the designated line, one entry per modelled hour.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_closed: Option<Vec<bool>>,
}

impl CellSummary {
    fn blank(configuration: Configuration, penetration: f64, status: CellStatus) -> CellSummary {
        CellSummary {
            configuration,
            penetration,
            status,
            cost_usd: None,
            incumbent_cost_usd: None,
            best_bound: None,
            error: None,
            nodes: 0,
            wall_ms: 0,
            line_closed: None,
        }
    }

    /// A cell whose solve failed outright.
    pub fn failed(configuration: Configuration, penetration: f64, error: impl ToString) -> CellSummary {
        CellSummary {
            error: Some(error.to_string()),
            ..CellSummary::blank(configuration, penetration, CellStatus::Error)
        }
    }

    pub fn new(configuration: Configuration, penetration: f64, r: &CaseResult, line: u32) -> CellSummary {
        let mut cell = CellSummary::blank(configuration, penetration, CellStatus::Infeasible);
        cell.nodes = r.stats.nodes;
        cell.wall_ms = r.stats.wall_ms;
        match r.status {
            CaseStatus::Feasible { cost_usd } => {
                cell.status = CellStatus::Feasible;
                cell.cost_usd = Some(cost_usd);
            }
            CaseStatus::Infeasible => cell.status = CellStatus::Infeasible,
            CaseStatus::LimitReached {
                incumbent_cost,
                best_bound,
            } => {
                cell.status = CellStatus::LimitReached;
                cell.incumbent_cost_usd = incumbent_cost;
                cell.best_bound = Some(best_bound);
            }
        }
        cell.line_closed = r
            .schedule
            .as_ref()
            .map(|s| s.line_closed(line).into_iter().map(|(_, c)| c).collect());
        cell
    }
}

/// A broken cost or feasibility relation between two configurations at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingViolation {
    pub penetration: f64,
    /// The configuration that should be at least as good.
    pub better: Configuration,
    pub worse: Configuration,
    pub message: String,
}

/// Pairs (better, worse) where `better`'s feasible set contains `worse`'s.
const DOMINANCE: [(Configuration, Configuration); 4] = [
    (Configuration::Sdntr, Configuration::Sdn),
    (Configuration::SdnDer, Configuration::Sdn),
    (Configuration::SdntrDer, Configuration::Sdntr),
    (Configuration::SdntrDer, Configuration::SdnDer),
];

/// Cost orderings implied by feasible-set inclusion. A feasible `worse`
/// with an infeasible `better` is also a violation; the converse is not.
/// Cells that errored or hit a limit are not compared.
pub fn ordering_violations(cells: &[CellSummary]) -> Vec<OrderingViolation> {
    let mut out = Vec::new();
    let mut levels: Vec<f64> = cells.iter().map(|c| c.penetration).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for p in levels {
        let at = |c: Configuration| cells.iter().find(|x| x.configuration == c && x.penetration == p);
        for (better, worse) in DOMINANCE {
            let (Some(b), Some(w)) = (at(better), at(worse)) else {
                continue;
            };
            let message = match (b.status, w.status) {
                (CellStatus::Feasible, CellStatus::Feasible) => {
                    let (cb, cw) = (b.cost_usd.unwrap_or(f64::NAN), w.cost_usd.unwrap_or(f64::NAN));
                    if cb <= cw + ORDERING_TOL * cw.abs().max(1.0) {
                        continue;
                    }
                    format!("cost({better}) = {cb:.6} exceeds cost({worse}) = {cw:.6}")
                }
                (CellStatus::Infeasible, CellStatus::Feasible) => {
                    format!("{better} is infeasible although {worse} is feasible")
                }
                _ => continue,
            };
            out.push(OrderingViolation {
                penetration: p,
                better,
                worse,
                message,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frontier {
    /// Lowest level at which each configuration is infeasible; `None` if never.
    pub first_infeasible: BTreeMap<Configuration, Option<f64>>,
    /// SDN and SDN-DER fail at some level, SDNTR fails strictly later and
    /// SDNTR-DER strictly later still.
    pub pattern_holds: bool,
}

pub fn frontier(cells: &[CellSummary]) -> Frontier {
    let first_infeasible: BTreeMap<Configuration, Option<f64>> = Configuration::ALL
        .into_iter()
        .map(|c| {
            let first = cells
                .iter()
                .filter(|x| x.configuration == c && x.status == CellStatus::Infeasible)
                .map(|x| x.penetration)
                .min_by(f64::total_cmp);
            (c, first)
        })
        .collect();
    let level = |c| first_infeasible[&c].unwrap_or(f64::INFINITY);
    let (sdn, sdntr, der, both) = (
        level(Configuration::Sdn),
        level(Configuration::Sdntr),
        level(Configuration::SdnDer),
        level(Configuration::SdntrDer),
    );
    let pattern_holds = sdn.is_finite() && der.is_finite() && sdntr > sdn.max(der) && both > sdntr;
    Frontier {
        first_infeasible,
        pattern_holds,
    }
}

/// How the designated line's late-hour state changes with penetration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adaptivity {
    pub line: u32,
    pub configuration: Configuration,
    /// Lowest and highest levels at which the configuration is feasible.
    pub low: Option<f64>,
    pub high: Option<f64>,
    /// Late hours with the line open at `low` and closed at `high`.
    pub hours: Vec<usize>,
    pub holds: bool,
}

pub fn adaptivity(cells: &[CellSummary], configuration: Configuration, line: u32) -> Adaptivity {
    let mut feasible: Vec<&CellSummary> = cells
        .iter()
        .filter(|c| c.configuration == configuration && c.status == CellStatus::Feasible && c.line_closed.is_some())
        .collect();
    feasible.sort_by(|a, b| a.penetration.total_cmp(&b.penetration));
    let mut out = Adaptivity {
        line,
        configuration,
        low: feasible.first().map(|c| c.penetration),
        high: feasible.last().map(|c| c.penetration),
        hours: Vec::new(),
        holds: false,
    };
    if let (Some(lo), Some(hi)) = (feasible.first(), feasible.last()) {
        if lo.penetration < hi.penetration {
            let (a, b) = (lo.line_closed.as_deref().unwrap(), hi.line_closed.as_deref().unwrap());
            out.hours = (FIRST_LATE_HOUR..=a.len().min(b.len()))
                .filter(|&h| !a[h - 1] && b[h - 1])
                .collect();
        }
    }
    out.holds = !out.hours.is_empty();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub levels: Vec<f64>,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
    pub orderings: Vec<OrderingViolation>,
    pub frontier: Frontier,
    pub adaptivity: Adaptivity,
}

impl SweepReport {
    pub fn new(levels: Vec<f64>, seed: u64, cells: Vec<CellSummary>, line: u32) -> SweepReport {
        SweepReport {
            orderings: ordering_violations(&cells),
            frontier: frontier(&cells),
            adaptivity: adaptivity(&cells, Configuration::SdntrDer, line),
            levels,
            seed,
            cells,
        }
    }

    pub fn cell(&self, configuration: Configuration, penetration: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.configuration == configuration && c.penetration == penetration)
    }
}
