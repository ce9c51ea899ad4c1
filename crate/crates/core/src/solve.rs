//! Case-level solving: branch-and-bound with lazy radiality, the
//! per-hour enumeration oracle, and the big-M probe.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use gridflex_milp::{
    BnbConfig, BnbOutcome, BnbStats, BranchAndBound, BranchRule, IncumbentCheck, LpEngine, LpSolution, LpStatus,
    MilpStatus, Problem, SimplexOptions, SolverError, Verdict,
};
use serde::Serialize;
use thiserror::Error;

use crate::model::{build_model, build_model_for_hours, Branching, MilpProblem, ModelError, SolverConfig, VarKey};
use crate::network::{CaseConfig, NetworkInstance};
use crate::schedule::DispatchSchedule;
use crate::topology::{enumerate_radial_topologies, rooted_cycle, spanning_forest, Topology, TopologyError};
use crate::verify::{verify_schedule, VerificationReport};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("enumeration is only exact without storage; this case models {0} BESS units")]
    BessPresent(usize),
    #[error("LP relaxation is unbounded; the model is missing a bound")]
    Unbounded,
    #[error("solved schedule failed verification:\n{0}")]
    Verification(Box<VerificationReport>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CaseStatus {
    Feasible {
        cost_usd: f64,
    },
    Infeasible,
    /// Node or time limit hit; `incumbent_cost` is the best schedule found, if any.
    LimitReached {
        incumbent_cost: Option<f64>,
        best_bound: f64,
    },
}

impl CaseStatus {
    pub fn cost(&self) -> Option<f64> {
        match *self {
            CaseStatus::Feasible { cost_usd } => Some(cost_usd),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CaseStatus::Feasible { .. } => "feasible",
            CaseStatus::Infeasible => "infeasible",
            CaseStatus::LimitReached { .. } => "limit_reached",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_ms: u64,
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
    /// Branchings forced by non-radial integral candidates.
    pub radiality_branches: usize,
    /// Model objective reported by the solver, before replaying the schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: CaseConfig,
    pub status: CaseStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<DispatchSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    pub stats: SolveStats,
}

fn bnb_config(cfg: &SolverConfig) -> BnbConfig {
    BnbConfig {
        int_tol: cfg.integrality_tol,
        node_limit: cfg.node_limit,
        time_limit: cfg.time_limit_ms.map(Duration::from_millis),
        branching: match cfg.branching {
            Branching::MostFractional => BranchRule::MostFractional,
            Branching::Pseudocost => BranchRule::Pseudocost,
        },
        ..BnbConfig::default()
    }
}

/// LP relaxation of `mp` (integrality dropped).
pub fn solve_lp(mp: &MilpProblem) -> Result<LpSolution, SolverError> {
    gridflex_milp::solve_lp(&mp.problem)
}

/// Lazy radiality for branch-and-bound, plus a repair heuristic that turns a
/// fractional switch pattern into a spanning forest.
struct RadialCheck<'a> {
    mp: &'a MilpProblem,
    /// Per hour with switches: (line index, switch var, flow var).
    switches: Vec<Vec<(usize, usize, Option<usize>)>>,
    /// Lines without a switch variable; always closed when switches exist.
    fixed: Vec<usize>,
}

impl<'a> RadialCheck<'a> {
    fn new(mp: &'a MilpProblem) -> RadialCheck<'a> {
        let switches = mp
            .hours
            .iter()
            .map(|&t| {
                mp.switch_vars(t)
                    .into_iter()
                    .map(|(k, j)| {
                        let line = mp.instance.lines[k].id;
                        (k, j, mp.var(VarKey::Flow { line, hour: t }))
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|s| !s.is_empty())
            .collect();
        let fixed = (0..mp.instance.lines.len())
            .filter(|&k| !mp.instance.lines[k].switchable)
            .collect();
        RadialCheck { mp, switches, fixed }
    }
}

impl IncumbentCheck for RadialCheck<'_> {
    fn check(&self, values: &[f64]) -> Verdict {
        for hour in &self.switches {
            let mut closed: Vec<usize> = self.fixed.clone();
            closed.extend(hour.iter().filter(|s| values[s.1] > 0.5).map(|s| s.0));
            if let Some(cycle) = rooted_cycle(&self.mp.instance, &closed) {
                let vars = cycle
                    .iter()
                    .filter_map(|k| hour.iter().find(|s| s.0 == *k).map(|s| s.1))
                    .collect();
                return Verdict::Branch(vars);
            }
        }
        Verdict::Accept
    }

    fn propose(&self, values: &[f64]) -> Option<Vec<(usize, f64)>> {
        let mut fixings = Vec::new();
        for hour in &self.switches {
            let mut ranked = hour.clone();
            // Most-closed first, then heaviest flow, then line order.
            ranked.sort_by(|a, b| {
                let flow = |s: &(usize, usize, Option<usize>)| s.2.map_or(0.0, |f| values[f].abs());
                values[b.1]
                    .total_cmp(&values[a.1])
                    .then(flow(b).total_cmp(&flow(a)))
                    .then(a.0.cmp(&b.0))
            });
            let order: Vec<usize> = self.fixed.iter().copied().chain(ranked.iter().map(|s| s.0)).collect();
            let kept = spanning_forest(&self.mp.instance, &order);
            fixings.extend(
                hour.iter()
                    .map(|s| (s.1, if kept.binary_search(&s.0).is_ok() { 1.0 } else { 0.0 })),
            );
        }
        Some(fixings)
    }

    /// Branch exchanges: close one open switch and open a closed switch on
    /// the loop (or substation-to-substation path) this creates.
    fn neighbours(&self, fixings: &[(usize, f64)]) -> Vec<Vec<(usize, f64)>> {
        let state: HashMap<usize, f64> = fixings.iter().copied().collect();
        let mut out = Vec::new();
        for hour in &self.switches {
            let mut closed: Vec<usize> = self.fixed.clone();
            closed.extend(
                hour.iter()
                    .filter(|s| state.get(&s.1).is_some_and(|&v| v > 0.5))
                    .map(|s| s.0),
            );
            for open in hour.iter().filter(|s| state.get(&s.1).is_some_and(|&v| v < 0.5)) {
                let mut trial = closed.clone();
                trial.push(open.0);
                let Some(cycle) = rooted_cycle(&self.mp.instance, &trial) else {
                    continue;
                };
                for k in cycle {
                    let Some(leave) = hour.iter().find(|s| s.0 == k && s.0 != open.0) else {
                        continue;
                    };
                    out.push(
                        fixings
                            .iter()
                            .map(|&(j, v)| {
                                if j == open.1 {
                                    (j, 1.0)
                                } else if j == leave.1 {
                                    (j, 0.0)
                                } else {
                                    (j, v)
                                }
                            })
                            .collect(),
                    );
                }
            }
        }
        out
    }
}

/// Exact MILP solve. Integral candidates whose switch states contain a loop,
/// or join two substations, are branched on the offending switches.
///
/// Without storage nothing links one hour to the next, so each hour is
/// solved as its own tree and the results are stitched together. With
/// storage and switches, a Lagrangian bound over the storage rows usually
/// proves a heuristic schedule optimal; the full tree runs only when it
/// does not.
pub fn branch_and_bound(mp: &MilpProblem, cfg: &SolverConfig) -> Result<BnbOutcome, SolveError> {
    if mp.hours.len() > 1 && mp.instance.bess_units.is_empty() {
        return by_hour(mp, cfg);
    }
    let check = RadialCheck::new(mp);
    let bnb = BranchAndBound::new(&mp.problem, bnb_config(cfg));
    if mp.hours.len() == 1 || mp.switch_vars(mp.hours[0]).is_empty() {
        return Ok(bnb.solve(&check)?);
    }
    let started = Instant::now();
    let lp = solve_lp(mp)?;
    if lp.status != LpStatus::Optimal {
        return Ok(bnb.solve(&check)?);
    }
    let mut search = LagrangianSearch::new(mp, cfg)?;
    let outcome = search.run(&lp)?;
    let mut stats = search.stats;
    if let Some(out) = outcome {
        stats.wall = started.elapsed();
        return Ok(BnbOutcome { stats, ..out });
    }
    let mut out = bnb.solve_from(&check, search.best.map(|(_, v)| v))?;
    if out.status == MilpStatus::LimitReached {
        let cap = out.objective.unwrap_or(f64::INFINITY);
        out.best_bound = out.best_bound.max(search.bound.min(cap));
    }
    out.stats.nodes += stats.nodes;
    out.stats.lp_iterations += stats.lp_iterations;
    out.stats.wall = started.elapsed();
    Ok(out)
}

/// Relative gap at which a solution counts as optimal.
const GAP: f64 = 1e-9;
const LAGRANGIAN_ROUNDS: usize = 8;

/// Rows that link consecutive hours.
fn is_linking_row(name: &str) -> bool {
    name.starts_with("soc(") || name.starts_with("soc_final(")
}

/// Lagrangian relaxation of the storage rows. Each round prices the rows,
/// solves one single-hour MILP per hour (a lower bound), re-optimises the
/// full model with those hours' switch states (a schedule), and moves the
/// prices along the row residuals.
struct LagrangianSearch<'a> {
    mp: &'a MilpProblem,
    cfg: &'a SolverConfig,
    /// Single-hour models without linking rows, with their full-model indices.
    hours: Vec<(MilpProblem, Vec<usize>)>,
    linking: Vec<usize>,
    best: Option<(f64, Vec<f64>)>,
    bound: f64,
    stats: BnbStats,
}

impl<'a> LagrangianSearch<'a> {
    fn new(mp: &'a MilpProblem, cfg: &'a SolverConfig) -> Result<Self, SolveError> {
        let mut hours = Vec::with_capacity(mp.hours.len());
        for &t in &mp.hours {
            let mut sub = build_model_for_hours(&mp.instance, mp.case, cfg, &[t])?;
            sub.problem.constraints.retain(|c| !is_linking_row(&c.name));
            let map = sub
                .keys
                .iter()
                .map(|k| mp.var(*k).expect("hour model is a slice of the full model"))
                .collect();
            hours.push((sub, map));
        }
        let linking = (0..mp.problem.constraints.len())
            .filter(|&i| is_linking_row(&mp.problem.constraints[i].name))
            .collect();
        Ok(LagrangianSearch {
            mp,
            cfg,
            hours,
            linking,
            best: None,
            bound: f64::NEG_INFINITY,
            stats: BnbStats::default(),
        })
    }

    fn absorb(&mut self, s: &BnbStats) {
        self.stats.nodes += s.nodes;
        self.stats.lp_iterations += s.lp_iterations;
        self.stats.lazy_branches += s.lazy_branches;
        self.stats.rounding_hits += s.rounding_hits;
        self.stats.heuristic_hits += s.heuristic_hits;
    }

    fn closed(&self) -> bool {
        self.best
            .as_ref()
            .is_some_and(|(ub, _)| self.bound >= ub - GAP * ub.abs().max(1.0))
    }

    /// `Some` when the search settles the problem: optimal or infeasible.
    fn run(&mut self, lp: &LpSolution) -> Result<Option<BnbOutcome>, SolveError> {
        if let Some(start) = storage_plan_start(self.mp, self.cfg, lp)? {
            self.best = Some((self.mp.problem.objective_value(&start), start));
        }
        let mut lambda: Vec<f64> = self.linking.iter().map(|&i| lp.row_duals[i]).collect();
        let mut best_lambda = lambda.clone();
        let mut theta = 1.0;
        let mut stall = 0;
        for _ in 0..LAGRANGIAN_ROUNDS {
            let Some((value, x)) = self.dual_value(&lambda)? else {
                return Ok(Some(BnbOutcome {
                    status: MilpStatus::Infeasible,
                    values: None,
                    objective: None,
                    best_bound: f64::INFINITY,
                    stats: BnbStats::default(),
                }));
            };
            if value > self.bound + GAP * value.abs().max(1.0) {
                self.bound = value;
                best_lambda.clone_from(&lambda);
                stall = 0;
            } else {
                stall += 1;
                if stall >= 3 {
                    theta /= 2.0;
                    stall = 0;
                    lambda.clone_from(&best_lambda);
                    continue;
                }
            }
            self.try_switch_plan(&x)?;
            if self.closed() {
                break;
            }
            let residual: Vec<f64> = self
                .linking
                .iter()
                .map(|&i| {
                    let row = &self.mp.problem.constraints[i];
                    row.rhs - row.activity(&x)
                })
                .collect();
            let norm: f64 = residual.iter().map(|g| g * g).sum();
            let target = self
                .best
                .as_ref()
                .map_or(value.abs().max(1.0) * 1e-3 + value, |(ub, _)| *ub);
            if norm <= 1e-18 || theta < 1e-4 {
                break;
            }
            let step = theta * (target - value).max(1e-9) / norm;
            for (l, g) in lambda.iter_mut().zip(&residual) {
                *l += step * g;
            }
        }
        Ok(self.closed().then(|| {
            let (obj, values) = self.best.clone().expect("closed implies a schedule");
            BnbOutcome {
                status: MilpStatus::Optimal,
                values: Some(values),
                objective: Some(obj),
                best_bound: self.bound.min(obj),
                stats: BnbStats::default(),
            }
        }))
    }

    /// Dual function at `lambda` and the hours' minimisers, or `None` when
    /// some hour has no feasible schedule at all.
    fn dual_value(&mut self, lambda: &[f64]) -> Result<Option<(f64, Vec<f64>)>, SolveError> {
        let mp = self.mp;
        let mut cost = vec![0.0; mp.problem.variables.len()];
        for &(j, c) in &mp.problem.objective {
            cost[j] += c;
        }
        let mut value = 0.0;
        for (&i, &l) in self.linking.iter().zip(lambda) {
            let row = &mp.problem.constraints[i];
            value += l * row.rhs;
            for &(j, a) in &row.coeffs {
                cost[j] -= l * a;
            }
        }
        let mut x = vec![0.0; mp.problem.variables.len()];
        let mut hour_stats = Vec::new();
        for (sub, map) in &mut self.hours {
            sub.problem.objective = map
                .iter()
                .enumerate()
                .filter_map(|(js, &j)| (cost[j] != 0.0).then_some((js, cost[j])))
                .collect();
            let out = BranchAndBound::new(&sub.problem, bnb_config(self.cfg)).solve(&RadialCheck::new(sub))?;
            hour_stats.push(out.stats.clone());
            match out.status {
                MilpStatus::Infeasible => return Ok(None),
                MilpStatus::Unbounded => return Err(SolveError::Unbounded),
                _ => {}
            }
            value += out.best_bound;
            if let Some(v) = out.values {
                for (js, &j) in map.iter().enumerate() {
                    x[j] = v[js];
                }
            }
        }
        for s in &hour_stats {
            self.absorb(s);
        }
        Ok(Some((value, x)))
    }

    /// Keep `x`'s switch states, re-optimise everything else.
    fn try_switch_plan(&mut self, x: &[f64]) -> Result<(), SolveError> {
        let mp = self.mp;
        let mut fixed = mp.problem.clone();
        for &t in &mp.hours {
            for (_, j) in mp.switch_vars(t) {
                let v = x[j].round();
                let var = &mut fixed.variables[j];
                (var.lower, var.upper) = (v, v);
            }
        }
        let out = BranchAndBound::new(&fixed, bnb_config(self.cfg)).solve(&RadialCheck::new(mp))?;
        self.absorb(&out.stats);
        if let (Some(obj), Some(values)) = (out.objective, out.values) {
            if self.best.as_ref().is_none_or(|(ub, _)| obj < *ub) {
                self.best = Some((obj, values));
            }
        }
        Ok(())
    }
}

/// Starting schedule for models where storage couples the hours: keep the
/// relaxation's net storage injections, pick each hour's switches with a
/// single-hour solve, then re-optimise everything else with those switches.
fn storage_plan_start(mp: &MilpProblem, cfg: &SolverConfig, lp: &LpSolution) -> Result<Option<Vec<f64>>, SolveError> {
    let mut fixed = mp.problem.clone();
    for &t in &mp.hours {
        let mut sub = build_model_for_hours(&mp.instance, mp.case, cfg, &[t])?;
        for b in &mp.instance.bess_units {
            let get = |key| mp.var(key).map_or(0.0, |j| lp.values[j]);
            let net = get(VarKey::Chg { bess: b.id, hour: t }) - get(VarKey::Dchg { bess: b.id, hour: t });
            let (c, d) = (net.max(0.0), (-net).max(0.0));
            let pin = [
                (VarKey::Chg { bess: b.id, hour: t }, c),
                (VarKey::Dchg { bess: b.id, hour: t }, d),
                (VarKey::ChgOn { bess: b.id, hour: t }, f64::from(c > 0.0)),
                (VarKey::DchgOn { bess: b.id, hour: t }, f64::from(d > 0.0)),
            ];
            for (key, v) in pin {
                if let Some(j) = sub.var(key) {
                    let var = &mut sub.problem.variables[j];
                    (var.lower, var.upper) = (v, v);
                }
            }
            if let Some(j) = sub.var(VarKey::Soc { bess: b.id, hour: t }) {
                let var = &mut sub.problem.variables[j];
                (var.lower, var.upper) = (f64::NEG_INFINITY, f64::INFINITY);
            }
        }
        sub.problem.constraints.retain(|c| !is_linking_row(&c.name));
        let out = BranchAndBound::new(&sub.problem, bnb_config(cfg)).solve(&RadialCheck::new(&sub))?;
        let Some(values) = out.values else {
            return Ok(None);
        };
        for ((_, js), (_, jf)) in sub.switch_vars(t).into_iter().zip(mp.switch_vars(t)) {
            let v = values[js].round();
            let var = &mut fixed.variables[jf];
            (var.lower, var.upper) = (v, v);
        }
    }
    let out = BranchAndBound::new(&fixed, bnb_config(cfg)).solve(&RadialCheck::new(mp))?;
    Ok(out.values)
}

fn by_hour(mp: &MilpProblem, cfg: &SolverConfig) -> Result<BnbOutcome, SolveError> {
    let started = Instant::now();
    let mut values = vec![0.0; mp.problem.variables.len()];
    let mut stats = BnbStats::default();
    let (mut objective, mut bound) = (0.0, 0.0);
    let mut status = MilpStatus::Optimal;
    for &t in &mp.hours {
        let mut hour_cfg = cfg.clone();
        hour_cfg.time_limit_ms = cfg
            .time_limit_ms
            .map(|ms| ms.saturating_sub(started.elapsed().as_millis() as u64));
        let sub = build_model_for_hours(&mp.instance, mp.case, &hour_cfg, &[t])?;
        let out = branch_and_bound(&sub, &hour_cfg)?;
        stats.nodes += out.stats.nodes;
        stats.lp_iterations += out.stats.lp_iterations;
        stats.lazy_branches += out.stats.lazy_branches;
        stats.rounding_hits += out.stats.rounding_hits;
        stats.heuristic_hits += out.stats.heuristic_hits;
        bound += out.best_bound;
        match (out.status, out.values) {
            (MilpStatus::Infeasible | MilpStatus::Unbounded, _) | (MilpStatus::LimitReached, None) => {
                status = out.status;
                break;
            }
            (s, Some(v)) => {
                if s == MilpStatus::LimitReached {
                    status = s;
                }
                objective += out.objective.unwrap_or(0.0);
                for (key, x) in sub.keys.iter().zip(v) {
                    let j = mp.var(*key).expect("hour model is a slice of the full model");
                    values[j] = x;
                }
            }
            (MilpStatus::Optimal, None) => unreachable!("optimal outcome carries values"),
        }
    }
    stats.wall = started.elapsed();
    let solved = matches!(status, MilpStatus::Optimal | MilpStatus::LimitReached);
    Ok(BnbOutcome {
        status,
        values: solved.then_some(values),
        objective: solved.then_some(objective),
        best_bound: if status == MilpStatus::Infeasible {
            f64::INFINITY
        } else {
            bound
        },
        stats,
    })
}

fn stats_for(mp: &MilpProblem) -> SolveStats {
    SolveStats {
        variables: mp.problem.variables.len(),
        constraints: mp.problem.constraints.len(),
        binaries: mp.num_binaries(),
        ..SolveStats::default()
    }
}

fn verified(mp: &MilpProblem, values: &[f64]) -> Result<(DispatchSchedule, VerificationReport), SolveError> {
    let schedule = mp.extract_schedule(values);
    let report = verify_schedule(&mp.instance, &schedule);
    if !report.pass {
        return Err(SolveError::Verification(Box::new(report)));
    }
    Ok((schedule, report))
}

/// Solve one configuration on `inst` as given. The instance's EV demand is
/// used as-is; `case.penetration` is carried along for reporting.
pub fn solve_case(inst: &NetworkInstance, case: CaseConfig, cfg: &SolverConfig) -> Result<CaseResult, SolveError> {
    let started = Instant::now();
    let mp = build_model(inst, case, cfg)?;
    let outcome = branch_and_bound(&mp, cfg)?;
    let mut stats = stats_for(&mp);
    stats.nodes = outcome.stats.nodes;
    stats.lp_iterations = outcome.stats.lp_iterations;
    stats.radiality_branches = outcome.stats.lazy_branches;
    stats.objective = outcome.objective;

    let (status, schedule, verification) = match outcome.status {
        MilpStatus::Optimal => {
            let values = outcome.values.as_deref().expect("optimal carries values");
            let (schedule, report) = verified(&mp, values)?;
            (
                CaseStatus::Feasible {
                    cost_usd: schedule.total_cost,
                },
                Some(schedule),
                Some(report),
            )
        }
        MilpStatus::Infeasible => (CaseStatus::Infeasible, None, None),
        MilpStatus::Unbounded => return Err(SolveError::Unbounded),
        MilpStatus::LimitReached => match outcome.values.as_deref() {
            Some(values) => {
                let (schedule, report) = verified(&mp, values)?;
                (
                    CaseStatus::LimitReached {
                        incumbent_cost: Some(schedule.total_cost),
                        best_bound: outcome.best_bound,
                    },
                    Some(schedule),
                    Some(report),
                )
            }
            None => (
                CaseStatus::LimitReached {
                    incumbent_cost: None,
                    best_bound: outcome.best_bound,
                },
                None,
                None,
            ),
        },
    };
    stats.wall_ms = started.elapsed().as_millis() as u64;
    Ok(CaseResult {
        case,
        status,
        schedule,
        verification,
        stats,
    })
}

/// Exact optimum by brute force: without storage the hours decouple, so each
/// hour is the cheapest LP over all radial topologies. Ties go to the
/// lexicographically smallest closed-line set.
pub fn solve_by_enumeration(
    inst: &NetworkInstance,
    case: CaseConfig,
    cfg: &SolverConfig,
) -> Result<CaseResult, SolveError> {
    cfg.check()?;
    let started = Instant::now();
    let bess = if case.ders_enabled { inst.bess_units.len() } else { 0 };
    if bess > 0 {
        return Err(SolveError::BessPresent(bess));
    }
    let reconfigure = case.reconfiguration_enabled && inst.lines.iter().any(|l| l.switchable);
    let topologies = if reconfigure {
        enumerate_radial_topologies(inst, cfg.enumeration_cap)?
    } else {
        vec![Topology::base(inst)]
    };

    let mut stats = SolveStats::default();
    let mut schedule = DispatchSchedule {
        exact_bess: true,
        ..DispatchSchedule::default()
    };
    let mut objective = 0.0;
    let mut infeasible = false;
    for t in 1..=cfg.horizon {
        let mp = build_model_for_hours(inst, case, cfg, &[t])?;
        stats.variables += mp.problem.variables.len();
        stats.constraints += mp.problem.constraints.len();
        let switches = mp.switch_vars(t);
        let mut engine = LpEngine::new(&mp.problem, SimplexOptions::default());
        let mut best: Option<(f64, Vec<f64>)> = None;
        for topo in &topologies {
            for &(k, j) in &switches {
                let v = if topo.closed_lines.contains(&mp.instance.lines[k].id) {
                    1.0
                } else {
                    0.0
                };
                engine.set_bounds(j, v, v);
            }
            let lp = engine.solve()?;
            stats.nodes += 1;
            stats.lp_iterations += lp.iterations;
            if lp.status != LpStatus::Optimal {
                continue;
            }
            let better = match &best {
                None => true,
                Some((b, _)) => lp.objective < b - 1e-9 * b.abs().max(1.0),
            };
            if better {
                best = Some((lp.objective, lp.values));
            }
        }
        match best {
            Some((obj, values)) => {
                objective += obj;
                schedule.hours.extend(mp.extract_schedule(&values).hours);
            }
            None => {
                infeasible = true;
                break;
            }
        }
    }

    let mut result = CaseResult {
        case,
        status: CaseStatus::Infeasible,
        schedule: None,
        verification: None,
        stats,
    };
    if !infeasible {
        let modelled = if case.ders_enabled {
            inst.clone()
        } else {
            inst.without_ders()
        };
        schedule.total_cost = schedule.evaluate_cost(&modelled);
        let report = verify_schedule(&modelled, &schedule);
        if !report.pass {
            return Err(SolveError::Verification(Box::new(report)));
        }
        result.status = CaseStatus::Feasible {
            cost_usd: schedule.total_cost,
        };
        result.stats.objective = Some(objective);
        result.schedule = Some(schedule);
        result.verification = Some(report);
    }
    result.stats.wall_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

/// Free-format MPS text of the model.
pub fn export_mps(mp: &MilpProblem) -> String {
    gridflex_milp::mps::write_mps(&mp.problem)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub line: u32,
    pub hour: usize,
    /// Value the switch was fixed to.
    pub forced: u8,
    /// False when fixing the switch left no feasible point to measure.
    pub feasible: bool,
    /// Largest |flow| (forced open) or |flow - angle difference / x|
    /// (forced closed) over the feasible set.
    pub worst: f64,
}

/// Check that the big-M rows mean what they should. For every switchable
/// line and hour of `schedule`, the line's switch is forced open and then
/// closed, every other switch is held at the schedule's state, and LPs
/// maximise and minimise the quantity that must vanish.
pub fn big_m_probe(
    inst: &NetworkInstance,
    case: CaseConfig,
    cfg: &SolverConfig,
    schedule: &DispatchSchedule,
) -> Result<Vec<ProbeResult>, SolveError> {
    let case = CaseConfig {
        reconfiguration_enabled: true,
        ..case
    };
    let mut out = Vec::new();
    for h in &schedule.hours {
        let t = h.hour;
        let mp = build_model_for_hours(inst, case, cfg, &[t])?;
        let mut base = mp.problem.clone();
        // The count row would make a forced extra closure infeasible.
        base.constraints.retain(|c| !c.name.starts_with("radial_count"));
        let switches = mp.switch_vars(t);
        for &(k, _) in &switches {
            let line = &mp.instance.lines[k];
            let flow = mp.var(VarKey::Flow { line: line.id, hour: t }).expect("flow var");
            let (a, b) = (
                mp.var(VarKey::Angle {
                    bus: line.from_bus,
                    hour: t,
                })
                .expect("angle var"),
                mp.var(VarKey::Angle {
                    bus: line.to_bus,
                    hour: t,
                })
                .expect("angle var"),
            );
            for forced in [0u8, 1] {
                let mut p = base.clone();
                for &(k2, j2) in &switches {
                    let v = if k2 == k {
                        forced as f64
                    } else if h.closed_lines.contains(&mp.instance.lines[k2].id) {
                        1.0
                    } else {
                        0.0
                    };
                    p.variables[j2].lower = v;
                    p.variables[j2].upper = v;
                }
                let expr: Vec<(usize, f64)> = if forced == 0 {
                    vec![(flow, 1.0)]
                } else {
                    let inv = 1.0 / line.reactance_x;
                    vec![(flow, 1.0), (a, -inv), (b, inv)]
                };
                let (feasible, worst) = extreme_abs(&p, &expr)?;
                out.push(ProbeResult {
                    line: line.id,
                    hour: t,
                    forced,
                    feasible,
                    worst,
                });
            }
        }
    }
    Ok(out)
}

/// max |expr| over the LP-feasible set of `p`, via two LPs.
fn extreme_abs(p: &Problem, expr: &[(usize, f64)]) -> Result<(bool, f64), SolverError> {
    let mut worst = 0.0f64;
    for sign in [1.0, -1.0] {
        let mut q = p.clone();
        q.objective = expr.iter().map(|&(j, c)| (j, sign * c)).collect();
        let lp = gridflex_milp::solve_lp(&q)?;
        match lp.status {
            LpStatus::Optimal => worst = worst.max(lp.objective.abs()),
            LpStatus::Infeasible => return Ok((false, 0.0)),
            LpStatus::Unbounded => return Ok((true, f64::INFINITY)),
        }
    }
    Ok((true, worst))
}
