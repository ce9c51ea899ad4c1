//! Best-first branch-and-bound over binary variables.
//!
//! Nodes carry only their branching fixings and the parent's optimal basis;
//! each node LP is warm-started on a single shared [`LpEngine`]. Integral LP
//! solutions are handed to an [`IncumbentCheck`], which can accept them,
//! reject the node, or name binaries to branch on (lazy constraints that are
//! not part of the LP, e.g. acyclicity of a switched network).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::SolverError;
use crate::problem::{LpStatus, Problem};
use crate::simplex::{Basis, LpData, LpEngine, SimplexOptions};

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub int_tol: f64,
    /// Relative optimality gap at which nodes are pruned.
    pub rel_gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Try rounding fractional node solutions using row slacks.
    pub rounding: bool,
    /// Run the check's heuristic at the root and then every this many nodes
    /// (0 disables it).
    pub heuristic_every: usize,
    /// LP evaluations allowed per local search after a proposal.
    pub heuristic_moves: usize,
    pub branching: BranchRule,
    /// Simplex iterations allowed per strong-branching probe.
    pub strong_iterations: usize,
    pub simplex: SimplexOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchRule {
    /// Binary farthest from integrality.
    #[default]
    MostFractional,
    /// Largest product of estimated bound gains in the two children. Gains
    /// are learned from solved children; a binary without history in either
    /// direction is probed by solving both children first.
    Pseudocost,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            int_tol: 1e-6,
            rel_gap: 1e-9,
            node_limit: 200_000,
            time_limit: None,
            rounding: true,
            heuristic_every: 16,
            heuristic_moves: 200,
            branching: BranchRule::MostFractional,
            strong_iterations: 200,
            simplex: SimplexOptions::default(),
        }
    }
}

/// Outcome of the lazy check on an integral candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// Candidate violates a lazy condition; branch on the first listed
    /// binary still free at the node, or drop the node when none is.
    Branch(Vec<usize>),
}

pub trait IncumbentCheck {
    fn check(&self, values: &[f64]) -> Verdict;

    /// Primal heuristic: binary fixings that, given a node's LP solution, are
    /// likely to yield a good acceptable candidate. Continuous variables are
    /// then re-optimized with those fixings.
    fn propose(&self, _values: &[f64]) -> Option<Vec<(usize, f64)>> {
        None
    }

    /// Fixings one move away from `fixings`, for the local search that
    /// follows a successful proposal.
    fn neighbours(&self, _fixings: &[(usize, f64)]) -> Vec<Vec<(usize, f64)>> {
        Vec::new()
    }
}

/// Accepts every integral candidate.
pub struct AcceptAll;

impl IncumbentCheck for AcceptAll {
    fn check(&self, _values: &[f64]) -> Verdict {
        Verdict::Accept
    }
}

impl<F: Fn(&[f64]) -> Verdict> IncumbentCheck for F {
    fn check(&self, values: &[f64]) -> Verdict {
        self(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or time limit hit; the incumbent (if any) is not proven optimal.
    LimitReached,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BnbStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub lazy_branches: usize,
    pub rounding_hits: usize,
    pub heuristic_hits: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct BnbOutcome {
    pub status: MilpStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Lower bound over all unexplored nodes at termination.
    pub best_bound: f64,
    pub stats: BnbStats,
}

impl BnbOutcome {
    pub fn gap_open(&self) -> bool {
        self.status == MilpStatus::LimitReached
    }
}

struct Fixing {
    var: usize,
    value: f64,
    parent: Option<Rc<Fixing>>,
}

/// Bound gain per unit change, summed over observations, down then up.
#[derive(Debug, Clone, Default)]
struct Pseudocost {
    sum: [f64; 2],
    count: [usize; 2],
}

impl Pseudocost {
    fn record(&mut self, dir: usize, gain_per_unit: f64) {
        self.sum[dir] += gain_per_unit;
        self.count[dir] += 1;
    }

    fn mean(&self, dir: usize) -> Option<f64> {
        (self.count[dir] > 0).then(|| self.sum[dir] / self.count[dir] as f64)
    }
}

/// How a child was created: branched var, direction (0 down, 1 up), the
/// distance the LP value moved, and the parent's LP objective.
#[derive(Clone, Copy)]
struct Origin {
    var: usize,
    dir: usize,
    dist: f64,
    parent_obj: f64,
}

struct Node {
    bound: f64,
    origin: Option<Origin>,
    /// `bound` in units of the gap tolerance, so that bounds differing only
    /// by round-off compare equal and depth decides.
    level: i64,
    depth: usize,
    seq: usize,
    fixings: Option<Rc<Fixing>>,
    basis: Rc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: "greater" means explored first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .cmp(&self.level)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

pub struct BranchAndBound<'a> {
    problem: &'a Problem,
    config: BnbConfig,
    /// column view: var -> (row, coeff)
    columns: Vec<Vec<(usize, f64)>>,
    row_lo: Vec<f64>,
    row_up: Vec<f64>,
}

impl<'a> BranchAndBound<'a> {
    pub fn new(problem: &'a Problem, config: BnbConfig) -> Self {
        let n = problem.variables.len();
        let mut columns = vec![Vec::new(); n];
        let mut row_lo = Vec::with_capacity(problem.constraints.len());
        let mut row_up = Vec::with_capacity(problem.constraints.len());
        for (i, c) in problem.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if problem.variables[j].is_binary() {
                    columns[j].push((i, a));
                }
            }
            let (lo, up) = match c.relation {
                crate::Relation::Le => (f64::NEG_INFINITY, c.rhs),
                crate::Relation::Ge => (c.rhs, f64::INFINITY),
                crate::Relation::Eq => (c.rhs, c.rhs),
            };
            row_lo.push(lo);
            row_up.push(up);
        }
        BranchAndBound {
            problem,
            config,
            columns,
            row_lo,
            row_up,
        }
    }

    pub fn solve(&self, check: &dyn IncumbentCheck) -> Result<BnbOutcome, SolverError> {
        self.solve_from(check, None)
    }

    /// Like [`solve`](Self::solve), starting from a known solution. The start
    /// is ignored unless it satisfies every row, bound and integrality
    /// requirement and the check accepts it.
    pub fn solve_from(&self, check: &dyn IncumbentCheck, start: Option<Vec<f64>>) -> Result<BnbOutcome, SolverError> {
        self.problem.check().map_err(SolverError::Malformed)?;
        let started = Instant::now();
        let data = Arc::new(LpData::new(self.problem));
        let mut engine = LpEngine::from_data(data, self.config.simplex.clone());
        let mut stats = BnbStats::default();

        let mut open = BinaryHeap::new();
        let mut seq = 0usize;
        open.push(Node {
            bound: f64::NEG_INFINITY,
            origin: None,
            level: i64::MIN,
            depth: 0,
            seq,
            fixings: None,
            basis: Rc::new(engine.basis()),
        });

        let mut pseudo = vec![Pseudocost::default(); self.problem.variables.len()];
        let mut incumbent: Option<(f64, Vec<f64>)> = start
            .filter(|v| self.admissible(v) && check.check(v) == Verdict::Accept)
            .map(|v| (self.problem.objective_value(&v), v));
        let mut limit_hit = false;
        // Fixed from the root LP objective.
        let mut quantum: Option<f64> = None;

        while let Some(node) = open.pop() {
            if let Some((inc, _)) = &incumbent {
                if node.bound >= inc - self.gap_abs(*inc) {
                    continue;
                }
            }
            if stats.nodes >= self.config.node_limit || self.config.time_limit.is_some_and(|t| started.elapsed() >= t) {
                open.push(node);
                limit_hit = true;
                break;
            }
            stats.nodes += 1;

            engine.restore_bounds();
            let mut f = node.fixings.clone();
            while let Some(fix) = f {
                engine.set_bounds(fix.var, fix.value, fix.value);
                f = fix.parent.clone();
            }
            engine.set_basis(&node.basis);
            let lp = engine.solve()?;
            stats.lp_iterations += lp.iterations;

            match lp.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    stats.wall = started.elapsed();
                    return Ok(BnbOutcome {
                        status: MilpStatus::Unbounded,
                        values: None,
                        objective: None,
                        best_bound: f64::NEG_INFINITY,
                        stats,
                    });
                }
                LpStatus::Optimal => {}
            }
            if let Some(o) = node.origin {
                pseudo[o.var].record(o.dir, (lp.objective - o.parent_obj).max(0.0) / o.dist);
            }
            let bound = lp.objective.max(node.bound);
            let quantum = *quantum.get_or_insert_with(|| self.gap_abs(bound));
            let level = (bound / quantum).floor() as i64;
            if let Some((inc, _)) = &incumbent {
                if bound >= inc - self.gap_abs(*inc) {
                    continue;
                }
            }

            let basis = Rc::new(engine.basis());
            let every = self.config.heuristic_every;
            if every > 0 && (stats.nodes - 1) % every == 0 && self.most_fractional(&lp.values).is_some() {
                if let Some(fixings) = check.propose(&lp.values) {
                    if let Some(found) = self.local_search(&mut engine, fixings, bound, check, &mut stats)? {
                        if incumbent.as_ref().is_none_or(|(inc, _)| found.0 < *inc) {
                            stats.heuristic_hits += 1;
                            incumbent = Some(found);
                        }
                    }
                    // Back to this node's LP state.
                    engine.restore_bounds();
                    let mut f = node.fixings.clone();
                    while let Some(fix) = f {
                        engine.set_bounds(fix.var, fix.value, fix.value);
                        f = fix.parent.clone();
                    }
                    engine.set_basis(&basis);
                    if let Some((inc, _)) = &incumbent {
                        if bound >= inc - self.gap_abs(*inc) {
                            continue;
                        }
                    }
                }
            }
            // Child bounds known from probing; infinite for an infeasible child.
            let mut child_bound = [bound, bound];
            let branch_var = match self.most_fractional(&lp.values) {
                Some(j) => {
                    if self.config.rounding {
                        if let Some(rounded) = self.round(&lp.values) {
                            if check.check(&rounded) == Verdict::Accept {
                                let obj = self.problem.objective_value(&rounded);
                                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                                    stats.rounding_hits += 1;
                                    incumbent = Some((obj, rounded));
                                    if bound >= obj - self.gap_abs(obj) {
                                        continue;
                                    }
                                }
                            }
                        }
                    }
                    match self.config.branching {
                        BranchRule::MostFractional => j,
                        BranchRule::Pseudocost => {
                            let (j, probed) = self.pseudocost_choice(
                                &mut engine,
                                &lp.values,
                                lp.objective,
                                &basis,
                                &mut pseudo,
                                &mut stats,
                            );
                            for (cb, p) in child_bound.iter_mut().zip(probed) {
                                *cb = cb.max(p);
                            }
                            j
                        }
                    }
                }
                None => match check.check(&lp.values) {
                    Verdict::Accept => {
                        let obj = lp.objective;
                        if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                            incumbent = Some((obj, lp.values));
                        }
                        continue;
                    }
                    Verdict::Branch(candidates) => {
                        stats.lazy_branches += 1;
                        let free = candidates.into_iter().find(|&j| {
                            let (lo, up) = engine.bounds(j);
                            lo < up
                        });
                        match free {
                            Some(j) => j,
                            None => continue,
                        }
                    }
                },
            };

            // Child closer to the LP value first in sequence order.
            let x = lp.values[branch_var];
            let order = if x >= 0.5 { [1.0, 0.0] } else { [0.0, 1.0] };
            for value in order {
                let dir = usize::from(value > 0.5);
                let child = child_bound[dir];
                if child == f64::INFINITY
                    || incumbent
                        .as_ref()
                        .is_some_and(|(inc, _)| child >= inc - self.gap_abs(*inc))
                {
                    continue;
                }
                seq += 1;
                open.push(Node {
                    bound: child,
                    origin: Some(Origin {
                        var: branch_var,
                        dir,
                        dist: (x - value).abs().max(self.config.int_tol),
                        parent_obj: lp.objective,
                    }),
                    level: if child > bound {
                        (child / quantum).floor() as i64
                    } else {
                        level
                    },
                    depth: node.depth + 1,
                    seq,
                    fixings: Some(Rc::new(Fixing {
                        var: branch_var,
                        value,
                        parent: node.fixings.clone(),
                    })),
                    basis: basis.clone(),
                });
            }
        }

        stats.wall = started.elapsed();
        let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let (status, best_bound) = match (&incumbent, limit_hit) {
            (Some((inc, _)), false) => (MilpStatus::Optimal, *inc),
            (None, false) => (MilpStatus::Infeasible, f64::INFINITY),
            (Some((inc, _)), true) => (MilpStatus::LimitReached, open_bound.min(*inc)),
            (None, true) => (MilpStatus::LimitReached, open_bound),
        };
        log::debug!(
            "branch-and-bound: {:?} after {} nodes, {} LP iterations",
            status,
            stats.nodes,
            stats.lp_iterations
        );
        Ok(match incumbent {
            Some((obj, values)) => BnbOutcome {
                status,
                values: Some(values),
                objective: Some(obj),
                best_bound,
                stats,
            },
            None => BnbOutcome {
                status,
                values: None,
                objective: None,
                best_bound,
                stats,
            },
        })
    }

    /// First-improvement descent from `fixings` over the check's neighbours,
    /// stopping at `target` or when the move budget runs out.
    fn local_search(
        &self,
        engine: &mut LpEngine,
        mut fixings: Vec<(usize, f64)>,
        target: f64,
        check: &dyn IncumbentCheck,
        stats: &mut BnbStats,
    ) -> Result<Option<(f64, Vec<f64>)>, SolverError> {
        let Some(mut best) = self.try_fixings(engine, &fixings, check, stats)? else {
            return Ok(None);
        };
        let mut budget = self.config.heuristic_moves;
        'descent: while budget > 0 && best.0 > target + self.gap_abs(best.0) {
            for candidate in check.neighbours(&fixings) {
                if budget == 0 {
                    break 'descent;
                }
                budget -= 1;
                if let Some(found) = self.try_fixings(engine, &candidate, check, stats)? {
                    if found.0 < best.0 - self.gap_abs(best.0) {
                        best = found;
                        fixings = candidate;
                        continue 'descent;
                    }
                }
            }
            break;
        }
        Ok(Some(best))
    }

    /// Solve with `fixings` on top of the root bounds; returns an accepted
    /// integral candidate if one results (after rounding when needed).
    fn try_fixings(
        &self,
        engine: &mut LpEngine,
        fixings: &[(usize, f64)],
        check: &dyn IncumbentCheck,
        stats: &mut BnbStats,
    ) -> Result<Option<(f64, Vec<f64>)>, SolverError> {
        engine.restore_bounds();
        for &(j, v) in fixings {
            engine.set_bounds(j, v, v);
        }
        let lp = engine.solve()?;
        stats.lp_iterations += lp.iterations;
        if lp.status != LpStatus::Optimal {
            return Ok(None);
        }
        let candidate = if self.most_fractional(&lp.values).is_none() {
            lp.values
        } else {
            match self.round(&lp.values) {
                Some(r) => r,
                None => return Ok(None),
            }
        };
        if check.check(&candidate) != Verdict::Accept {
            return Ok(None);
        }
        Ok(Some((self.problem.objective_value(&candidate), candidate)))
    }

    /// Pseudocost branching candidate at a node whose LP state is loaded in
    /// `engine`, plus child bounds learned by probing (or `-inf`).
    fn pseudocost_choice(
        &self,
        engine: &mut LpEngine,
        values: &[f64],
        objective: f64,
        basis: &Basis,
        pseudo: &mut [Pseudocost],
        stats: &mut BnbStats,
    ) -> (usize, [f64; 2]) {
        let fractional: Vec<usize> = (0..values.len())
            .filter(|&j| {
                self.problem.variables[j].is_binary() && (values[j] - values[j].round()).abs() > self.config.int_tol
            })
            .collect();
        let mut probed: Vec<Option<[f64; 2]>> = vec![None; fractional.len()];
        for (k, &j) in fractional.iter().enumerate() {
            if pseudo[j].count[0] > 0 && pseudo[j].count[1] > 0 {
                continue;
            }
            let (lo, up) = engine.bounds(j);
            let mut bounds = [f64::NEG_INFINITY; 2];
            for (dir, target) in [(0, 0.0), (1, 1.0)] {
                engine.set_bounds(j, target, target);
                engine.set_iteration_limit(self.config.strong_iterations);
                let res = engine.solve();
                engine.set_iteration_limit(self.config.simplex.max_iterations);
                engine.set_bounds(j, lo, up);
                engine.set_basis(basis);
                match res {
                    Ok(r) => {
                        stats.lp_iterations += r.iterations;
                        match r.status {
                            LpStatus::Optimal => {
                                bounds[dir] = r.objective;
                                let dist = (values[j] - target).abs();
                                pseudo[j].record(dir, (r.objective - objective).max(0.0) / dist);
                            }
                            LpStatus::Infeasible => bounds[dir] = f64::INFINITY,
                            LpStatus::Unbounded => {}
                        }
                    }
                    Err(SolverError::IterationLimit(_)) => {}
                    Err(e) => log::debug!("probe on {j} failed: {e}"),
                }
            }
            probed[k] = Some(bounds);
        }
        let known: Vec<f64> = pseudo.iter().flat_map(|p| [p.mean(0), p.mean(1)]).flatten().collect();
        let fallback = if known.is_empty() {
            1.0
        } else {
            known.iter().sum::<f64>() / known.len() as f64
        };
        let mut best: Option<(usize, f64, [f64; 2])> = None;
        for (k, &j) in fractional.iter().enumerate() {
            let x = values[j];
            let gain = |dir: usize| {
                let bound = probed[k].map_or(f64::NEG_INFINITY, |b| b[dir]);
                if bound == f64::INFINITY {
                    return f64::INFINITY;
                }
                let dist = if dir == 0 { x } else { 1.0 - x };
                let est = pseudo[j].mean(dir).unwrap_or(fallback) * dist;
                est.max(bound - objective)
            };
            let score = gain(0).clamp(1e-9, 1e12) * gain(1).clamp(1e-9, 1e12);
            if best.as_ref().is_none_or(|&(_, b, _)| score > b) {
                best = Some((j, score, probed[k].unwrap_or([f64::NEG_INFINITY; 2])));
            }
        }
        let (j, _, bounds) = best.expect("called with a fractional solution");
        (j, bounds)
    }

    fn admissible(&self, values: &[f64]) -> bool {
        let tol = 1e-7;
        if values.len() != self.problem.variables.len() {
            return false;
        }
        let vars_ok = self.problem.variables.iter().zip(values).all(|(v, &x)| {
            x >= v.lower - tol && x <= v.upper + tol && (!v.is_binary() || (x - x.round()).abs() <= self.config.int_tol)
        });
        vars_ok
            && self.problem.constraints.iter().enumerate().all(|(i, c)| {
                let a: f64 = c.coeffs.iter().map(|&(j, v)| v * values[j]).sum();
                a >= self.row_lo[i] - tol * (1.0 + self.row_lo[i].abs())
                    && a <= self.row_up[i] + tol * (1.0 + self.row_up[i].abs())
            })
    }

    fn gap_abs(&self, incumbent: f64) -> f64 {
        self.config.rel_gap * incumbent.abs().max(1.0)
    }

    /// Binary farthest from integrality; lowest index on ties.
    fn most_fractional(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in self.problem.variables.iter().enumerate() {
            if !v.is_binary() {
                continue;
            }
            let frac = (values[j] - values[j].round()).abs();
            if frac > self.config.int_tol && best.is_none_or(|(_, b)| frac > b + 1e-12) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Round every fractional binary in a direction that keeps all its rows
    /// within bounds given the current row activities.
    fn round(&self, values: &[f64]) -> Option<Vec<f64>> {
        let tol = self.config.simplex.primal_tol.max(1e-9);
        let mut x = values.to_vec();
        let mut act: Vec<f64> = self.problem.constraints.iter().map(|c| c.activity(values)).collect();
        for (j, v) in self.problem.variables.iter().enumerate() {
            if !v.is_binary() {
                continue;
            }
            let r = x[j].round();
            if (x[j] - r).abs() <= self.config.int_tol {
                continue;
            }
            let up = x[j].ceil().min(v.upper);
            let down = x[j].floor().max(v.lower);
            let tries = if x[j] - down <= up - x[j] {
                [down, up]
            } else {
                [up, down]
            };
            let ok = tries.into_iter().find(|&target| {
                let delta = target - x[j];
                self.columns[j].iter().all(|&(i, a)| {
                    let na = act[i] + a * delta;
                    na >= self.row_lo[i] - tol && na <= self.row_up[i] + tol
                })
            })?;
            let delta = ok - x[j];
            for &(i, a) in &self.columns[j] {
                act[i] += a * delta;
            }
            x[j] = ok;
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, Relation, Variable};

    fn knapsack_like() -> Problem {
        // minimize -x - y s.t. x + y <= 1.5, x, y binary
        Problem {
            name: "k".into(),
            variables: vec![Variable::binary("x"), Variable::binary("y")],
            constraints: vec![Constraint::new("c", vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.5)],
            objective: vec![(0, -1.0), (1, -1.0)],
        }
    }

    #[test]
    fn two_binaries_under_fractional_capacity() {
        let p = knapsack_like();
        let out = BranchAndBound::new(&p, BnbConfig::default()).solve(&AcceptAll).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        assert_eq!(out.objective, Some(-1.0));
    }

    #[test]
    fn lazy_branching_excludes_rejected_assignments() {
        // Forbid x = 1 lazily: the check names x as the branching candidate.
        let p = knapsack_like();
        let check = |v: &[f64]| {
            if v[0] > 0.5 {
                Verdict::Branch(vec![0])
            } else {
                Verdict::Accept
            }
        };
        let out = BranchAndBound::new(&p, BnbConfig::default()).solve(&check).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        let v = out.values.unwrap();
        assert_eq!((v[0], v[1]), (0.0, 1.0));
    }

    #[test]
    fn infeasible_when_all_assignments_rejected() {
        let p = knapsack_like();
        let check = |_: &[f64]| Verdict::Branch(vec![0, 1]);
        let out = BranchAndBound::new(&p, BnbConfig::default()).solve(&check).unwrap();
        assert_eq!(out.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_open_gap() {
        let mut p = Problem::new("many");
        let k = 12;
        for i in 0..k {
            p.add_variable(Variable::binary(format!("b{i}")));
        }
        // sum b_i = k/2 + 0.5 is infeasible for integers; LP is feasible
        p.add_constraint(Constraint::new(
            "half",
            (0..k).map(|i| (i, 2.0)).collect(),
            Relation::Eq,
            k as f64 + 1.0,
        ));
        p.objective = (0..k).map(|i| (i, 1.0 + i as f64)).collect();
        let cfg = BnbConfig {
            node_limit: 5,
            ..Default::default()
        };
        let out = BranchAndBound::new(&p, cfg).solve(&AcceptAll).unwrap();
        assert_eq!(out.status, MilpStatus::LimitReached);
        assert!(out.gap_open());
        assert!(out.values.is_none());
    }
}
