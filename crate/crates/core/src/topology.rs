//! Radial-forest semantics for per-hour switch states.
//!
//! A topology is radial when the closed lines split the buses into trees
//! with exactly one substation each. Equivalently: add a virtual root joined
//! to every substation bus; the closed lines plus those root edges must then
//! form a spanning tree.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::network::NetworkInstance;
use crate::schedule::DispatchSchedule;

pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Closed lines (by id) for one hour.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Topology {
    pub closed_lines: BTreeSet<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hour: Option<usize>,
}

impl Topology {
    pub fn new(closed_lines: impl IntoIterator<Item = u32>) -> Topology {
        Topology {
            closed_lines: closed_lines.into_iter().collect(),
            hour: None,
        }
    }

    pub fn at_hour(mut self, hour: usize) -> Topology {
        self.hour = Some(hour);
        self
    }

    /// The normally-closed configuration of `inst`.
    pub fn base(inst: &NetworkInstance) -> Topology {
        Topology::new(inst.base_closed_lines())
    }

    /// Every line closed.
    pub fn all_closed(inst: &NetworkInstance) -> Topology {
        Topology::new(inst.lines.iter().map(|l| l.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialityFailure {
    UnknownLine { line: u32 },
    FixedLineOpen { line: u32 },
    Count { closed: usize, expected: usize },
    Cycle { lines: Vec<u32> },
    SharedTree { substations: Vec<u32>, buses: Vec<u32> },
    Unserved { buses: Vec<u32> },
}

impl fmt::Display for RadialityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialityFailure::UnknownLine { line } => write!(f, "line {line} is not part of the instance"),
            RadialityFailure::FixedLineOpen { line } => write!(f, "non-switchable line {line} is open"),
            RadialityFailure::Count { closed, expected } => {
                write!(f, "closed-line count {closed} != buses - substations = {expected}")
            }
            RadialityFailure::Cycle { lines } => write!(f, "cycle through lines {lines:?}"),
            RadialityFailure::SharedTree { substations, buses } => {
                write!(f, "substations {substations:?} share one tree ({} buses)", buses.len())
            }
            RadialityFailure::Unserved { buses } => write!(f, "buses {buses:?} reach no substation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialityCheck {
    pub radial: bool,
    pub failures: Vec<RadialityFailure>,
}

impl fmt::Display for RadialityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radial {
            return f.write_str("radial");
        }
        let parts: Vec<String> = self.failures.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn is_radial_forest(inst: &NetworkInstance, topo: &Topology) -> RadialityCheck {
    let mut failures = Vec::new();
    let mut closed_idx = Vec::with_capacity(topo.closed_lines.len());
    for &id in &topo.closed_lines {
        match inst.line_by_id(id) {
            Some(k) => closed_idx.push(k),
            None => failures.push(RadialityFailure::UnknownLine { line: id }),
        }
    }
    for l in &inst.lines {
        if !l.switchable && !topo.closed_lines.contains(&l.id) {
            failures.push(RadialityFailure::FixedLineOpen { line: l.id });
        }
    }
    let expected = inst.num_buses().saturating_sub(inst.substations.len());
    if closed_idx.len() != expected {
        failures.push(RadialityFailure::Count {
            closed: closed_idx.len(),
            expected,
        });
    }
    if let Some(cycle) = plain_cycle(inst, &closed_idx) {
        failures.push(RadialityFailure::Cycle {
            lines: cycle.iter().map(|&k| inst.lines[k].id).collect(),
        });
    }

    let comp = inst.components(closed_idx.iter().copied());
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut subs_in = vec![Vec::new(); ncomp];
    for s in &inst.substations {
        let b = inst.bus_idx(s.bus).expect("resolved at load");
        subs_in[comp[b]].push(s.id);
    }
    for (c, subs) in subs_in.iter().enumerate() {
        let buses: Vec<u32> = (0..inst.num_buses())
            .filter(|&n| comp[n] == c)
            .map(|n| inst.buses[n].id)
            .collect();
        match subs.len() {
            0 => failures.push(RadialityFailure::Unserved { buses }),
            1 => {}
            _ => failures.push(RadialityFailure::SharedTree {
                substations: subs.clone(),
                buses,
            }),
        }
    }
    RadialityCheck {
        radial: failures.is_empty(),
        failures,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Edges as (u, v, label); label `None` marks a root edge.
fn first_cycle(nodes: usize, edges: &[(usize, usize, Option<usize>)]) -> Option<Vec<Option<usize>>> {
    let mut uf = UnionFind::new(nodes);
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (e, &(u, v, _)) in edges.iter().enumerate() {
        if !uf.union(u, v) {
            // Path u -> v through the forest built so far, then the closing edge.
            let mut prev = vec![None; nodes];
            let mut seen = vec![false; nodes];
            seen[u] = true;
            let mut q = VecDeque::from([u]);
            while let Some(a) = q.pop_front() {
                if a == v {
                    break;
                }
                for &(b, via) in &adj[a] {
                    if !seen[b] {
                        seen[b] = true;
                        prev[b] = Some((a, via));
                        q.push_back(b);
                    }
                }
            }
            let mut path = vec![edges[e].2];
            let mut cur = v;
            while let Some((p, via)) = prev[cur] {
                path.push(edges[via].2);
                cur = p;
            }
            return Some(path);
        }
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    None
}

fn plain_cycle(inst: &NetworkInstance, closed_idx: &[usize]) -> Option<Vec<usize>> {
    let edges: Vec<_> = closed_idx
        .iter()
        .map(|&k| {
            let (a, b) = inst.line_ends(k);
            (a, b, Some(k))
        })
        .collect();
    first_cycle(inst.num_buses(), &edges).map(|c| c.into_iter().flatten().collect())
}

/// First cycle in the closed lines plus virtual-root edges, as line indices.
///
/// When the closed count equals buses minus substations, `None` here is
/// equivalent to the topology being a radial forest. A returned cycle that
/// passes through the root joins two substations; root edges are omitted
/// from the result.
pub fn rooted_cycle(inst: &NetworkInstance, closed_idx: &[usize]) -> Option<Vec<usize>> {
    let n = inst.num_buses();
    let mut edges: Vec<(usize, usize, Option<usize>)> =
        inst.substation_buses().into_iter().map(|b| (n, b, None)).collect();
    edges.extend(closed_idx.iter().map(|&k| {
        let (a, b) = inst.line_ends(k);
        (a, b, Some(k))
    }));
    first_cycle(n + 1, &edges).map(|c| c.into_iter().flatten().collect())
}

/// Greedy spanning forest rooted at the substations: `order` lists line
/// indices by preference, and each line is kept when it joins two trees.
/// Returns the kept line indices, sorted.
pub fn spanning_forest(inst: &NetworkInstance, order: &[usize]) -> Vec<usize> {
    let n = inst.num_buses();
    let mut uf = UnionFind::new(n + 1);
    for b in inst.substation_buses() {
        uf.union(n, b);
    }
    let mut kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| {
            let (a, b) = inst.line_ends(k);
            uf.union(a, b)
        })
        .collect();
    kept.sort_unstable();
    kept
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error(
        "{count} switchable lines exceed the enumeration cap of {cap} (2^{count} subsets); raise the cap explicitly"
    )]
    CapExceeded { count: usize, cap: usize },
}

/// All radial configurations reachable by switching, ordered lexicographically
/// by their sorted closed-line ids.
pub fn enumerate_radial_topologies(inst: &NetworkInstance, cap: usize) -> Result<Vec<Topology>, TopologyError> {
    let switchable: Vec<usize> = (0..inst.lines.len()).filter(|&k| inst.lines[k].switchable).collect();
    if switchable.len() > cap {
        return Err(TopologyError::CapExceeded {
            count: switchable.len(),
            cap,
        });
    }
    let fixed: Vec<usize> = (0..inst.lines.len()).filter(|&k| !inst.lines[k].switchable).collect();
    let expected = inst.num_buses().saturating_sub(inst.substations.len());
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << switchable.len()) {
        if fixed.len() + mask.count_ones() as usize != expected {
            continue;
        }
        let mut closed = fixed.clone();
        closed.extend(
            switchable
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &k)| k),
        );
        if rooted_cycle(inst, &closed).is_none() {
            out.push(Topology::new(closed.iter().map(|&k| inst.lines[k].id)));
        }
    }
    out.sort_by(|a, b| a.closed_lines.iter().cmp(b.closed_lines.iter()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourRadiality {
    pub hour: usize,
    pub check: RadialityCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRadiality {
    pub pass: bool,
    pub hours: Vec<HourRadiality>,
}

impl ScheduleRadiality {
    pub fn failures(&self) -> impl Iterator<Item = &HourRadiality> {
        self.hours.iter().filter(|h| !h.check.radial)
    }
}

pub fn assert_schedule_radial(inst: &NetworkInstance, schedule: &DispatchSchedule) -> ScheduleRadiality {
    let hours: Vec<HourRadiality> = schedule
        .hours
        .iter()
        .map(|h| HourRadiality {
            hour: h.hour,
            check: is_radial_forest(inst, &Topology::new(h.closed_lines.iter().copied()).at_hour(h.hour)),
        })
        .collect();
    ScheduleRadiality {
        pass: hours.iter().all(|h| h.check.radial),
        hours,
    }
}
