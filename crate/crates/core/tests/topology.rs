mod common;

use std::collections::BTreeSet;

use gridflex_core::fixtures::ieee33;
use gridflex_core::model::SolverConfig;
use gridflex_core::network::{Configuration, NetworkInstance};
use gridflex_core::schedule::DispatchSchedule;
use gridflex_core::solve::solve_case;
use gridflex_core::topology::{
    assert_schedule_radial, enumerate_radial_topologies, is_radial_forest, RadialityFailure, Topology, TopologyError,
    DEFAULT_ENUMERATION_CAP,
};
use proptest::prelude::*;

/// Union-find written independently of the crate's own.
struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        self.0[x] = r;
        r
    }
    /// False when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

struct Reference {
    count_ok: bool,
    acyclic: bool,
    /// Every bus shares a tree with at least one substation.
    covered: bool,
    one_substation_per_tree: bool,
}

fn reference_check(inst: &NetworkInstance, closed: &BTreeSet<u32>) -> Reference {
    let n = inst.buses.len();
    let mut dsu = Dsu::new(n);
    let mut acyclic = true;
    for l in inst.lines.iter().filter(|l| closed.contains(&l.id)) {
        acyclic &= dsu.union(inst.bus_idx(l.from_bus).unwrap(), inst.bus_idx(l.to_bus).unwrap());
    }
    let mut subs_in_tree = vec![0usize; n];
    for s in &inst.substations {
        let root = dsu.find(inst.bus_idx(s.bus).unwrap());
        subs_in_tree[root] += 1;
    }
    let roots: Vec<usize> = (0..n).map(|b| dsu.find(b)).collect();
    Reference {
        count_ok: closed.len() + inst.substations.len() == n,
        acyclic,
        covered: roots.iter().all(|&r| subs_in_tree[r] > 0),
        one_substation_per_tree: roots.iter().all(|&r| subs_in_tree[r] == 1),
    }
}

fn failures(inst: &NetworkInstance, topo: &Topology) -> Vec<RadialityFailure> {
    is_radial_forest(inst, topo).failures
}

#[test]
fn all_original_lines_closed_fails_the_count() {
    let inst = ieee33();
    let check = is_radial_forest(&inst, &Topology::new(1..=32));
    assert!(!check.radial);
    assert!(
        check.failures.contains(&RadialityFailure::Count {
            closed: 32,
            expected: 31
        }),
        "{check}"
    );
}

#[test]
fn opening_one_path_line_gives_two_rooted_trees() {
    let inst = ieee33();
    let topo = Topology::new((1..=32).filter(|&k| k != 25));
    let check = is_radial_forest(&inst, &topo);
    assert!(check.radial, "{check}");
}

#[test]
fn fixture_base_topology_is_radial() {
    let inst = ieee33();
    assert!(is_radial_forest(&inst, &Topology::base(&inst)).radial);
}

#[test]
fn single_bus_with_no_lines_is_radial() {
    let inst = common::instance(&common::one_bus(1.0, 30.0));
    assert!(is_radial_forest(&inst, &Topology::new([])).radial);
}

#[test]
fn diagnostics_name_the_failed_condition() {
    // Triangle 1-2-3 plus a pendant bus 4, substation at 1.
    let lines = [
        (1, 1, 2, true, true),
        (2, 2, 3, true, true),
        (3, 3, 1, true, true),
        (4, 3, 4, true, true),
    ];
    let inst = common::instance(&common::graph(4, &lines, &[1], 0.1));
    let cyc = failures(&inst, &Topology::new([1, 2, 3]));
    assert!(
        cyc.iter()
            .any(|f| matches!(f, RadialityFailure::Cycle { lines } if lines.len() == 3)),
        "{cyc:?}"
    );
    let unserved = failures(&inst, &Topology::new([1, 2]));
    assert!(
        unserved
            .iter()
            .any(|f| matches!(f, RadialityFailure::Unserved { buses } if buses == &[4])),
        "{unserved:?}"
    );
    let unknown = failures(&inst, &Topology::new([1, 2, 9]));
    assert!(
        unknown.contains(&RadialityFailure::UnknownLine { line: 9 }),
        "{unknown:?}"
    );

    let two_subs = common::instance(&common::graph(
        3,
        &[(1, 1, 2, false, true), (2, 2, 3, false, true)],
        &[1, 3],
        0.1,
    ));
    let shared = failures(&two_subs, &Topology::new([1, 2]));
    assert!(
        shared.iter().any(|f| matches!(f, RadialityFailure::SharedTree { .. })),
        "{shared:?}"
    );
    let fixed_open = failures(&two_subs, &Topology::new([1]));
    assert!(
        fixed_open.contains(&RadialityFailure::FixedLineOpen { line: 2 }),
        "{fixed_open:?}"
    );
}

#[test]
fn enumeration_without_switches_returns_the_base_or_nothing() {
    let path = common::instance(&common::graph(
        3,
        &[(1, 1, 2, false, true), (2, 2, 3, false, true)],
        &[1],
        0.1,
    ));
    assert_eq!(
        enumerate_radial_topologies(&path, DEFAULT_ENUMERATION_CAP).unwrap(),
        vec![Topology::new([1, 2])]
    );
    let triangle = [(1, 1, 2, false, true), (2, 2, 3, false, true), (3, 3, 1, false, true)];
    let ring = common::instance(&common::graph(3, &triangle, &[1], 0.1));
    assert!(enumerate_radial_topologies(&ring, DEFAULT_ENUMERATION_CAP)
        .unwrap()
        .is_empty());
}

#[test]
fn enumeration_refuses_above_the_cap() {
    assert_eq!(
        enumerate_radial_topologies(&ieee33(), 5),
        Err(TopologyError::CapExceeded { count: 12, cap: 5 })
    );
}

#[test]
fn fixture_enumeration_matches_brute_force() {
    let inst = ieee33();
    let got = enumerate_radial_topologies(&inst, DEFAULT_ENUMERATION_CAP).unwrap();
    let fixed: Vec<u32> = inst.lines.iter().filter(|l| !l.switchable).map(|l| l.id).collect();
    let switchable: Vec<u32> = inst.lines.iter().filter(|l| l.switchable).map(|l| l.id).collect();
    let mut expected: Vec<BTreeSet<u32>> = Vec::new();
    for mask in 0u32..1 << switchable.len() {
        let mut closed: BTreeSet<u32> = fixed.iter().copied().collect();
        closed.extend(
            (0..switchable.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| switchable[i]),
        );
        let r = reference_check(&inst, &closed);
        if r.count_ok && r.acyclic && r.one_substation_per_tree {
            expected.push(closed);
        }
    }
    expected.sort_by(|a, b| a.iter().cmp(b.iter()));
    let got_sets: Vec<BTreeSet<u32>> = got.iter().map(|t| t.closed_lines.clone()).collect();
    assert_eq!(got_sets, expected);
    assert!(got.len() > 1);
    let expected_count = inst.buses.len() - inst.substations.len();
    for t in &got {
        assert!(is_radial_forest(&inst, t).radial);
        assert_eq!(t.closed_lines.len(), expected_count);
    }
}

/// Random graph on up to 7 buses, every line switchable, with a random
/// closed subset and one or two substations on distinct buses.
fn random_case() -> impl Strategy<Value = (NetworkInstance, BTreeSet<u32>)> {
    (1u32..=7)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(((1..=n, 1..=n), any::<bool>()), 0..10),
                prop::sample::subsequence((1..=n).collect::<Vec<_>>(), 1..=(n as usize).min(2)),
            )
        })
        .prop_map(|(n, mut edges, subs)| {
            edges.retain(|((a, b), _)| a != b);
            let lines: Vec<(u32, u32, u32, bool, bool)> = edges
                .iter()
                .enumerate()
                .map(|(i, &((a, b), _))| (i as u32 + 1, a, b, true, true))
                .collect();
            let closed = edges
                .iter()
                .enumerate()
                .filter(|(_, (_, c))| *c)
                .map(|(i, _)| i as u32 + 1)
                .collect();
            (common::instance(&common::graph(n, &lines, &subs, 0.1)), closed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn radial_forest_agrees_with_union_find((inst, closed) in random_case()) {
        let r = reference_check(&inst, &closed);
        let check = is_radial_forest(&inst, &Topology::new(closed.iter().copied()));
        prop_assert_eq!(check.radial, r.count_ok && r.acyclic && r.one_substation_per_tree, "{}", check);
        if r.count_ok && r.acyclic && r.covered {
            prop_assert!(r.one_substation_per_tree);
        }
    }
}

fn solved_schedule(hours: usize) -> (NetworkInstance, DispatchSchedule) {
    let inst = ieee33();
    let cfg = SolverConfig::default().with_horizon(hours);
    let r = solve_case(&inst, Configuration::Sdntr.at(0.0), &cfg).unwrap();
    (inst, r.schedule.expect("fixture SDNTR is feasible at zero penetration"))
}

#[test]
fn solver_schedules_are_radial_every_hour() {
    let (inst, schedule) = solved_schedule(6);
    let report = assert_schedule_radial(&inst, &schedule);
    assert!(report.pass);
    assert_eq!(report.hours.len(), 6);
}

#[test]
fn closing_a_tie_in_one_hour_is_reported_for_that_hour() {
    let (inst, mut schedule) = solved_schedule(6);
    let h5 = schedule.hours.iter_mut().find(|h| h.hour == 5).unwrap();
    let mut dsu = Dsu::new(inst.buses.len());
    let ends = |id: u32| inst.line_ends(inst.line_by_id(id).unwrap());
    for &id in &h5.closed_lines {
        let (a, b) = ends(id);
        dsu.union(a, b);
    }
    let tie = inst
        .lines
        .iter()
        .filter(|l| l.switchable && !h5.closed_lines.contains(&l.id))
        .map(|l| l.id)
        .find(|&id| {
            let (a, b) = ends(id);
            dsu.find(a) == dsu.find(b)
        })
        .expect("some open line closes a loop");
    h5.closed_lines.push(tie);
    let report = assert_schedule_radial(&inst, &schedule);
    assert!(!report.pass);
    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].hour, 5);
    assert!(
        failed[0]
            .check
            .failures
            .iter()
            .any(|f| matches!(f, RadialityFailure::Cycle { lines } if lines.contains(&tie))),
        "{}",
        failed[0].check
    );
}

#[test]
fn empty_schedule_on_one_bus_passes() {
    let inst = common::instance(&common::one_bus(1.0, 30.0));
    let cfg = SolverConfig::default();
    let r = solve_case(&inst, Configuration::Sdntr.at(0.0), &cfg).unwrap();
    let schedule = r.schedule.unwrap();
    assert!(schedule.hours.iter().all(|h| h.closed_lines.is_empty()));
    assert!(assert_schedule_radial(&inst, &schedule).pass);
}
