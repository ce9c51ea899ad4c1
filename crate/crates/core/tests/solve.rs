mod common;

use gridflex_core::fixtures::ieee33;
use gridflex_core::model::{build_model, BessBinaries, Branching, SolverConfig};
use gridflex_core::network::{apply_ev_demand, Configuration, NetworkInstance};
use gridflex_core::schedule::{DispatchSchedule, HourDispatch};
use gridflex_core::solve::{
    big_m_probe, solve_by_enumeration, solve_case, solve_lp, CaseResult, CaseStatus, SolveError,
};
use gridflex_core::study::{reference_ev_profile, DEFAULT_SEED};
use gridflex_core::verify::verify_schedule;
use gridflex_milp::LpStatus;
use serde_json::json;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn hours(n: usize) -> SolverConfig {
    SolverConfig::default().with_horizon(n)
}

fn cost(r: &CaseResult) -> f64 {
    r.status
        .cost()
        .unwrap_or_else(|| panic!("expected a feasible case, got {:?}", r.status))
}

fn at_penetration(p: f64) -> NetworkInstance {
    let inst = ieee33();
    let profile = reference_ev_profile(&inst, DEFAULT_SEED).unwrap();
    apply_ev_demand(&inst, &profile, p).unwrap()
}

#[test]
fn one_bus_cost_is_load_times_price() {
    let inst = common::instance(&common::one_bus(2.5, 40.0));
    let r = solve_case(&inst, Configuration::SdntrDer.at(0.0), &SolverConfig::default()).unwrap();
    assert!(rel_close(cost(&r), 24.0 * 2.5 * 40.0, 1e-9));
    assert!(r.verification.unwrap().pass);
}

#[test]
fn sdn_at_zero_penetration_equals_the_lp_optimum() {
    let inst = ieee33();
    let cfg = SolverConfig::default();
    let r = solve_case(&inst, Configuration::Sdn.at(0.0), &cfg).unwrap();
    let lp = solve_lp(&build_model(&inst, Configuration::Sdn.at(0.0), &cfg).unwrap()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal);
    assert_eq!(r.stats.binaries, 0);
    assert!(
        rel_close(cost(&r), lp.objective, 1e-9),
        "{} vs {}",
        cost(&r),
        lp.objective
    );

    let e = solve_by_enumeration(&inst, Configuration::Sdn.at(0.0), &cfg).unwrap();
    assert!(rel_close(cost(&e), cost(&r), 1e-9));
}

#[test]
fn feasible_cases_verify_and_cost_matches_the_schedule() {
    let inst = ieee33();
    for config in Configuration::ALL {
        let r = solve_case(&inst, config.at(0.0), &hours(6)).unwrap();
        let schedule = r.schedule.as_ref().unwrap();
        let report = verify_schedule(&inst, schedule);
        assert!(report.pass, "{config}: {report}");
        assert!(rel_close(cost(&r), schedule.evaluate_cost(&inst), 1e-6), "{config}");
        assert_eq!(schedule.hours.len(), 6);
    }
}

#[test]
fn branch_and_bound_matches_enumeration_on_six_hours() {
    let inst = ieee33();
    let cfg = hours(6);
    let bnb = solve_case(&inst, Configuration::Sdntr.at(0.0), &cfg).unwrap();
    let oracle = solve_by_enumeration(&inst, Configuration::Sdntr.at(0.0), &cfg).unwrap();
    assert!(
        rel_close(cost(&bnb), cost(&oracle), 1e-6),
        "{} vs {}",
        cost(&bnb),
        cost(&oracle)
    );
    let pseudo = SolverConfig {
        branching: Branching::Pseudocost,
        ..cfg
    };
    let alt = solve_case(&inst, Configuration::Sdntr.at(0.0), &pseudo).unwrap();
    assert!(rel_close(cost(&alt), cost(&oracle), 1e-6));
}

#[test]
fn enumeration_refuses_storage() {
    let r = solve_by_enumeration(&ieee33(), Configuration::SdntrDer.at(0.0), &hours(2));
    assert!(matches!(r, Err(SolveError::BessPresent(4))), "{r:?}");
}

#[test]
fn overloaded_import_is_infeasible_for_both_solvers() {
    let mut doc = common::one_bus(2.0, 40.0);
    doc["substations"][0]["import_cap"] = json!(1.0);
    let inst = common::instance(&doc);
    let r = solve_case(&inst, Configuration::Sdn.at(0.0), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, CaseStatus::Infeasible);
    assert!(r.schedule.is_none());
    let e = solve_by_enumeration(&inst, Configuration::Sdntr.at(0.0), &SolverConfig::default()).unwrap();
    assert_eq!(e.status, CaseStatus::Infeasible);
}

#[test]
fn sdn_fails_first_as_penetration_rises() {
    let inst = at_penetration(0.7);
    let sdn = solve_case(&inst, Configuration::Sdn.at(0.7), &SolverConfig::default()).unwrap();
    assert_eq!(sdn.status, CaseStatus::Infeasible);
    let sdntr = solve_by_enumeration(&inst, Configuration::Sdntr.at(0.7), &SolverConfig::default()).unwrap();
    assert!(sdntr.status.cost().is_some(), "{:?}", sdntr.status);
}

#[test]
fn node_limit_reports_an_open_gap() {
    let cfg = SolverConfig {
        node_limit: 1,
        ..SolverConfig::default()
    };
    let r = solve_case(&ieee33(), Configuration::SdntrDer.at(0.0), &cfg).unwrap();
    match r.status {
        CaseStatus::LimitReached {
            incumbent_cost,
            best_bound,
        } => {
            if let Some(c) = incumbent_cost {
                assert!(best_bound <= c + 1e-6 * c.abs());
            }
        }
        other => panic!("expected LimitReached, got {other:?}"),
    }
}

#[test]
fn relaxed_storage_schedules_still_verify() {
    let inst = ieee33();
    let cfg = SolverConfig {
        bess_binaries: BessBinaries::Relaxed,
        ..hours(4)
    };
    let r = solve_case(&inst, Configuration::SdntrDer.at(0.0), &cfg).unwrap();
    let exact = solve_case(&inst, Configuration::SdntrDer.at(0.0), &hours(4)).unwrap();
    assert!(cost(&r) <= cost(&exact) * (1.0 + 1e-6));
    assert!(!r.schedule.as_ref().unwrap().exact_bess);
    assert!(r.verification.unwrap().pass);
}

#[test]
fn big_m_probe_holds_on_a_solved_schedule() {
    let inst = ieee33();
    let cfg = hours(3);
    let r = solve_case(&inst, Configuration::Sdntr.at(0.0), &cfg).unwrap();
    let probes = big_m_probe(&inst, Configuration::Sdntr.at(0.0), &cfg, r.schedule.as_ref().unwrap()).unwrap();
    assert_eq!(probes.len(), 3 * 12 * 2);
    for p in probes.iter().filter(|p| p.feasible) {
        assert!(p.worst <= 1e-6, "{p:?}");
    }
}

fn one_bus_with_storage() -> NetworkInstance {
    let mut doc = common::one_bus(10.0, 40.0);
    doc["bess_units"] = json!([{
        "id": 1, "bus": 1, "e_cap": 100.0, "soc_min": 0.0, "soc_max": 1.0,
        "t_chg": 1.0, "t_dchg": 1.0, "eta_chg": 0.95, "eta_dchg": 0.95, "e_init": 50.0
    }]);
    common::instance(&doc)
}

/// Charge 10 MW in hour 1, discharge back to the initial level in hour 2.
fn hand_schedule() -> DispatchSchedule {
    let discharge = 9.5 * 0.95;
    let hours = (1..=24)
        .map(|t| {
            let (c, d, e) = match t {
                1 => (10.0, 0.0, 59.5),
                2 => (0.0, discharge, 50.0),
                _ => (0.0, 0.0, 50.0),
            };
            HourDispatch {
                hour: t,
                imports: [(1, 10.0 + c - d)].into(),
                charge: [(1, c)].into(),
                discharge: [(1, d)].into(),
                soc: [(1, e)].into(),
                ..HourDispatch::default()
            }
        })
        .collect();
    DispatchSchedule {
        hours,
        e_final: [(1, 50.0)].into(),
        exact_bess: true,
        total_cost: 0.0,
    }
}

#[test]
fn soc_replay_follows_charging_efficiency() {
    let inst = one_bus_with_storage();
    let schedule = hand_schedule();
    let report = verify_schedule(&inst, &schedule);
    assert!(report.pass, "{report}");

    let mut wrong = schedule.clone();
    wrong.hours[0].soc.insert(1, 60.0);
    let report = verify_schedule(&inst, &wrong);
    let soc = report.check("soc_replay").unwrap();
    assert!(!soc.pass);
    assert!(soc.detail.as_deref().unwrap().contains("hour 1"), "{report}");

    let mut unbalanced_end = schedule;
    unbalanced_end.e_final.insert(1, 51.0);
    assert!(
        !verify_schedule(&inst, &unbalanced_end)
            .check("soc_replay")
            .unwrap()
            .pass
    );
}

#[test]
fn simultaneous_charge_and_discharge_fails_exclusivity() {
    let inst = one_bus_with_storage();
    let mut s = hand_schedule();
    s.hours[0].discharge.insert(1, 0.5);
    s.hours[0].imports.insert(1, 10.0 + 10.0 - 0.5);
    s.hours[0].soc.insert(1, 59.5 - 0.5 / 0.95);
    s.hours[1].soc.insert(1, 59.5 - 0.5 / 0.95 - 9.5);
    let report = verify_schedule(&inst, &s);
    assert!(!report.check("bess_exclusivity").unwrap().pass, "{report}");

    s.exact_bess = false;
    let relaxed = verify_schedule(&inst, &s);
    assert!(relaxed.check("bess_exclusivity").unwrap().pass);
    assert_eq!(relaxed.warnings.len(), 1, "{:?}", relaxed.warnings);
}

#[test]
fn flow_on_an_open_line_is_named() {
    let inst = ieee33();
    let r = solve_case(&inst, Configuration::Sdntr.at(0.0), &hours(3)).unwrap();
    let mut schedule = r.schedule.unwrap();
    let h2 = &mut schedule.hours[1];
    let open = inst.lines.iter().find(|l| !h2.closed_lines.contains(&l.id)).unwrap().id;
    h2.flows.insert(open, 0.1);
    let report = verify_schedule(&inst, &schedule);
    let flows = report.check("line_flows").unwrap();
    assert!(!flows.pass);
    let detail = flows.detail.as_deref().unwrap();
    assert!(detail.contains(&format!("line {open} hour 2")), "{detail}");
}

/// Fixture costs at zero penetration, recorded as regression baselines.
#[test]
fn fixture_cost_baselines() {
    let inst = ieee33();
    let baselines = [
        (Configuration::Sdn, 3274.4935),
        (Configuration::Sdntr, 3056.01475),
        (Configuration::SdnDer, 2720.092929013159),
        (Configuration::SdntrDer, 2492.0799409868423),
    ];
    for (config, want) in baselines {
        let r = solve_case(&inst, config.at(0.0), &SolverConfig::default()).unwrap();
        assert!(rel_close(cost(&r), want, 1e-6), "{config}: {} vs {want}", cost(&r));
    }
}
