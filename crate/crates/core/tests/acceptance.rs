//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#[path = "../../milp/tests/support/vertex_oracle.rs"]
mod vertex_oracle;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gridflex_core::ev::{fit_pipeline, simulate_profile, ClassLabel, PipelineSpec};
use gridflex_core::fixtures::ieee33;
use gridflex_core::model::{build_model, SolverConfig};
use gridflex_core::network::{apply_ev_demand, Configuration, NetworkInstance};
use gridflex_core::solve::{big_m_probe, export_mps, solve_by_enumeration, solve_case, CaseResult};
use gridflex_core::study::{
    reference_ev_profile, CellSummary, SweepReport, DEFAULT_DESIGNATED_LINE, DEFAULT_PENETRATIONS, DEFAULT_SEED,
};
use gridflex_core::verify::verify_schedule;
use gridflex_milp::mps::read_mps;
use gridflex_milp::{solve_lp, LpStatus, VarKind};
use vertex_oracle::{random_lp, vertex_enumeration, OracleResult};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Instance with the reference EV profile applied at `p`.
struct Study {
    base: NetworkInstance,
    profile: gridflex_core::ev::EvDemandProfile,
}

impl Study {
    fn new() -> Study {
        let base = ieee33();
        let profile = reference_ev_profile(&base, DEFAULT_SEED).expect("reference EV profile");
        Study { base, profile }
    }

    fn at(&self, p: f64) -> NetworkInstance {
        apply_ev_demand(&self.base, &self.profile, p).expect("EV profile buses exist")
    }
}

fn lp_oracle() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut mismatches = Vec::new();
    for seed in 0..200u64 {
        let p = random_lp(seed);
        let got = match solve_lp(&p) {
            Ok(s) => s,
            Err(e) => {
                mismatches.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        match vertex_enumeration(&p) {
            OracleResult::Optimal { objective, .. } => {
                let d = (got.objective - objective).abs();
                worst = worst.max(d);
                if got.status != LpStatus::Optimal || d > 1e-8 {
                    mismatches.push(format!("seed {seed}: {} {} vs {objective}", got.status, got.objective));
                }
            }
            OracleResult::Infeasible if got.status != LpStatus::Infeasible => {
                mismatches.push(format!("seed {seed}: {} vs infeasible", got.status));
            }
            OracleResult::Infeasible => {}
        }
    }
    let elapsed = started.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "200 LPs, worst |diff| {worst:.1e}, {} mismatches, {:.2} s{}",
            mismatches.len(),
            elapsed.as_secs_f64(),
            mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    )
}

fn milp_oracle(study: &Study, feasible_runs: &mut Vec<(NetworkInstance, CaseResult)>) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut slowest = Duration::ZERO;
    for p in [0.0, 0.4] {
        let inst = study.at(p);
        for horizon in [6, 12, 24] {
            let cfg = SolverConfig::default().with_horizon(horizon);
            for config in [Configuration::Sdn, Configuration::Sdntr] {
                let t0 = Instant::now();
                let bnb = solve_case(&inst, config.at(p), &cfg);
                let elapsed = t0.elapsed();
                slowest = slowest.max(elapsed);
                let oracle = solve_by_enumeration(&inst, config.at(p), &cfg);
                match (&bnb, &oracle) {
                    (Ok(b), Ok(o)) => match (b.status.cost(), o.status.cost()) {
                        (Some(cb), Some(co)) => {
                            let d = rel_diff(cb, co);
                            if d > 1e-6 || elapsed > Duration::from_secs(120) {
                                pass = false;
                                lines.push(format!("{config} p={p} {horizon}h: {cb} vs {co} ({:.1?})", elapsed));
                            }
                        }
                        (cb, co) => {
                            pass = false;
                            lines.push(format!("{config} p={p} {horizon}h: {cb:?} vs {co:?}"));
                        }
                    },
                    _ => {
                        pass = false;
                        lines.push(format!("{config} p={p} {horizon}h: {bnb:?} / {oracle:?}"));
                    }
                }
                if let Ok(b) = bnb {
                    if b.schedule.is_some() {
                        feasible_runs.push((inst.clone(), b));
                    }
                }
            }
        }
    }
    outcome(
        pass,
        format!(
            "SDN and SDNTR at p in {{0, 0.4}} x {{6, 12, 24}} h, slowest run {:.2} s{}",
            slowest.as_secs_f64(),
            if lines.is_empty() {
                String::new()
            } else {
                format!("; {}", lines.join("; "))
            }
        ),
    )
}

fn run_sweep(study: &Study, feasible_runs: &mut Vec<(NetworkInstance, CaseResult)>) -> SweepReport {
    let cfg = SolverConfig::default();
    let mut cells = Vec::new();
    for p in DEFAULT_PENETRATIONS {
        let inst = study.at(p);
        for config in Configuration::ALL {
            match solve_case(&inst, config.at(p), &cfg) {
                Ok(r) => {
                    cells.push(CellSummary::new(config, p, &r, DEFAULT_DESIGNATED_LINE));
                    if r.schedule.is_some() {
                        feasible_runs.push((inst.clone(), r));
                    }
                }
                Err(e) => cells.push(CellSummary::failed(config, p, e)),
            }
        }
    }
    SweepReport::new(
        DEFAULT_PENETRATIONS.to_vec(),
        DEFAULT_SEED,
        cells,
        DEFAULT_DESIGNATED_LINE,
    )
}

fn schedule_validity(runs: &[(NetworkInstance, CaseResult)]) -> Outcome {
    let mut failures = Vec::new();
    for (inst, r) in runs {
        let schedule = r.schedule.as_ref().expect("feasible runs carry schedules");
        let report = verify_schedule(inst, schedule);
        let cost = r.status.cost().unwrap_or(f64::NAN);
        if !report.pass || rel_diff(cost, schedule.evaluate_cost(inst)) > 1e-6 {
            failures.push(format!("{} p={}: {report}", r.case.configuration(), r.case.penetration));
        }
    }
    outcome(
        failures.is_empty() && !runs.is_empty(),
        format!(
            "{} feasible schedules replayed, {} failed{}",
            runs.len(),
            failures.len(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn sweep_table(report: &SweepReport) -> String {
    let mut rows = Vec::new();
    for &p in &report.levels {
        let entries: Vec<String> = Configuration::ALL
            .iter()
            .map(|&c| match report.cell(c, p).and_then(|cell| cell.cost_usd) {
                Some(v) => format!("{c} {v:.3}"),
                None => format!("{c} {:?}", report.cell(c, p).map(|cell| cell.status)),
            })
            .collect();
        rows.push(format!("p={p}: {}", entries.join(", ")));
    }
    rows.join(" | ")
}

fn cost_orderings(report: &SweepReport) -> Outcome {
    let feasible = report.cells.iter().filter(|c| c.cost_usd.is_some()).count();
    let complete = report.cells.iter().all(|c| c.error.is_none());
    outcome(
        report.orderings.is_empty() && complete && feasible > 0,
        format!(
            "{feasible} feasible cells, {} violations{}",
            report.orderings.len(),
            report
                .orderings
                .first()
                .map(|v| format!("; first: {}", v.message))
                .unwrap_or_default()
        ),
    )
}

fn frontier_pattern(report: &SweepReport) -> Outcome {
    let f = &report.frontier;
    let show = |c: Configuration| match f.first_infeasible.get(&c).copied().flatten() {
        Some(p) => format!("{c} {p}"),
        None => format!("{c} never"),
    };
    outcome(
        f.pattern_holds,
        format!("first infeasible level: {}", Configuration::ALL.map(show).join(", ")),
    )
}

fn adaptivity(report: &SweepReport) -> Outcome {
    let a = &report.adaptivity;
    outcome(
        a.holds,
        format!(
            "line {} under {}: open at p={:?} and closed at p={:?} in late hours {:?}",
            a.line, a.configuration, a.low, a.high, a.hours
        ),
    )
}

fn ev_statistics(study: &Study) -> Outcome {
    let started = Instant::now();
    let fleet_spec = PipelineSpec {
        fleet: BTreeMap::from([(ClassLabel::Low, 24), (ClassLabel::Normal, 61), (ClassLabel::High, 15)]),
        days: 100,
        ..PipelineSpec::default()
    };
    let weights = &study.base.ev_allocation;
    let run = || -> Result<_, gridflex_core::ev::EvError> {
        let fitted = fit_pipeline(&fleet_spec, DEFAULT_SEED)?;
        let out = simulate_profile(&fleet_spec, &fitted, weights, DEFAULT_SEED)?;
        Ok((fitted, out))
    };
    let (fitted, a) = match run() {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let (_, b) = run().expect("second run repeats the first");
    let s = &a.stats;
    let fraction_ok = s.ev_days == 10_000 && (0.885..=0.915).contains(&s.charging_day_fraction);
    let events = a.simulation.events.len().max(1) as f64;
    let recovered = s.sampled_energy_kwh / events;
    let truth = fitted.corpus.truth.energy_mean_kwh;
    let energy_err = (recovered / truth - 1.0).abs();
    let conservation = (s.profile_energy_kwh / s.sampled_energy_kwh - 1.0).abs();
    let identical = a.profile.to_csv() == b.profile.to_csv()
        && serde_json::to_string(&a.stats).ok() == serde_json::to_string(&b.stats).ok()
        && serde_json::to_string(&a.provenance).ok() == serde_json::to_string(&b.provenance).ok();
    let elapsed = started.elapsed();
    outcome(
        fraction_ok && energy_err <= 0.05 && conservation <= 1e-3 && identical && elapsed < Duration::from_secs(60),
        format!(
            "{} EV-days, charging fraction {:.4}; mean event energy {recovered:.3} vs ground truth {truth:.3} kWh ({:.2}%); \
             profile energy off by {:.2e}; reruns identical: {identical}; {:.2} s",
            s.ev_days,
            s.charging_day_fraction,
            100.0 * energy_err,
            conservation,
            elapsed.as_secs_f64()
        ),
    )
}

fn big_m(study: &Study) -> Outcome {
    let inst = study.at(0.0);
    let cfg = SolverConfig::default();
    let case = Configuration::SdntrDer.at(0.0);
    let schedule = match solve_case(&inst, case, &cfg) {
        Ok(CaseResult { schedule: Some(s), .. }) => s,
        other => return outcome(false, format!("no schedule to probe: {other:?}")),
    };
    let probes = match big_m_probe(&inst, case, &cfg, &schedule) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("probe failed: {e}")),
    };
    let measured: Vec<_> = probes.iter().filter(|p| p.feasible).collect();
    let worst = measured.iter().map(|p| p.worst).fold(0.0, f64::max);
    let lines = probes
        .iter()
        .map(|p| p.line)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let hours = schedule.hours.len();
    outcome(
        worst <= 1e-6 && !measured.is_empty() && hours == 24,
        format!(
            "{} probes over {lines} switchable lines x {hours} h, {} with a feasible point, worst residual {worst:.1e}",
            probes.len(),
            measured.len()
        ),
    )
}

fn mps_round_trip() -> Outcome {
    let mp = match build_model(&ieee33(), Configuration::SdntrDer.at(0.0), &SolverConfig::default()) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("model failed: {e}")),
    };
    let text = export_mps(&mp);
    let back = match read_mps(&text) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("parse failed: {e}")),
    };
    let original = &mp.problem;
    let canonical = original.canonical();
    // The model has no repeated or zero coefficients, so canonical form only reorders.
    let nnz = |p: &gridflex_milp::Problem| p.constraints.iter().map(|c| c.coeffs.len()).sum::<usize>();
    let ints = |p: &gridflex_milp::Problem| p.variables.iter().filter(|v| v.kind == VarKind::Binary).count();
    let pass = back == canonical && nnz(&back) == nnz(original) && ints(&back) == ints(original);
    outcome(
        pass,
        format!(
            "{} rows, {} columns, {} nonzeros, {} binaries reproduced exactly: {pass}",
            back.constraints.len(),
            back.variables.len(),
            nnz(&back),
            ints(&back)
        ),
    )
}

fn main() -> ExitCode {
    let study = Study::new();
    let mut feasible_runs = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let mut record = |name: &'static str, o: Outcome| {
        println!("{} [{name}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    record("1 lp-oracle", lp_oracle());
    record("2 milp-oracle", milp_oracle(&study, &mut feasible_runs));
    let sweep = run_sweep(&study, &mut feasible_runs);
    eprintln!("sweep: {}", sweep_table(&sweep));
    record("3 schedule-validity", schedule_validity(&feasible_runs));
    record("4 cost-orderings", cost_orderings(&sweep));
    record("5 feasibility-frontier", frontier_pattern(&sweep));
    record("6 switching-adaptivity", adaptivity(&sweep));
    record("7 ev-statistics", ev_statistics(&study));
    record("8 big-m-soundness", big_m(&study));
    record("9 mps-round-trip", mps_round_trip());

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
