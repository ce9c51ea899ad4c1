//! The validate, solve and sweep commands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gridflex_core::fixtures;
use gridflex_core::model::{build_model, SolverConfig};
use gridflex_core::network::{
    load_instance, read_ev_csv, validate_instance, CaseConfig, Configuration, NetworkInstance, Profile,
};
use gridflex_core::schedule::DispatchSchedule;
use gridflex_core::solve::{
    export_mps, solve_by_enumeration, solve_case, CaseResult, CaseStatus, SolveError, SolveStats,
};
use gridflex_core::study::{reference_ev_profile, CellStatus, CellSummary, SweepReport};
use gridflex_core::verify::VerificationReport;
use serde::Serialize;

use crate::output::{json_string, write_atomic, write_csv, write_json};
use crate::{InputArgs, SolveArgs, SolverKind, SweepArgs};

const EXIT_INVALID: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;
const EXIT_ORDERING: u8 = 5;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn validate(path: &Path) -> Result<u8> {
    let text = read(path)?;
    let inst = match load_instance(&text) {
        Ok(inst) => inst,
        Err(e) => {
            println!("{e}");
            return Ok(EXIT_INVALID);
        }
    };
    let report = validate_instance(&inst);
    print!("{report}");
    Ok(if report.is_valid() { 0 } else { EXIT_INVALID })
}

/// Inputs shared by every case of a run.
struct Inputs {
    instance: NetworkInstance,
    /// 100%-penetration EV demand per bus.
    ev_reference: BTreeMap<u32, Profile>,
    instance_label: String,
    ev_label: String,
    seed: u64,
}

impl Inputs {
    fn load(args: &InputArgs) -> Result<Inputs> {
        let (instance, instance_label) = match &args.instance {
            Some(p) => {
                let inst = load_instance(&read(p)?).with_context(|| format!("loading {}", p.display()))?;
                (inst, p.display().to_string())
            }
            None => (fixtures::ieee33(), "bundled:ieee33".to_string()),
        };
        let report = validate_instance(&instance);
        if !report.is_valid() {
            bail!("invalid instance:\n{report}");
        }
        let (ev_reference, ev_label) = match &args.ev_profile {
            Some(p) => (
                read_ev_csv(&read(p)?).with_context(|| format!("loading {}", p.display()))?,
                p.display().to_string(),
            ),
            None if instance.ev_allocation.is_empty() => (BTreeMap::new(), "none".to_string()),
            None => (
                reference_ev_profile(&instance, args.seed)?.demand,
                format!("generated:seed={}", args.seed),
            ),
        };
        Ok(Inputs {
            instance,
            ev_reference,
            instance_label,
            ev_label,
            seed: args.seed,
        })
    }

    fn at(&self, penetration: f64) -> Result<NetworkInstance> {
        Ok(self.instance.with_ev_demand(&self.ev_reference, penetration)?)
    }

    fn manifest(&self, case: CaseConfig, solver: SolverKind, cfg: &SolverConfig) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            instance: self.instance_label.clone(),
            ev_profile: self.ev_label.clone(),
            seed: self.seed,
            configuration: case.configuration(),
            penetration: case.penetration,
            solver,
            solver_config: cfg.clone(),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
struct RunManifest {
    tool_version: &'static str,
    instance: String,
    ev_profile: String,
    seed: u64,
    configuration: Configuration,
    penetration: f64,
    solver: SolverKind,
    solver_config: SolverConfig,
}

#[derive(Debug, Serialize)]
struct RunResults {
    status: &'static str,
    cost_usd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    incumbent_cost_usd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_bound: Option<f64>,
    /// (incumbent - bound) / |incumbent| when a limit stopped the search.
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    schedule: Option<DispatchSchedule>,
    verification: Option<VerificationReport>,
    stats: SolveStats,
    manifest: RunManifest,
}

impl RunResults {
    fn new(outcome: &Result<CaseResult, SolveError>, manifest: RunManifest) -> RunResults {
        let mut out = RunResults {
            status: "error",
            cost_usd: None,
            incumbent_cost_usd: None,
            best_bound: None,
            relative_gap: None,
            error: None,
            schedule: None,
            verification: None,
            stats: SolveStats::default(),
            manifest,
        };
        let r = match outcome {
            Ok(r) => r,
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        };
        out.status = r.status.label();
        out.schedule = r.schedule.clone();
        out.verification = r.verification.clone();
        out.stats = r.stats.clone();
        match r.status {
            CaseStatus::Feasible { cost_usd } => out.cost_usd = Some(cost_usd),
            CaseStatus::Infeasible => {}
            CaseStatus::LimitReached {
                incumbent_cost,
                best_bound,
            } => {
                out.incumbent_cost_usd = incumbent_cost;
                out.best_bound = Some(best_bound);
                out.relative_gap = incumbent_cost.map(|c| (c - best_bound).max(0.0) / c.abs().max(1e-12));
            }
        }
        out
    }
}

fn solve_one(
    inst: &NetworkInstance,
    case: CaseConfig,
    solver: SolverKind,
    cfg: &SolverConfig,
) -> Result<CaseResult, SolveError> {
    match solver {
        SolverKind::Bnb => solve_case(inst, case, cfg),
        SolverKind::Enum => solve_by_enumeration(inst, case, cfg),
    }
}

fn exit_code(status: &CaseStatus) -> u8 {
    match status {
        CaseStatus::Feasible { .. } => 0,
        CaseStatus::Infeasible => EXIT_INFEASIBLE,
        CaseStatus::LimitReached { .. } => EXIT_LIMIT,
    }
}

pub fn solve(args: &SolveArgs) -> Result<u8> {
    let inputs = Inputs::load(&args.input)?;
    let cfg = args.solver.config();
    let case = args.config.at(args.penetration);
    let inst = inputs.at(args.penetration)?;
    if let Some(path) = &args.export_mps {
        let mp = build_model(&inst, case, &cfg)?;
        write_atomic(path, export_mps(&mp).as_bytes())?;
    }
    let outcome = solve_one(&inst, case, args.solver.solver, &cfg);
    let code = match &outcome {
        Ok(r) => exit_code(&r.status),
        Err(e) => bail!("{} at penetration {}: {e}", case.configuration(), case.penetration),
    };
    let results = RunResults::new(&outcome, inputs.manifest(case, args.solver.solver, &cfg));
    match &args.out {
        Some(path) => write_json(path, &results)?,
        None => std::io::stdout().write_all(json_string(&results)?.as_bytes())?,
    }
    let summary = match (&results.cost_usd, &results.incumbent_cost_usd) {
        (Some(c), _) => format!("{}: {} cost {c:.3}", case.configuration(), results.status),
        (None, Some(c)) => format!(
            "{}: {} incumbent {c:.3}, bound {:.3}",
            case.configuration(),
            results.status,
            results.best_bound.unwrap_or(f64::NEG_INFINITY)
        ),
        _ => format!("{}: {}", case.configuration(), results.status),
    };
    eprintln!("{summary}");
    Ok(code)
}

/// File name for one sweep cell.
pub fn cell_file(configuration: Configuration, penetration: f64) -> String {
    format!("{}_p{penetration}.json", configuration.to_string().to_lowercase())
}

#[derive(Serialize)]
struct PlotRow {
    configuration: Configuration,
    penetration: f64,
    cost_usd: Option<f64>,
    status: CellStatus,
}

#[derive(Serialize)]
struct TimingRow {
    configuration: Configuration,
    penetration: f64,
    wall_ms: u64,
    nodes: usize,
}

fn matrix_entry(cell: Option<&CellSummary>) -> String {
    match cell {
        Some(CellSummary { cost_usd: Some(c), .. }) => format!("{c:.3}"),
        Some(c) => serde_json::to_value(c.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        None => String::new(),
    }
}

pub fn sweep(args: &SweepArgs) -> Result<u8> {
    let inputs = Inputs::load(&args.input)?;
    let cfg = args.solver.config();
    let solver = args.solver.solver;
    let out = &args.out;
    let mut cells = Vec::new();
    for &p in &args.penetrations {
        let inst = inputs.at(p)?;
        for configuration in Configuration::ALL {
            let case = configuration.at(p);
            let outcome = solve_one(&inst, case, solver, &cfg);
            let results = RunResults::new(&outcome, inputs.manifest(case, solver, &cfg));
            write_json(&out.join("cells").join(cell_file(configuration, p)), &results)?;
            let cell = match &outcome {
                Ok(r) => CellSummary::new(configuration, p, r, args.line),
                Err(e) => CellSummary::failed(configuration, p, e),
            };
            eprintln!(
                "p={p} {configuration}: {} {}",
                results.status,
                cell.cost_usd.map(|c| format!("{c:.3}")).unwrap_or_default()
            );
            cells.push(cell);
        }
    }
    let report = SweepReport::new(args.penetrations.clone(), inputs.seed, cells, args.line);

    write_json(&out.join("sweep.json"), &report)?;
    let mut header = vec!["penetration".to_string()];
    header.extend(Configuration::ALL.iter().map(|c| c.to_string()));
    let rows = report.levels.iter().map(|&p| {
        let mut row = vec![p.to_string()];
        row.extend(Configuration::ALL.iter().map(|&c| matrix_entry(report.cell(c, p))));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("sweep.csv"), Some(&header), rows)?;
    write_csv(
        &out.join("sweep_plot.csv"),
        None,
        report.cells.iter().map(|c| PlotRow {
            configuration: c.configuration,
            penetration: c.penetration,
            cost_usd: c.cost_usd,
            status: c.status,
        }),
    )?;
    write_csv(
        &out.join("sweep_timings.csv"),
        None,
        report.cells.iter().map(|c| TimingRow {
            configuration: c.configuration,
            penetration: c.penetration,
            wall_ms: c.wall_ms,
            nodes: c.nodes,
        }),
    )?;

    let violations = out.join("ordering_violations.json");
    if report.orderings.is_empty() {
        if violations.exists() {
            fs::remove_file(&violations).with_context(|| format!("removing stale {}", violations.display()))?;
        }
        Ok(0)
    } else {
        write_json(&violations, &report.orderings)?;
        for v in &report.orderings {
            eprintln!("ordering violation at p={}: {}", v.penetration, v.message);
        }
        Ok(EXIT_ORDERING)
    }
}
