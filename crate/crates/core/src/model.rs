//! MILP formulation of the multi-period dispatch and switching problem.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use gridflex_milp::{Constraint, Problem, Relation, Variable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{validate_instance, CaseConfig, NetworkInstance, ValidationReport, HORIZON};
use crate::schedule::{DispatchSchedule, HourDispatch};
use crate::topology::{is_radial_forest, RadialityCheck, Topology, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BessBinaries {
    #[default]
    Exact,
    Relaxed,
}

impl FromStr for BessBinaries {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(BessBinaries::Exact),
            "relaxed" => Ok(BessBinaries::Relaxed),
            other => Err(format!("expected exact or relaxed, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    #[default]
    MostFractional,
    Pseudocost,
}

impl FromStr for Branching {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "most-fractional" => Ok(Branching::MostFractional),
            "pseudocost" => Ok(Branching::Pseudocost),
            other => Err(format!("expected most-fractional or pseudocost, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Replaces the per-line big-M when set.
    pub big_m: Option<f64>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub bess_binaries: BessBinaries,
    pub node_limit: usize,
    pub branching: Branching,
    pub time_limit_ms: Option<u64>,
    /// Hours 1..=horizon are modelled.
    pub horizon: usize,
    pub enumeration_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            big_m: None,
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            bess_binaries: BessBinaries::Exact,
            node_limit: 200_000,
            branching: Branching::MostFractional,
            time_limit_ms: None,
            horizon: HORIZON,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverConfig {
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if !(self.feasibility_tol > 0.0 && self.integrality_tol > 0.0) {
            return Err(ModelError::Config("tolerances must be positive".into()));
        }
        if let Some(m) = self.big_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ModelError::Config(format!("big_M must be positive, got {m}")));
            }
        }
        if !(1..=HORIZON).contains(&self.horizon) {
            return Err(ModelError::Config(format!("horizon {} outside 1..=24", self.horizon)));
        }
        Ok(())
    }
}

/// Structured variable name. Element ids, hours 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    Angle { bus: u32, hour: usize },
    Flow { line: u32, hour: usize },
    Sub { sub: u32, hour: usize },
    Curt { pv: u32, hour: usize },
    Chg { bess: u32, hour: usize },
    Dchg { bess: u32, hour: usize },
    Soc { bess: u32, hour: usize },
    Gen { gen: u32, hour: usize },
    Switch { line: u32, hour: usize },
    ChgOn { bess: u32, hour: usize },
    DchgOn { bess: u32, hour: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, id, hour) = match *self {
            VarKey::Angle { bus, hour } => ("angle", bus, hour),
            VarKey::Flow { line, hour } => ("flow", line, hour),
            VarKey::Sub { sub, hour } => ("sub", sub, hour),
            VarKey::Curt { pv, hour } => ("curt", pv, hour),
            VarKey::Chg { bess, hour } => ("chg", bess, hour),
            VarKey::Dchg { bess, hour } => ("dchg", bess, hour),
            VarKey::Soc { bess, hour } => ("soc", bess, hour),
            VarKey::Gen { gen, hour } => ("gen", gen, hour),
            VarKey::Switch { line, hour } => ("switch", line, hour),
            VarKey::ChgOn { bess, hour } => ("chg_on", bess, hour),
            VarKey::DchgOn { bess, hour } => ("dchg_on", bess, hour),
        };
        write!(f, "{kind}({id},{hour})")
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance:\n{0}")]
    Invalid(ValidationReport),
    #[error("base topology is not a radial forest: {0}")]
    NonRadialBase(RadialityCheck),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// A built model plus the bookkeeping needed to read solutions back.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub problem: Problem,
    pub keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
    /// Big-M per switchable line id.
    pub big_m: BTreeMap<u32, f64>,
    /// Angle bound; every angle lies in [-theta_max, theta_max].
    pub theta_max: f64,
    pub hours: Vec<usize>,
    pub case: CaseConfig,
    pub exact_bess: bool,
    /// The instance as modelled (DERs stripped when the case disables them).
    pub instance: NetworkInstance,
}

impl MilpProblem {
    pub fn var(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn num_binaries(&self) -> usize {
        self.problem.num_binaries()
    }

    pub fn count_vars(&self, pred: impl Fn(&VarKey) -> bool) -> usize {
        self.keys.iter().filter(|k| pred(k)).count()
    }

    /// Switch variables for `hour`, as (line index, variable index).
    pub fn switch_vars(&self, hour: usize) -> Vec<(usize, usize)> {
        self.instance
            .lines
            .iter()
            .enumerate()
            .filter_map(|(k, l)| self.var(VarKey::Switch { line: l.id, hour }).map(|j| (k, j)))
            .collect()
    }

    /// Closed line indices in `hour` under `values`.
    pub fn closed_lines(&self, hour: usize, values: &[f64]) -> Vec<usize> {
        let inst = &self.instance;
        (0..inst.lines.len())
            .filter(|&k| {
                let l = &inst.lines[k];
                match self.var(VarKey::Switch { line: l.id, hour }) {
                    Some(j) => values[j] > 0.5,
                    None => !l.switchable || l.normally_closed,
                }
            })
            .collect()
    }

    pub fn extract_schedule(&self, values: &[f64]) -> DispatchSchedule {
        let inst = &self.instance;
        let get = |key: VarKey| self.var(key).map(|j| values[j]);
        let mut hours = Vec::with_capacity(self.hours.len());
        for &t in &self.hours {
            let mut h = HourDispatch {
                hour: t,
                ..Default::default()
            };
            for s in &inst.substations {
                h.imports
                    .insert(s.id, get(VarKey::Sub { sub: s.id, hour: t }).unwrap_or(0.0));
            }
            for g in &inst.generators {
                h.generation
                    .insert(g.id, get(VarKey::Gen { gen: g.id, hour: t }).unwrap_or(0.0));
            }
            for p in &inst.pv_units {
                h.curtailment
                    .insert(p.id, get(VarKey::Curt { pv: p.id, hour: t }).unwrap_or(0.0));
            }
            for b in &inst.bess_units {
                h.charge
                    .insert(b.id, get(VarKey::Chg { bess: b.id, hour: t }).unwrap_or(0.0));
                h.discharge
                    .insert(b.id, get(VarKey::Dchg { bess: b.id, hour: t }).unwrap_or(0.0));
                h.soc
                    .insert(b.id, get(VarKey::Soc { bess: b.id, hour: t }).unwrap_or(b.e_init));
            }
            for l in &inst.lines {
                h.flows
                    .insert(l.id, get(VarKey::Flow { line: l.id, hour: t }).unwrap_or(0.0));
            }
            for b in &inst.buses {
                if let Some(v) = get(VarKey::Angle { bus: b.id, hour: t }) {
                    h.angles.insert(b.id, v);
                }
            }
            h.closed_lines = self
                .closed_lines(t, values)
                .into_iter()
                .map(|k| inst.lines[k].id)
                .collect();
            hours.push(h);
        }
        let e_final = inst
            .bess_units
            .iter()
            .map(|b| (b.id, hours.last().map_or(b.e_init, |h: &HourDispatch| h.soc[&b.id])))
            .collect();
        let mut schedule = DispatchSchedule {
            hours,
            e_final,
            exact_bess: self.exact_bess,
            total_cost: 0.0,
        };
        schedule.total_cost = schedule.evaluate_cost(inst);
        schedule
    }
}

struct Builder {
    problem: Problem,
    keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
}

impl Builder {
    fn var(&mut self, key: VarKey, v: Variable) -> usize {
        let j = self.problem.add_variable(Variable {
            name: key.to_string(),
            ..v
        });
        self.keys.push(key);
        self.index.insert(key, j);
        j
    }

    fn row(&mut self, name: String, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        self.problem.add_constraint(Constraint::new(name, coeffs, rel, rhs));
    }
}

/// Build the full-day (or `cfg.horizon`-hour) model for `case`.
pub fn build_model(inst: &NetworkInstance, case: CaseConfig, cfg: &SolverConfig) -> Result<MilpProblem, ModelError> {
    cfg.check()?;
    let hours: Vec<usize> = (1..=cfg.horizon).collect();
    build_model_for_hours(inst, case, cfg, &hours)
}

/// Build the model over an explicit list of consecutive hours. Storage
/// starts the first listed hour at `e_init` and must return to it by the last.
pub fn build_model_for_hours(
    inst: &NetworkInstance,
    case: CaseConfig,
    cfg: &SolverConfig,
    hours: &[usize],
) -> Result<MilpProblem, ModelError> {
    let report = validate_instance(inst);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    let inst = if case.ders_enabled {
        inst.clone()
    } else {
        inst.without_ders()
    };
    let has_switches = inst.lines.iter().any(|l| l.switchable);
    let reconfigure = case.reconfiguration_enabled && has_switches;
    if !reconfigure {
        let check = is_radial_forest(&inst, &Topology::base(&inst));
        if !check.radial {
            return Err(ModelError::NonRadialBase(check));
        }
    }
    let exact_bess = cfg.bess_binaries == BessBinaries::Exact;

    let theta_max: f64 = inst.lines.iter().map(|l| l.rating * l.reactance_x).sum();
    let big_m: BTreeMap<u32, f64> = inst
        .lines
        .iter()
        .filter(|l| l.switchable && reconfigure)
        .map(|l| (l.id, cfg.big_m.unwrap_or(l.rating + 2.0 * theta_max / l.reactance_x)))
        .collect();

    let mut has_line = vec![false; inst.num_buses()];
    for k in 0..inst.lines.len() {
        let (a, b) = inst.line_ends(k);
        has_line[a] = true;
        has_line[b] = true;
    }
    let sub_bus = inst.substation_buses();

    let mut bld = Builder {
        problem: Problem::new(format!("{}-{}", inst.name, case.configuration())),
        keys: Vec::new(),
        index: HashMap::new(),
    };

    for (ti, &t) in hours.iter().enumerate() {
        let mut angle = vec![None; inst.num_buses()];
        for (n, b) in inst.buses.iter().enumerate() {
            if has_line[n] {
                let (lo, up) = if sub_bus.contains(&n) {
                    (0.0, 0.0)
                } else {
                    (-theta_max, theta_max)
                };
                angle[n] = Some(bld.var(VarKey::Angle { bus: b.id, hour: t }, Variable::continuous("", lo, up)));
            }
        }
        let mut flow = Vec::with_capacity(inst.lines.len());
        let mut switch = vec![None; inst.lines.len()];
        for (k, l) in inst.lines.iter().enumerate() {
            let open_fixed = l.switchable && !reconfigure && !l.normally_closed;
            let r = if open_fixed { 0.0 } else { l.rating };
            flow.push(bld.var(VarKey::Flow { line: l.id, hour: t }, Variable::continuous("", -r, r)));
            if l.switchable && reconfigure {
                switch[k] = Some(bld.var(VarKey::Switch { line: l.id, hour: t }, Variable::binary("")));
            }
        }
        let subs: Vec<usize> = inst
            .substations
            .iter()
            .map(|s| {
                bld.var(
                    VarKey::Sub { sub: s.id, hour: t },
                    Variable::continuous("", 0.0, s.import_cap),
                )
            })
            .collect();
        let gens: Vec<usize> = inst
            .generators
            .iter()
            .map(|g| {
                bld.var(
                    VarKey::Gen { gen: g.id, hour: t },
                    Variable::continuous("", g.p_min, g.p_max),
                )
            })
            .collect();
        let curts: Vec<usize> = inst
            .pv_units
            .iter()
            .map(|p| {
                let avail = p.availability_profile.at(t);
                bld.var(VarKey::Curt { pv: p.id, hour: t }, Variable::continuous("", 0.0, avail))
            })
            .collect();
        let mut chg = Vec::new();
        let mut dchg = Vec::new();
        for b in &inst.bess_units {
            let c = bld.var(
                VarKey::Chg { bess: b.id, hour: t },
                Variable::continuous("", 0.0, b.max_charge()),
            );
            let d = bld.var(
                VarKey::Dchg { bess: b.id, hour: t },
                Variable::continuous("", 0.0, b.max_discharge()),
            );
            let e = bld.var(
                VarKey::Soc { bess: b.id, hour: t },
                Variable::continuous("", b.soc_min * b.e_cap, b.soc_max * b.e_cap),
            );
            let mode = |name: &str| {
                if exact_bess {
                    Variable::binary(name)
                } else {
                    Variable::continuous(name, 0.0, 1.0)
                }
            };
            let con = bld.var(VarKey::ChgOn { bess: b.id, hour: t }, mode(""));
            let don = bld.var(VarKey::DchgOn { bess: b.id, hour: t }, mode(""));
            bld.row(
                format!("chg_cap({},{t})", b.id),
                vec![(c, 1.0), (con, -b.max_charge())],
                Relation::Le,
                0.0,
            );
            bld.row(
                format!("dchg_cap({},{t})", b.id),
                vec![(d, 1.0), (don, -b.max_discharge())],
                Relation::Le,
                0.0,
            );
            bld.row(
                format!("bess_mode({},{t})", b.id),
                vec![(con, 1.0), (don, 1.0)],
                Relation::Le,
                1.0,
            );
            let mut soc = vec![(e, 1.0), (c, -b.eta_chg), (d, 1.0 / b.eta_dchg)];
            let mut rhs = 0.0;
            if ti == 0 {
                rhs = b.e_init;
            } else {
                let prev = bld.index[&VarKey::Soc {
                    bess: b.id,
                    hour: hours[ti - 1],
                }];
                soc.push((prev, -1.0));
            }
            bld.row(format!("soc({},{t})", b.id), soc, Relation::Eq, rhs);
            if ti + 1 == hours.len() {
                bld.row(format!("soc_final({})", b.id), vec![(e, 1.0)], Relation::Eq, b.e_init);
            }
            chg.push(c);
            dchg.push(d);
        }

        // Line flow physics.
        for (k, l) in inst.lines.iter().enumerate() {
            let (a, b) = inst.line_ends(k);
            let (ta, tb) = (angle[a].expect("line endpoint"), angle[b].expect("line endpoint"));
            let inv_x = 1.0 / l.reactance_x;
            let f = flow[k];
            match switch[k] {
                Some(j) => {
                    let m = big_m[&l.id];
                    bld.row(
                        format!("flow_cap_up({},{t})", l.id),
                        vec![(f, 1.0), (j, -l.rating)],
                        Relation::Le,
                        0.0,
                    );
                    bld.row(
                        format!("flow_cap_lo({},{t})", l.id),
                        vec![(f, 1.0), (j, l.rating)],
                        Relation::Ge,
                        0.0,
                    );
                    bld.row(
                        format!("dc_flow_up({},{t})", l.id),
                        vec![(f, 1.0), (ta, -inv_x), (tb, inv_x), (j, m)],
                        Relation::Le,
                        m,
                    );
                    bld.row(
                        format!("dc_flow_lo({},{t})", l.id),
                        vec![(f, 1.0), (ta, -inv_x), (tb, inv_x), (j, -m)],
                        Relation::Ge,
                        -m,
                    );
                }
                None => {
                    if !l.switchable || l.normally_closed {
                        bld.row(
                            format!("dc_flow({},{t})", l.id),
                            vec![(f, 1.0), (ta, -inv_x), (tb, inv_x)],
                            Relation::Eq,
                            0.0,
                        );
                    }
                }
            }
        }

        if reconfigure {
            let fixed = inst.lines.iter().filter(|l| !l.switchable).count() as f64;
            let target = (inst.num_buses() - inst.substations.len()) as f64 - fixed;
            let coeffs: Vec<(usize, f64)> = switch.iter().flatten().map(|&j| (j, 1.0)).collect();
            bld.row(format!("radial_count({t})"), coeffs, Relation::Eq, target);
        }

        // Nodal balance: supply + inflow - outflow = demand.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.num_buses()];
        let mut rhs: Vec<f64> = (0..inst.num_buses()).map(|n| inst.demand(n, t)).collect();
        for (i, s) in inst.substations.iter().enumerate() {
            rows[inst.bus_idx(s.bus).unwrap()].push((subs[i], 1.0));
        }
        for (i, g) in inst.generators.iter().enumerate() {
            rows[inst.bus_idx(g.bus).unwrap()].push((gens[i], 1.0));
        }
        for (i, p) in inst.pv_units.iter().enumerate() {
            let n = inst.bus_idx(p.bus).unwrap();
            rows[n].push((curts[i], -1.0));
            rhs[n] -= p.availability_profile.at(t);
        }
        for (i, b) in inst.bess_units.iter().enumerate() {
            let n = inst.bus_idx(b.bus).unwrap();
            rows[n].push((dchg[i], 1.0));
            rows[n].push((chg[i], -1.0));
        }
        for (k, &f) in flow.iter().enumerate() {
            let (a, b) = inst.line_ends(k);
            rows[a].push((f, -1.0));
            rows[b].push((f, 1.0));
        }
        for (n, coeffs) in rows.into_iter().enumerate() {
            bld.row(
                format!("balance({},{t})", inst.buses[n].id),
                coeffs,
                Relation::Eq,
                rhs[n],
            );
        }

        for (i, s) in inst.substations.iter().enumerate() {
            bld.problem.objective.push((subs[i], s.price_profile.at(t)));
        }
        for (i, g) in inst.generators.iter().enumerate() {
            bld.problem.objective.push((gens[i], g.cost_profile.at(t)));
        }
    }

    Ok(MilpProblem {
        problem: bld.problem,
        keys: bld.keys,
        index: bld.index,
        big_m,
        theta_max,
        hours: hours.to_vec(),
        case,
        exact_bess,
        instance: inst,
    })
}
