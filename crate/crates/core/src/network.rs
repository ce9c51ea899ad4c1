//! Feeder data model: buses, lines, sources and storage over a 24-hour day.
//!
//! Units are MW, MWh and $/MWh. Hours run 1..=24; profile index 0 is hour 1.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HORIZON: usize = 24;

/// One value per hour of the scheduling day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub [f64; HORIZON]);

impl Profile {
    pub const ZERO: Profile = Profile([0.0; HORIZON]);

    pub fn constant(v: f64) -> Profile {
        Profile([v; HORIZON])
    }

    /// Value at 1-based `hour`.
    pub fn at(&self, hour: usize) -> f64 {
        self.0[hour - 1]
    }

    pub fn scaled(&self, factor: f64) -> Profile {
        Profile(self.0.map(|v| v * factor))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::ZERO
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    /// MW per hour.
    pub load_profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Flow in MW equals the endpoint angle difference divided by this value.
    pub reactance_x: f64,
    /// Thermal limit, MW.
    pub rating: f64,
    #[serde(default)]
    pub switchable: bool,
    /// State of the line in the base (non-reconfigured) topology.
    #[serde(default = "yes")]
    pub normally_closed: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Substation {
    pub id: u32,
    pub bus: u32,
    /// $/MWh per hour.
    pub price_profile: Profile,
    /// MW.
    pub import_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    /// $/MWh per hour.
    pub cost_profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvUnit {
    pub id: u32,
    pub bus: u32,
    /// Available output per hour, MW. Injection is availability minus curtailment.
    pub availability_profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessUnit {
    pub id: u32,
    pub bus: u32,
    /// MWh.
    pub e_cap: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Hours to fully charge / discharge at rated power.
    pub t_chg: f64,
    pub t_dchg: f64,
    pub eta_chg: f64,
    pub eta_dchg: f64,
    /// MWh; also the required end-of-day energy.
    pub e_init: f64,
}

impl BessUnit {
    pub fn max_charge(&self) -> f64 {
        self.e_cap / self.t_chg
    }

    pub fn max_discharge(&self) -> f64 {
        self.e_cap / self.t_dchg
    }
}

/// Share of the fleet's EV demand placed at a bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvWeight {
    pub bus: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvDemandEntry {
    bus: u32,
    profile: Profile,
}

/// On-disk form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    substations: Vec<Substation>,
    #[serde(default)]
    generators: Vec<Generator>,
    #[serde(default)]
    pv_units: Vec<PvUnit>,
    #[serde(default)]
    bess_units: Vec<BessUnit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ev_allocation: Vec<EvWeight>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ev_demand: Vec<EvDemandEntry>,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("reference error: `{field}` names unknown bus {bus}")]
    Reference { field: String, bus: u32 },
    #[error("duplicate id {id} in `{collection}`")]
    DuplicateId { collection: &'static str, id: u32 },
    #[error("EV profile row {row}: {message}")]
    EvProfile { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fully resolved feeder. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    pub name: String,
    pub notes: Vec<String>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub substations: Vec<Substation>,
    pub generators: Vec<Generator>,
    pub pv_units: Vec<PvUnit>,
    pub bess_units: Vec<BessUnit>,
    pub ev_allocation: Vec<EvWeight>,
    /// EV demand per bus (indexed like `buses`), MW.
    pub ev_demand: Vec<Profile>,
    bus_index: HashMap<u32, usize>,
}

pub fn load_instance(document: &str) -> Result<NetworkInstance, InstanceError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: InstanceDocument = serde_path_to_error::deserialize(de).map_err(|e| InstanceError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    NetworkInstance::from_document(doc)
}

pub fn load_instance_file(path: impl AsRef<std::path::Path>) -> Result<NetworkInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    load_instance(&text)
}

impl NetworkInstance {
    fn from_document(doc: InstanceDocument) -> Result<NetworkInstance, InstanceError> {
        let mut bus_index = HashMap::new();
        for (i, b) in doc.buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(InstanceError::DuplicateId {
                    collection: "buses",
                    id: b.id,
                });
            }
        }
        let check = |field: String, bus: u32| -> Result<(), InstanceError> {
            if bus_index.contains_key(&bus) {
                Ok(())
            } else {
                Err(InstanceError::Reference { field, bus })
            }
        };
        for (i, l) in doc.lines.iter().enumerate() {
            check(format!("lines[{i}].from_bus"), l.from_bus)?;
            check(format!("lines[{i}].to_bus"), l.to_bus)?;
        }
        for (i, s) in doc.substations.iter().enumerate() {
            check(format!("substations[{i}].bus"), s.bus)?;
        }
        for (i, g) in doc.generators.iter().enumerate() {
            check(format!("generators[{i}].bus"), g.bus)?;
        }
        for (i, p) in doc.pv_units.iter().enumerate() {
            check(format!("pv_units[{i}].bus"), p.bus)?;
        }
        for (i, b) in doc.bess_units.iter().enumerate() {
            check(format!("bess_units[{i}].bus"), b.bus)?;
        }
        for (i, w) in doc.ev_allocation.iter().enumerate() {
            check(format!("ev_allocation[{i}].bus"), w.bus)?;
        }
        for (i, e) in doc.ev_demand.iter().enumerate() {
            check(format!("ev_demand[{i}].bus"), e.bus)?;
        }
        unique_ids("lines", doc.lines.iter().map(|l| l.id))?;
        unique_ids("substations", doc.substations.iter().map(|s| s.id))?;
        unique_ids("generators", doc.generators.iter().map(|g| g.id))?;
        unique_ids("pv_units", doc.pv_units.iter().map(|p| p.id))?;
        unique_ids("bess_units", doc.bess_units.iter().map(|b| b.id))?;

        let mut ev_demand = vec![Profile::ZERO; doc.buses.len()];
        for e in &doc.ev_demand {
            ev_demand[bus_index[&e.bus]] = e.profile;
        }
        Ok(NetworkInstance {
            name: doc.name,
            notes: doc.notes,
            buses: doc.buses,
            lines: doc.lines,
            substations: doc.substations,
            generators: doc.generators,
            pv_units: doc.pv_units,
            bess_units: doc.bess_units,
            ev_allocation: doc.ev_allocation,
            ev_demand,
            bus_index,
        })
    }

    /// Serialise to the instance JSON format; `load_instance` reads it back unchanged.
    pub fn to_json(&self) -> String {
        let doc = InstanceDocument {
            name: self.name.clone(),
            notes: self.notes.clone(),
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            substations: self.substations.clone(),
            generators: self.generators.clone(),
            pv_units: self.pv_units.clone(),
            bess_units: self.bess_units.clone(),
            ev_allocation: self.ev_allocation.clone(),
            ev_demand: self
                .buses
                .iter()
                .zip(&self.ev_demand)
                .filter(|(_, p)| p.0.iter().any(|&v| v != 0.0))
                .map(|(b, p)| EvDemandEntry { bus: b.id, profile: *p })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serialises")
    }

    pub fn bus_idx(&self, id: u32) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    /// Line endpoints as bus indices.
    pub fn line_ends(&self, line: usize) -> (usize, usize) {
        let l = &self.lines[line];
        (self.bus_index[&l.from_bus], self.bus_index[&l.to_bus])
    }

    pub fn substation_buses(&self) -> Vec<usize> {
        self.substations.iter().map(|s| self.bus_index[&s.bus]).collect()
    }

    pub fn line_by_id(&self, id: u32) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Total demand (base plus EV) at bus index `bus`, hour 1..=24.
    pub fn demand(&self, bus: usize, hour: usize) -> f64 {
        self.buses[bus].load_profile.at(hour) + self.ev_demand[bus].at(hour)
    }

    /// Energy served over the day, MWh.
    pub fn total_energy(&self) -> f64 {
        (0..self.buses.len())
            .map(|n| self.buses[n].load_profile.sum() + self.ev_demand[n].sum())
            .sum()
    }

    /// Closed lines of the base topology.
    pub fn base_closed_lines(&self) -> Vec<u32> {
        self.lines
            .iter()
            .filter(|l| !l.switchable || l.normally_closed)
            .map(|l| l.id)
            .collect()
    }

    /// Copy with PV, generators and storage removed.
    pub fn without_ders(&self) -> NetworkInstance {
        NetworkInstance {
            generators: Vec::new(),
            pv_units: Vec::new(),
            bess_units: Vec::new(),
            ..self.clone()
        }
    }

    /// Copy with the EV demand replaced by `penetration` times the reference profile.
    pub fn with_ev_demand(
        &self,
        reference: &BTreeMap<u32, Profile>,
        penetration: f64,
    ) -> Result<NetworkInstance, InstanceError> {
        let mut ev = vec![Profile::ZERO; self.buses.len()];
        for (&bus, profile) in reference {
            let i = self.bus_idx(bus).ok_or_else(|| InstanceError::Reference {
                field: "ev_profile.bus_id".into(),
                bus,
            })?;
            ev[i] = profile.scaled(penetration);
        }
        Ok(NetworkInstance {
            ev_demand: ev,
            ..self.clone()
        })
    }

    /// Connected components of the graph formed by `closed` line indices.
    pub(crate) fn components(&self, closed: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for k in closed {
            let (a, b) = self.line_ends(k);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        q.push_back(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

fn unique_ids(collection: &'static str, ids: impl Iterator<Item = u32>) -> Result<(), InstanceError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(InstanceError::DuplicateId { collection, id });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            subject: subject.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Every violated instance invariant. An empty report means the instance is valid.
pub fn validate_instance(inst: &NetworkInstance) -> ValidationReport {
    let mut r = ValidationReport::default();
    for b in &inst.buses {
        let s = format!("bus {}", b.id);
        if !b.load_profile.all_finite() || b.load_profile.min() < 0.0 {
            r.push(s, "load profile must be finite and non-negative");
        }
    }
    for l in &inst.lines {
        let s = format!("line {}", l.id);
        if !(l.reactance_x > 0.0 && l.reactance_x.is_finite()) {
            r.push(&s, format!("reactance_x must be positive, got {}", l.reactance_x));
        }
        if !(l.rating > 0.0 && l.rating.is_finite()) {
            r.push(&s, format!("rating must be positive, got {}", l.rating));
        }
        if l.from_bus == l.to_bus {
            r.push(&s, "from_bus equals to_bus");
        }
        if !l.switchable && !l.normally_closed {
            r.push(&s, "a non-switchable line must be closed");
        }
    }
    if inst.substations.is_empty() {
        r.push("substations", "at least one substation is required");
    }
    for s in &inst.substations {
        let subj = format!("substation {}", s.id);
        if !s.price_profile.all_finite() || s.price_profile.min() < 0.0 {
            r.push(&subj, "prices must be finite and non-negative");
        }
        if s.import_cap.is_nan() || s.import_cap <= 0.0 {
            r.push(&subj, format!("import_cap must be positive, got {}", s.import_cap));
        }
    }
    for g in &inst.generators {
        if !(0.0 <= g.p_min && g.p_min <= g.p_max && g.p_max.is_finite()) {
            r.push(
                format!("generator {}", g.id),
                format!("requires 0 <= p_min <= p_max, got [{}, {}]", g.p_min, g.p_max),
            );
        }
        if !g.cost_profile.all_finite() {
            r.push(format!("generator {}", g.id), "cost profile must be finite");
        }
    }
    for p in &inst.pv_units {
        if !p.availability_profile.all_finite() || p.availability_profile.min() < 0.0 {
            r.push(
                format!("pv unit {}", p.id),
                "availability must be finite and non-negative",
            );
        }
    }
    for b in &inst.bess_units {
        let s = format!("bess {}", b.id);
        if !(b.e_cap > 0.0 && b.e_cap.is_finite()) {
            r.push(&s, format!("e_cap must be positive, got {}", b.e_cap));
        }
        if !(0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0) {
            r.push(
                &s,
                format!(
                    "requires 0 <= soc_min < soc_max <= 1, got [{}, {}]",
                    b.soc_min, b.soc_max
                ),
            );
        }
        if !(b.soc_min * b.e_cap <= b.e_init && b.e_init <= b.soc_max * b.e_cap) {
            r.push(
                &s,
                format!(
                    "e_init {} outside [{}, {}]",
                    b.e_init,
                    b.soc_min * b.e_cap,
                    b.soc_max * b.e_cap
                ),
            );
        }
        if !(b.t_chg >= 1.0 && b.t_dchg >= 1.0) {
            r.push(&s, "charge and discharge durations must be at least 1 hour");
        }
        if !(b.eta_chg > 0.0 && b.eta_chg <= 1.0 && b.eta_dchg > 0.0 && b.eta_dchg <= 1.0) {
            r.push(&s, "efficiencies must lie in (0, 1]");
        }
    }
    for w in &inst.ev_allocation {
        if !(w.weight >= 0.0 && w.weight.is_finite()) {
            r.push(format!("ev_allocation bus {}", w.bus), "weight must be non-negative");
        }
    }
    for (b, p) in inst.buses.iter().zip(&inst.ev_demand) {
        if !p.all_finite() || p.min() < 0.0 {
            r.push(format!("ev demand at bus {}", b.id), "must be finite and non-negative");
        }
    }
    if !inst.buses.is_empty() {
        let comp = inst.components(0..inst.lines.len());
        let stranded: Vec<u32> = inst
            .buses
            .iter()
            .zip(&comp)
            .filter(|(_, &c)| c != comp[0])
            .map(|(b, _)| b.id)
            .collect();
        if !stranded.is_empty() {
            r.push(
                "network",
                format!(
                    "graph over all lines is disconnected; buses {stranded:?} unreachable from bus {}",
                    inst.buses[0].id
                ),
            );
        }
    }
    r
}

/// Scale a 100%-penetration EV profile onto the instance. Base loads are untouched.
pub fn apply_ev_demand(
    inst: &NetworkInstance,
    profile: &crate::ev::EvDemandProfile,
    penetration: f64,
) -> Result<NetworkInstance, InstanceError> {
    inst.with_ev_demand(&profile.demand, penetration)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EvCsvRow {
    bus_id: u32,
    hour: usize,
    demand_mw: f64,
}

/// Parse the `bus_id,hour,demand_mw` CSV. Missing cells are zero.
pub fn read_ev_csv(text: &str) -> Result<BTreeMap<u32, Profile>, InstanceError> {
    let mut out: BTreeMap<u32, Profile> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (i, rec) in rdr.deserialize::<EvCsvRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| InstanceError::EvProfile {
            row,
            message: e.to_string(),
        })?;
        if !(1..=HORIZON).contains(&rec.hour) {
            return Err(InstanceError::EvProfile {
                row,
                message: format!("hour {} outside 1..=24", rec.hour),
            });
        }
        if !(rec.demand_mw >= 0.0 && rec.demand_mw.is_finite()) {
            return Err(InstanceError::EvProfile {
                row,
                message: format!("demand {} must be non-negative", rec.demand_mw),
            });
        }
        out.entry(rec.bus_id).or_default().0[rec.hour - 1] = rec.demand_mw;
    }
    Ok(out)
}

pub fn write_ev_csv(profile: &BTreeMap<u32, Profile>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (&bus_id, p) in profile {
        for hour in 1..=HORIZON {
            w.serialize(EvCsvRow {
                bus_id,
                hour,
                demand_mw: p.at(hour),
            })
            .expect("in-memory csv");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

/// Which of the four study configurations to solve, and at what EV level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub reconfiguration_enabled: bool,
    pub ders_enabled: bool,
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Configuration {
    #[serde(rename = "SDN")]
    Sdn,
    #[serde(rename = "SDNTR")]
    Sdntr,
    #[serde(rename = "SDN-DER")]
    SdnDer,
    #[serde(rename = "SDNTR-DER")]
    SdntrDer,
}

impl Configuration {
    pub const ALL: [Configuration; 4] = [
        Configuration::Sdn,
        Configuration::Sdntr,
        Configuration::SdnDer,
        Configuration::SdntrDer,
    ];

    pub fn reconfiguration(self) -> bool {
        matches!(self, Configuration::Sdntr | Configuration::SdntrDer)
    }

    pub fn ders(self) -> bool {
        matches!(self, Configuration::SdnDer | Configuration::SdntrDer)
    }

    pub fn at(self, penetration: f64) -> CaseConfig {
        CaseConfig {
            reconfiguration_enabled: self.reconfiguration(),
            ders_enabled: self.ders(),
            penetration,
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Configuration::Sdn => "SDN",
            Configuration::Sdntr => "SDNTR",
            Configuration::SdnDer => "SDN-DER",
            Configuration::SdntrDer => "SDNTR-DER",
        })
    }
}

impl FromStr for Configuration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sdn" => Ok(Configuration::Sdn),
            "sdntr" => Ok(Configuration::Sdntr),
            "sdn-der" => Ok(Configuration::SdnDer),
            "sdntr-der" => Ok(Configuration::SdntrDer),
            other => Err(format!(
                "unknown configuration {other:?}; expected sdn, sdntr, sdn-der or sdntr-der"
            )),
        }
    }
}

impl CaseConfig {
    pub fn configuration(&self) -> Configuration {
        match (self.reconfiguration_enabled, self.ders_enabled) {
            (false, false) => Configuration::Sdn,
            (true, false) => Configuration::Sdntr,
            (false, true) => Configuration::SdnDer,
            (true, true) => Configuration::SdntrDer,
        }
    }
}
