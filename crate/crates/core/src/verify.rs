//! Independent replay of a dispatch schedule against the instance data.
//!
//! Nothing here looks at the solver's model: every check recomputes its
//! quantity from the schedule and the instance alone.

use std::fmt;

use serde::Serialize;

use crate::network::NetworkInstance;
use crate::schedule::DispatchSchedule;
use crate::topology::{assert_schedule_radial, ScheduleRadiality};

pub const BALANCE_TOL: f64 = 1e-6;
pub const FLOW_TOL: f64 = 1e-6;
pub const BOUND_TOL: f64 = 1e-6;
pub const SOC_TOL: f64 = 1e-9;
pub const EXCLUSIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// Largest residual seen; compared against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub checks: Vec<CheckResult>,
    pub radiality: ScheduleRadiality,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{:<18} {} worst={:.3e} tol={:.0e}",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                c.worst,
                c.tolerance
            )?;
            if let Some(d) = &c.detail {
                write!(f, " ({d})")?;
            }
            writeln!(f)?;
        }
        for h in self.radiality.failures() {
            writeln!(f, "hour {}: {}", h.hour, h.check)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Tracks the worst residual of one check and where it happened.
struct Worst {
    name: &'static str,
    tol: f64,
    value: f64,
    at: Option<String>,
}

impl Worst {
    fn new(name: &'static str, tol: f64) -> Worst {
        Worst {
            name,
            tol,
            value: 0.0,
            at: None,
        }
    }

    fn see(&mut self, residual: f64, at: impl FnOnce() -> String) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if r > self.value {
            self.value = r;
            self.at = Some(at());
        }
    }

    fn finish(self) -> CheckResult {
        let pass = self.value <= self.tol;
        CheckResult {
            name: self.name,
            pass,
            worst: self.value,
            tolerance: self.tol,
            detail: if pass { None } else { self.at },
        }
    }
}

fn excess(v: f64, lo: f64, up: f64) -> f64 {
    (lo - v).max(v - up).max(0.0)
}

/// Replay balance, flow physics, device limits, storage energy, charge
/// exclusivity and radiality.
///
/// Devices missing from the schedule's maps are treated as not modelled,
/// so a schedule from a case without DERs verifies against the full instance.
pub fn verify_schedule(inst: &NetworkInstance, schedule: &DispatchSchedule) -> VerificationReport {
    let mut balance = Worst::new("nodal_balance", BALANCE_TOL);
    let mut flows = Worst::new("line_flows", FLOW_TOL);
    let mut bounds = Worst::new("device_bounds", BOUND_TOL);
    let mut soc = Worst::new("soc_replay", SOC_TOL);
    let mut excl = Worst::new("bess_exclusivity", EXCLUSIVITY_TOL);
    let mut warnings = Vec::new();

    for h in &schedule.hours {
        let t = h.hour;
        let mut net: Vec<f64> = (0..inst.num_buses()).map(|n| -inst.demand(n, t)).collect();
        for s in &inst.substations {
            let v = h.imports.get(&s.id).copied().unwrap_or(0.0);
            net[inst.bus_idx(s.bus).unwrap()] += v;
            bounds.see(excess(v, 0.0, s.import_cap), || format!("substation {} hour {t}", s.id));
        }
        for g in &inst.generators {
            if let Some(&v) = h.generation.get(&g.id) {
                net[inst.bus_idx(g.bus).unwrap()] += v;
                bounds.see(excess(v, g.p_min, g.p_max), || format!("generator {} hour {t}", g.id));
            }
        }
        for p in &inst.pv_units {
            if let Some(&c) = h.curtailment.get(&p.id) {
                let avail = p.availability_profile.at(t);
                net[inst.bus_idx(p.bus).unwrap()] += avail - c;
                bounds.see(excess(c, 0.0, avail), || format!("pv {} hour {t}", p.id));
            }
        }
        for b in &inst.bess_units {
            let (Some(&c), Some(&d)) = (h.charge.get(&b.id), h.discharge.get(&b.id)) else {
                continue;
            };
            net[inst.bus_idx(b.bus).unwrap()] += d - c;
            bounds.see(excess(c, 0.0, b.max_charge()), || {
                format!("bess {} charge hour {t}", b.id)
            });
            bounds.see(excess(d, 0.0, b.max_discharge()), || {
                format!("bess {} discharge hour {t}", b.id)
            });
            if let Some(&e) = h.soc.get(&b.id) {
                bounds.see(excess(e, b.soc_min * b.e_cap, b.soc_max * b.e_cap), || {
                    format!("bess {} energy hour {t}", b.id)
                });
            }
            let both = c.min(d);
            if schedule.exact_bess {
                excl.see(both, || format!("bess {} hour {t}: charge {c} and discharge {d}", b.id));
            } else if both > EXCLUSIVITY_TOL && b.eta_chg * b.eta_dchg < 1.0 {
                warnings.push(format!(
                    "bess {} hour {t}: simultaneous charge {c:.6} and discharge {d:.6} under relaxed binaries",
                    b.id
                ));
            }
        }
        for (k, l) in inst.lines.iter().enumerate() {
            let f = h.flows.get(&l.id).copied().unwrap_or(0.0);
            let (a, b) = inst.line_ends(k);
            net[a] -= f;
            net[b] += f;
            flows.see(f.abs() - l.rating, || format!("line {} hour {t} exceeds rating", l.id));
            if h.closed_lines.contains(&l.id) {
                let ta = h.angles.get(&l.from_bus).copied().unwrap_or(0.0);
                let tb = h.angles.get(&l.to_bus).copied().unwrap_or(0.0);
                let phys = (ta - tb) / l.reactance_x;
                flows.see((f - phys).abs(), || {
                    format!("line {} hour {t}: flow {f} vs angle difference {phys}", l.id)
                });
            } else {
                flows.see(f.abs(), || format!("open line {} hour {t} carries {f} MW", l.id));
            }
        }
        for (n, r) in net.iter().enumerate() {
            balance.see(r.abs(), || format!("bus {} hour {t}", inst.buses[n].id));
        }
    }

    for b in &inst.bess_units {
        let mut e = b.e_init;
        let mut last = None;
        for h in &schedule.hours {
            let (Some(&c), Some(&d), Some(&stored)) = (h.charge.get(&b.id), h.discharge.get(&b.id), h.soc.get(&b.id))
            else {
                continue;
            };
            e += b.eta_chg * c - d / b.eta_dchg;
            soc.see((e - stored).abs(), || {
                format!("bess {} hour {}: replay {e} vs stored {stored}", b.id, h.hour)
            });
            last = Some(stored);
        }
        if let Some(stored_last) = last {
            let fin = schedule.e_final.get(&b.id).copied().unwrap_or(f64::NAN);
            soc.see((fin - stored_last).abs(), || {
                format!("bess {}: final energy {fin} vs last hour {stored_last}", b.id)
            });
            soc.see((fin - b.e_init).abs(), || {
                format!("bess {}: final energy {fin} vs initial {}", b.id, b.e_init)
            });
        }
    }

    let radiality = assert_schedule_radial(inst, schedule);
    let mut checks = vec![
        balance.finish(),
        flows.finish(),
        bounds.finish(),
        soc.finish(),
        excl.finish(),
    ];
    let failed_hours: Vec<usize> = radiality.failures().map(|h| h.hour).collect();
    checks.push(CheckResult {
        name: "radiality",
        pass: radiality.pass,
        worst: failed_hours.len() as f64,
        tolerance: 0.0,
        detail: (!failed_hours.is_empty()).then(|| format!("non-radial hours {failed_hours:?}")),
    });
    VerificationReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
        radiality,
        warnings,
    }
}
