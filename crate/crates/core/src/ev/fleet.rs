//! Monte-Carlo simulation of a charging fleet from fitted class models.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{MINUTES_PER_DAY, SLOTS_PER_DAY, SLOT_MINUTES};
use super::events::{classify_event, ChargingEvent, ClassLabel, ProfileClass, ProfileClasses};
use super::kde::{fit_kde, BandwidthRule, KdeError, KdeModel, Support};
use super::rng_for;

/// Energy draws are kept below this, kWh.
pub const MAX_EVENT_ENERGY_KWH: f64 = 150.0;
const BAND_ATTEMPTS: usize = 1000;

/// Start, duration and energy densities for one power class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModels {
    pub start: KdeModel,
    pub duration: KdeModel,
    pub energy: KdeModel,
}

impl ClassModels {
    pub fn fit(label: ClassLabel, events: &[&ChargingEvent], rule: BandwidthRule) -> Result<ClassModels, KdeError> {
        let col = |f: fn(&ChargingEvent) -> f64| events.iter().map(|e| f(e)).collect::<Vec<f64>>();
        Ok(ClassModels {
            start: fit_kde(
                &format!("{label}/start_min"),
                &col(|e| e.start_min),
                rule,
                Support::Circular {
                    period: MINUTES_PER_DAY,
                },
            )?,
            duration: fit_kde(
                &format!("{label}/duration_min"),
                &col(|e| e.duration_min),
                rule,
                Support::Interval {
                    lower: 0.0,
                    upper: MINUTES_PER_DAY,
                },
            )?,
            energy: fit_kde(
                &format!("{label}/energy_kwh"),
                &col(|e| e.energy_kwh),
                rule,
                Support::Interval {
                    lower: 0.0,
                    upper: MAX_EVENT_ENERGY_KWH,
                },
            )?,
        })
    }

    /// One session from the product-kernel joint density: pick an extracted
    /// session, then perturb each feature with its own kernel. Keeps
    /// duration and energy paired as they were observed.
    pub fn draw_session<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, f64) {
        let n = self.start.samples.len();
        if self.duration.samples.len() != n || self.energy.samples.len() != n {
            // Models fitted separately have no pairing to keep.
            return (self.start.draw(rng), self.duration.draw(rng), self.energy.draw(rng));
        }
        let i = rng.random_range(0..n);
        (
            self.start.draw_near(i, rng),
            self.duration.draw_near(i, rng),
            self.energy.draw_near(i, rng),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClasses {
    pub classes: ProfileClasses,
    pub models: BTreeMap<ClassLabel, ClassModels>,
    /// Extracted events per class.
    pub event_counts: BTreeMap<ClassLabel, usize>,
}

/// Split events by class and fit a KDE triple for each class that has data.
pub fn fit_class_models(
    events: &[ChargingEvent],
    classes: &ProfileClasses,
    rule: BandwidthRule,
) -> Result<FittedClasses, KdeError> {
    let mut by_class: BTreeMap<ClassLabel, Vec<&ChargingEvent>> = BTreeMap::new();
    for e in events {
        by_class.entry(classify_event(e, classes).label).or_default().push(e);
    }
    let mut models = BTreeMap::new();
    let mut event_counts = BTreeMap::new();
    for (label, evs) in &by_class {
        event_counts.insert(*label, evs.len());
        models.insert(*label, ClassModels::fit(*label, evs, rule)?);
    }
    Ok(FittedClasses {
        classes: classes.clone(),
        models,
        event_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvFleetSpec {
    /// Number of vehicles per class.
    pub fleet: BTreeMap<ClassLabel, usize>,
    pub p_daily: f64,
    pub days: usize,
    pub seed: u64,
}

impl EvFleetSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.p_daily) {
            return Err(format!("p_daily {} outside [0, 1]", self.p_daily));
        }
        Ok(())
    }

    pub fn vehicles(&self) -> usize {
        self.fleet.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEvent {
    pub ev: u32,
    pub class: ClassLabel,
    pub day: usize,
    pub start_min: f64,
    pub duration_min: f64,
    pub energy_kwh: f64,
}

impl FleetEvent {
    pub fn power_kw(&self) -> f64 {
        self.energy_kwh / (self.duration_min / 60.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSimulation {
    pub days: usize,
    pub ev_days: usize,
    pub charging_days: usize,
    pub events: Vec<FleetEvent>,
}

impl FleetSimulation {
    pub fn charging_day_fraction(&self) -> f64 {
        if self.ev_days == 0 {
            0.0
        } else {
            self.charging_days as f64 / self.ev_days as f64
        }
    }

    pub fn total_energy_kwh(&self) -> f64 {
        self.events.iter().map(|e| e.energy_kwh).sum()
    }

    pub fn count_by_class(&self) -> BTreeMap<ClassLabel, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            *out.entry(e.class).or_insert(0) += 1;
        }
        out
    }

    /// Aggregate fleet power at 15-minute resolution over all simulated days,
    /// kW. Sessions running past midnight continue into the next day; those
    /// running past the last day are cut, and the lost energy is returned.
    pub fn power_series(&self) -> (Vec<f64>, f64) {
        let total_min = self.days as f64 * MINUTES_PER_DAY;
        let mut slots = vec![0.0; self.days * SLOTS_PER_DAY];
        let mut lost = 0.0;
        let slot_min = SLOT_MINUTES as f64;
        for e in &self.events {
            let p = e.power_kw();
            let a = e.day as f64 * MINUTES_PER_DAY + e.start_min;
            let b = a + e.duration_min;
            if b > total_min {
                lost += p * (b - total_min) / 60.0;
                log::info!("ev {} day {}: session cut at end of simulated period", e.ev, e.day);
            }
            let b = b.min(total_min);
            let mut s = (a / slot_min).floor() as usize;
            while s < slots.len() && (s as f64) * slot_min < b {
                let lo = a.max(s as f64 * slot_min);
                let hi = b.min((s + 1) as f64 * slot_min);
                // Mean power over the slot.
                slots[s] += p * (hi - lo) / slot_min;
                s += 1;
            }
        }
        (slots, lost)
    }
}

fn band_mid(class: &ProfileClass) -> f64 {
    match class.upper_kw {
        Some(u) => 0.5 * (class.lower_kw + u),
        None => 1.5 * class.lower_kw,
    }
}

/// Per vehicle and day, charge with probability `p_daily`; a charging day
/// draws a session from the vehicle's class models, redrawing until its mean
/// power falls inside the class band.
pub fn simulate_fleet(spec: &EvFleetSpec, fitted: &FittedClasses) -> Result<FleetSimulation, String> {
    spec.validate()?;
    for (label, &n) in &spec.fleet {
        if n > 0 && !fitted.models.contains_key(label) {
            return Err(format!(
                "no {label} events were extracted, cannot simulate {n} {label} vehicles"
            ));
        }
    }
    let mut rng = rng_for(spec.seed, 2);
    let mut roster = Vec::new();
    for (&label, &n) in &spec.fleet {
        roster.extend(std::iter::repeat_n(label, n));
    }
    let mut sim = FleetSimulation {
        days: spec.days,
        ev_days: 0,
        charging_days: 0,
        events: Vec::new(),
    };
    for day in 0..spec.days {
        for (ev, &label) in roster.iter().enumerate() {
            sim.ev_days += 1;
            if rng.random::<f64>() >= spec.p_daily {
                continue;
            }
            sim.charging_days += 1;
            let m = &fitted.models[&label];
            let class = fitted.classes.get(label).expect("fitted label has a class");
            let (mut start, mut duration, mut energy) = (0.0, 0.0, 0.0);
            let mut in_band = false;
            for _ in 0..BAND_ATTEMPTS {
                (start, duration, energy) = m.draw_session(&mut rng);
                if class.contains(energy / (duration / 60.0)) {
                    in_band = true;
                    break;
                }
            }
            if !in_band {
                duration = energy / band_mid(class) * 60.0;
            }
            sim.events.push(FleetEvent {
                ev: ev as u32 + 1,
                class: label,
                day,
                start_min: start,
                duration_min: duration,
                energy_kwh: energy,
            });
        }
    }
    Ok(sim)
}
