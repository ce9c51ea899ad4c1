//! Charging-session detection and power classes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::corpus::{MeterSeries, SLOTS_PER_DAY, SLOT_MINUTES};

pub const DEFAULT_POWER_THRESHOLD_KW: f64 = 3.0;
pub const DEFAULT_MIN_DURATION_MIN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingEvent {
    /// Minutes since midnight of the day the session began.
    pub start_min: f64,
    pub duration_min: f64,
    pub energy_kwh: f64,
    pub mean_power_kw: f64,
}

impl ChargingEvent {
    /// Build from energy and duration; mean power follows.
    pub fn new(start_min: f64, duration_min: f64, energy_kwh: f64) -> ChargingEvent {
        ChargingEvent {
            start_min,
            duration_min,
            energy_kwh,
            mean_power_kw: energy_kwh / (duration_min / 60.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub power_kw: f64,
    pub min_duration_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            power_kw: DEFAULT_POWER_THRESHOLD_KW,
            min_duration_min: DEFAULT_MIN_DURATION_MIN,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Maximal runs of samples at or above the power threshold that last at
/// least the minimum duration.
///
/// Energy is the run's consumption above the household baseline, taken as
/// the median of that day's below-threshold samples.
pub fn extract_events(series: &MeterSeries, th: Thresholds) -> Vec<ChargingEvent> {
    assert!(
        th.power_kw > 0.0 && th.min_duration_min > 0.0,
        "thresholds must be positive"
    );
    let p = &series.samples_kw;
    let baselines: Vec<f64> = p
        .chunks(SLOTS_PER_DAY)
        .map(|day| median(day.iter().copied().filter(|&v| v < th.power_kw).collect()))
        .collect();
    let slot_h = SLOT_MINUTES as f64 / 60.0;
    let mut out = Vec::new();
    let mut i = 0;
    while i < p.len() {
        if p[i] < th.power_kw {
            i += 1;
            continue;
        }
        let start = i;
        while i < p.len() && p[i] >= th.power_kw {
            i += 1;
        }
        let duration = ((i - start) * SLOT_MINUTES) as f64;
        if duration < th.min_duration_min {
            continue;
        }
        let base = baselines[start / SLOTS_PER_DAY];
        let energy: f64 = p[start..i].iter().map(|v| (v - base).max(0.0) * slot_h).sum();
        let start_min = ((start % SLOTS_PER_DAY) * SLOT_MINUTES) as f64;
        out.push(ChargingEvent::new(start_min, duration, energy));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Low,
    Normal,
    High,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Low, ClassLabel::Normal, ClassLabel::High];
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Low => "low",
            ClassLabel::Normal => "normal",
            ClassLabel::High => "high",
        })
    }
}

/// Power band `(lower_kw, upper_kw]`; no upper edge means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileClass {
    pub label: ClassLabel,
    pub lower_kw: f64,
    pub upper_kw: Option<f64>,
    /// Typical state of charge at plug-in. Metadata only.
    pub initial_soc: (f64, f64),
}

impl ProfileClass {
    pub fn contains(&self, power_kw: f64) -> bool {
        self.lower_kw < power_kw && self.upper_kw.is_none_or(|u| power_kw <= u)
    }
}

/// Classes sorted by band; together they partition (0, inf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ProfileClass>", into = "Vec<ProfileClass>")]
pub struct ProfileClasses(Vec<ProfileClass>);

impl ProfileClasses {
    pub fn new(mut classes: Vec<ProfileClass>) -> Result<ProfileClasses, String> {
        classes.sort_by(|a, b| a.lower_kw.total_cmp(&b.lower_kw));
        let Some(first) = classes.first() else {
            return Err("no classes".into());
        };
        if first.lower_kw != 0.0 {
            return Err(format!("lowest band starts at {} kW, not 0", first.lower_kw));
        }
        for w in classes.windows(2) {
            if w[0].upper_kw != Some(w[1].lower_kw) {
                return Err(format!(
                    "bands {} and {} leave a gap or overlap",
                    w[0].label, w[1].label
                ));
            }
        }
        if classes.last().unwrap().upper_kw.is_some() {
            return Err("highest band must be unbounded".into());
        }
        Ok(ProfileClasses(classes))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProfileClass> {
        self.0.iter()
    }

    pub fn get(&self, label: ClassLabel) -> Option<&ProfileClass> {
        self.0.iter().find(|c| c.label == label)
    }
}

impl Default for ProfileClasses {
    fn default() -> Self {
        ProfileClasses(vec![
            ProfileClass {
                label: ClassLabel::Low,
                lower_kw: 0.0,
                upper_kw: Some(3.7),
                initial_soc: (0.3, 0.6),
            },
            ProfileClass {
                label: ClassLabel::Normal,
                lower_kw: 3.7,
                upper_kw: Some(11.0),
                initial_soc: (0.2, 0.5),
            },
            ProfileClass {
                label: ClassLabel::High,
                lower_kw: 11.0,
                upper_kw: None,
                initial_soc: (0.1, 0.4),
            },
        ])
    }
}

impl TryFrom<Vec<ProfileClass>> for ProfileClasses {
    type Error = String;

    fn try_from(v: Vec<ProfileClass>) -> Result<Self, Self::Error> {
        ProfileClasses::new(v)
    }
}

impl From<ProfileClasses> for Vec<ProfileClass> {
    fn from(c: ProfileClasses) -> Self {
        c.0
    }
}

/// The class whose band holds the event's mean power.
pub fn classify_event<'a>(event: &ChargingEvent, classes: &'a ProfileClasses) -> &'a ProfileClass {
    classes
        .iter()
        .find(|c| c.contains(event.mean_power_kw))
        .expect("classes partition the positive reals")
}
