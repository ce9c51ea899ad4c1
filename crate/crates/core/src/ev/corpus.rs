//! Synthetic smart-meter corpus with known charging events.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng_for;

pub const SLOT_MINUTES: usize = 15;
pub const SLOTS_PER_DAY: usize = 96;
pub const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("meter {meter}: {len} samples is not a whole number of days")]
    PartialDay { meter: u32, len: usize },
    #[error("meter {meter}: sample {index} is {value} kW")]
    BadSample { meter: u32, index: usize, value: f64 },
}

/// One meter at 15-minute resolution, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterSeries {
    pub meter_id: u32,
    /// ISO date of the first sample.
    pub start_date: String,
    pub samples_kw: Vec<f64>,
}

impl MeterSeries {
    pub fn new(meter_id: u32, start_date: impl Into<String>, samples_kw: Vec<f64>) -> Result<MeterSeries, SeriesError> {
        if !samples_kw.len().is_multiple_of(SLOTS_PER_DAY) {
            return Err(SeriesError::PartialDay {
                meter: meter_id,
                len: samples_kw.len(),
            });
        }
        if let Some((index, &value)) = samples_kw
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(SeriesError::BadSample {
                meter: meter_id,
                index,
                value,
            });
        }
        Ok(MeterSeries {
            meter_id,
            start_date: start_date.into(),
            samples_kw,
        })
    }

    pub fn days(&self) -> usize {
        self.samples_kw.len() / SLOTS_PER_DAY
    }
}

/// A Gaussian bump on the 24-hour clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartComponent {
    pub weight: f64,
    pub mean_hour: f64,
    pub sd_hours: f64,
}

/// Share of injected events drawn at a uniform power in `power_kw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBand {
    pub weight: f64,
    pub power_kw: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub meters: usize,
    pub days: usize,
    pub start_date: String,
    /// Household consumption without the car, kW.
    pub base_load_kw: f64,
    /// Half-width of uniform noise on the base load, kW.
    pub base_noise_kw: f64,
    /// Chance that a meter-day contains a charging session.
    pub event_probability: f64,
    pub start_time: Vec<StartComponent>,
    /// Log-normal session energy: ln(E / kWh) ~ N(mu, sigma).
    pub energy_log_mu: f64,
    pub energy_log_sigma: f64,
    pub power_mix: Vec<PowerBand>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            meters: 24,
            days: 365,
            start_date: "2021-01-01".into(),
            base_load_kw: 0.6,
            base_noise_kw: 0.25,
            event_probability: 0.8,
            start_time: vec![
                StartComponent {
                    weight: 0.75,
                    mean_hour: 19.5,
                    sd_hours: 1.5,
                },
                StartComponent {
                    weight: 0.15,
                    mean_hour: 13.0,
                    sd_hours: 2.5,
                },
                StartComponent {
                    weight: 0.10,
                    mean_hour: 1.0,
                    sd_hours: 1.5,
                },
            ],
            energy_log_mu: 14f64.ln(),
            energy_log_sigma: 0.4,
            power_mix: vec![
                PowerBand {
                    weight: 0.25,
                    power_kw: (3.3, 3.7),
                },
                PowerBand {
                    weight: 0.6,
                    power_kw: (6.0, 11.0),
                },
                PowerBand {
                    weight: 0.15,
                    power_kw: (16.0, 22.0),
                },
            ],
        }
    }
}

impl CorpusSpec {
    /// A corpus with no charging at all.
    pub fn base_load_only(&self) -> CorpusSpec {
        CorpusSpec {
            event_probability: 0.0,
            ..self.clone()
        }
    }

    /// Mean of the declared energy distribution, kWh.
    pub fn energy_mean_kwh(&self) -> f64 {
        (self.energy_log_mu + 0.5 * self.energy_log_sigma * self.energy_log_sigma).exp()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.event_probability) {
            return Err(format!("event_probability {} outside [0, 1]", self.event_probability));
        }
        if self.start_time.is_empty() || self.power_mix.is_empty() {
            return Err("start_time and power_mix need at least one component".into());
        }
        if self.start_time.iter().any(|c| !(c.weight >= 0.0 && c.sd_hours > 0.0)) {
            return Err("start-time components need weight >= 0 and sd_hours > 0".into());
        }
        if self
            .power_mix
            .iter()
            .any(|b| !(b.weight >= 0.0 && 0.0 < b.power_kw.0 && b.power_kw.0 <= b.power_kw.1))
        {
            return Err("power bands need weight >= 0 and 0 < lo <= hi".into());
        }
        if self.energy_log_sigma.is_nan() || self.energy_log_sigma <= 0.0 {
            return Err("energy_log_sigma must be positive".into());
        }
        if !(self.base_load_kw >= self.base_noise_kw && self.base_noise_kw >= 0.0) {
            return Err("base load must be at least its noise amplitude".into());
        }
        Ok(())
    }
}

/// A session written into the corpus, aligned to the 15-minute grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedEvent {
    pub meter_id: u32,
    /// Index of the first slot in the meter's series.
    pub start_slot: usize,
    pub slots: usize,
    pub power_kw: f64,
    /// Energy actually written (less than drawn if the series ended).
    pub energy_kwh: f64,
}

impl InjectedEvent {
    pub fn duration_min(&self) -> f64 {
        (self.slots * SLOT_MINUTES) as f64
    }
}

/// What the generator was told and what it wrote, for later validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: CorpusSpec,
    pub seed: u64,
    pub energy_mean_kwh: f64,
    pub events: Vec<InjectedEvent>,
    /// Sessions dropped because they would have overlapped the previous one.
    pub skipped_overlaps: usize,
    /// Sessions cut short by the end of the series.
    pub truncated: usize,
}

impl GroundTruth {
    pub fn injected_energy_mean(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        self.events.iter().map(|e| e.energy_kwh).sum::<f64>() / self.events.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub series: Vec<MeterSeries>,
    pub truth: GroundTruth,
}

fn pick<T>(items: &[T], weight: impl Fn(&T) -> f64, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = items.iter().map(&weight).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, it) in items.iter().enumerate() {
        u -= weight(it);
        if u < 0.0 {
            return i;
        }
    }
    items.len() - 1
}

/// Household load shape: flat with a mild evening rise.
fn base_shape(slot: usize) -> f64 {
    let hour = slot as f64 * SLOT_MINUTES as f64 / 60.0;
    1.0 + 0.4 * (-(hour - 19.0).powi(2) / 8.0).exp()
}

pub fn generate_synthetic_corpus(spec: &CorpusSpec, seed: u64) -> Result<Corpus, String> {
    spec.validate()?;
    let mut rng = rng_for(seed, 1);
    let energy = LogNormal::new(spec.energy_log_mu, spec.energy_log_sigma).map_err(|e| e.to_string())?;
    let total_slots = spec.days * SLOTS_PER_DAY;
    let mut series = Vec::with_capacity(spec.meters);
    let mut events = Vec::new();
    let mut skipped = 0;
    let mut truncated = 0;

    for m in 0..spec.meters {
        let meter_id = m as u32 + 1;
        let mut samples: Vec<f64> = (0..total_slots)
            .map(|s| {
                let noise = rng.random_range(-1.0..=1.0) * spec.base_noise_kw;
                (spec.base_load_kw * base_shape(s % SLOTS_PER_DAY) + noise).max(0.0)
            })
            .collect();
        // Next free slot; one quiet slot separates sessions so runs never merge.
        let mut free_from = 0usize;
        for day in 0..spec.days {
            if rng.random::<f64>() >= spec.event_probability {
                continue;
            }
            let c = &spec.start_time[pick(&spec.start_time, |c| c.weight, &mut rng)];
            let hour = Normal::new(c.mean_hour, c.sd_hours).unwrap().sample(&mut rng);
            let slot_of_day = ((hour * 4.0).round() as i64).rem_euclid(SLOTS_PER_DAY as i64) as usize;
            let band = &spec.power_mix[pick(&spec.power_mix, |b| b.weight, &mut rng)];
            let nominal = rng.random_range(band.power_kw.0..=band.power_kw.1);
            let e = energy.sample(&mut rng);
            let slots = ((e / nominal * 4.0).round() as usize).max(2);
            let power = e / (slots as f64 * 0.25);
            let start = day * SLOTS_PER_DAY + slot_of_day;
            if start < free_from {
                skipped += 1;
                continue;
            }
            let end = (start + slots).min(total_slots);
            for s in &mut samples[start..end] {
                *s += power;
            }
            if end < start + slots {
                truncated += 1;
                log::info!("meter {meter_id}: session at slot {start} truncated by end of series");
            }
            events.push(InjectedEvent {
                meter_id,
                start_slot: start,
                slots: end - start,
                power_kw: power,
                energy_kwh: power * (end - start) as f64 * 0.25,
            });
            free_from = end + 1;
        }
        series.push(MeterSeries::new(meter_id, spec.start_date.clone(), samples).map_err(|e| e.to_string())?);
    }

    Ok(Corpus {
        series,
        truth: GroundTruth {
            spec: spec.clone(),
            seed,
            energy_mean_kwh: spec.energy_mean_kwh(),
            events,
            skipped_overlaps: skipped,
            truncated,
        },
    })
}
