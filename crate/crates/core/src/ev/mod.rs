//! EV charging demand: synthetic meter data, session extraction, kernel
//! density models per power class, fleet simulation and nodal profiles.

pub mod corpus;
pub mod events;
pub mod fleet;
pub mod kde;
pub mod profile;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{generate_synthetic_corpus, Corpus, CorpusSpec, GroundTruth, MeterSeries};
pub use events::{classify_event, extract_events, ChargingEvent, ClassLabel, ProfileClass, ProfileClasses, Thresholds};
pub use fleet::{fit_class_models, simulate_fleet, EvFleetSpec, FittedClasses, FleetEvent, FleetSimulation};
pub use kde::{fit_kde, sample_kde, silverman_bandwidth, BandwidthRule, KdeError, KdeModel, Support};
pub use profile::{build_demand_profile, EvDemandProfile, ProfileError};

use crate::network::{EvWeight, Profile};

/// Independent random stream `stream` under `seed`.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error)]
pub enum EvError {
    #[error("invalid pipeline settings: {0}")]
    Spec(String),
    #[error(transparent)]
    Kde(#[from] KdeError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Everything the pipeline needs besides the seed and bus weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSpec {
    pub corpus: CorpusSpec,
    pub thresholds: Thresholds,
    pub classes: ProfileClasses,
    pub bandwidth: BandwidthRule,
    /// Vehicles per class in the 100% reference fleet.
    pub fleet: BTreeMap<ClassLabel, usize>,
    pub p_daily: f64,
    pub days: usize,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            corpus: CorpusSpec::default(),
            thresholds: Thresholds::default(),
            classes: ProfileClasses::default(),
            bandwidth: BandwidthRule::Silverman,
            fleet: BTreeMap::from([
                (ClassLabel::Low, 170),
                (ClassLabel::Normal, 440),
                (ClassLabel::High, 110),
            ]),
            p_daily: 0.9,
            days: 365,
        }
    }
}

impl PipelineSpec {
    pub fn fleet_spec(&self, seed: u64) -> EvFleetSpec {
        EvFleetSpec {
            fleet: self.fleet.clone(),
            p_daily: self.p_daily,
            days: self.days,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub start_min: f64,
    pub duration_min: f64,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub classes: ProfileClasses,
    pub bandwidths: BTreeMap<ClassLabel, Bandwidths>,
    pub extracted_events: BTreeMap<ClassLabel, usize>,
    pub corpus: CorpusSpec,
    pub fleet: EvFleetSpec,
    pub model_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetStats {
    pub ev_days: usize,
    pub charging_days: usize,
    pub charging_day_fraction: f64,
    pub events_by_class: BTreeMap<ClassLabel, usize>,
    /// Mean-day fleet demand per hour, MW.
    pub hourly_mw: Profile,
    pub sampled_energy_kwh: f64,
    /// Profile energy times days, kWh.
    pub profile_energy_kwh: f64,
}

impl FleetStats {
    pub fn new(sim: &FleetSimulation, profile: &EvDemandProfile) -> FleetStats {
        let hourly = profile.system_profile();
        FleetStats {
            ev_days: sim.ev_days,
            charging_days: sim.charging_days,
            charging_day_fraction: sim.charging_day_fraction(),
            events_by_class: sim.count_by_class(),
            hourly_mw: hourly,
            sampled_energy_kwh: sim.total_energy_kwh(),
            profile_energy_kwh: hourly.sum() * 1000.0 * sim.days as f64,
        }
    }
}

/// Corpus, extracted events and fitted class models, before fleet simulation.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub corpus: Corpus,
    pub events: Vec<ChargingEvent>,
    pub fitted: FittedClasses,
}

pub fn fit_pipeline(spec: &PipelineSpec, seed: u64) -> Result<FittedPipeline, EvError> {
    let corpus = generate_synthetic_corpus(&spec.corpus, seed).map_err(EvError::Spec)?;
    let events: Vec<ChargingEvent> = corpus
        .series
        .iter()
        .flat_map(|s| extract_events(s, spec.thresholds))
        .collect();
    let fitted = fit_class_models(&events, &spec.classes, spec.bandwidth)?;
    Ok(FittedPipeline { corpus, events, fitted })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub profile: EvDemandProfile,
    pub provenance: Provenance,
    pub stats: FleetStats,
    pub simulation: FleetSimulation,
}

fn model_ids(fitted: &FittedClasses) -> Vec<String> {
    fitted
        .models
        .values()
        .flat_map(|m| [&m.start.feature, &m.duration.feature, &m.energy.feature])
        .cloned()
        .collect()
}

/// Simulate one fleet on already-fitted models and build its profile.
pub fn simulate_profile(
    spec: &PipelineSpec,
    fitted: &FittedPipeline,
    weights: &[EvWeight],
    seed: u64,
) -> Result<PipelineOutput, EvError> {
    let fleet_spec = spec.fleet_spec(seed);
    let simulation = simulate_fleet(&fleet_spec, &fitted.fitted).map_err(EvError::Spec)?;
    let mut profile = build_demand_profile(&simulation.events, weights, spec.days)?;
    profile.seed = Some(seed);
    profile.model_ids = model_ids(&fitted.fitted);
    let provenance = Provenance {
        seed,
        thresholds: spec.thresholds,
        classes: spec.classes.clone(),
        bandwidths: fitted
            .fitted
            .models
            .iter()
            .map(|(l, m)| {
                (
                    *l,
                    Bandwidths {
                        start_min: m.start.bandwidth,
                        duration_min: m.duration.bandwidth,
                        energy_kwh: m.energy.bandwidth,
                    },
                )
            })
            .collect(),
        extracted_events: fitted.fitted.event_counts.clone(),
        corpus: spec.corpus.clone(),
        fleet: fleet_spec,
        model_ids: profile.model_ids.clone(),
    };
    let stats = FleetStats::new(&simulation, &profile);
    Ok(PipelineOutput {
        profile,
        provenance,
        stats,
        simulation,
    })
}

/// Corpus through profile under one seed.
pub fn run_pipeline(spec: &PipelineSpec, weights: &[EvWeight], seed: u64) -> Result<PipelineOutput, EvError> {
    let fitted = fit_pipeline(spec, seed)?;
    simulate_profile(spec, &fitted, weights, seed)
}

/// Seeds for `n` independent fleet scenarios derived from `seed`.
pub fn scenario_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = rng_for(seed, 4);
    (0..n).map(|_| rng.random()).collect()
}
