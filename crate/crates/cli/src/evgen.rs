//! The evgen command: EV demand profiles from the synthetic-corpus pipeline.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use gridflex_core::ev::{
    fit_pipeline, scenario_seeds, simulate_profile, FleetStats, PipelineOutput, PipelineSpec, Provenance,
};
use gridflex_core::fixtures;
use gridflex_core::network::{load_instance, EvWeight, Profile};
use gridflex_core::study::DEFAULT_SEED;
use serde::Serialize;

use crate::output::{write_atomic, write_csv, write_json};

#[derive(Debug, Args)]
pub struct EvgenArgs {
    /// Pipeline settings JSON (corpus, thresholds, classes, fleet);
    /// defaults for every omitted field.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Bus allocation JSON, a list of {"bus", "weight"}; the instance's
    /// EV allocation when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Instance supplying the default allocation; the bundled feeder when omitted.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Statistics mode: simulate this many independent fleet scenarios on
    /// one fitted model and write one provenance-tagged file pair each.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn weights(args: &EvgenArgs) -> Result<Vec<EvWeight>> {
    if let Some(p) = &args.weights {
        return read_json(p);
    }
    let inst = match &args.instance {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_instance(&text).with_context(|| format!("loading {}", p.display()))?
        }
        None => fixtures::ieee33(),
    };
    if inst.ev_allocation.is_empty() {
        bail!("the instance has no ev_allocation; pass --weights");
    }
    Ok(inst.ev_allocation)
}

#[derive(Serialize)]
struct ScenarioFile<'a> {
    scenario: usize,
    seed: u64,
    provenance: &'a Provenance,
    stats: &'a FleetStats,
}

#[derive(Serialize)]
struct ScenarioRow {
    scenario: usize,
    seed: u64,
    charging_day_fraction: f64,
    sampled_energy_kwh: f64,
    profile_energy_kwh: f64,
    peak_mw: f64,
}

#[derive(Serialize)]
struct Statistics {
    scenarios: usize,
    base_seed: u64,
    ev_days: usize,
    charging_day_fraction: f64,
    charging_day_fraction_min: f64,
    charging_day_fraction_max: f64,
    /// Mean over scenarios of the mean-day fleet demand, MW.
    hourly_mw: Profile,
}

pub fn evgen(args: &EvgenArgs) -> Result<u8> {
    let spec: PipelineSpec = match &args.spec {
        Some(p) => read_json(p)?,
        None => PipelineSpec::default(),
    };
    let weights = weights(args)?;
    let fitted = fit_pipeline(&spec, args.seed)?;
    let out = &args.out;

    let Some(n) = args.scenarios else {
        let run = simulate_profile(&spec, &fitted, &weights, args.seed)?;
        write_atomic(&out.join("ev_profile.csv"), run.profile.to_csv().as_bytes())?;
        write_json(&out.join("provenance.json"), &run.provenance)?;
        write_json(&out.join("stats.json"), &run.stats)?;
        print_stats(&run);
        return Ok(0);
    };

    let dir = out.join("scenarios");
    let mut rows = Vec::with_capacity(n);
    let mut hourly = Profile::ZERO;
    let (mut ev_days, mut charging_days) = (0, 0);
    for (i, seed) in scenario_seeds(args.seed, n).into_iter().enumerate() {
        let index = i + 1;
        let run = simulate_profile(&spec, &fitted, &weights, seed)?;
        let stem = format!("scenario_{index:04}");
        write_atomic(&dir.join(format!("{stem}.csv")), run.profile.to_csv().as_bytes())?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &ScenarioFile {
                scenario: index,
                seed,
                provenance: &run.provenance,
                stats: &run.stats,
            },
        )?;
        for (h, v) in hourly.0.iter_mut().zip(run.stats.hourly_mw.0) {
            *h += v / n as f64;
        }
        ev_days += run.stats.ev_days;
        charging_days += run.stats.charging_days;
        rows.push(ScenarioRow {
            scenario: index,
            seed,
            charging_day_fraction: run.stats.charging_day_fraction,
            sampled_energy_kwh: run.stats.sampled_energy_kwh,
            profile_energy_kwh: run.stats.profile_energy_kwh,
            peak_mw: run.stats.hourly_mw.max(),
        });
    }
    let fractions = rows.iter().map(|r| r.charging_day_fraction);
    let stats = Statistics {
        scenarios: n,
        base_seed: args.seed,
        ev_days,
        charging_day_fraction: if ev_days == 0 {
            0.0
        } else {
            charging_days as f64 / ev_days as f64
        },
        charging_day_fraction_min: fractions.clone().fold(f64::INFINITY, f64::min),
        charging_day_fraction_max: fractions.fold(f64::NEG_INFINITY, f64::max),
        hourly_mw: hourly,
    };
    write_csv(&out.join("scenario_summary.csv"), None, rows)?;
    write_json(&out.join("statistics.json"), &stats)?;
    eprintln!(
        "{n} scenarios, {ev_days} EV-days, charging-day fraction {:.4}",
        stats.charging_day_fraction
    );
    Ok(0)
}

fn print_stats(run: &PipelineOutput) {
    let s = &run.stats;
    eprintln!(
        "{} EV-days, charging-day fraction {:.4}, events by class {:?}",
        s.ev_days, s.charging_day_fraction, s.events_by_class
    );
    eprintln!(
        "sampled {:.1} kWh, profile {:.1} kWh, peak {:.3} MW",
        s.sampled_energy_kwh,
        s.profile_energy_kwh,
        s.hourly_mw.max()
    );
}
