use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gridflex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridflex"))
        .args(args)
        .output()
        .expect("spawn gridflex")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> Value {
    read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/ieee33.json"))
}

fn one_bus(import_cap: f64) -> String {
    let flat = |v: f64| vec![v; 24];
    serde_json::json!({
        "buses": [{"id": 1, "load_profile": flat(2.0)}],
        "lines": [],
        "substations": [{"id": 1, "bus": 1, "price_profile": flat(40.0), "import_cap": import_cap}]
    })
    .to_string()
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, one_bus(5.0)).unwrap();
    assert_eq!(code(&gridflex(&["validate", "--instance", path(&good)])), 0);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{}").unwrap();
    assert_eq!(code(&gridflex(&["validate", "--instance", path(&bad)])), 1);

    let broken = dir.path().join("broken.json");
    let mut doc = fixture();
    doc["lines"][3]["to_bus"] = 99.into();
    fs::write(&broken, doc.to_string()).unwrap();
    let run = gridflex(&["validate", "--instance", path(&broken)]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stdout).contains("lines[3].to_bus"));

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&gridflex(&["validate", "--instance", path(&missing)])), 2);
}

#[test]
fn feasible_solve_writes_the_results_schema() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let run = gridflex(&["solve", "--config", "sdntr", "--hours", "3", "--out", path(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = read_json(&out);
    assert_eq!(r["status"], "feasible");
    assert!(r["cost_usd"].as_f64().unwrap() > 0.0);
    assert_eq!(r["schedule"]["hour"].as_array().unwrap().len(), 3);
    assert_eq!(r["verification"]["pass"], true);
    for key in ["nodes", "lp_iterations", "wall_ms"] {
        assert!(r["stats"][key].is_u64(), "stats.{key}");
    }
}

#[test]
fn infeasible_and_limited_solves_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let tight = dir.path().join("tight.json");
    fs::write(&tight, one_bus(1.0)).unwrap();
    let out = dir.path().join("inf.json");
    let run = gridflex(&[
        "solve",
        "--instance",
        path(&tight),
        "--config",
        "sdn",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&run), 3);
    let r = read_json(&out);
    assert_eq!(r["status"], "infeasible");
    assert!(r["cost_usd"].is_null() && r["schedule"].is_null());

    let run = gridflex(&["solve", "--config", "sdn", "--penetration", "0.7"]);
    assert_eq!(code(&run), 3);
    assert_eq!(
        serde_json::from_slice::<Value>(&run.stdout).unwrap()["status"],
        "infeasible"
    );

    let run = gridflex(&["solve", "--config", "sdntr-der", "--node-limit", "1"]);
    assert_eq!(code(&run), 4);
    let r: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(r["status"], "limit_reached");
}

#[test]
fn zero_penetration_matches_no_ev_profile() {
    let dir = TempDir::new().unwrap();
    let with = dir.path().join("with.json");
    let without = dir.path().join("without.json");
    let base = ["solve", "--config", "sdn", "--hours", "6"];
    let mut args = base.to_vec();
    args.extend(["--penetration", "0", "--out", path(&with)]);
    assert_eq!(code(&gridflex(&args)), 0);

    let inst = dir.path().join("no_ev.json");
    let mut doc = fixture();
    doc["ev_allocation"] = Value::Array(vec![]);
    fs::write(&inst, doc.to_string()).unwrap();
    let mut args = base.to_vec();
    args.extend(["--instance", path(&inst), "--out", path(&without)]);
    assert_eq!(code(&gridflex(&args)), 0);
    assert_eq!(read_json(&with)["cost_usd"], read_json(&without)["cost_usd"]);
}

#[test]
fn sweep_is_deterministic_and_cells_match_standalone_solves() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = gridflex(&["sweep", "--penetrations", "0,0.4", "--hours", "3", "--out", path(out)]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    for f in ["sweep.csv", "sweep_plot.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |mut v: Value| {
        for cell in v["cells"].as_array_mut().unwrap() {
            cell.as_object_mut().unwrap().retain(|k, _| k != "wall_ms");
        }
        v
    };
    assert_eq!(
        strip(read_json(&a.join("sweep.json"))),
        strip(read_json(&b.join("sweep.json")))
    );

    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "penetration,SDN,SDNTR,SDN-DER,SDNTR-DER");
    assert_eq!(csv.lines().count(), 3);

    let single = dir.path().join("single.json");
    let run = gridflex(&[
        "solve",
        "--config",
        "sdntr-der",
        "--penetration",
        "0.4",
        "--hours",
        "3",
        "--out",
        path(&single),
    ]);
    assert_eq!(code(&run), 0);
    let mut cell = read_json(&a.join("cells").join("sdntr-der_p0.4.json"));
    let mut alone = read_json(&single);
    for v in [&mut cell, &mut alone] {
        v["stats"].as_object_mut().unwrap().remove("wall_ms");
    }
    assert_eq!(cell, alone);
}

#[test]
fn single_level_sweep_has_four_cells() {
    let dir = TempDir::new().unwrap();
    let run = gridflex(&[
        "sweep",
        "--penetrations",
        "0",
        "--hours",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&run), 0);
    let report = read_json(&dir.path().join("sweep.json"));
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_dir(dir.path().join("cells")).unwrap().count(), 4);
}

#[test]
fn evgen_writes_a_profile_and_scenarios() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one");
    assert_eq!(code(&gridflex(&["evgen", "--out", path(&one)])), 0);
    let csv = fs::read_to_string(one.join("ev_profile.csv")).unwrap();
    assert!(csv.lines().count() > 24);
    assert!(one.join("provenance.json").exists() && one.join("stats.json").exists());

    let again = dir.path().join("again");
    assert_eq!(code(&gridflex(&["evgen", "--out", path(&again)])), 0);
    assert_eq!(csv, fs::read_to_string(again.join("ev_profile.csv")).unwrap());

    let many = dir.path().join("many");
    assert_eq!(code(&gridflex(&["evgen", "--scenarios", "2", "--out", path(&many)])), 0);
    for f in [
        "scenario_0001.csv",
        "scenario_0001.json",
        "scenario_0002.csv",
        "scenario_0002.json",
    ] {
        assert!(many.join("scenarios").join(f).exists(), "{f}");
    }
    let stats = read_json(&many.join("statistics.json"));
    assert_eq!(stats["scenarios"], 2);
    let f = stats["charging_day_fraction"].as_f64().unwrap();
    assert!((0.8..=1.0).contains(&f), "{f}");
}

#[test]
fn out_of_range_penetration_is_rejected() {
    let run = gridflex(&["solve", "--config", "sdn", "--penetration", "1.5"]);
    assert_ne!(code(&run), 0);
}
