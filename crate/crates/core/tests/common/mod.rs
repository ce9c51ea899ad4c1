//! Small instances built from JSON for tests.
#![allow(dead_code)]

use gridflex_core::network::{load_instance, NetworkInstance};
use serde_json::{json, Value};

pub fn flat(v: f64) -> Value {
    json!(vec![v; 24])
}

/// One bus carrying `load` MW every hour, fed by one substation at `price`.
pub fn one_bus(load: f64, price: f64) -> Value {
    json!({
        "buses": [{"id": 1, "name": "only", "load_profile": flat(load)}],
        "lines": [],
        "substations": [{"id": 1, "bus": 1, "price_profile": flat(price), "import_cap": 100.0}]
    })
}

/// Buses 1..=n with flat `load`, the given lines `(id, from, to, switchable,
/// normally_closed)`, and substations at `subs`.
pub fn graph(n: u32, lines: &[(u32, u32, u32, bool, bool)], subs: &[u32], load: f64) -> Value {
    json!({
        "buses": (1..=n).map(|b| json!({"id": b, "load_profile": flat(load)})).collect::<Vec<_>>(),
        "lines": lines.iter().map(|&(id, f, t, sw, nc)| json!({
            "id": id, "from_bus": f, "to_bus": t, "reactance_x": 0.05, "rating": 10.0,
            "switchable": sw, "normally_closed": nc
        })).collect::<Vec<_>>(),
        "substations": subs.iter().enumerate().map(|(i, &b)| json!({
            "id": i + 1, "bus": b, "price_profile": flat(30.0 + 10.0 * i as f64), "import_cap": 100.0
        })).collect::<Vec<_>>()
    })
}

pub fn instance(doc: &Value) -> NetworkInstance {
    load_instance(&doc.to_string()).expect("test instance loads")
}
