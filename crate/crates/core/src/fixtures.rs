//! Bundled test feeder.

use crate::network::{load_instance, NetworkInstance};

pub const IEEE33_JSON: &str = include_str!("../fixtures/ieee33.json");

/// The 33-bus feeder with two substations.
pub fn ieee33() -> NetworkInstance {
    load_instance(IEEE33_JSON).expect("bundled fixture parses")
}
