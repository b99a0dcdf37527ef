//! Shared fixtures for the engine benchmarks.

use sugarlat::config::SpiceConfig;
use sugarlat::{init_state, parse_plan, Plan, SimConfig, SimState, UpdateMode};

/// Default landscape and population, with or without spice.
pub fn config(dual: bool) -> SimConfig {
    SimConfig {
        spice: dual.then(SpiceConfig::default),
        ..SimConfig::default()
    }
}

/// A state advanced `warmup` steps under `plan`, so agents have spread out.
pub fn warmed(cfg: &SimConfig, plan: &Plan, warmup: u64) -> SimState {
    let mut s = init_state(cfg, 1).expect("default config initialises");
    for _ in 0..warmup {
        sugarlat::step(&mut s, cfg, plan, false).expect("unchecked step");
    }
    s
}

pub fn plan(text: &str, dual: bool, mode: UpdateMode) -> Plan {
    parse_plan(text, dual, mode).expect("benchmark plans are legal")
}
