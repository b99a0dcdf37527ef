//! Deterministic Sugarscape simulation engine.

pub mod amount;
pub mod bitstring;
pub mod config;
pub mod geometry;
pub mod invariants;
pub mod ledger;
pub mod metrics;
pub mod rng;
pub mod rules_async;
pub mod rules_env;
pub mod rules_sync;
pub mod scheduler;
pub mod snapshot;
pub mod spice_trade;
pub mod state;
pub mod terrain;

pub use amount::Amount;
pub use config::{SimConfig, UpdateMode};
pub use invariants::{check_invariants, CheckOptions};
pub use ledger::Ledger;
pub use metrics::{Metrics, StepRow};
pub use scheduler::{parse_plan, run, step, Plan, PlanError, Rule, StepError};
pub use state::{init_state, SimState};
