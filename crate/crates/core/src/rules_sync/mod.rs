//! Synchronous rules: every agent acts on the state as it was at the start
//! of the rule, and conflicts are settled explicitly.

pub mod combat;
pub mod credit;
pub mod culture;
pub mod lifecycle;
pub mod matching;
pub mod movement;

pub use combat::{combat, combat_reward};
pub use credit::{credit_eligibility, loan_amount_due, make_loans, pay_loans, Eligibility};
pub use culture::{culture, immune_response, transmission};
pub use lifecycle::{death, inheritance, mating, replacement, tick};
pub use matching::{conflict_free_pairs, Pair};
pub use movement::movement;
