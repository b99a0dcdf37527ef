//! Simulation constants and engine settings, loaded from TOML.
//!
//! Model constants are top-level keys in upper snake case (`M`, `SUGARGROWTH`,
//! ...). The optional `[spice]` table switches on the dual-resource engine;
//! `[disease]` lists the disease strings; `[engine]` holds the seed, plan and
//! interpretation switches.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::amount::Grain;
use crate::bitstring::BitString;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// A non-negative rational, written `"n/d"`, an exact decimal, or an integer.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub const ZERO: Rate = Rate { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Rate {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den);
        Rate {
            num: num / g,
            den: den / g,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rate {
    type Err = String;

    fn from_str(s: &str) -> Result<Rate, String> {
        let s = s.trim();
        let bad = || format!("expected a non-negative rational like \"1/10\" or \"0.1\", got {s:?}");
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Rate::new(n, d));
        }
        let (w, f) = s.split_once('.').unwrap_or((s, ""));
        if w.is_empty() || f.len() > 18 {
            return Err(bad());
        }
        let digits = format!("{w}{f}");
        let num: u64 = digits.parse().map_err(|_| bad())?;
        Ok(Rate::new(num, 10u64.pow(f.len() as u32)))
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Rate, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Int(n) => return Ok(Rate::new(n, 1)),
            Repr::Float(x) => format!("{x}"),
            Repr::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    #[default]
    Sync,
    LineByLine,
    FixedRandomSweep,
    RandomNewSweep,
    UniformChoice,
    #[serde(alias = "exponential_waiting")]
    Exponential,
}

impl UpdateMode {
    pub const ALL: [UpdateMode; 6] = [
        UpdateMode::Sync,
        UpdateMode::LineByLine,
        UpdateMode::FixedRandomSweep,
        UpdateMode::RandomNewSweep,
        UpdateMode::UniformChoice,
        UpdateMode::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::Sync => "sync",
            UpdateMode::LineByLine => "line_by_line",
            UpdateMode::FixedRandomSweep => "fixed_random_sweep",
            UpdateMode::RandomNewSweep => "random_new_sweep",
            UpdateMode::UniformChoice => "uniform_choice",
            UpdateMode::Exponential => "exponential",
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<UpdateMode, String> {
        if s == "exponential_waiting" {
            return Ok(UpdateMode::Exponential);
        }
        UpdateMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown update mode {s:?}"))
    }
}

/// How cells are scored in dual-resource mode.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WelfareForm {
    #[default]
    CobbDouglas,
    LiteralProduct,
}

/// Growth on winter cells under seasonal growback.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WinterMode {
    /// `SUGARGROWTH ÷ WINTERRATE` every step (integer division).
    #[default]
    LiteralDiv,
    /// Full `SUGARGROWTH` on steps divisible by `WINTERRATE`, nothing otherwise.
    EveryBetaSteps,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatingThreshold {
    /// Store must exceed the initial endowment.
    #[default]
    Strict,
    /// Store must be at least the initial endowment.
    Weak,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpiceConfig {
    #[serde(rename = "MAXSPICEMETABOLISM")]
    pub max_spice_metabolism: u32,
    #[serde(rename = "SPICEGROWTH")]
    pub spice_growth: u32,
    #[serde(rename = "MAXSPICE")]
    pub max_spice: u32,
    #[serde(rename = "INITIALSPICEMIN")]
    pub initial_spice_min: u32,
    #[serde(rename = "INITIALSPICEMAX")]
    pub initial_spice_max: u32,
    #[serde(rename = "SPICEPRODUCTION")]
    pub spice_production: u32,
    #[serde(rename = "SPICECONSUMPTION")]
    pub spice_consumption: u32,
    #[serde(rename = "SPICECOMBATLIMIT")]
    pub spice_combat_limit: u32,
    #[serde(rename = "SPICECHILDAMT")]
    pub spice_child_amt: u32,
}

impl Default for SpiceConfig {
    fn default() -> SpiceConfig {
        SpiceConfig {
            max_spice_metabolism: 4,
            spice_growth: 1,
            max_spice: 4,
            initial_spice_min: 5,
            initial_spice_max: 25,
            spice_production: 1,
            spice_consumption: 1,
            spice_combat_limit: 4,
            spice_child_amt: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DiseaseConfig {
    /// Disease strings, e.g. `["0110", "101"]`.
    #[serde(deserialize_with = "bitstrings")]
    pub strings: Vec<BitString>,
    /// Distinct diseases given to each agent at initialisation.
    pub initial_per_agent: u32,
}

fn bitstrings<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BitString>, D::Error> {
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub seed: u64,
    pub update_mode: UpdateMode,
    pub plan: String,
    pub welfare_form: WelfareForm,
    pub winter_mode: WinterMode,
    pub mating_threshold: MatingThreshold,
    /// Write a snapshot every N steps; 0 disables.
    pub snapshot_every: u64,
    pub terrain: Option<PathBuf>,
    pub spice_terrain: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            seed: 0,
            update_mode: UpdateMode::Sync,
            plan: "tick;growback;movement_basic".to_string(),
            welfare_form: WelfareForm::CobbDouglas,
            winter_mode: WinterMode::LiteralDiv,
            mating_threshold: MatingThreshold::Strict,
            snapshot_every: 0,
            terrain: None,
            spice_terrain: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "CULTURECOUNT")]
    pub culture_count: u32,
    #[serde(rename = "MAXVISION")]
    pub max_vision: u32,
    #[serde(rename = "MINMETABOLISM")]
    pub min_metabolism: u32,
    #[serde(rename = "MAXMETABOLISM")]
    pub max_metabolism: u32,
    #[serde(rename = "SUGARGROWTH")]
    pub sugar_growth: u32,
    #[serde(rename = "MINAGE")]
    pub min_age: u32,
    #[serde(rename = "MAXAGE")]
    pub max_age: u32,
    #[serde(rename = "MAXSUGAR")]
    pub max_sugar: u32,
    #[serde(rename = "DURATION")]
    pub duration: u64,
    #[serde(rename = "RATE")]
    pub rate: Rate,
    #[serde(rename = "INITIALSUGARMIN")]
    pub initial_sugar_min: u32,
    #[serde(rename = "INITIALSUGARMAX")]
    pub initial_sugar_max: u32,
    #[serde(rename = "WINTERRATE")]
    pub winter_rate: u32,
    #[serde(rename = "SEASONLENGTH")]
    pub season_length: u64,
    #[serde(rename = "PRODUCTION")]
    pub production: u32,
    #[serde(rename = "CONSUMPTION")]
    pub consumption: u32,
    #[serde(rename = "COMBATLIMIT")]
    pub combat_limit: u32,
    #[serde(rename = "IMMUNITYLENGTH")]
    pub immunity_length: u32,
    #[serde(rename = "INITIALPOPULATIONSIZE")]
    pub initial_population_size: u32,
    #[serde(rename = "POLLUTIONRATE")]
    pub pollution_rate: u64,
    #[serde(rename = "CHILDAMT")]
    pub child_amt: u32,
    #[serde(rename = "FEMALEFERTILITYSTART")]
    pub female_fertility_start: u32,
    #[serde(rename = "FEMALEFERTILITYEND")]
    pub female_fertility_end: u32,
    #[serde(rename = "MALEFERTILITYSTART")]
    pub male_fertility_start: u32,
    #[serde(rename = "MALEFERTILITYEND")]
    pub male_fertility_end: u32,
    #[serde(rename = "STARTSUGARMIN")]
    pub start_sugar_min: u32,
    #[serde(rename = "STARTSUGARMAX")]
    pub start_sugar_max: u32,
    pub spice: Option<SpiceConfig>,
    pub disease: DiseaseConfig,
    pub engine: EngineConfig,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            m: 50,
            culture_count: 11,
            max_vision: 6,
            min_metabolism: 1,
            max_metabolism: 4,
            sugar_growth: 1,
            min_age: 60,
            max_age: 100,
            max_sugar: 4,
            duration: 10,
            rate: Rate::new(1, 10),
            initial_sugar_min: 5,
            initial_sugar_max: 25,
            winter_rate: 8,
            season_length: 50,
            production: 1,
            consumption: 1,
            combat_limit: 4,
            immunity_length: 50,
            initial_population_size: 400,
            pollution_rate: 1,
            child_amt: 50,
            female_fertility_start: 12,
            female_fertility_end: 40,
            male_fertility_start: 12,
            male_fertility_end: 50,
            start_sugar_min: 5,
            start_sugar_max: 25,
            spice: None,
            disease: DiseaseConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl SimConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_dual(&self) -> bool {
        self.spice.is_some()
    }

    /// Floor resolution for stores: whole units, or the tick grid in dual mode.
    pub fn grain(&self) -> Grain {
        if self.is_dual() {
            Grain::Tick
        } else {
            Grain::Unit
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 || self.m > 4096 {
            return Err(invalid("M", "must lie in 1..=4096"));
        }
        if self.culture_count.is_multiple_of(2) {
            return Err(invalid("CULTURECOUNT", "must be odd"));
        }
        if self.min_metabolism >= self.max_metabolism {
            return Err(invalid("MINMETABOLISM", "must be less than MAXMETABOLISM"));
        }
        if self.min_age > self.max_age {
            return Err(invalid("MINAGE", "must not exceed MAXAGE"));
        }
        if self.max_vision == 0 {
            return Err(invalid("MAXVISION", "must be at least 1"));
        }
        if self.max_vision >= self.m {
            return Err(invalid("MAXVISION", "must be less than M"));
        }
        if self.initial_sugar_min >= self.initial_sugar_max {
            return Err(invalid("INITIALSUGARMIN", "must be less than INITIALSUGARMAX"));
        }
        if self.start_sugar_min > self.start_sugar_max {
            return Err(invalid("STARTSUGARMIN", "must not exceed STARTSUGARMAX"));
        }
        let cells = self.m as u64 * self.m as u64;
        if self.initial_population_size as u64 > cells {
            return Err(invalid(
                "INITIALPOPULATIONSIZE",
                format!("must not exceed M*M = {cells}"),
            ));
        }
        if !(12..=15).contains(&self.female_fertility_start) {
            return Err(invalid("FEMALEFERTILITYSTART", "must lie in 12..=15"));
        }
        if !(40..=50).contains(&self.female_fertility_end) {
            return Err(invalid("FEMALEFERTILITYEND", "must lie in 40..=50"));
        }
        if !(12..=15).contains(&self.male_fertility_start) {
            return Err(invalid("MALEFERTILITYSTART", "must lie in 12..=15"));
        }
        if self.male_fertility_end != self.female_fertility_end + 10 {
            return Err(invalid("MALEFERTILITYEND", "must equal FEMALEFERTILITYEND + 10"));
        }
        if self.season_length == 0 {
            return Err(invalid("SEASONLENGTH", "must be at least 1"));
        }
        if self.winter_rate == 0 {
            return Err(invalid("WINTERRATE", "must be at least 1"));
        }
        if self.pollution_rate == 0 {
            return Err(invalid("POLLUTIONRATE", "must be at least 1"));
        }
        if let Some(d) = self
            .disease
            .strings
            .iter()
            .find(|d| d.len() >= self.immunity_length as usize)
        {
            return Err(invalid(
                "IMMUNITYLENGTH",
                format!("must exceed the length of every disease string ({d} has {})", d.len()),
            ));
        }
        let distinct: std::collections::BTreeSet<_> = self.disease.strings.iter().collect();
        if self.disease.initial_per_agent as usize > distinct.len() {
            return Err(invalid(
                "disease.initial_per_agent",
                "must not exceed the number of distinct disease strings",
            ));
        }
        if let Some(s) = &self.spice {
            if s.initial_spice_min > s.initial_spice_max {
                return Err(invalid("INITIALSPICEMIN", "must not exceed INITIALSPICEMAX"));
            }
        }
        Ok(())
    }
}
