//! Rule plans: parsing, validation against the rule-combination grammar, and
//! step execution with optional invariant checking.

use std::fmt;

use crate::config::{SimConfig, UpdateMode};
use crate::invariants::{check_invariants, CheckOptions, Report};
use crate::ledger::Ledger;
use crate::metrics::{Metrics, StepRow};
use crate::rules_async as asynch;
use crate::rules_env::{growback, pollution_diffusion, seasonal_growback};
use crate::rules_sync as sync;
use crate::spice_trade::{trade_async, trade_sync};
use crate::state::SimState;

/// One rule kind. Declaration order is the canonical order within a step.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Rule {
    Tick,
    Growback,
    SeasonalGrowback,
    MovementBasic,
    MovementPollution,
    PollutionDiffusion,
    Combat,
    Inheritance,
    Death,
    Replacement,
    Mating,
    Culture,
    PayLoans,
    MakeLoans,
    Transmission,
    ImmuneResponse,
    Trade,
}

impl Rule {
    pub const ALL: [Rule; 17] = [
        Rule::Tick,
        Rule::Growback,
        Rule::SeasonalGrowback,
        Rule::MovementBasic,
        Rule::MovementPollution,
        Rule::PollutionDiffusion,
        Rule::Combat,
        Rule::Inheritance,
        Rule::Death,
        Rule::Replacement,
        Rule::Mating,
        Rule::Culture,
        Rule::PayLoans,
        Rule::MakeLoans,
        Rule::Transmission,
        Rule::ImmuneResponse,
        Rule::Trade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Tick => "tick",
            Rule::Growback => "growback",
            Rule::SeasonalGrowback => "seasonal_growback",
            Rule::MovementBasic => "movement_basic",
            Rule::MovementPollution => "movement_pollution",
            Rule::PollutionDiffusion => "pollution_diffusion",
            Rule::Combat => "combat",
            Rule::Inheritance => "inheritance",
            Rule::Death => "death",
            Rule::Replacement => "replacement",
            Rule::Mating => "mating",
            Rule::Culture => "culture",
            Rule::PayLoans => "pay_loans",
            Rule::MakeLoans => "make_loans",
            Rule::Transmission => "transmission",
            Rule::ImmuneResponse => "immune_response",
            Rule::Trade => "trade",
        }
    }

    pub fn from_name(name: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn index(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan is empty")]
    Empty,
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{0}` appears more than once")]
    Duplicate(Rule),
    #[error("constraint violated: {0}")]
    Constraint(&'static str),
    #[error("rule `{rule}` must come before `{after}`")]
    OutOfOrder { rule: Rule, after: Rule },
}

/// A validated rule sequence together with the update mode and resource
/// mode it was validated for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    rules: Vec<Rule>,
    pub mode: UpdateMode,
    pub dual: bool,
}

impl Plan {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.rules.contains(&rule)
    }

    /// Semicolon-separated rule names.
    pub fn canonical(&self) -> String {
        self.rules.iter().map(|r| r.name()).collect::<Vec<_>>().join(";")
    }

    /// Without Death ages may run past the limit legitimately.
    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            enforce_age_limit: self.has(Rule::Death),
        }
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Parses a plan expression such as `tick;growback;movement_basic`. Names
/// are case-insensitive and surrounding whitespace or a trailing `;` is
/// ignored. Combination constraints are checked before order, so a
/// forbidden pair is reported as such even when written in order.
pub fn parse_plan(text: &str, dual: bool, mode: UpdateMode) -> Result<Plan, PlanError> {
    let mut rules = Vec::new();
    for tok in text.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let rule = Rule::from_name(&tok.to_ascii_lowercase()).ok_or_else(|| PlanError::UnknownRule(tok.to_string()))?;
        if rules.contains(&rule) {
            return Err(PlanError::Duplicate(rule));
        }
        rules.push(rule);
    }
    if rules.is_empty() {
        return Err(PlanError::Empty);
    }
    check_combination(&rules, dual)?;
    for w in rules.windows(2) {
        if w[1] < w[0] {
            return Err(PlanError::OutOfOrder {
                rule: w[1],
                after: w[0],
            });
        }
    }
    Ok(Plan { rules, mode, dual })
}

fn check_combination(rules: &[Rule], dual: bool) -> Result<(), PlanError> {
    use Rule::*;
    let has = |r: Rule| rules.contains(&r);
    let count = |rs: &[Rule]| rs.iter().filter(|r| has(**r)).count();
    let fail = |msg| Err(PlanError::Constraint(msg));
    if !has(Tick) {
        return fail("tick is required");
    }
    match count(&[Growback, SeasonalGrowback]) {
        0 => return fail("one of growback, seasonal_growback is required"),
        1 => {}
        _ => return fail("growback and seasonal_growback are mutually exclusive"),
    }
    match count(&[MovementBasic, MovementPollution, Combat]) {
        0 => return fail("one of movement_basic, movement_pollution, combat is required"),
        1 => {}
        _ => return fail("movement_basic, movement_pollution and combat are mutually exclusive"),
    }
    if has(MovementPollution) != has(PollutionDiffusion) {
        return fail("movement_pollution and pollution_diffusion must appear together");
    }
    if has(Replacement) && has(Mating) {
        return fail("replacement and mating are mutually exclusive");
    }
    if (has(Replacement) || has(Mating)) && !has(Death) {
        return fail("replacement and mating require death");
    }
    if dual && has(Death) && !has(Replacement) && !has(Mating) {
        return fail("with two resources death requires replacement or mating");
    }
    if has(PayLoans) != has(MakeLoans) {
        return fail("pay_loans and make_loans must appear together");
    }
    if has(Transmission) != has(ImmuneResponse) {
        return fail("transmission and immune_response must appear together");
    }
    if has(Trade) && !dual {
        return fail("trade requires a [spice] block");
    }
    Ok(())
}

/// Every legal plan for the resource mode, generated from the grammar
/// itself rather than by filtering with `parse_plan`.
pub fn legal_plans(dual: bool) -> Vec<Vec<Rule>> {
    use Rule::*;
    let opt = |rs: &[Rule]| vec![vec![], rs.to_vec()];
    let growth = vec![vec![Growback], vec![SeasonalGrowback]];
    let motion = vec![
        vec![MovementBasic],
        vec![MovementPollution, PollutionDiffusion],
        vec![Combat],
    ];
    let lifecycle = if dual {
        vec![vec![], vec![Death, Replacement], vec![Death, Mating]]
    } else {
        vec![vec![], vec![Death], vec![Death, Replacement], vec![Death, Mating]]
    };
    let mut groups = vec![
        vec![vec![Tick]],
        growth,
        motion,
        opt(&[Inheritance]),
        lifecycle,
        opt(&[Culture]),
        opt(&[PayLoans, MakeLoans]),
        opt(&[Transmission, ImmuneResponse]),
    ];
    if dual {
        groups.push(opt(&[Trade]));
    }
    groups.into_iter().fold(vec![vec![]], |acc, group| {
        acc.iter()
            .flat_map(|prefix| {
                group.iter().map(move |choice| {
                    let mut p: Vec<Rule> = prefix.clone();
                    p.extend(choice);
                    p
                })
            })
            .collect()
    })
}

#[derive(Debug, thiserror::Error)]
#[error("invariant violated after `{rule}` at step {step}:\n{report}")]
pub struct StepError {
    pub rule: Rule,
    pub step: u64,
    pub report: Report,
}

/// Applies one rule, dispatching agent rules to their sequential variant
/// when the plan's update mode is asynchronous. Lattice rules and rules in
/// which agents do not interact have a single form.
pub fn apply_rule(state: &mut SimState, cfg: &SimConfig, plan: &Plan, rule: Rule, ledger: &mut Ledger) {
    let mode = plan.mode;
    let order = |s: &SimState| asynch::generate_order(mode, s, rule.index());
    let asynchronous = mode != UpdateMode::Sync;
    match rule {
        Rule::Tick => sync::tick(state, ledger),
        Rule::Growback => growback(state, cfg, ledger),
        Rule::SeasonalGrowback => seasonal_growback(state, cfg, ledger),
        Rule::PollutionDiffusion => pollution_diffusion(state, cfg),
        Rule::Death => sync::death(state, ledger),
        Rule::Replacement => sync::replacement(state, cfg, ledger),
        Rule::ImmuneResponse => sync::immune_response(state, ledger),
        Rule::MovementBasic | Rule::MovementPollution => {
            let polluted = rule == Rule::MovementPollution;
            if asynchronous {
                let o = order(state);
                asynch::movement(state, cfg, &o, polluted)
            } else {
                sync::movement(state, cfg, polluted, ledger)
            }
        }
        Rule::Combat if asynchronous => {
            let o = order(state);
            asynch::combat(state, cfg, &o, ledger)
        }
        Rule::Combat => sync::combat(state, cfg, ledger),
        Rule::Inheritance if asynchronous => {
            let o = order(state);
            asynch::inheritance(state, cfg, &o, ledger)
        }
        Rule::Inheritance => sync::inheritance(state, cfg, ledger),
        Rule::Mating if asynchronous => {
            let o = order(state);
            asynch::mating(state, cfg, &o, ledger)
        }
        Rule::Mating => sync::mating(state, cfg, ledger),
        Rule::Culture if asynchronous => {
            let o = order(state);
            asynch::culture(state, &o)
        }
        Rule::Culture => sync::culture(state),
        Rule::PayLoans if asynchronous => asynch::pay_loans(state, cfg),
        Rule::PayLoans => sync::pay_loans(state, cfg),
        Rule::MakeLoans if asynchronous => {
            let o = order(state);
            asynch::make_loans(state, cfg, &o, ledger)
        }
        Rule::MakeLoans => sync::make_loans(state, cfg, ledger),
        Rule::Transmission if asynchronous => {
            let o = order(state);
            asynch::transmission(state, &o)
        }
        Rule::Transmission => sync::transmission(state),
        Rule::Trade if asynchronous => {
            let o = order(state);
            trade_async(state, cfg, &o, ledger)
        }
        Rule::Trade => trade_sync(state, cfg, ledger),
    }
}

/// Runs one step of `plan`. With `checked` set the invariants are verified
/// after every rule and the first failure aborts the step.
pub fn step(state: &mut SimState, cfg: &SimConfig, plan: &Plan, checked: bool) -> Result<Ledger, StepError> {
    step_with(state, cfg, plan, |s, rule| {
        if !checked {
            return Ok(());
        }
        let report = check_invariants(s, cfg, plan.check_options());
        if report.is_clean() {
            Ok(())
        } else {
            Err(StepError {
                rule,
                step: s.step,
                report,
            })
        }
    })
}

/// Runs one step, calling `after` with the state following each rule.
pub fn step_with<E>(
    state: &mut SimState,
    cfg: &SimConfig,
    plan: &Plan,
    mut after: impl FnMut(&SimState, Rule) -> Result<(), E>,
) -> Result<Ledger, E> {
    let mut ledger = Ledger::default();
    for &rule in plan.rules() {
        apply_rule(state, cfg, plan, rule, &mut ledger);
        after(state, rule)?;
    }
    Ok(ledger)
}

/// Runs `steps` steps and returns one metrics row per step.
pub fn run(
    state: &mut SimState,
    cfg: &SimConfig,
    plan: &Plan,
    steps: u64,
    checked: bool,
) -> Result<Metrics, StepError> {
    let mut metrics = Metrics::default();
    for _ in 0..steps {
        let ledger = step(state, cfg, plan, checked)?;
        metrics.rows.push(StepRow::observe(state, &ledger));
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::init_state;
    use std::collections::BTreeSet;

    fn parse(text: &str) -> Result<Plan, PlanError> {
        parse_plan(text, false, UpdateMode::Sync)
    }

    #[test]
    fn minimal_plan_parses() {
        let p = parse("tick;growback;movement_basic").unwrap();
        assert_eq!(p.rules(), &[Rule::Tick, Rule::Growback, Rule::MovementBasic]);
        assert!(!p.check_options().enforce_age_limit);
    }

    #[test]
    fn full_single_resource_plan_parses() {
        let text = "tick;growback;combat;inheritance;death;replacement;culture;pay_loans;make_loans;transmission;immune_response";
        assert_eq!(parse(text).unwrap().canonical(), text);
    }

    #[test]
    fn canonical_form_normalises_spelling() {
        let p = parse(" Tick ; GROWBACK;movement_basic; ").unwrap();
        assert_eq!(p.canonical(), "tick;growback;movement_basic");
    }

    #[test]
    fn rejections_name_the_constraint() {
        let cases = [
            ("tick;growback;movement_pollution", "pollution_diffusion"),
            ("tick;growback;movement_basic;combat", "mutually exclusive"),
            ("tick;growback;movement_basic;replacement", "require death"),
            ("tick;growback;movement_basic;pay_loans", "make_loans"),
            ("tick;growback;movement_basic;transmission", "immune_response"),
            ("tick;growback;movement_basic;trade", "[spice]"),
            ("growback;movement_basic", "tick"),
            ("tick;growback;seasonal_growback;movement_basic", "mutually exclusive"),
        ];
        for (text, needle) in cases {
            let err = parse(text).unwrap_err();
            assert!(matches!(err, PlanError::Constraint(_)), "{text}: {err}");
            assert!(err.to_string().contains(needle), "{text}: {err}");
        }
    }

    #[test]
    fn other_errors() {
        assert_eq!(parse(""), Err(PlanError::Empty));
        assert_eq!(parse("tick;grow"), Err(PlanError::UnknownRule("grow".into())));
        assert_eq!(parse("tick;tick"), Err(PlanError::Duplicate(Rule::Tick)));
        assert_eq!(
            parse("growback;tick;movement_basic"),
            Err(PlanError::OutOfOrder {
                rule: Rule::Tick,
                after: Rule::Growback
            })
        );
        assert!(parse_plan("tick;growback;movement_basic;death", true, UpdateMode::Sync).is_err());
        assert!(parse_plan("tick;growback;movement_basic;trade", true, UpdateMode::Sync).is_ok());
    }

    #[test]
    fn grammar_counts() {
        assert_eq!(legal_plans(false).len(), 384);
        assert_eq!(legal_plans(true).len(), 576);
    }

    /// Every ordered subset of the rule kinds is accepted exactly when the
    /// grammar generates it.
    #[test]
    fn validator_accepts_exactly_the_grammar() {
        for dual in [false, true] {
            let generated: BTreeSet<Vec<Rule>> = legal_plans(dual).into_iter().collect();
            let mut accepted = BTreeSet::new();
            for mask in 0u32..1 << Rule::ALL.len() {
                let rules: Vec<Rule> = Rule::ALL
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, r)| *r)
                    .collect();
                let text: Vec<&str> = rules.iter().map(|r| r.name()).collect();
                if parse_plan(&text.join(";"), dual, UpdateMode::Sync).is_ok() {
                    accepted.insert(rules);
                }
            }
            assert_eq!(accepted, generated, "dual={dual}");
        }
    }

    fn small_cfg() -> SimConfig {
        SimConfig {
            m: 12,
            max_vision: 3,
            initial_population_size: 30,
            ..SimConfig::default()
        }
    }

    #[test]
    fn empty_population_only_advances_the_step() {
        let c = SimConfig {
            initial_population_size: 0,
            ..small_cfg()
        };
        let mut s = init_state(&c, 1).unwrap();
        s.lattice.level[0].iter_mut().for_each(|v| *v = 0);
        let full = "tick;seasonal_growback;combat;inheritance;death;mating;culture;pay_loans;make_loans;transmission;immune_response";
        let plan = parse(full).unwrap();
        let before = s.clone();
        step(&mut s, &c, &plan, true).unwrap();
        assert_eq!(s.step, 1);
        assert!(s.agents().is_empty());
        assert_eq!(s.books, before.books);
    }

    #[test]
    fn without_death_agents_outlive_max_age() {
        let c = SimConfig {
            min_age: 2,
            max_age: 2,
            sugar_growth: 100,
            ..small_cfg()
        };
        let mut s = init_state(&c, 3).unwrap();
        let plan = parse("tick;growback;movement_basic").unwrap();
        run(&mut s, &c, &plan, 3, true).unwrap();
        assert!(s.agents().iter().any(|a| a.age > a.max_age));

        let mut s = init_state(&c, 3).unwrap();
        let plan = parse("tick;growback;movement_basic;death").unwrap();
        run(&mut s, &c, &plan, 3, true).unwrap();
        assert!(s.agents().iter().all(|a| a.age <= a.max_age));
    }

    #[test]
    fn two_steps_equal_step_twice() {
        let c = small_cfg();
        let plan = parse("tick;growback;combat;death;replacement;culture").unwrap();
        let mut a = init_state(&c, 9).unwrap();
        let mut b = a.clone();
        run(&mut a, &c, &plan, 2, false).unwrap();
        step(&mut b, &c, &plan, false).unwrap();
        step(&mut b, &c, &plan, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn run_of_zero_steps_is_identity() {
        let c = small_cfg();
        let plan = parse("tick;growback;movement_basic").unwrap();
        let mut s = init_state(&c, 2).unwrap();
        let before = s.clone();
        let m = run(&mut s, &c, &plan, 0, true).unwrap();
        assert!(m.rows.is_empty());
        assert_eq!(s, before);
        let m = run(&mut s, &c, &plan, 7, true).unwrap();
        assert_eq!(m.rows.len(), 7);
    }

    #[test]
    fn checked_step_names_the_offending_rule() {
        let c = small_cfg();
        let plan = parse("tick;growback;movement_basic").unwrap();
        let mut s = init_state(&c, 2).unwrap();
        let id = s.agents()[0].id;
        s.agent_mut(id).unwrap().vision = 99;
        let err = step(&mut s, &c, &plan, true).unwrap_err();
        assert_eq!(err.rule, Rule::Tick);
        assert!(err.to_string().contains("after `tick`"));
    }
}
