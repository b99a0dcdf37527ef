//! State invariant checker.

use std::fmt;

use crate::config::SimConfig;
use crate::geometry::Position;
use crate::state::{Resource, SimState};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ViolationKind {
    PositionOutOfRange,
    SharedCell,
    OccupancyIndex,
    CellOverCapacity,
    CapacityOverMaximum,
    AgeOverMaxAge,
    MaxAgeOutOfBounds,
    VisionOutOfBounds,
    MetabolismOutOfBounds,
    CultureLength,
    ImmunityLength,
    DiseaseTooLong,
    LoanPartyMissing,
    SelfLoan,
    LatticeShape,
    SpiceInSingleMode,
    AgentOrder,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {:?}: {}", self.kind, self.detail)
    }
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    /// No errors (warnings allowed).
    pub fn is_clean(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, severity: Severity, detail: String) {
        self.violations.push(Violation { kind, severity, detail });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// When false (plans without death), `age > maxAge` is only a warning.
    pub enforce_age_limit: bool,
}

impl Default for CheckOptions {
    fn default() -> CheckOptions {
        CheckOptions {
            enforce_age_limit: true,
        }
    }
}

pub fn check_invariants(state: &SimState, cfg: &SimConfig, opts: CheckOptions) -> Report {
    use ViolationKind::*;
    let mut r = Report::default();
    let m = state.m();
    let cells = state.lattice.cells();
    let err = Severity::Error;

    if m != cfg.m {
        r.push(LatticeShape, err, format!("lattice side {m} but M = {}", cfg.m));
        return r;
    }
    let resources: &[Resource] = if state.dual {
        &Resource::BOTH
    } else {
        &[Resource::Sugar]
    };
    let maxima = [cfg.max_sugar, cfg.spice.as_ref().map_or(0, |s| s.max_spice)];
    for &res in resources {
        let k = res.idx();
        let (level, cap) = (&state.lattice.level[k], &state.lattice.capacity[k]);
        if level.len() != cells || cap.len() != cells {
            r.push(LatticeShape, err, format!("{} field has wrong size", res.name()));
            continue;
        }
        for i in 0..cells {
            if level[i] > cap[i] {
                r.push(
                    CellOverCapacity,
                    err,
                    format!(
                        "{} {} at {} exceeds capacity {}",
                        res.name(),
                        level[i],
                        Position::from_index(i, m),
                        cap[i]
                    ),
                );
            }
            if cap[i] > maxima[k] {
                r.push(
                    CapacityOverMaximum,
                    err,
                    format!(
                        "{} capacity {} at {} exceeds maximum {}",
                        res.name(),
                        cap[i],
                        Position::from_index(i, m),
                        maxima[k]
                    ),
                );
            }
        }
    }
    if state.lattice.pollution.len() != cells {
        r.push(LatticeShape, err, "pollution field has wrong size".into());
    }
    if !state.dual
        && (!state.lattice.level[1].is_empty()
            || !state.books[1].is_empty()
            || state
                .agents()
                .iter()
                .any(|a| !a.store[1].is_zero() || a.metabolism[1] != 0))
    {
        r.push(
            SpiceInSingleMode,
            err,
            "spice data present in a single-resource state".into(),
        );
    }

    let mut seen = vec![u64::MAX; cells];
    let occ = state.occupancy_raw();
    let mut prev_id = None;
    let max_spice_met = cfg.spice.as_ref().map_or(0, |s| s.max_spice_metabolism);
    for a in state.agents() {
        let who = || format!("agent {} at {}", a.id, a.position);
        if prev_id.is_some_and(|p| p >= a.id) {
            r.push(AgentOrder, err, format!("{} out of id order", who()));
        }
        prev_id = Some(a.id);
        if a.position.x >= m || a.position.y >= m {
            r.push(PositionOutOfRange, err, who());
            continue;
        }
        let cell = a.position.index(m);
        if seen[cell] != u64::MAX {
            r.push(
                SharedCell,
                err,
                format!("{} shares its cell with agent {}", who(), seen[cell]),
            );
        } else {
            seen[cell] = a.id;
        }
        if occ.get(cell) != Some(&a.id) {
            r.push(
                OccupancyIndex,
                err,
                format!("{} missing from the occupancy index", who()),
            );
        }
        if a.age > a.max_age {
            let sev = if opts.enforce_age_limit { err } else { Severity::Warning };
            r.push(
                AgeOverMaxAge,
                sev,
                format!("{}: age {} > maxAge {}", who(), a.age, a.max_age),
            );
        }
        if a.max_age < cfg.min_age || a.max_age > cfg.max_age {
            r.push(MaxAgeOutOfBounds, err, format!("{}: maxAge {}", who(), a.max_age));
        }
        if a.vision == 0 || a.vision > cfg.max_vision {
            r.push(VisionOutOfBounds, err, format!("{}: vision {}", who(), a.vision));
        }
        if a.metabolism[0] < cfg.min_metabolism || a.metabolism[0] > cfg.max_metabolism {
            r.push(
                MetabolismOutOfBounds,
                err,
                format!("{}: metabolism {}", who(), a.metabolism[0]),
            );
        }
        if state.dual && a.metabolism[1] > max_spice_met {
            r.push(
                MetabolismOutOfBounds,
                err,
                format!("{}: spice metabolism {}", who(), a.metabolism[1]),
            );
        }
        if a.culture.len() != cfg.culture_count as usize {
            r.push(
                CultureLength,
                err,
                format!("{}: culture length {}", who(), a.culture.len()),
            );
        }
        if a.immunity.len() != cfg.immunity_length as usize {
            r.push(
                ImmunityLength,
                err,
                format!("{}: immunity length {}", who(), a.immunity.len()),
            );
        }
        if let Some(d) = a.diseases.iter().find(|d| d.len() >= a.immunity.len()) {
            r.push(
                DiseaseTooLong,
                err,
                format!("{}: disease {d} not shorter than immunity", who()),
            );
        }
    }
    let indexed = occ.iter().filter(|&&id| id != u64::MAX).count();
    if indexed != state.population() {
        r.push(
            OccupancyIndex,
            err,
            format!("index holds {indexed} agents, population is {}", state.population()),
        );
    }
    for &res in resources {
        for l in &state.books[res.idx()] {
            if l.lender == l.borrower {
                r.push(
                    SelfLoan,
                    err,
                    format!("{} loan of agent {} to itself", res.name(), l.lender),
                );
            }
            for party in [l.lender, l.borrower] {
                if !state.contains(party) {
                    r.push(
                        LoanPartyMissing,
                        err,
                        format!("{} loan names agent {party}, not in the population", res.name()),
                    );
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::Amount;
    use crate::state::{init_state, Loan};

    fn cfg() -> SimConfig {
        SimConfig {
            m: 8,
            max_vision: 3,
            initial_population_size: 12,
            ..SimConfig::default()
        }
    }

    #[test]
    fn fresh_state_is_clean() {
        let c = cfg();
        let s = init_state(&c, 3).unwrap();
        let rep = check_invariants(&s, &c, CheckOptions::default());
        assert!(rep.violations.is_empty(), "{rep}");
    }

    #[test]
    fn shared_cell_is_reported() {
        let c = cfg();
        let mut s = init_state(&c, 3).unwrap();
        let p = s.agents()[0].position;
        s.agents_mut()[1].position = p;
        let rep = check_invariants(&s, &c, CheckOptions::default());
        assert!(rep.has(ViolationKind::SharedCell), "{rep}");
        assert!(rep.to_string().contains(&format!("agent {}", s.agents()[1].id)));
    }

    #[test]
    fn over_capacity_is_reported() {
        let c = cfg();
        let mut s = init_state(&c, 3).unwrap();
        let i = 5;
        s.lattice.level[0][i] = s.lattice.capacity[0][i] + 1;
        let rep = check_invariants(&s, &c, CheckOptions::default());
        assert!(rep.has(ViolationKind::CellOverCapacity), "{rep}");
        assert!(rep.to_string().contains(&Position::from_index(i, 8).to_string()));
    }

    #[test]
    fn age_limit_can_be_relaxed() {
        let c = cfg();
        let mut s = init_state(&c, 3).unwrap();
        let a = &mut s.agents_mut()[0];
        a.age = a.max_age + 1;
        let strict = check_invariants(&s, &c, CheckOptions::default());
        assert!(!strict.is_clean());
        let relaxed = check_invariants(
            &s,
            &c,
            CheckOptions {
                enforce_age_limit: false,
            },
        );
        assert!(relaxed.is_clean());
        assert!(relaxed.has(ViolationKind::AgeOverMaxAge));
    }

    #[test]
    fn loan_with_missing_party_is_reported() {
        let c = cfg();
        let mut s = init_state(&c, 3).unwrap();
        let id = s.agents()[0].id;
        s.books[0].push(Loan {
            lender: id,
            borrower: 999,
            principal: Amount::ONE,
            due: 5,
        });
        s.books[0].push(Loan {
            lender: id,
            borrower: id,
            principal: Amount::ONE,
            due: 5,
        });
        let rep = check_invariants(&s, &c, CheckOptions::default());
        assert!(rep.has(ViolationKind::LoanPartyMissing));
        assert!(rep.has(ViolationKind::SelfLoan));
    }
}
