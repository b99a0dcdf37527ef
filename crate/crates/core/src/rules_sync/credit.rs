//! Lending between neighbours and repayment of loans that fall due.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::amount::{Amount, Grain};
use crate::config::SimConfig;
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::rules_sync::lifecycle::active;
use crate::state::{is_fertile, is_post_fertile, Agent, AgentId, Loan, Resource, SimState};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Eligibility {
    pub can_lend: bool,
    pub will_borrow: bool,
    pub amt_avail: Amount,
    pub amt_req: Amount,
}

/// The store a fertile agent keeps back for reproduction.
pub fn base_amount(cfg: &SimConfig, r: Resource) -> Amount {
    let units = match r {
        Resource::Sugar => cfg.child_amt,
        Resource::Spice => cfg.spice.as_ref().map_or(0, |s| s.spice_child_amt),
    };
    Amount::from_units(units as u64)
}

/// Principal plus simple interest over the loan term, floored to the grain.
pub fn loan_amount_due(loan: &Loan, cfg: &SimConfig, grain: Grain) -> Amount {
    let rate = cfg.rate;
    loan.principal
        .mul_ratio_floor(rate.den + rate.num * cfg.duration, rate.den, grain)
}

/// Everything `a` owes on `book`, at face value plus interest.
pub fn total_owed(a: AgentId, book: &[Loan], cfg: &SimConfig, grain: Grain) -> Amount {
    book.iter()
        .filter(|l| l.borrower == a)
        .map(|l| loan_amount_due(l, cfg, grain))
        .sum()
}

pub fn credit_eligibility(a: &Agent, r: Resource, cfg: &SimConfig, book: &[Loan]) -> Eligibility {
    let grain = cfg.grain();
    let store = a.store[r.idx()];
    let base = base_amount(cfg, r);
    let fertile = is_fertile(a.age, a.sex, cfg);
    let post = is_post_fertile(a.age, a.sex, cfg);
    let amt_avail = if post {
        store.div_floor(2, grain)
    } else if fertile && store > base {
        store - base
    } else {
        Amount::ZERO
    };
    Eligibility {
        can_lend: post || (fertile && store > base),
        will_borrow: fertile && store < base && store > total_owed(a.id, book, cfg, grain),
        amt_avail,
        amt_req: base.saturating_sub(store),
    }
}

/// Books a loan and moves its face value from lender to borrower.
pub(crate) fn lend(
    state: &mut SimState,
    r: Resource,
    lender: AgentId,
    borrower: AgentId,
    amt: Amount,
    due: u64,
    ledger: &mut Ledger,
) {
    let k = r.idx();
    state.agent_mut(lender).unwrap().store[k] -= amt;
    state.agent_mut(borrower).unwrap().store[k] += amt;
    state.books[k].push(Loan {
        lender,
        borrower,
        principal: amt,
        due,
    });
    ledger.loans_made += 1;
    ledger.loan_volume[k] += amt.ticks() as u128;
}

/// Simultaneous lending for one resource. Capacities and demands come from
/// the state before the rule. Lenders take turns in seeded random order, each
/// serving its willing neighbours (also in random order) until its capacity
/// or their demand runs out. Afterwards no willing borrower with demand left
/// sits next to a lender with capacity left.
pub fn make_loans_for(state: &mut SimState, cfg: &SimConfig, r: Resource, ledger: &mut Ledger) {
    let k = r.idx();
    let elig: BTreeMap<AgentId, Eligibility> = state
        .agents()
        .iter()
        .map(|a| (a.id, credit_eligibility(a, r, cfg, &state.books[k])))
        .collect();
    let mut avail: BTreeMap<AgentId, Amount> = elig
        .iter()
        .filter(|(_, e)| e.can_lend)
        .map(|(&id, e)| (id, e.amt_avail))
        .collect();
    let mut req: BTreeMap<AgentId, Amount> = elig
        .iter()
        .filter(|(_, e)| e.will_borrow)
        .map(|(&id, e)| (id, e.amt_req))
        .collect();
    let mut rng = stream(state.seed, Site::LendOrder, state.step, k as u64);
    let mut lenders: Vec<AgentId> = avail.keys().copied().collect();
    lenders.shuffle(&mut rng);
    let due = state.step + cfg.duration;
    for lender in lenders {
        let mut borrowers: Vec<AgentId> = state
            .neighbours(lender)
            .into_iter()
            .filter(|b| req.get(b).is_some_and(|q| !q.is_zero()))
            .collect();
        borrowers.shuffle(&mut rng);
        for b in borrowers {
            let cap = avail[&lender];
            if cap.is_zero() {
                break;
            }
            let amt = cap.min(req[&b]);
            avail.insert(lender, cap - amt);
            *req.get_mut(&b).unwrap() -= amt;
            lend(state, r, lender, b, amt, due, ledger);
        }
    }
    state.books[k].sort_unstable();
}

pub fn make_loans(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    for &r in active(state.dual) {
        make_loans_for(state, cfg, r, ledger);
    }
}

/// Settles one due loan on the current state. A borrower who cannot pay in
/// full hands over half its store and the rest is rolled into a new loan,
/// due one term after the old one.
pub(crate) fn settle(state: &mut SimState, cfg: &SimConfig, r: Resource, loan: Loan) {
    let (k, grain) = (r.idx(), cfg.grain());
    if !state.contains(loan.lender) || !state.contains(loan.borrower) {
        return;
    }
    let owed = loan_amount_due(&loan, cfg, grain);
    let store = state.agent(loan.borrower).unwrap().store[k];
    let paid = if store >= owed { owed } else { store.div_floor(2, grain) };
    state.agent_mut(loan.borrower).unwrap().store[k] -= paid;
    state.agent_mut(loan.lender).unwrap().store[k] += paid;
    if paid < owed {
        state.books[k].push(Loan {
            principal: owed - paid,
            due: loan.due + cfg.duration,
            ..loan
        });
    }
}

/// Removes and returns the loans on book `k` due at `step`.
pub(crate) fn take_due(state: &mut SimState, k: usize) -> Vec<Loan> {
    let step = state.step;
    let (due, rest): (Vec<Loan>, Vec<Loan>) = state.books[k].drain(..).partition(|l| l.due == step);
    state.books[k] = rest;
    due
}

/// Simultaneous repayment for one resource. Each borrower's due loans are
/// put in seeded random order; layer `i` holds every borrower's `i`-th loan,
/// so a borrower pays at most one loan per layer.
pub fn pay_loans_for(state: &mut SimState, cfg: &SimConfig, r: Resource) {
    let k = r.idx();
    let due = take_due(state, k);
    let mut by_borrower: BTreeMap<AgentId, Vec<Loan>> = BTreeMap::new();
    for l in due {
        by_borrower.entry(l.borrower).or_default().push(l);
    }
    let mut rng = stream(state.seed, Site::PayOrder, state.step, k as u64);
    for loans in by_borrower.values_mut() {
        loans.shuffle(&mut rng);
    }
    let depth = by_borrower.values().map(Vec::len).max().unwrap_or(0);
    for i in 0..depth {
        let layer: Vec<Loan> = by_borrower.values().filter_map(|v| v.get(i).copied()).collect();
        for loan in layer {
            settle(state, cfg, r, loan);
        }
    }
    state.books[k].sort_unstable();
}

pub fn pay_loans(state: &mut SimState, cfg: &SimConfig) {
    for &r in active(state.dual) {
        pay_loans_for(state, cfg, r);
    }
}
