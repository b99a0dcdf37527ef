//! Asynchronous updating: per-rule agent orderings and the sequential
//! variants of the agent rules. Each agent acts on the state as left by the
//! agents before it.

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;

use crate::config::{SimConfig, UpdateMode};
use crate::geometry::Position;
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::rules_sync::combat::{choose_target, strike, tribe_code, Board};
use crate::rules_sync::credit::{credit_eligibility, lend, settle, take_due};
use crate::rules_sync::culture::{culture_for, infections_for};
use crate::rules_sync::lifecycle::{active, bequeath, is_dying, try_mate};
use crate::rules_sync::matching::{normalize, Pair};
use crate::rules_sync::movement::{direction_order, harvest, rank, visible_cells, Scorer};
use crate::state::{is_fertile, AgentId, Resource, SimState};

/// The order agents act in for one rule application. `rule` keys the random
/// stream so that every rule in a step draws its own order.
pub fn generate_order(mode: UpdateMode, state: &SimState, rule: u8) -> Vec<AgentId> {
    let m = state.m();
    let mut rng = stream(state.seed, Site::Order(rule), state.step, 0);
    let mut ids = state.ids();
    let by_cell = |key: &dyn Fn(Position) -> u64| {
        let mut keyed: Vec<(u64, AgentId)> = state.agents().iter().map(|a| (key(a.position), a.id)).collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, id)| id).collect()
    };
    match mode {
        UpdateMode::Sync => ids,
        UpdateMode::LineByLine => by_cell(&|p| p.x as u64 * m as u64 + p.y as u64),
        UpdateMode::FixedRandomSweep => {
            let rank = cached_ranks(state.seed, m);
            by_cell(&|p| rank[p.index(m)] as u64)
        }
        UpdateMode::RandomNewSweep => {
            ids.shuffle(&mut rng);
            ids
        }
        UpdateMode::UniformChoice => {
            if ids.is_empty() {
                return ids;
            }
            (0..ids.len()).map(|_| ids[rng.random_range(0..ids.len())]).collect()
        }
        UpdateMode::Exponential => exponential_events(&ids, &mut rng),
    }
}

/// Seed, lattice side and the ranks they produce.
type RankCache = Option<(u64, u32, Rc<Vec<u32>>)>;

thread_local! {
    static RANKS: RefCell<RankCache> = const { RefCell::new(None) };
}

/// [`fixed_ranks`], remembered for the most recent run on this thread.
fn cached_ranks(seed: u64, m: u32) -> Rc<Vec<u32>> {
    RANKS.with_borrow_mut(|slot| match slot {
        Some((s, mm, r)) if *s == seed && *mm == m => r.clone(),
        _ => {
            let r = Rc::new(fixed_ranks(seed, m));
            *slot = Some((seed, m, r.clone()));
            r
        }
    })
}

/// Rank of every cell in the run's single random ordering of the lattice.
pub fn fixed_ranks(seed: u64, m: u32) -> Vec<u32> {
    let cells = m as usize * m as usize;
    let mut perm: Vec<u32> = (0..cells as u32).collect();
    perm.shuffle(&mut stream(seed, Site::FixedOrder, 0, 0));
    let mut rank = vec![0u32; cells];
    for (r, &cell) in perm.iter().enumerate() {
        rank[cell as usize] = r as u32;
    }
    rank
}

/// Each agent runs a unit-rate exponential clock; the next clock to ring
/// takes a turn and redraws. A step is the first `n` rings, which spans one
/// unit of time in expectation. Clocks are memoryless, so restarting them
/// each step loses nothing.
fn exponential_events(ids: &[AgentId], rng: &mut impl Rng) -> Vec<AgentId> {
    let mut clocks: BinaryHeap<Reverse<(Ring, AgentId)>> =
        ids.iter().map(|&id| Reverse((Ring(rng.sample(Exp1)), id))).collect();
    let mut events = Vec::with_capacity(ids.len());
    while events.len() < ids.len() {
        let Reverse((Ring(t), id)) = clocks.pop().unwrap();
        events.push(id);
        clocks.push(Reverse((Ring(t + rng.sample::<f64, _>(Exp1)), id)));
    }
    events
}

#[derive(Clone, Copy, PartialEq)]
struct Ring(f64);

impl Eq for Ring {}

impl PartialOrd for Ring {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ring {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Each agent in turn moves to the best cell that is free right now (or
/// stays), then harvests it.
pub fn movement(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], polluted: bool) {
    let m = state.m();
    let scorer = Scorer {
        cfg,
        dual: state.dual,
        polluted,
    };
    for &id in order {
        let Some(a) = state.agent(id) else {
            continue;
        };
        let rays = direction_order(state.seed, Site::MoveDirections, state.step, id);
        let bound = scorer.for_agent(a);
        let mut cands = visible_cells(
            a.position,
            a.vision,
            m,
            &rays,
            true,
            |c| state.is_free(c),
            |c| bound.score(&state.lattice, c),
        );
        rank(&mut cands);
        let target = cands[0].cell;
        state.move_agent(id, target);
        harvest(state, cfg, id, polluted);
    }
}

/// Agents killed earlier in the fold lose their turn.
pub fn combat(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], ledger: &mut Ledger) {
    let mut board = Board::of(state);
    let mut dead = BTreeSet::new();
    for &id in order {
        if dead.contains(&id) {
            continue;
        }
        let Some(a) = state.agent(id) else {
            continue;
        };
        let from = a.position;
        let rays = direction_order(state.seed, Site::Combat, state.step, id);
        let tribe = tribe_code(a);
        let target = choose_target(
            &board,
            state,
            cfg,
            a,
            &rays,
            |_| false,
            |p, after| board.threatened(p, tribe, a.vision, after),
        )
        .unwrap_or(from);
        strike(state, cfg, id, target, &mut dead, ledger);
        board.track(state, id, from);
    }
    state.remove_agents(&dead);
}

pub fn culture(state: &mut SimState, order: &[AgentId]) {
    for &id in order {
        if state.contains(id) {
            let c = culture_for(state, id);
            state.agent_mut(id).unwrap().culture = c;
        }
    }
}

pub fn transmission(state: &mut SimState, order: &[AgentId]) {
    for &id in order {
        if state.contains(id) {
            let got = infections_for(state, id);
            state.agent_mut(id).unwrap().diseases.extend(got);
        }
    }
}

pub fn inheritance(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], ledger: &mut Ledger) {
    let dual = state.dual;
    for &id in order {
        if state.agent(id).is_some_and(|a| is_dying(a, dual)) {
            bequeath(state, cfg, id, ledger);
        }
    }
}

/// Candidate pairs are listed once, in the order their first member acts;
/// each is then re-checked against the current state as its turn comes.
pub fn mating(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], ledger: &mut Ledger) {
    let mut seen = BTreeSet::new();
    let mut pairs: Vec<Pair> = Vec::new();
    for &a in order {
        let Some(x) = state.agent(a) else {
            continue;
        };
        if !is_fertile(x.age, x.sex, cfg) {
            continue;
        }
        for b in state.neighbours(a) {
            let y = state.agent(b).unwrap();
            if y.sex != x.sex && is_fertile(y.age, y.sex, cfg) && seen.insert(normalize((a, b))) {
                pairs.push((a, b));
            }
        }
    }
    let mut rng = stream(state.seed, Site::MatingPairs, state.step, u64::MAX);
    for pair in pairs {
        try_mate(state, cfg, pair, &mut rng, ledger);
    }
}

/// Each lender in turn offers credit to its neighbours in id order, judging
/// both sides on the current state.
pub fn make_loans(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], ledger: &mut Ledger) {
    for &r in active(state.dual) {
        make_loans_for(state, cfg, r, order, ledger);
    }
}

fn make_loans_for(state: &mut SimState, cfg: &SimConfig, r: Resource, order: &[AgentId], ledger: &mut Ledger) {
    let k = r.idx();
    let due = state.step + cfg.duration;
    for &lender in order {
        if !state.contains(lender) {
            continue;
        }
        for b in state.neighbours(lender) {
            let l = credit_eligibility(state.agent(lender).unwrap(), r, cfg, &state.books[k]);
            let e = credit_eligibility(state.agent(b).unwrap(), r, cfg, &state.books[k]);
            if !(l.can_lend && e.will_borrow) {
                continue;
            }
            let amt = l.amt_avail.min(e.amt_req);
            if !amt.is_zero() {
                lend(state, r, lender, b, amt, due, ledger);
            }
        }
    }
    state.books[k].sort_unstable();
}

/// Due loans are settled one by one in book order.
pub fn pay_loans(state: &mut SimState, cfg: &SimConfig) {
    for &r in active(state.dual) {
        let k = r.idx();
        for loan in take_due(state, k) {
            settle(state, cfg, r, loan);
        }
        state.books[k].sort_unstable();
    }
}
