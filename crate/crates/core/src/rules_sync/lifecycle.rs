//! Ageing, death, replacement, reproduction and inheritance.

use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;

use crate::amount::{Amount, Grain};
use crate::bitstring::BitString;
use crate::config::{MatingThreshold, SimConfig};
use crate::geometry::{cardinal_neighbor, Direction, Position};
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::rules_sync::matching::{conflict_free_pairs, Pair};
use crate::state::{is_fertile, random_agent, Agent, AgentId, Loan, Resource, SimState};

pub(crate) fn active(dual: bool) -> &'static [Resource] {
    if dual {
        &Resource::BOTH
    } else {
        &[Resource::Sugar]
    }
}

/// Advances the clock, ages every agent and charges metabolism. A store
/// never goes below zero.
pub fn tick(state: &mut SimState, ledger: &mut Ledger) {
    state.step += 1;
    let dual = state.dual;
    for a in state.agents_mut() {
        a.age += 1;
        for &r in active(dual) {
            let k = r.idx();
            let due = Amount::from_units(a.metabolism[k] as u64);
            let paid = a.store[k].min(due);
            a.store[k] -= paid;
            Ledger::add(&mut ledger.flow(r).metabolism, paid);
        }
    }
}

/// At or past its maximum age, or out of any resource it consumes.
pub fn is_dying(a: &Agent, dual: bool) -> bool {
    a.age >= a.max_age || a.store[0].is_zero() || (dual && a.store[1].is_zero())
}

/// Removes dying agents along with every loan that names them.
pub fn death(state: &mut SimState, ledger: &mut Ledger) {
    let dual = state.dual;
    let dying: BTreeSet<AgentId> = state
        .agents()
        .iter()
        .filter(|a| is_dying(a, dual))
        .map(|a| a.id)
        .collect();
    for a in state.remove_agents(&dying) {
        for &r in active(dual) {
            Ledger::add(&mut ledger.flow(r).death_removal, a.store[r.idx()]);
        }
    }
    ledger.deaths += dying.len() as u64;
}

/// Refills the population to its initial size with newborn agents placed on
/// randomly chosen free cells. Newcomers do not harvest their cell.
pub fn replacement(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let target = cfg.initial_population_size as usize;
    let missing = target.saturating_sub(state.population());
    if missing == 0 {
        return;
    }
    let free = state.free_cells();
    let mut rng = stream(state.seed, Site::Replacement, state.step, 0);
    let chosen = index::sample(&mut rng, free.len(), missing.min(free.len()));
    for i in chosen.iter() {
        let id = state.fresh_id();
        let range = (cfg.start_sugar_min, cfg.start_sugar_max);
        let mut agent = random_agent(cfg, id, free[i], range, &mut rng);
        if !state.dual {
            agent.store[1] = Amount::ZERO;
            agent.initial[1] = Amount::ZERO;
        }
        for &r in active(state.dual) {
            Ledger::add(&mut ledger.flow(r).replacement, agent.store[r.idx()]);
        }
        state.add_agent(agent);
    }
}

/// Candidate mating pairs: adjacent, opposite sex, both fertile.
pub(crate) fn mating_pairs(state: &SimState, cfg: &SimConfig) -> Vec<Pair> {
    let fertile = |a: &Agent| is_fertile(a.age, a.sex, cfg);
    let mut pairs = Vec::new();
    for a in state.agents().iter().filter(|a| fertile(a)) {
        for b in state.neighbours(a.id) {
            let other = state.agent(b).unwrap();
            if a.id < b && other.sex != a.sex && fertile(other) {
                pairs.push((a.id, b));
            }
        }
    }
    pairs
}

fn can_afford(a: &Agent, cfg: &SimConfig, dual: bool) -> bool {
    active(dual).iter().all(|&r| {
        let (have, initial) = (a.store[r.idx()], a.initial[r.idx()]);
        match cfg.engine.mating_threshold {
            MatingThreshold::Strict => have > initial,
            MatingThreshold::Weak => have >= initial,
        }
    })
}

fn free_neighbours(state: &SimState, p: Position, out: &mut Vec<Position>) {
    for d in Direction::ALL {
        let c = cardinal_neighbor(p, d, state.m());
        if state.is_free(c) && !out.contains(&c) {
            out.push(c);
        }
    }
}

fn cross(a: &BitString, b: &BitString, rng: &mut impl Rng) -> BitString {
    let bits = a
        .bits()
        .iter()
        .zip(b.bits())
        .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
        .collect();
    BitString::from_bits(bits)
}

/// Attempts one mating on the current state. Both parents must still afford
/// it and some cell adjacent to either must be free; each parent then gives
/// the child half of each store it consumes. Returns the child's id.
pub(crate) fn try_mate(
    state: &mut SimState,
    cfg: &SimConfig,
    (a, b): Pair,
    rng: &mut impl Rng,
    ledger: &mut Ledger,
) -> Option<AgentId> {
    let dual = state.dual;
    let grain = cfg.grain();
    let (pa, pb) = (state.agent(a)?, state.agent(b)?);
    if !can_afford(pa, cfg, dual) || !can_afford(pb, cfg, dual) {
        return None;
    }
    let mut cells = Vec::with_capacity(8);
    free_neighbours(state, pa.position, &mut cells);
    free_neighbours(state, pb.position, &mut cells);
    let &cell = cells.choose(rng)?;
    let gift = |parent: &Agent| {
        let mut g = [Amount::ZERO; 2];
        for &r in active(dual) {
            g[r.idx()] = half(parent.store[r.idx()], grain);
        }
        g
    };
    let (ga, gb) = (gift(pa), gift(pb));
    let store = [ga[0] + gb[0], ga[1] + gb[1]];
    let child = Agent {
        id: 0,
        position: cell,
        sex: if coin(rng) { pa.sex } else { pb.sex },
        vision: if coin(rng) { pa.vision } else { pb.vision },
        age: 0,
        max_age: if coin(rng) { pa.max_age } else { pb.max_age },
        metabolism: [
            if coin(rng) { pa.metabolism[0] } else { pb.metabolism[0] },
            if coin(rng) { pa.metabolism[1] } else { pb.metabolism[1] },
        ],
        store,
        initial: store,
        culture: cross(&pa.culture, &pb.culture, rng),
        immunity: cross(&pa.immunity, &pb.immunity, rng),
        diseases: BTreeSet::new(),
        children: BTreeSet::new(),
    };
    let id = state.fresh_id();
    for (parent, g) in [(a, ga), (b, gb)] {
        let p = state.agent_mut(parent).unwrap();
        p.store[0] -= g[0];
        p.store[1] -= g[1];
        p.children.insert(id);
    }
    state.add_agent(Agent { id, ..child });
    ledger.births += 1;
    Some(id)
}

fn coin(rng: &mut impl Rng) -> bool {
    rng.random_bool(0.5)
}

fn half(x: Amount, grain: Grain) -> Amount {
    x.div_floor(2, grain)
}

/// Simultaneous mating: candidate pairs are split into conflict-free layers;
/// within each layer pairs are tried in a seeded random order, since they
/// may compete for the same free cell.
pub fn mating(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let pairs = mating_pairs(state, cfg);
    let layers = conflict_free_pairs(&pairs, &mut stream(state.seed, Site::MatingLayers, state.step, 0));
    for (k, mut layer) in layers.into_iter().enumerate() {
        let mut rng = stream(state.seed, Site::MatingPairs, state.step, k as u64);
        layer.shuffle(&mut rng);
        for pair in layer {
            try_mate(state, cfg, pair, &mut rng, ledger);
        }
    }
}

/// Splits `id`'s estate among its living, non-dying children: every store
/// in floored equal shares (remainders are destroyed) and every loan it made
/// into equal floored loans to the same borrower. A share that would make a
/// child its own creditor, or that rounds to nothing, lapses. An agent with
/// no heir forfeits its stores and loans. Nobody is removed.
pub(crate) fn bequeath(state: &mut SimState, cfg: &SimConfig, id: AgentId, ledger: &mut Ledger) {
    let dual = state.dual;
    let grain = cfg.grain();
    let kids: Vec<AgentId> = state.agent(id).unwrap().children.iter().copied().collect();
    let heirs: Vec<AgentId> = kids
        .into_iter()
        .filter(|&c| state.agent(c).is_some_and(|k| !is_dying(k, dual)))
        .collect();
    let n = heirs.len() as u64;
    let estate = std::mem::take(&mut state.agent_mut(id).unwrap().store);
    for &r in active(dual) {
        let total = estate[r.idx()];
        let share = total.div_floor(n, grain);
        for &c in &heirs {
            state.agent_mut(c).unwrap().store[r.idx()] += share;
        }
        let lost = total - Amount::from_ticks(share.ticks() * n);
        Ledger::add(&mut ledger.flow(r).inheritance_loss, lost);
    }
    for &r in active(dual) {
        let book = &mut state.books[r.idx()];
        if !book.iter().any(|l| l.lender == id) {
            continue;
        }
        let mut out: Vec<Loan> = Vec::with_capacity(book.len() + heirs.len());
        for loan in book.drain(..) {
            if loan.lender != id {
                out.push(loan);
                continue;
            }
            let share = loan.principal.div_floor(n, grain);
            if share.is_zero() {
                continue;
            }
            out.extend(heirs.iter().filter(|&&c| c != loan.borrower).map(|&c| Loan {
                lender: c,
                principal: share,
                ..loan
            }));
        }
        out.sort_unstable();
        *book = out;
    }
}

/// Every dying agent bequeaths its estate. Heirs are never dying agents, so
/// the outcome does not depend on the order estates are settled in.
pub fn inheritance(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let dual = state.dual;
    let dying: Vec<AgentId> = state
        .agents()
        .iter()
        .filter(|a| is_dying(a, dual))
        .map(|a| a.id)
        .collect();
    for id in dying {
        bequeath(state, cfg, id, ledger);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SpiceConfig;
    use crate::state::Sex;
    use crate::terrain::CapacityMap;

    fn cfg() -> SimConfig {
        SimConfig {
            m: 6,
            max_vision: 2,
            culture_count: 3,
            immunity_length: 4,
            initial_population_size: 0,
            ..SimConfig::default()
        }
    }

    fn agent(id: AgentId, x: u32, y: u32, sex: Sex, age: u32, sugar: u64) -> Agent {
        Agent {
            id,
            position: Position::new(x, y),
            sex,
            vision: 1,
            age,
            max_age: 90,
            metabolism: [2, 1],
            store: [Amount::from_units(sugar), Amount::ZERO],
            initial: [Amount::from_units(sugar / 2), Amount::ZERO],
            culture: "010".parse().unwrap(),
            immunity: "0011".parse().unwrap(),
            diseases: BTreeSet::new(),
            children: BTreeSet::new(),
        }
    }

    fn world(agents: Vec<Agent>) -> SimState {
        let mut s = SimState::empty(9, &CapacityMap::uniform(6, 4), None);
        for a in agents {
            s.next_id = s.next_id.max(a.id + 1);
            s.add_agent(a);
        }
        s
    }

    fn u(n: u64) -> Amount {
        Amount::from_units(n)
    }

    #[test]
    fn tick_ages_and_charges() {
        let mut s = world(vec![agent(0, 0, 0, Sex::Male, 3, 5), agent(1, 2, 2, Sex::Male, 0, 1)]);
        let mut l = Ledger::default();
        tick(&mut s, &mut l);
        assert_eq!(s.step, 1);
        assert_eq!(s.agent(0).unwrap().sugar(), u(3));
        assert_eq!(s.agent(0).unwrap().age, 4);
        assert_eq!(s.agent(1).unwrap().sugar(), Amount::ZERO);
        assert_eq!(l.flows[0].metabolism, u(3).ticks() as u128);
    }

    #[test]
    fn death_removes_starved_old_and_their_loans() {
        let mut old = agent(1, 1, 1, Sex::Male, 90, 5);
        old.max_age = 90;
        let mut s = world(vec![
            agent(0, 0, 0, Sex::Male, 3, 0),
            old,
            agent(2, 3, 3, Sex::Female, 10, 8),
        ]);
        s.books[0].push(Loan {
            lender: 2,
            borrower: 0,
            principal: u(3),
            due: 9,
        });
        let mut l = Ledger::default();
        death(&mut s, &mut l);
        assert_eq!(s.ids(), vec![2]);
        assert!(s.books[0].is_empty());
        assert_eq!(l.deaths, 2);
        assert_eq!(l.flows[0].death_removal, u(5).ticks() as u128);
    }

    #[test]
    fn dual_death_on_empty_spice() {
        let mut a = agent(0, 0, 0, Sex::Male, 3, 5);
        a.store[1] = Amount::ZERO;
        let mut s = world(vec![a]);
        s.dual = true;
        assert!(is_dying(s.agent(0).unwrap(), true));
        assert!(!is_dying(s.agent(0).unwrap(), false));
    }

    #[test]
    fn replacement_refills_without_harvest() {
        let c = SimConfig {
            initial_population_size: 5,
            ..cfg()
        };
        let mut s = world(vec![agent(0, 0, 0, Sex::Male, 3, 5)]);
        s.lattice.level[0].iter_mut().for_each(|v| *v = 2);
        let mut l = Ledger::default();
        replacement(&mut s, &c, &mut l);
        assert_eq!(s.population(), 5);
        assert!(s.lattice.level[0].iter().all(|&v| v == 2));
        for a in &s.agents()[1..] {
            assert_eq!(a.age, 0);
            assert!((u(5)..=u(25)).contains(&a.sugar()));
            assert_eq!(a.initial[0], a.sugar());
        }
        let added: u128 = s.agents()[1..].iter().map(|a| a.sugar().ticks() as u128).sum();
        assert_eq!(l.flows[0].replacement, added);
        replacement(&mut s, &c, &mut l);
        assert_eq!(s.population(), 5);
    }

    #[test]
    fn mating_gives_half_of_each_parent() {
        let c = cfg();
        let mut s = world(vec![
            agent(0, 0, 0, Sex::Male, 20, 10),
            agent(1, 1, 0, Sex::Female, 20, 10),
        ]);
        let mut l = Ledger::default();
        mating(&mut s, &c, &mut l);
        assert_eq!(s.population(), 3);
        let child = s.agent(2).unwrap();
        assert_eq!(child.sugar(), u(10));
        assert_eq!(child.initial[0], u(10));
        assert_eq!(child.age, 0);
        assert_eq!(s.agent(0).unwrap().sugar(), u(5));
        assert_eq!(s.agent(1).unwrap().sugar(), u(5));
        assert!(s.agent(0).unwrap().children.contains(&2));
        assert!(s.agent(1).unwrap().children.contains(&2));
        let pos = child.position;
        assert!([Position::new(0, 0), Position::new(1, 0)]
            .iter()
            .any(|&p| crate::geometry::adjacent(p, pos, 6)));
        assert_eq!(l.births, 1);
    }

    #[test]
    fn mating_needs_fertility_funds_and_room() {
        let c = cfg();
        let young = world(vec![
            agent(0, 0, 0, Sex::Male, 5, 10),
            agent(1, 1, 0, Sex::Female, 20, 10),
        ]);
        let poor = {
            let mut s = young.clone();
            s.agent_mut(0).unwrap().age = 20;
            s.agent_mut(0).unwrap().store[0] = u(5);
            s
        };
        let same_sex = {
            let mut s = young.clone();
            s.agent_mut(0).unwrap().age = 20;
            s.agent_mut(0).unwrap().sex = Sex::Female;
            s
        };
        for mut s in [young, poor, same_sex] {
            let before = s.clone();
            mating(&mut s, &c, &mut Ledger::default());
            assert_eq!(s, before);
        }
        // A 2x2 torus filled by the two parents and two bystanders.
        let c = SimConfig { m: 2, ..cfg() };
        let mut s = SimState::empty(1, &CapacityMap::uniform(2, 4), None);
        s.add_agent(agent(0, 0, 0, Sex::Male, 20, 10));
        s.add_agent(agent(1, 1, 0, Sex::Female, 20, 10));
        s.add_agent(agent(2, 0, 1, Sex::Male, 2, 10));
        s.add_agent(agent(3, 1, 1, Sex::Male, 2, 10));
        s.next_id = 4;
        let before = s.clone();
        mating(&mut s, &c, &mut Ledger::default());
        assert_eq!(s, before);
    }

    #[test]
    fn weak_threshold_accepts_equality() {
        let mut c = cfg();
        let mut a = agent(0, 0, 0, Sex::Male, 20, 10);
        let mut b = agent(1, 1, 0, Sex::Female, 20, 10);
        a.initial[0] = u(10);
        b.initial[0] = u(10);
        let mut s = world(vec![a, b]);
        let mut strict = s.clone();
        mating(&mut strict, &c, &mut Ledger::default());
        assert_eq!(strict.population(), 2);
        c.engine.mating_threshold = MatingThreshold::Weak;
        mating(&mut s, &c, &mut Ledger::default());
        assert_eq!(s.population(), 3);
    }

    #[test]
    fn dual_mating_splits_both_stores() {
        let c = SimConfig {
            spice: Some(SpiceConfig::default()),
            ..cfg()
        };
        let mut a = agent(0, 0, 0, Sex::Male, 20, 10);
        let mut b = agent(1, 1, 0, Sex::Female, 20, 10);
        a.store[1] = Amount::from_ticks(7);
        b.store[1] = u(3);
        let mut s = SimState::empty(9, &CapacityMap::uniform(6, 4), Some(&CapacityMap::uniform(6, 4)));
        s.add_agent(a);
        s.add_agent(b);
        s.next_id = 2;
        mating(&mut s, &c, &mut Ledger::default());
        let child = s.agent(2).unwrap();
        assert_eq!(
            child.spice(),
            Amount::from_ticks(3) + Amount::from_ticks(3 * crate::amount::SCALE / 2)
        );
        assert_eq!(s.agent(0).unwrap().spice(), Amount::from_ticks(4));
    }

    #[test]
    fn inheritance_splits_floored_shares() {
        let c = cfg();
        let mut parent = agent(0, 0, 0, Sex::Female, 90, 10);
        parent.children = [1, 2, 3, 4].into();
        let mut dying_kid = agent(4, 4, 4, Sex::Male, 10, 0);
        dying_kid.max_age = 90;
        let mut s = world(vec![
            parent,
            agent(1, 1, 1, Sex::Male, 10, 1),
            agent(2, 2, 2, Sex::Male, 10, 1),
            agent(3, 3, 3, Sex::Male, 10, 1),
            dying_kid,
        ]);
        s.books[0] = vec![
            Loan {
                lender: 0,
                borrower: 1,
                principal: u(7),
                due: 5,
            },
            Loan {
                lender: 0,
                borrower: 5,
                principal: u(2),
                due: 6,
            },
        ];
        let mut l = Ledger::default();
        inheritance(&mut s, &c, &mut l);
        for k in 1..=3 {
            assert_eq!(s.agent(k).unwrap().sugar(), u(4));
        }
        assert_eq!(s.agent(0).unwrap().sugar(), Amount::ZERO);
        assert_eq!(s.agent(4).unwrap().sugar(), Amount::ZERO);
        assert_eq!(l.flows[0].inheritance_loss, u(1).ticks() as u128);
        assert_eq!(
            s.books[0],
            vec![
                Loan {
                    lender: 2,
                    borrower: 1,
                    principal: u(2),
                    due: 5
                },
                Loan {
                    lender: 3,
                    borrower: 1,
                    principal: u(2),
                    due: 5
                },
            ]
        );
        assert_eq!(s.population(), 5);
    }

    #[test]
    fn heirless_estate_is_forfeit() {
        let c = cfg();
        let mut s = world(vec![
            agent(0, 0, 0, Sex::Female, 90, 10),
            agent(1, 1, 1, Sex::Male, 10, 3),
        ]);
        s.books[0].push(Loan {
            lender: 0,
            borrower: 1,
            principal: u(3),
            due: 4,
        });
        let mut l = Ledger::default();
        inheritance(&mut s, &c, &mut l);
        assert_eq!(s.agent(0).unwrap().sugar(), Amount::ZERO);
        assert!(s.books[0].is_empty());
        assert_eq!(l.flows[0].inheritance_loss, u(10).ticks() as u128);
    }
}
