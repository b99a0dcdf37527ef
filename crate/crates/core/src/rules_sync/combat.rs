//! Combat: movement onto cells held by poorer agents of another tribe.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::amount::Amount;
use crate::bitstring::{tribe, Tribe};
use crate::config::SimConfig;
use crate::geometry::{for_each_in_range, Direction, Position};
use crate::ledger::{Ledger, ResourceFlows};
use crate::rng::{stream, Site};
use crate::rules_sync::movement::{direction_order, harvest};
use crate::state::{Agent, AgentId, Resource, SimState};

fn limit(cfg: &SimConfig, r: Resource) -> Amount {
    let units = match r {
        Resource::Sugar => cfg.combat_limit,
        Resource::Spice => cfg.spice.as_ref().map_or(0, |s| s.spice_combat_limit),
    };
    Amount::from_units(units as u64)
}

fn active(state: &SimState) -> &'static [Resource] {
    if state.dual {
        &Resource::BOTH
    } else {
        &[Resource::Sugar]
    }
}

fn tribe_of(a: &Agent) -> Option<Tribe> {
    tribe(&a.culture).ok()
}

/// Small integer standing for a tribe, with a third value for no tribe.
pub(crate) fn tribe_code(a: &Agent) -> u8 {
    match tribe_of(a) {
        Some(Tribe::Blue) => 0,
        Some(Tribe::Red) => 1,
        None => 2,
    }
}

/// The cell's resource plus, if occupied, the occupant's store capped at the
/// combat limit.
pub fn combat_reward(site: Position, state: &SimState, r: Resource, cfg: &SimConfig) -> Amount {
    let level = Amount::from_units(state.lattice.get(r, site) as u64);
    match state.occupant(site).and_then(|id| state.agent(id)) {
        Some(v) => level + v.store[r.idx()].min(limit(cfg, r)),
        None => level,
    }
}

#[derive(Clone, Copy)]
struct Occupant {
    wealth: Amount,
    store: [Amount; 2],
    tribe: u8,
}

impl Occupant {
    fn of(a: &Agent) -> Occupant {
        Occupant {
            wealth: a.wealth(),
            store: a.store,
            tribe: tribe_code(a),
        }
    }
}

/// Occupants as combat judges them, one slot per cell. Lattice levels are
/// always read from the live state: the only cells harvested during combat
/// are the ones already claimed.
pub(crate) struct Board {
    m: u32,
    occ: Vec<Option<Occupant>>,
}

impl Board {
    pub(crate) fn of(state: &SimState) -> Board {
        let mut occ = vec![None; state.lattice.cells()];
        for a in state.agents() {
            occ[a.position.index(state.m())] = Some(Occupant::of(a));
        }
        Board { m: state.m(), occ }
    }

    fn at(&self, p: Position) -> Option<&Occupant> {
        self.occ[p.index(self.m)].as_ref()
    }

    /// Records that `id` moved from `from` to its current cell.
    pub(crate) fn track(&mut self, state: &SimState, id: AgentId, from: Position) {
        self.occ[from.index(self.m)] = None;
        if let Some(a) = state.agent(id) {
            self.occ[a.position.index(self.m)] = Some(Occupant::of(a));
        }
    }

    fn total_reward(&self, state: &SimState, cfg: &SimConfig, site: Position) -> Amount {
        active(state)
            .iter()
            .map(|&r| {
                let level = Amount::from_units(state.lattice.get(r, site) as u64);
                match self.at(site) {
                    Some(v) => level + v.store[r.idx()].min(limit(cfg, r)),
                    None => level,
                }
            })
            .sum()
    }

    /// True when an agent of another tribe at `site` or within `vision` of
    /// it holds more than `after`.
    pub(crate) fn threatened(&self, site: Position, tribe: u8, vision: u32, after: Amount) -> bool {
        let threat = |cell: Position| self.at(cell).is_some_and(|x| x.tribe != tribe && x.wealth > after);
        let mut hit = threat(site);
        for_each_in_range(site, vision, self.m, &Direction::ALL, |cell, _| {
            hit = hit || threat(cell);
        });
        hit
    }
}

/// The mover's chosen cell: the best safe cell by reward, then distance,
/// then ray order. Its own cell counts (reward: the cell's resources) if
/// safe. `None` when every cell is unsafe or taken. Occupants are judged by
/// `board`; `threatened(site, after)` decides safety.
pub(crate) fn choose_target(
    board: &Board,
    state: &SimState,
    cfg: &SimConfig,
    mover: &Agent,
    rays: &[Direction; 4],
    taken: impl Fn(Position) -> bool,
    threatened: impl Fn(Position, Amount) -> bool,
) -> Option<Position> {
    let m = state.m();
    let own = tribe_code(mover);
    let wealth = mover.wealth();
    let mut best: Option<(Amount, u32, Position)> = None;
    let mut consider = |cell: Position, distance: u32, reward: Amount| {
        // Candidates arrive nearest-first within each ray, so only a strictly
        // better reward or a strictly shorter distance displaces the incumbent.
        let better = match best {
            None => true,
            Some((r, d, _)) => reward > r || (reward == r && distance < d),
        };
        if better && !taken(cell) && !threatened(cell, wealth + reward) {
            best = Some((reward, distance, cell));
        }
    };
    let home: Amount = active(state)
        .iter()
        .map(|&r| Amount::from_units(state.lattice.get(r, mover.position) as u64))
        .sum();
    consider(mover.position, 0, home);
    for_each_in_range(mover.position, mover.vision, m, rays, |cell, distance| {
        let open = match board.at(cell) {
            None => true,
            Some(x) => x.tribe != own && x.wealth < wealth,
        };
        if open {
            consider(cell, distance, board.total_reward(state, cfg, cell));
        }
    });
    best.map(|(_, _, cell)| cell)
}

/// Moves `id` to `target`, killing any occupant, then harvests. The victim
/// is vacated and added to `dead`; the caller removes the dead in one batch.
pub(crate) fn strike(
    state: &mut SimState,
    cfg: &SimConfig,
    id: AgentId,
    target: Position,
    dead: &mut BTreeSet<AgentId>,
    ledger: &mut Ledger,
) {
    if let Some(victim) = state.occupant(target).filter(|&v| v != id) {
        let spoils = state.agent(victim).unwrap().store;
        state.vacate(victim);
        dead.insert(victim);
        let dual = state.dual;
        let killer = state.agent_mut(id).expect("attacker exists");
        for r in Resource::BOTH {
            if r == Resource::Spice && !dual {
                continue;
            }
            let loot = spoils[r.idx()].min(limit(cfg, r));
            killer.store[r.idx()] += loot;
            let flows: &mut ResourceFlows = ledger.flow(r);
            Ledger::add(&mut flows.combat_loss, spoils[r.idx()] - loot);
        }
        ledger.kills += 1;
    }
    state.move_agent(id, target);
    harvest(state, cfg, id, false);
}

/// Simultaneous combat, resolved richest first (ties in seeded random order).
/// Every judgement uses the occupants as they were before the rule; a cell
/// claimed by an earlier mover is no longer available. Agents with no safe
/// cell stay and harvest where they are.
///
/// A mover's own store and cell are untouched until its turn (only a kill
/// could change them, and then it has no turn), so the live state serves
/// for everything except occupancy.
pub fn combat(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let m = state.m();
    let board = Board::of(state);
    let mut order: Vec<(Amount, AgentId)> = state.agents().iter().map(|a| (a.wealth(), a.id)).collect();
    order.shuffle(&mut stream(state.seed, Site::Combat, state.step, u64::MAX));
    order.sort_by_key(|&(w, _)| std::cmp::Reverse(w));
    let mut taken = vec![false; state.lattice.cells()];
    let mut dead = BTreeSet::new();
    for (_, id) in order {
        if dead.contains(&id) {
            continue;
        }
        let mover = state.agent(id).unwrap();
        let tribe = tribe_code(mover);
        let vision = mover.vision;
        let rays = direction_order(state.seed, Site::Combat, state.step, id);
        let target = choose_target(
            &board,
            state,
            cfg,
            mover,
            &rays,
            |c| taken[c.index(m)],
            |c, after| board.threatened(c, tribe, vision, after),
        )
        .unwrap_or(mover.position);
        taken[target.index(m)] = true;
        strike(state, cfg, id, target, &mut dead, ledger);
    }
    state.remove_agents(&dead);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstring::BitString;
    use crate::geometry::torus_distance;
    use crate::state::{init_state, Sex};
    use crate::terrain::CapacityMap;
    use std::collections::BTreeMap;

    fn cfg() -> SimConfig {
        SimConfig {
            m: 7,
            max_vision: 3,
            culture_count: 3,
            combat_limit: 4,
            initial_population_size: 0,
            ..SimConfig::default()
        }
    }

    fn agent(id: AgentId, x: u32, y: u32, sugar: u64, culture: &str, vision: u32) -> Agent {
        Agent {
            id,
            position: Position::new(x, y),
            sex: Sex::Male,
            vision,
            age: 0,
            max_age: 100,
            metabolism: [1, 0],
            store: [Amount::from_units(sugar), Amount::ZERO],
            initial: [Amount::from_units(sugar), Amount::ZERO],
            culture: culture.parse().unwrap(),
            immunity: BitString::default(),
            diseases: BTreeSet::new(),
            children: BTreeSet::new(),
        }
    }

    fn total_reward(site: Position, state: &SimState, cfg: &SimConfig) -> Amount {
        active(state).iter().map(|&r| combat_reward(site, state, r, cfg)).sum()
    }

    /// Direct scan of the mover's surroundings in the pre-state.
    fn vulnerable(view: &SimState, mover: &Agent, site: Position, reward: Amount) -> bool {
        let own = tribe_of(mover);
        let after = mover.wealth() + reward;
        let threat = |cell: Position| {
            view.occupant(cell)
                .and_then(|x| view.agent(x))
                .is_some_and(|x| tribe_of(x) != own && x.wealth() > after)
        };
        let mut hit = threat(site);
        for_each_in_range(site, mover.vision, view.m(), &Direction::ALL, |cell, _| {
            hit = hit || threat(cell);
        });
        hit
    }

    fn world(level: u32, agents: Vec<Agent>) -> SimState {
        let mut s = SimState::empty(3, &CapacityMap::uniform(7, 4), None);
        s.lattice.level[0].iter_mut().for_each(|v| *v = level);
        for a in agents {
            s.add_agent(a);
        }
        s
    }

    #[test]
    fn reward_examples() {
        let c = cfg();
        let mut s = world(2, vec![agent(1, 0, 0, 10, "000", 1), agent(2, 3, 3, 3, "000", 1)]);
        assert_eq!(
            combat_reward(Position::new(1, 1), &s, Resource::Sugar, &c),
            Amount::from_units(2)
        );
        assert_eq!(
            combat_reward(Position::new(0, 0), &s, Resource::Sugar, &c),
            Amount::from_units(6)
        );
        s.lattice.level[0][Position::new(3, 3).index(7)] = 5;
        assert_eq!(
            combat_reward(Position::new(3, 3), &s, Resource::Sugar, &c),
            Amount::from_units(8)
        );
    }

    #[test]
    fn lone_richer_attacker_kills() {
        let c = cfg();
        let mut s = world(0, vec![agent(1, 0, 0, 20, "000", 2), agent(2, 2, 0, 10, "111", 1)]);
        s.lattice.level[0][Position::new(2, 0).index(7)] = 3;
        let mut l = Ledger::default();
        combat(&mut s, &c, &mut l);
        assert_eq!(s.population(), 1);
        let a = s.agent(1).unwrap();
        assert_eq!(a.position, Position::new(2, 0));
        assert_eq!(a.sugar(), Amount::from_units(20 + 3 + 4));
        assert_eq!(l.kills, 1);
        assert_eq!(l.flows[0].combat_loss, Amount::from_units(6).ticks() as u128);
    }

    #[test]
    fn same_tribe_is_left_alone() {
        let c = cfg();
        let mut s = world(0, vec![agent(1, 0, 0, 20, "000", 2), agent(2, 2, 0, 10, "001", 1)]);
        s.lattice.level[0][Position::new(2, 0).index(7)] = 3;
        combat(&mut s, &c, &mut Ledger::default());
        assert_eq!(s.population(), 2);
    }

    #[test]
    fn cornered_agent_stays() {
        // Rich enemies watch every reachable cell but cannot see the agent.
        let c = SimConfig { m: 5, ..cfg() };
        let mut s = SimState::empty(3, &CapacityMap::uniform(5, 4), None);
        s.lattice.level[0].iter_mut().for_each(|v| *v = 1);
        s.add_agent(agent(1, 0, 0, 2, "000", 2));
        for (id, (x, y)) in [(0, 2), (1, 1), (4, 4), (2, 2), (3, 3)].into_iter().enumerate() {
            s.add_agent(agent(10 + id as u64, x, y, 50, "111", 1));
        }
        let mut l = Ledger::default();
        let before = s.agent(1).unwrap().clone();
        let board = Board::of(&s);
        let target = choose_target(
            &board,
            &s,
            &c,
            &before,
            &Direction::ALL,
            |_| false,
            |p, after| board.threatened(p, tribe_code(&before), before.vision, after),
        );
        assert_eq!(target, None);
        combat(&mut s, &c, &mut l);
        assert_eq!(s.agent(1).unwrap().position, before.position);
    }

    /// Brute-force check of the outcome against the pre-state.
    fn check_outcome(pre: &SimState, post: &SimState, cfg: &SimConfig) {
        let m = pre.m();
        let removed: Vec<&Agent> = pre.agents().iter().filter(|a| !post.contains(a.id)).collect();
        for v in removed {
            let killer = post.occupant(v.position).expect("victim cell taken");
            let k = pre.agent(killer).unwrap();
            assert_ne!(tribe_of(k), tribe_of(v));
            assert!(k.wealth() > v.wealth());
        }
        let finals: BTreeMap<Position, AgentId> = post.agents().iter().map(|a| (a.position, a.id)).collect();
        for a in post.agents() {
            let old = pre.agent(a.id).unwrap();
            let d_final = torus_distance(old.position, a.position, m).finite().unwrap();
            assert!(d_final <= old.vision);
            let final_reward = if a.position == old.position {
                Amount::from_units(pre.lattice.get(Resource::Sugar, old.position) as u64)
            } else {
                total_reward(a.position, pre, cfg)
            };
            // Any safe, at-least-as-good, strictly closer cell went to someone new.
            for_each_in_range(old.position, old.vision, m, &Direction::ALL, |cell, d| {
                let open = match pre.occupant(cell).and_then(|x| pre.agent(x)) {
                    None => true,
                    Some(x) => tribe_of(x) != tribe_of(old) && x.wealth() < old.wealth(),
                };
                let r = total_reward(cell, pre, cfg);
                if open && !vulnerable(pre, old, cell, r) && r >= final_reward && d < d_final {
                    let now = finals.get(&cell).copied();
                    assert!(
                        now.is_some() && now != pre.occupant(cell),
                        "agent {} skipped {cell:?}",
                        a.id
                    );
                }
            });
        }
    }

    #[test]
    fn board_threats_match_state_scan() {
        for seed in 0..20 {
            let c = SimConfig {
                m: 9,
                initial_population_size: 30,
                max_vision: 4,
                culture_count: 3,
                ..SimConfig::default()
            };
            let s = init_state(&c, seed).unwrap();
            let board = Board::of(&s);
            for a in s.agents() {
                for i in 0..s.lattice.cells() {
                    let p = Position::from_index(i, 9);
                    for extra in [0, 1, 3, 8, 20] {
                        let r = Amount::from_units(extra);
                        let want = vulnerable(&s, a, p, r);
                        let after = a.wealth() + r;
                        assert_eq!(board.threatened(p, tribe_code(a), a.vision, after), want);
                    }
                }
            }
        }
    }

    #[test]
    fn random_worlds_satisfy_postconditions() {
        for seed in 0..40 {
            let c = SimConfig {
                m: 8,
                initial_population_size: 20,
                max_vision: 3,
                culture_count: 3,
                ..SimConfig::default()
            };
            let mut s = init_state(&c, seed).unwrap();
            for (i, v) in s.lattice.level[0].iter_mut().enumerate() {
                *v = (i as u32 * 7 + seed as u32) % 5;
            }
            let pre = s.clone();
            let before: u128 = pre.agent_total(Resource::Sugar) + pre.lattice_total(Resource::Sugar);
            let mut l = Ledger::default();
            combat(&mut s, &c, &mut l);
            check_outcome(&pre, &s, &c);
            let after = s.agent_total(Resource::Sugar) + s.lattice_total(Resource::Sugar);
            assert_eq!(before - l.flows[0].combat_loss, after);
            assert_eq!(pre.population() - s.population(), l.kills as usize);
        }
    }
}
