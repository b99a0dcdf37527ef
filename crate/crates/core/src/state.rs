//! Simulation state: lattice fields, the agent population and loan books.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use crate::amount::Amount;
use crate::bitstring::BitString;
use crate::config::SimConfig;
use crate::geometry::{cardinal_neighbor, Direction, Position};
use crate::rng::{stream, Site};
use crate::terrain::{CapacityMap, TerrainError};

pub type AgentId = u64;

const NO_AGENT: AgentId = AgentId::MAX;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sex {
    Male,
    Female,
}

/// Resource axis; spice slots are unused in single-resource runs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Resource {
    Sugar,
    Spice,
}

impl Resource {
    pub const BOTH: [Resource; 2] = [Resource::Sugar, Resource::Spice];

    pub fn idx(self) -> usize {
        match self {
            Resource::Sugar => 0,
            Resource::Spice => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Resource::Sugar => "sugar",
            Resource::Spice => "spice",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Agent {
    pub id: AgentId,
    pub position: Position,
    pub sex: Sex,
    pub vision: u32,
    pub age: u32,
    pub max_age: u32,
    /// Per-step consumption, indexed by [`Resource::idx`].
    pub metabolism: [u32; 2],
    pub store: [Amount; 2],
    pub initial: [Amount; 2],
    pub culture: BitString,
    pub immunity: BitString,
    pub diseases: BTreeSet<BitString>,
    pub children: BTreeSet<AgentId>,
}

impl Agent {
    pub fn sugar(&self) -> Amount {
        self.store[0]
    }

    pub fn spice(&self) -> Amount {
        self.store[1]
    }

    /// Sugar, plus spice in dual mode (spice is zero otherwise).
    pub fn wealth(&self) -> Amount {
        self.store[0] + self.store[1]
    }
}

/// One outstanding loan. `due` is the step at which repayment falls due.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Loan {
    pub lender: AgentId,
    pub borrower: AgentId,
    pub principal: Amount,
    pub due: u64,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Lattice {
    pub m: u32,
    /// Current resource per cell, row-major with `y` outer; spice empty in single mode.
    pub level: [Vec<u32>; 2],
    pub capacity: [Vec<u32>; 2],
    pub pollution: Vec<u64>,
}

impl Lattice {
    pub fn cells(&self) -> usize {
        self.m as usize * self.m as usize
    }

    pub fn get(&self, r: Resource, p: Position) -> u32 {
        self.level[r.idx()][p.index(self.m)]
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SimState {
    pub seed: u64,
    pub step: u64,
    pub dual: bool,
    pub lattice: Lattice,
    agents: Vec<Agent>,
    occupancy: Vec<AgentId>,
    pub next_id: AgentId,
    /// Loan books indexed by [`Resource::idx`]; the spice book stays empty in single mode.
    pub books: [Vec<Loan>; 2],
}

#[derive(Debug, thiserror::Error)]
pub enum InitError {
    #[error("INITIALPOPULATIONSIZE {population} exceeds the {cells} lattice cells")]
    PopulationTooLarge { population: u64, cells: u64 },
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
}

impl SimState {
    /// An empty state over the given capacity maps, cells filled to capacity.
    pub fn empty(seed: u64, sugar: &CapacityMap, spice: Option<&CapacityMap>) -> SimState {
        let m = sugar.m;
        let cells = m as usize * m as usize;
        let spice_caps = spice.map(|s| s.cells.clone()).unwrap_or_default();
        SimState {
            seed,
            step: 0,
            dual: spice.is_some(),
            lattice: Lattice {
                m,
                level: [sugar.cells.clone(), spice_caps.clone()],
                capacity: [sugar.cells.clone(), spice_caps],
                pollution: vec![0; cells],
            },
            agents: Vec::new(),
            occupancy: vec![NO_AGENT; cells],
            next_id: 0,
            books: [Vec::new(), Vec::new()],
        }
    }

    pub fn m(&self) -> u32 {
        self.lattice.m
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    /// Mutable view of the population. Moving an agent through this view
    /// bypasses the occupancy index; use [`SimState::move_agent`] instead.
    pub fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    pub fn population(&self) -> usize {
        self.agents.len()
    }

    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.agents.binary_search_by_key(&id, |a| a.id).ok()
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.index_of(id).map(|i| &self.agents[i])
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut Agent> {
        self.index_of(id).map(move |i| &mut self.agents[i])
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn occupant(&self, p: Position) -> Option<AgentId> {
        match self.occupancy[p.index(self.m())] {
            NO_AGENT => None,
            id => Some(id),
        }
    }

    pub fn is_free(&self, p: Position) -> bool {
        self.occupancy[p.index(self.m())] == NO_AGENT
    }

    /// Occupants of the four cells adjacent to `id`'s cell, sorted by id.
    pub fn neighbours(&self, id: AgentId) -> Vec<AgentId> {
        let m = self.m();
        let Some(a) = self.agent(id) else {
            return Vec::new();
        };
        let mut out: Vec<AgentId> = Direction::ALL
            .iter()
            .filter_map(|&d| self.occupant(cardinal_neighbor(a.position, d, m)))
            .filter(|&b| b != id)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id).collect()
    }

    /// Moves an agent, keeping the occupancy index in step. The target must be free.
    pub fn move_agent(&mut self, id: AgentId, to: Position) {
        let m = self.m();
        let i = self.index_of(id).expect("moving an unknown agent");
        let from = self.agents[i].position;
        if from == to {
            return;
        }
        assert_eq!(self.occupancy[to.index(m)], NO_AGENT, "target cell {to} occupied");
        self.occupancy[from.index(m)] = NO_AGENT;
        self.occupancy[to.index(m)] = id;
        self.agents[i].position = to;
    }

    /// Relocates many agents at once; the final placement must be injective.
    pub fn relocate_all(&mut self, moves: &[(AgentId, Position)]) {
        let m = self.m();
        for &(id, _) in moves {
            let p = self.agent(id).expect("relocating an unknown agent").position;
            self.occupancy[p.index(m)] = NO_AGENT;
        }
        for &(id, to) in moves {
            assert_eq!(self.occupancy[to.index(m)], NO_AGENT, "two agents placed at {to}");
            self.occupancy[to.index(m)] = id;
            let i = self.index_of(id).unwrap();
            self.agents[i].position = to;
        }
    }

    /// Clears the agent's cell in the occupancy index, leaving the record in
    /// place for a later batched [`SimState::remove_agents`].
    pub(crate) fn vacate(&mut self, id: AgentId) {
        let m = self.m();
        let p = self.agent(id).expect("vacating an unknown agent").position;
        self.occupancy[p.index(m)] = NO_AGENT;
    }

    /// A new, never-used agent id.
    pub fn fresh_id(&mut self) -> AgentId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Adds an agent whose id came from [`SimState::fresh_id`]; its cell must be free.
    pub fn add_agent(&mut self, agent: Agent) {
        let m = self.m();
        assert!(
            self.agents.last().is_none_or(|a| a.id < agent.id),
            "agent ids must increase"
        );
        let cell = agent.position.index(m);
        assert_eq!(self.occupancy[cell], NO_AGENT, "spawn cell {} occupied", agent.position);
        self.occupancy[cell] = agent.id;
        self.agents.push(agent);
    }

    /// Removes agents and voids every loan naming them. Returns the removed records.
    pub fn remove_agents(&mut self, ids: &BTreeSet<AgentId>) -> Vec<Agent> {
        if ids.is_empty() {
            return Vec::new();
        }
        let m = self.m();
        let mut removed = Vec::with_capacity(ids.len());
        let mut kept = Vec::with_capacity(self.agents.len());
        for a in self.agents.drain(..) {
            if ids.contains(&a.id) {
                let cell = a.position.index(m);
                if self.occupancy[cell] == a.id {
                    self.occupancy[cell] = NO_AGENT;
                }
                removed.push(a);
            } else {
                kept.push(a);
            }
        }
        self.agents = kept;
        for book in &mut self.books {
            book.retain(|l| !ids.contains(&l.lender) && !ids.contains(&l.borrower));
        }
        removed
    }

    /// Rebuilds the occupancy index from agent positions (later agents win clashes).
    pub fn rebuild_occupancy(&mut self) {
        let m = self.m();
        self.occupancy.iter_mut().for_each(|c| *c = NO_AGENT);
        for a in &self.agents {
            self.occupancy[a.position.index(m)] = a.id;
        }
    }

    pub(crate) fn occupancy_raw(&self) -> &[AgentId] {
        &self.occupancy
    }

    /// Restores a state from parts, rebuilding the occupancy index.
    pub(crate) fn from_parts(
        seed: u64,
        step: u64,
        dual: bool,
        lattice: Lattice,
        mut agents: Vec<Agent>,
        next_id: AgentId,
        books: [Vec<Loan>; 2],
    ) -> SimState {
        agents.sort_by_key(|a| a.id);
        let cells = lattice.cells();
        let mut s = SimState {
            seed,
            step,
            dual,
            lattice,
            agents,
            occupancy: vec![NO_AGENT; cells],
            next_id,
            books,
        };
        s.rebuild_occupancy();
        s
    }

    /// Total held by agents, in ticks.
    pub fn agent_total(&self, r: Resource) -> u128 {
        self.agents.iter().map(|a| a.store[r.idx()].ticks() as u128).sum()
    }

    /// Total lying on the lattice, in ticks.
    pub fn lattice_total(&self, r: Resource) -> u128 {
        self.lattice.level[r.idx()]
            .iter()
            .map(|&v| v as u128 * crate::amount::SCALE as u128)
            .sum()
    }

    pub fn free_cells(&self) -> Vec<Position> {
        let m = self.m();
        (0..self.lattice.cells())
            .filter(|&i| self.occupancy[i] == NO_AGENT)
            .map(|i| Position::from_index(i, m))
            .collect()
    }
}

pub fn is_fertile(age: u32, sex: Sex, cfg: &SimConfig) -> bool {
    match sex {
        Sex::Female => (cfg.female_fertility_start..=cfg.female_fertility_end).contains(&age),
        Sex::Male => (cfg.male_fertility_start..=cfg.male_fertility_end).contains(&age),
    }
}

/// Past the end of the fertility window for its sex.
pub fn is_post_fertile(age: u32, sex: Sex, cfg: &SimConfig) -> bool {
    match sex {
        Sex::Female => age > cfg.female_fertility_end,
        Sex::Male => age > cfg.male_fertility_end,
    }
}

/// A fresh agent with every attribute drawn uniformly within its configured
/// bounds and `sugar_range` as its starting endowment.
pub(crate) fn random_agent(
    cfg: &SimConfig,
    id: AgentId,
    position: Position,
    sugar_range: (u32, u32),
    rng: &mut impl Rng,
) -> Agent {
    let sex = if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
    let sugar = Amount::from_units(rng.random_range(sugar_range.0..=sugar_range.1) as u64);
    let (spice_metabolism, spice) = match &cfg.spice {
        Some(s) => {
            let met = if s.max_spice_metabolism == 0 {
                0
            } else {
                rng.random_range(1..=s.max_spice_metabolism)
            };
            let amt = rng.random_range(s.initial_spice_min..=s.initial_spice_max);
            (met, Amount::from_units(amt as u64))
        }
        None => (0, Amount::ZERO),
    };
    Agent {
        id,
        position,
        sex,
        vision: rng.random_range(1..=cfg.max_vision),
        age: 0,
        max_age: rng.random_range(cfg.min_age..=cfg.max_age),
        metabolism: [
            rng.random_range(cfg.min_metabolism..=cfg.max_metabolism),
            spice_metabolism,
        ],
        store: [sugar, spice],
        initial: [sugar, spice],
        culture: BitString::random(cfg.culture_count as usize, rng),
        immunity: BitString::random(cfg.immunity_length as usize, rng),
        diseases: BTreeSet::new(),
        children: BTreeSet::new(),
    }
}

/// Initial state using the configured terrain files, or the two-peak default.
pub fn init_state(cfg: &SimConfig, seed: u64) -> Result<SimState, InitError> {
    let sugar = match &cfg.engine.terrain {
        Some(path) => CapacityMap::load(path)?,
        None => CapacityMap::two_peak(cfg.m, cfg.max_sugar, false),
    };
    let spice = match (&cfg.spice, &cfg.engine.spice_terrain) {
        (None, _) => None,
        (Some(_), Some(path)) => Some(CapacityMap::load(path)?),
        (Some(s), None) => Some(CapacityMap::two_peak(cfg.m, s.max_spice, true)),
    };
    init_state_on(cfg, seed, &sugar, spice.as_ref())
}

/// Initial state over explicit capacity maps.
pub fn init_state_on(
    cfg: &SimConfig,
    seed: u64,
    sugar: &CapacityMap,
    spice: Option<&CapacityMap>,
) -> Result<SimState, InitError> {
    cfg.validate()?;
    sugar.check(cfg.m, cfg.max_sugar, "sugar")?;
    if let (Some(map), Some(s)) = (spice, &cfg.spice) {
        map.check(cfg.m, s.max_spice, "spice")?;
    }
    let spice = if cfg.is_dual() {
        Some(spice.ok_or(TerrainError::MissingSpice)?)
    } else {
        None
    };
    let cells = cfg.m as u64 * cfg.m as u64;
    let n = cfg.initial_population_size as u64;
    if n > cells {
        return Err(InitError::PopulationTooLarge { population: n, cells });
    }
    let mut state = SimState::empty(seed, sugar, spice);
    let mut rng = stream(seed, Site::Init, 0, 0);
    let cells_chosen = index::sample(&mut rng, cells as usize, n as usize);
    let diseases: Vec<BitString> = cfg
        .disease
        .strings
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for cell in cells_chosen.iter() {
        let id = state.fresh_id();
        let pos = Position::from_index(cell, cfg.m);
        let mut agent = random_agent(cfg, id, pos, (cfg.initial_sugar_min, cfg.initial_sugar_max), &mut rng);
        let k = cfg.disease.initial_per_agent as usize;
        if k > 0 {
            for i in index::sample(&mut rng, diseases.len(), k).iter() {
                agent.diseases.insert(diseases[i].clone());
            }
        }
        state.add_agent(agent);
    }
    Ok(state)
}
