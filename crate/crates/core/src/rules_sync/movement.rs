//! Movement with simultaneous updating, and the cell ranking it shares with
//! the sequential variants and combat.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::amount::Amount;
use crate::config::{SimConfig, WelfareForm};
use crate::geometry::{for_each_in_range, Direction, Position};
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::spice_trade::welfare;
use crate::state::{Agent, AgentId, Lattice, SimState};

/// Desirability of a cell. Single-resource scores are exact ratios
/// `sugar / (1 + pollution)`; dual-resource scores are welfare values.
#[derive(Clone, Copy, Debug)]
pub enum Score {
    Ratio(u64, u64),
    Real(f64),
}

impl Score {
    pub fn compare(&self, other: &Score) -> Ordering {
        match (*self, *other) {
            (Score::Ratio(a, b), Score::Ratio(c, d)) if b == d => a.cmp(&c),
            (Score::Ratio(a, b), Score::Ratio(c, d)) => (a as u128 * d as u128).cmp(&(c as u128 * b as u128)),
            (Score::Real(x), Score::Real(y)) => x.total_cmp(&y),
            (x, y) => x.as_f64().total_cmp(&y.as_f64()),
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Score::Ratio(a, b) => a as f64 / b as f64,
            Score::Real(x) => x,
        }
    }
}

/// Scores cells for one agent against a lattice.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub cfg: &'a SimConfig,
    pub dual: bool,
    pub polluted: bool,
}

impl Scorer<'_> {
    pub fn score(&self, lattice: &Lattice, agent: &Agent, cell: Position) -> Score {
        self.for_agent(agent).score(lattice, cell)
    }

    /// A scorer bound to one agent. Dual-resource welfare powers are
    /// tabulated per cell level, since levels never exceed the maxima.
    pub fn for_agent(&self, agent: &Agent) -> AgentScorer<'_> {
        let mut powers = [[f64::NAN; POWER_TABLE]; 2];
        let mut tabulated = [0usize; 2];
        if self.dual && self.cfg.engine.welfare_form == WelfareForm::CobbDouglas {
            let mt = (agent.metabolism[0] + agent.metabolism[1]) as f64;
            let maxima = [self.cfg.max_sugar, self.cfg.spice.as_ref().map_or(0, |s| s.max_spice)];
            for k in 0..2 {
                let w = agent.metabolism[k] as f64 / mt;
                let held = agent.store[k].to_f64();
                tabulated[k] = (maxima[k] as usize + 1).min(POWER_TABLE);
                for (l, p) in powers[k][..tabulated[k]].iter_mut().enumerate() {
                    *p = (l as f64 + held).powf(w);
                }
            }
        }
        AgentScorer {
            cfg: self.cfg,
            dual: self.dual,
            polluted: self.polluted,
            store: agent.store,
            metabolism: agent.metabolism,
            powers,
            tabulated,
        }
    }
}

pub struct AgentScorer<'a> {
    cfg: &'a SimConfig,
    dual: bool,
    polluted: bool,
    store: [Amount; 2],
    metabolism: [u32; 2],
    powers: [[f64; POWER_TABLE]; 2],
    tabulated: [usize; 2],
}

const POWER_TABLE: usize = 16;

impl AgentScorer<'_> {
    pub fn score(&self, lattice: &Lattice, cell: Position) -> Score {
        let i = cell.index(lattice.m);
        let pollution = if self.polluted { lattice.pollution[i] } else { 0 };
        if !self.dual {
            return Score::Ratio(lattice.level[0][i] as u64, 1 + pollution);
        }
        let (l1, l2) = (lattice.level[0][i], lattice.level[1][i]);
        let w = if self.metabolism[0] + self.metabolism[1] == 0 {
            0.0
        } else {
            let (i1, i2) = (l1 as usize, l2 as usize);
            if i1 < self.tabulated[0] && i2 < self.tabulated[1] {
                self.powers[0][i1] * self.powers[1][i2]
            } else {
                welfare(
                    self.store[0],
                    self.metabolism[0],
                    self.store[1],
                    self.metabolism[1],
                    l1,
                    l2,
                    self.cfg.engine.welfare_form,
                )
            }
        };
        Score::Real(w / (1.0 + pollution as f64))
    }
}

/// The agent's private random order of the four lattice directions, used to
/// break ties between equally good cells at equal distance.
pub fn direction_order(seed: u64, site: Site, step: u64, id: AgentId) -> [Direction; 4] {
    let mut dirs = Direction::ALL;
    dirs.shuffle(&mut stream(seed, site, step, id));
    dirs
}

#[derive(Clone, Copy, Debug)]
pub struct Candidate {
    pub cell: Position,
    pub distance: u32,
    pub score: Score,
    /// Position in the listing, which follows ray order.
    pub seq: u32,
}

/// Best first: higher score, then nearer, then earlier in `rays`.
pub fn rank(cands: &mut [Candidate]) {
    cands.sort_unstable_by(better_first);
}

/// The agent's own cell followed by every visible cell accepted by `keep`,
/// in ray order, with scores from `score`.
pub fn visible_cells(
    origin: Position,
    vision: u32,
    m: u32,
    rays: &[Direction; 4],
    include_origin: bool,
    keep: impl FnMut(Position) -> bool,
    score: impl FnMut(Position) -> Score,
) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(4 * vision as usize + 1);
    visible_cells_into(&mut out, origin, vision, m, rays, include_origin, keep, score);
    out
}

/// [`visible_cells`] appending to a caller-owned buffer.
#[allow(clippy::too_many_arguments)]
pub fn visible_cells_into(
    out: &mut Vec<Candidate>,
    origin: Position,
    vision: u32,
    m: u32,
    rays: &[Direction; 4],
    include_origin: bool,
    mut keep: impl FnMut(Position) -> bool,
    mut score: impl FnMut(Position) -> Score,
) {
    let base = out.len();
    if include_origin {
        out.push(Candidate {
            cell: origin,
            distance: 0,
            score: score(origin),
            seq: 0,
        });
    }
    for_each_in_range(origin, vision, m, rays, |cell, distance| {
        if keep(cell) {
            let seq = (out.len() - base) as u32;
            out.push(Candidate {
                cell,
                distance,
                score: score(cell),
                seq,
            });
        }
    });
}

/// Moves resources from the agent's cell into its stores, and for polluting
/// movement adds production and consumption pollution to the cell.
pub fn harvest(state: &mut SimState, cfg: &SimConfig, id: AgentId, polluted: bool) {
    let m = state.m();
    let dual = state.dual;
    let agent = state.agent(id).expect("harvesting agent exists");
    let i = agent.position.index(m);
    let metabolism = agent.metabolism;
    let sugar = std::mem::take(&mut state.lattice.level[0][i]);
    let spice = if dual {
        std::mem::take(&mut state.lattice.level[1][i])
    } else {
        0
    };
    if polluted {
        let mut add = cfg.production as u64 * sugar as u64 + cfg.consumption as u64 * metabolism[0] as u64;
        if let (true, Some(s)) = (dual, &cfg.spice) {
            add += s.spice_production as u64 * spice as u64 + s.spice_consumption as u64 * metabolism[1] as u64;
        }
        let p = &mut state.lattice.pollution[i];
        *p = p.saturating_add(add);
    }
    let agent = state.agent_mut(id).unwrap();
    agent.store[0] += Amount::from_units(sugar as u64);
    agent.store[1] += Amount::from_units(spice as u64);
}

fn better_first(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .compare(&a.score)
        .then(a.distance.cmp(&b.distance))
        .then(a.seq.cmp(&b.seq))
}

/// Every agent's candidate cells, ranked lazily: most agents settle on one
/// of their first few choices, so entries are selected one at a time on
/// demand. The result matches a full [`rank`].
struct Preferences {
    cands: Vec<Candidate>,
    start: Vec<usize>,
    ranked: Vec<usize>,
}

impl Preferences {
    fn with_capacity(agents: usize, per_agent: usize) -> Preferences {
        Preferences {
            cands: Vec::with_capacity(agents * per_agent),
            start: Vec::with_capacity(agents),
            ranked: Vec::with_capacity(agents),
        }
    }

    fn push(&mut self, a: &Agent, m: u32, rays: &[Direction; 4], score: impl FnMut(Position) -> Score) {
        self.start.push(self.cands.len());
        self.ranked.push(0);
        visible_cells_into(&mut self.cands, a.position, a.vision, m, rays, true, |_| true, score);
    }

    /// The agent's `i`-th choice (0-based).
    fn nth(&mut self, k: usize, i: usize) -> Position {
        let lo = self.start[k];
        let hi = self.start.get(k + 1).copied().unwrap_or(self.cands.len());
        while self.ranked[k] <= i {
            let at = lo + self.ranked[k];
            let best = (at..hi)
                .min_by(|&x, &y| better_first(&self.cands[x], &self.cands[y]))
                .expect("preference list exhausted");
            self.cands.swap(at, best);
            self.ranked[k] += 1;
        }
        self.cands[lo + i].cell
    }
}

/// Simultaneous movement.
///
/// Every agent ranks its own cell and all visible cells. Unplaced agents
/// propose to their best cell not yet held; an agent proposing to its own
/// original cell always gets it, displacing any holder, and other contests
/// are settled by a seeded draw. Losers move down their lists. A held cell
/// stays held, so every cell an agent preferred to its final one ends up
/// occupied. Each agent then harvests its final cell.
pub fn movement(state: &mut SimState, cfg: &SimConfig, polluted: bool, _ledger: &mut Ledger) {
    const FREE: u32 = u32::MAX;
    let m = state.m();
    let n = state.population();
    if n == 0 {
        return;
    }
    let scorer = Scorer {
        cfg,
        dual: state.dual,
        polluted,
    };
    let mut prefs = Preferences::with_capacity(n, 4 * cfg.max_vision as usize + 1);
    for a in state.agents() {
        let rays = direction_order(state.seed, Site::MoveDirections, state.step, a.id);
        let scorer = scorer.for_agent(a);
        prefs.push(a, m, &rays, |cell| scorer.score(&state.lattice, cell));
    }
    let origin: Vec<usize> = state.agents().iter().map(|a| a.position.index(m)).collect();
    let mut holder = vec![FREE; state.lattice.cells()];
    let mut next = vec![0usize; n];
    let mut unplaced: Vec<u32> = (0..n as u32).collect();
    let mut round = 0u64;
    while !unplaced.is_empty() {
        let mut proposals: Vec<(usize, u32)> = Vec::with_capacity(unplaced.len());
        for &k in &unplaced {
            let k = k as usize;
            loop {
                let cell = prefs.nth(k, next[k]).index(m);
                if holder[cell] == FREE || cell == origin[k] {
                    proposals.push((cell, k as u32));
                    break;
                }
                next[k] += 1;
            }
        }
        proposals.sort_unstable();
        let mut rng = stream(state.seed, Site::MoveContest, state.step, round);
        let mut still = Vec::new();
        for group in proposals.chunk_by(|a, b| a.0 == b.0) {
            let cell = group[0].0;
            let winner = match group.iter().find(|&&(_, k)| origin[k as usize] == cell) {
                Some(&(_, owner)) => owner,
                None => group[rng.random_range(0..group.len())].1,
            };
            if holder[cell] != FREE {
                let bumped = holder[cell];
                next[bumped as usize] += 1;
                still.push(bumped);
            }
            holder[cell] = winner;
            for &(_, k) in group {
                if k != winner {
                    next[k as usize] += 1;
                    still.push(k);
                }
            }
        }
        still.sort_unstable();
        unplaced = still;
        round += 1;
    }
    let mut moves = Vec::with_capacity(n);
    for (cell, &k) in holder.iter().enumerate() {
        if k != FREE {
            moves.push((state.agents()[k as usize].id, Position::from_index(cell, m)));
        }
    }
    state.relocate_all(&moves);
    let ids = state.ids();
    for id in ids {
        harvest(state, cfg, id, polluted);
    }
}
