//! Toroidal lattice geometry with von Neumann (cardinal-ray) neighbourhoods.
//!
//! Distance is only finite between cells that share a row or a column; any
//! other pair is [`Distance::Infinite`], so diagonal cells are never visible.

use std::fmt;

/// A lattice cell. `x` is the column, `y` the row; both lie in `0..M`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Position {
    pub x: u32,
    pub y: u32,
}

impl Position {
    pub const fn new(x: u32, y: u32) -> Position {
        Position { x, y }
    }

    /// Index into row-major lattice arrays (`y` outer).
    pub fn index(self, m: u32) -> usize {
        self.y as usize * m as usize + self.x as usize
    }

    pub fn from_index(i: usize, m: u32) -> Position {
        Position::new((i % m as usize) as u32, (i / m as usize) as u32)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Torus distance; `Infinite` sorts after every finite value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Distance {
    Finite(u32),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<u32> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    /// True when finite and at most `k`.
    pub fn within(self, k: u32) -> bool {
        matches!(self, Distance::Finite(d) if d <= k)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];
}

fn wrap_gap(a: u32, b: u32, m: u32) -> u32 {
    let d = a.abs_diff(b);
    d.min(m - d)
}

pub fn torus_distance(a: Position, b: Position, m: u32) -> Distance {
    if a.x == b.x {
        Distance::Finite(wrap_gap(a.y, b.y, m))
    } else if a.y == b.y {
        Distance::Finite(wrap_gap(a.x, b.x, m))
    } else {
        Distance::Infinite
    }
}

pub fn adjacent(a: Position, b: Position, m: u32) -> bool {
    torus_distance(a, b, m) == Distance::Finite(1)
}

pub fn cardinal_neighbor(p: Position, d: Direction, m: u32) -> Position {
    match d {
        Direction::North => Position::new(p.x, (p.y + 1) % m),
        Direction::South => Position::new(p.x, (p.y + m - 1) % m),
        Direction::East => Position::new((p.x + 1) % m, p.y),
        Direction::West => Position::new((p.x + m - 1) % m, p.y),
    }
}

/// The cell `steps` cells away from `p` along `d`, wrapping.
pub fn step_along(p: Position, d: Direction, steps: u32, m: u32) -> Position {
    let s = steps % m;
    match d {
        Direction::North => Position::new(p.x, (p.y + s) % m),
        Direction::South => Position::new(p.x, (p.y + m - s) % m),
        Direction::East => Position::new((p.x + s) % m, p.y),
        Direction::West => Position::new((p.x + m - s) % m, p.y),
    }
}

/// Calls `visit(cell, distance)` once for each distinct cell at finite
/// distance `1..=k` from `p`, walking the rays in the order given.
///
/// A cell reachable along two rays (even `M`, `k ≥ M/2`) is visited once, on
/// the first ray that reaches it at its true torus distance.
pub fn for_each_in_range(p: Position, k: u32, m: u32, rays: &[Direction; 4], mut visit: impl FnMut(Position, u32)) {
    let reach = k.min(m / 2);
    for &dir in rays {
        for s in 1..=reach {
            // The far half of the opposite ray coincides with this one when
            // 2s = M; only the first-listed of the pair keeps it.
            if 2 * s == m {
                let partner = match dir {
                    Direction::North => Direction::South,
                    Direction::South => Direction::North,
                    Direction::East => Direction::West,
                    Direction::West => Direction::East,
                };
                let partner_first = rays.iter().position(|&r| r == partner) < rays.iter().position(|&r| r == dir);
                if partner_first {
                    continue;
                }
            }
            visit(step_along(p, dir, s, m), s);
        }
    }
}

/// `N_k(p)`: distinct cells at finite distance `1..=k`, excluding `p`.
pub fn neighborhood(p: Position, k: u32, m: u32) -> Vec<Position> {
    let mut out = Vec::with_capacity(4 * k as usize);
    for_each_in_range(p, k, m, &Direction::ALL, |c, _| out.push(c));
    out
}

/// Agents at finite distance `1..=range` from `who`, in the order `positions`
/// yields them.
pub fn visible_agents<I>(who: Position, positions: I, range: u32, m: u32) -> Vec<u64>
where
    I: IntoIterator<Item = (u64, Position)>,
{
    positions
        .into_iter()
        .filter(|&(_, p)| matches!(torus_distance(who, p, m), Distance::Finite(d) if d >= 1 && d <= range))
        .map(|(id, _)| id)
        .collect()
}
