//! Lattice-only rules: regrowth and pollution diffusion.

use crate::config::{SimConfig, WinterMode};
use crate::geometry::{cardinal_neighbor, Direction, Position};
use crate::ledger::Ledger;
use crate::state::{Resource, SimState};

fn rates(cfg: &SimConfig) -> [u32; 2] {
    [cfg.sugar_growth, cfg.spice.as_ref().map_or(0, |s| s.spice_growth)]
}

fn resources(state: &SimState) -> &'static [Resource] {
    if state.dual {
        &Resource::BOTH
    } else {
        &[Resource::Sugar]
    }
}

/// Grows one resource field, each cell by `rate(x)`, capped at capacity.
fn grow(state: &mut SimState, r: Resource, rate: impl Fn(u32) -> u32, ledger: &mut Ledger) {
    let m = state.m();
    let k = r.idx();
    let lattice = &mut state.lattice;
    let mut inflow = 0u128;
    for (i, (level, &cap)) in lattice.level[k].iter_mut().zip(&lattice.capacity[k]).enumerate() {
        let x = (i % m as usize) as u32;
        let new = level.saturating_add(rate(x)).min(cap).max(*level);
        inflow += (new - *level) as u128;
        *level = new;
    }
    ledger.flow(r).growback += inflow * crate::amount::SCALE as u128;
}

pub fn growback(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let rates = rates(cfg);
    for &r in resources(state) {
        let rate = rates[r.idx()];
        grow(state, r, |_| rate, ledger);
    }
}

/// Growth rate for a winter cell at `step`.
pub fn winter_growth(summer: u32, cfg: &SimConfig, step: u64) -> u32 {
    match cfg.engine.winter_mode {
        WinterMode::LiteralDiv => summer / cfg.winter_rate,
        WinterMode::EveryBetaSteps => {
            if step.is_multiple_of(cfg.winter_rate as u64) {
                summer
            } else {
                0
            }
        }
    }
}

/// True while the half with `x < M/2` is in summer.
pub fn low_half_summer(step: u64, cfg: &SimConfig) -> bool {
    (step / cfg.season_length).is_multiple_of(2)
}

pub fn seasonal_growback(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let step = state.step;
    let half = state.m() / 2;
    let low_summer = low_half_summer(step, cfg);
    let rates = rates(cfg);
    for &r in resources(state) {
        let summer = rates[r.idx()];
        let winter = winter_growth(summer, cfg, step);
        grow(
            state,
            r,
            |x| {
                if (x < half) == low_summer {
                    summer
                } else {
                    winter
                }
            },
            ledger,
        );
    }
}

/// On steps divisible by POLLUTIONRATE every cell takes the floored mean of
/// its four neighbours' old pollution (its own value is not included).
pub fn pollution_diffusion(state: &mut SimState, cfg: &SimConfig) {
    if !state.step.is_multiple_of(cfg.pollution_rate) {
        return;
    }
    let m = state.m();
    let old = &state.lattice.pollution;
    let new: Vec<u64> = (0..old.len())
        .map(|i| {
            let p = Position::from_index(i, m);
            let sum: u128 = Direction::ALL
                .iter()
                .map(|&d| old[cardinal_neighbor(p, d, m).index(m)] as u128)
                .sum();
            (sum / 4) as u64
        })
        .collect();
    state.lattice.pollution = new;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::CapacityMap;

    fn cfg() -> SimConfig {
        SimConfig {
            m: 4,
            max_vision: 1,
            initial_population_size: 0,
            ..SimConfig::default()
        }
    }

    fn state(level: u32, cap: u32) -> SimState {
        let mut s = SimState::empty(0, &CapacityMap::uniform(4, cap), None);
        s.lattice.level[0].iter_mut().for_each(|v| *v = level);
        s
    }

    #[test]
    fn growback_adds_up_to_capacity() {
        let c = cfg();
        let mut s = state(2, 4);
        let mut l = Ledger::default();
        growback(&mut s, &c, &mut l);
        assert!(s.lattice.level[0].iter().all(|&v| v == 3));
        assert_eq!(l.flows[0].growback, 16 * crate::amount::SCALE as u128);
        growback(&mut s, &c, &mut l);
        growback(&mut s, &c, &mut l);
        assert!(s.lattice.level[0].iter().all(|&v| v == 4));
    }

    #[test]
    fn infinite_growth_fills_at_once() {
        let c = SimConfig {
            sugar_growth: 1000,
            ..cfg()
        };
        let mut s = state(0, 4);
        growback(&mut s, &c, &mut Ledger::default());
        assert_eq!(s.lattice.level[0], s.lattice.capacity[0]);
    }

    #[test]
    fn seasons_swap_halves() {
        let c = SimConfig {
            sugar_growth: 4,
            winter_rate: 2,
            season_length: 5,
            max_sugar: 10,
            ..cfg()
        };
        let mut s = state(0, 10);
        seasonal_growback(&mut s, &c, &mut Ledger::default());
        let row: Vec<u32> = s.lattice.level[0][..4].to_vec();
        assert_eq!(row, vec![4, 4, 2, 2]);

        let mut s = state(0, 10);
        s.step = 5;
        seasonal_growback(&mut s, &c, &mut Ledger::default());
        assert_eq!(s.lattice.level[0][..4].to_vec(), vec![2, 2, 4, 4]);
    }

    #[test]
    fn every_beta_steps_winter() {
        let mut c = SimConfig {
            sugar_growth: 3,
            winter_rate: 4,
            ..cfg()
        };
        c.engine.winter_mode = WinterMode::EveryBetaSteps;
        assert_eq!(winter_growth(3, &c, 8), 3);
        assert_eq!(winter_growth(3, &c, 9), 0);
        c.engine.winter_mode = WinterMode::LiteralDiv;
        assert_eq!(winter_growth(3, &c, 8), 0);
    }

    #[test]
    fn unit_winter_rate_matches_growback() {
        let c = SimConfig {
            winter_rate: 1,
            ..cfg()
        };
        let mut a = state(1, 4);
        a.lattice.level[0][3] = 0;
        let mut b = a.clone();
        growback(&mut a, &c, &mut Ledger::default());
        seasonal_growback(&mut b, &c, &mut Ledger::default());
        assert_eq!(a, b);
    }

    #[test]
    fn diffusion_averages_neighbours() {
        let c = cfg();
        let mut s = state(0, 4);
        let m = 4;
        let centre = Position::new(1, 1);
        for (d, v) in Direction::ALL.iter().zip([1, 2, 3, 4]) {
            s.lattice.pollution[cardinal_neighbor(centre, *d, m).index(m)] = v;
        }
        s.lattice.pollution[centre.index(m)] = 100;
        pollution_diffusion(&mut s, &c);
        assert_eq!(s.lattice.pollution[centre.index(m)], 2);
    }

    #[test]
    fn diffusion_waits_for_its_period() {
        let c = SimConfig {
            pollution_rate: 3,
            ..cfg()
        };
        let mut s = state(0, 4);
        s.lattice.pollution[0] = 8;
        s.step = 4;
        let before = s.clone();
        pollution_diffusion(&mut s, &c);
        assert_eq!(s, before);
        s.lattice.pollution.iter_mut().for_each(|p| *p = 7);
        s.step = 6;
        pollution_diffusion(&mut s, &c);
        assert!(s.lattice.pollution.iter().all(|&p| p == 7));
    }

    proptest::proptest! {
        #[test]
        fn diffusion_loses_less_than_one_per_cell(field in proptest::collection::vec(0u64..1000, 25)) {
            let c = SimConfig { m: 5, ..cfg() };
            let mut s = SimState::empty(0, &CapacityMap::uniform(5, 1), None);
            s.lattice.pollution = field;
            let before: u64 = s.lattice.pollution.iter().sum();
            pollution_diffusion(&mut s, &c);
            let after: u64 = s.lattice.pollution.iter().sum();
            proptest::prop_assert!(after <= before && before - after < 25);
        }
    }
}
