//! Welfare, marginal rates of substitution and bilateral spice trade.

use std::cmp::Ordering;

use num_bigint::BigUint;
use rand::Rng;

use crate::amount::{Amount, FRAC_BITS};
use crate::config::{SimConfig, WelfareForm};
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::rules_sync::matching::{conflict_free_pairs, Pair};
use crate::state::{AgentId, SimState};

/// Cell score for an agent holding the given stores, standing on a cell
/// with the given resource levels.
pub fn welfare(
    agent_sugar: Amount,
    m1: u32,
    agent_spice: Amount,
    m2: u32,
    loc_sugar: u32,
    loc_spice: u32,
    form: WelfareForm,
) -> f64 {
    let mt = (m1 + m2) as f64;
    if mt == 0.0 {
        return 0.0;
    }
    let sugar = loc_sugar as f64 + agent_sugar.to_f64();
    let spice = loc_spice as f64 + agent_spice.to_f64();
    let (w1, w2) = (m1 as f64 / mt, m2 as f64 / mt);
    match form {
        WelfareForm::CobbDouglas => sugar.powf(w1) * spice.powf(w2),
        WelfareForm::LiteralProduct => sugar * w1 * spice * w2,
    }
}

/// `a·b` against `c·d`, exactly.
fn cmp_products(a: u128, b: u128, c: u128, d: u128) -> Ordering {
    match (a.checked_mul(b), c.checked_mul(d)) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => (BigUint::from(a) * b).cmp(&(BigUint::from(c) * d)),
    }
}

/// An exact non-negative rational.
#[derive(Clone, Copy, Debug)]
pub struct Mrs {
    pub num: u128,
    pub den: u128,
}

impl Mrs {
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Mrs {
    fn eq(&self, other: &Mrs) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Mrs {}

impl PartialOrd for Mrs {
    fn partial_cmp(&self, other: &Mrs) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mrs {
    fn cmp(&self, other: &Mrs) -> Ordering {
        cmp_products(self.num, other.den, other.num, self.den)
    }
}

/// `(spice · m1) / (m2 · sugar)`; `None` where the denominator vanishes.
pub fn mrs(sugar: Amount, m1: u32, spice: Amount, m2: u32) -> Option<Mrs> {
    if sugar.is_zero() || m2 == 0 {
        return None;
    }
    Some(Mrs {
        num: spice.ticks() as u128 * m1 as u128,
        den: m2 as u128 * sugar.ticks() as u128,
    })
}

/// `⌊√(n1·n2 / (d1·d2)) · 2^16⌋`, the geometric mean on the tick grid.
fn sqrt_ratio_ticks(n1: u128, n2: u128, d1: u128, d2: u128) -> u64 {
    let fast = n1
        .checked_mul(n2)
        .and_then(|n| n.checked_mul(1 << (2 * FRAC_BITS)))
        .zip(d1.checked_mul(d2));
    let root = match fast {
        Some((n, d)) => BigUint::from((n / d).isqrt()),
        None => {
            let n = (BigUint::from(n1) * n2) << (2 * FRAC_BITS);
            (n / (BigUint::from(d1) * d2)).sqrt()
        }
    };
    u64::try_from(root).unwrap_or(u64::MAX)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Trader {
    pub store: [Amount; 2],
    pub metabolism: [u32; 2],
}

impl Trader {
    fn mrs(&self) -> Option<Mrs> {
        mrs(self.store[0], self.metabolism[0], self.store[1], self.metabolism[1])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TradeOutcome {
    pub a: Trader,
    pub b: Trader,
    pub trades: u64,
    /// Total sugar that changed hands.
    pub sugar_moved: Amount,
}

/// True when `after` is strictly better off than `before` (same metabolism).
fn better_off(before: [Amount; 2], after: [Amount; 2], m: [u32; 2], form: WelfareForm) -> bool {
    let (s0, p0) = (before[0].ticks() as u128, before[1].ticks() as u128);
    let (s1, p1) = (after[0].ticks() as u128, after[1].ticks() as u128);
    match form {
        WelfareForm::LiteralProduct => m[0] > 0 && m[1] > 0 && cmp_products(s1, p1, s0, p0).is_gt(),
        WelfareForm::CobbDouglas => {
            // Raising both sides to the power m1+m2 keeps the order.
            let fast = |s: u128, p: u128| s.checked_pow(m[0])?.checked_mul(p.checked_pow(m[1])?);
            match (fast(s1, p1), fast(s0, p0)) {
                (Some(x), Some(y)) => x > y,
                _ => {
                    let big = |s: u128, p: u128| BigUint::from(s).pow(m[0]) * BigUint::from(p).pow(m[1]);
                    big(s1, p1) > big(s0, p0)
                }
            }
        }
    }
}

/// The next unit trade at the geometric-mean price, before any acceptance
/// test: the higher-MRS agent buys sugar with spice. Returns the updated pair
/// (in argument order) and the sugar moved, or `None` when the MRSs are equal
/// or undefined, the price degenerates, or a giver lacks the goods.
pub fn propose_trade(a: Trader, b: Trader) -> Option<(Trader, Trader, Amount)> {
    let (ma, mb) = (a.mrs()?, b.mrs()?);
    let (hi, lo, m_hi, m_lo) = match ma.cmp(&mb) {
        Ordering::Equal => return None,
        Ordering::Greater => (a, b, ma, mb),
        Ordering::Less => (b, a, mb, ma),
    };
    let (sugar, spice) = if cmp_products(m_hi.num, m_lo.num, m_hi.den, m_lo.den).is_gt() {
        let p = sqrt_ratio_ticks(m_hi.num, m_lo.num, m_hi.den, m_lo.den);
        (Amount::ONE, Amount::from_ticks(p))
    } else {
        if m_lo.num == 0 {
            return None;
        }
        let q = sqrt_ratio_ticks(m_hi.den, m_lo.den, m_hi.num, m_lo.num);
        (Amount::from_ticks(q), Amount::ONE)
    };
    let new_hi = Trader {
        store: [hi.store[0] + sugar, hi.store[1].checked_sub(spice)?],
        ..hi
    };
    let new_lo = Trader {
        store: [lo.store[0].checked_sub(sugar)?, lo.store[1] + spice],
        ..lo
    };
    if ma > mb {
        Some((new_hi, new_lo, sugar))
    } else {
        Some((new_lo, new_hi, sugar))
    }
}

/// Trades one unit at a time until the two MRSs meet, a trade would cross
/// them, a trade fails to make both parties strictly better off, or a store
/// would go negative. An agent whose MRS is undefined does not trade, and no
/// trade may empty a sugar store.
pub fn pair_trade(a: Trader, b: Trader, form: WelfareForm) -> TradeOutcome {
    let mut out = TradeOutcome {
        a,
        b,
        trades: 0,
        sugar_moved: Amount::ZERO,
    };
    while let Some((na, nb, sugar)) = propose_trade(out.a, out.b) {
        let before = out.a.mrs().cmp(&out.b.mrs());
        let crossed = match (na.mrs(), nb.mrs()) {
            (Some(x), Some(y)) => x.cmp(&y) == before.reverse(),
            _ => true,
        };
        if crossed
            || !better_off(out.a.store, na.store, a.metabolism, form)
            || !better_off(out.b.store, nb.store, b.metabolism, form)
        {
            break;
        }
        out.a = na;
        out.b = nb;
        out.trades += 1;
        out.sugar_moved += sugar;
    }
    out
}

/// Same partition as mating layers: each layer a maximum matching.
pub fn exclusive_trade_layers(pairs: &[Pair], rng: &mut impl Rng) -> Vec<Vec<Pair>> {
    conflict_free_pairs(pairs, rng)
}

fn trade_between(state: &mut SimState, cfg: &SimConfig, (a, b): Pair, ledger: &mut Ledger) {
    let (Some(x), Some(y)) = (state.agent(a), state.agent(b)) else {
        return;
    };
    let trader = |g: &crate::state::Agent| Trader {
        store: g.store,
        metabolism: g.metabolism,
    };
    let out = pair_trade(trader(x), trader(y), cfg.engine.welfare_form);
    if out.trades == 0 {
        return;
    }
    state.agent_mut(a).expect("trader").store = out.a.store;
    state.agent_mut(b).expect("trader").store = out.b.store;
    ledger.trades += out.trades;
    ledger.trade_volume += out.sugar_moved.ticks() as u128;
}

/// Every adjacent pair trades once, in conflict-free layers.
pub fn trade_sync(state: &mut SimState, cfg: &SimConfig, ledger: &mut Ledger) {
    let pairs: Vec<Pair> = state
        .ids()
        .into_iter()
        .flat_map(|a| {
            state
                .neighbours(a)
                .into_iter()
                .filter(move |&b| a < b)
                .map(move |b| (a, b))
        })
        .collect();
    let mut rng = stream(state.seed, Site::TradeLayers, state.step, 0);
    for layer in exclusive_trade_layers(&pairs, &mut rng) {
        for pair in layer {
            trade_between(state, cfg, pair, ledger);
        }
    }
}

/// Each agent in `order` trades with each of its neighbours in turn.
pub fn trade_async(state: &mut SimState, cfg: &SimConfig, order: &[AgentId], ledger: &mut Ledger) {
    for &a in order {
        for b in state.neighbours(a) {
            trade_between(state, cfg, (a, b), ledger);
        }
    }
}

/// MRS as a float, for reporting.
pub fn mrs_f64(sugar: Amount, m1: u32, spice: Amount, m2: u32) -> Option<f64> {
    mrs(sugar, m1, spice, m2).map(Mrs::to_f64)
}
