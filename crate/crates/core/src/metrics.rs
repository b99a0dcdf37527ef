//! Per-step summary statistics and the metrics table.

use std::io::{self, Write};

use crate::amount::SCALE;
use crate::ledger::Ledger;
use crate::state::{Resource, SimState};

/// Column order of the metrics table.
pub const COLUMNS: [&str; 16] = [
    "step",
    "population",
    "sugar_total",
    "sugar_mean",
    "spice_total",
    "spice_mean",
    "wealth_gini",
    "pollution_total",
    "births",
    "deaths",
    "kills",
    "trades",
    "trade_volume",
    "loans_made",
    "loan_volume_sugar",
    "loan_volume_spice",
];

#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub step: u64,
    pub population: usize,
    /// Agent-held totals and means, in units.
    pub total: [f64; 2],
    pub mean: [f64; 2],
    pub wealth_gini: f64,
    pub pollution_total: u128,
    pub births: u64,
    pub deaths: u64,
    pub kills: u64,
    pub trades: u64,
    /// Sugar moved by trade, in units.
    pub trade_volume: f64,
    pub loans_made: u64,
    pub loan_volume: [f64; 2],
}

fn units(ticks: u128) -> f64 {
    ticks as f64 / SCALE as f64
}

impl StepRow {
    pub fn observe(state: &SimState, ledger: &Ledger) -> StepRow {
        let n = state.population();
        let total = Resource::BOTH.map(|r| units(state.agent_total(r)));
        let mean = total.map(|t| if n == 0 { 0.0 } else { t / n as f64 });
        let wealth: Vec<u64> = state.agents().iter().map(|a| a.wealth().ticks()).collect();
        StepRow {
            step: state.step,
            population: n,
            total,
            mean,
            wealth_gini: gini(&wealth),
            pollution_total: state.lattice.pollution.iter().map(|&p| p as u128).sum(),
            births: ledger.births,
            deaths: ledger.deaths,
            kills: ledger.kills,
            trades: ledger.trades,
            trade_volume: units(ledger.trade_volume),
            loans_made: ledger.loans_made,
            loan_volume: ledger.loan_volume.map(units),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.population,
            self.total[0],
            self.mean[0],
            self.total[1],
            self.mean[1],
            self.wealth_gini,
            self.pollution_total,
            self.births,
            self.deaths,
            self.kills,
            self.trades,
            self.trade_volume,
            self.loans_made,
            self.loan_volume[0],
            self.loan_volume[1],
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub rows: Vec<StepRow>,
}

impl Metrics {
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", COLUMNS.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.csv_line())?;
        }
        Ok(())
    }
}

/// Gini coefficient; 0 for an empty or all-zero population.
pub fn gini(values: &[u64]) -> f64 {
    let n = values.len();
    let total: u128 = values.iter().map(|&v| v as u128).sum();
    if n == 0 || total == 0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    // sum over i of (2i - n - 1) x_i with 1-based ranks
    let weighted: i128 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2 * (i as i128 + 1) - n as i128 - 1) * x as i128)
        .sum();
    weighted as f64 / (n as f64 * total as f64)
}

/// First Wasserstein distance between the wealth distributions of two
/// populations, in units. Zero when both are empty; an empty population
/// against a non-empty one counts as all mass at zero.
pub fn wealth_distance(a: &SimState, b: &SimState) -> f64 {
    let w = |s: &SimState| -> Vec<f64> {
        let mut v: Vec<f64> = s.agents().iter().map(|x| x.wealth().to_f64()).collect();
        if v.is_empty() {
            v.push(0.0);
        }
        v.sort_by(f64::total_cmp);
        v
    };
    wasserstein(&w(a), &w(b))
}

/// Integral of |Fa - Fb| over the line, for sorted non-empty samples.
fn wasserstein(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut dist = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        dist += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        prev = x;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    dist
}
