//! Per-step accounting of resource sources and sinks, plus activity counters.
//!
//! Every rule that creates or destroys resource records the amount here, in
//! ticks. Transfers between agents, or between lattice and agents, are not
//! flows. The sum of the terms must equal the observed change in
//! `agents + lattice` for each resource.

use std::ops::AddAssign;

use crate::amount::Amount;
use crate::state::Resource;

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct ResourceFlows {
    pub growback: u128,
    pub metabolism: u128,
    pub immune_penalty: u128,
    /// Division remainders destroyed when an estate is split.
    pub inheritance_loss: u128,
    /// Stores still held by agents when they are removed by Death.
    pub death_removal: u128,
    /// Victim wealth beyond the combat cap, destroyed with the victim.
    pub combat_loss: u128,
    pub replacement: u128,
    /// Rounding lost in loan payments (zero: payments move whole amounts).
    pub credit_loss: u128,
}

impl ResourceFlows {
    /// Net change implied by the flows, in ticks.
    pub fn net(&self) -> i128 {
        let sources = self.growback + self.replacement;
        let sinks = self.metabolism
            + self.immune_penalty
            + self.inheritance_loss
            + self.death_removal
            + self.combat_loss
            + self.credit_loss;
        sources as i128 - sinks as i128
    }
}

impl AddAssign for ResourceFlows {
    fn add_assign(&mut self, o: ResourceFlows) {
        self.growback += o.growback;
        self.metabolism += o.metabolism;
        self.immune_penalty += o.immune_penalty;
        self.inheritance_loss += o.inheritance_loss;
        self.death_removal += o.death_removal;
        self.combat_loss += o.combat_loss;
        self.replacement += o.replacement;
        self.credit_loss += o.credit_loss;
    }
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct Ledger {
    pub flows: [ResourceFlows; 2],
    pub births: u64,
    pub deaths: u64,
    pub kills: u64,
    /// Individual unit trades committed.
    pub trades: u64,
    /// Sugar moved by trades, in ticks.
    pub trade_volume: u128,
    pub loans_made: u64,
    /// Principal lent, in ticks, per resource.
    pub loan_volume: [u128; 2],
}

impl Ledger {
    pub fn flow(&mut self, r: Resource) -> &mut ResourceFlows {
        &mut self.flows[r.idx()]
    }

    pub(crate) fn add(field: &mut u128, amt: Amount) {
        *field += amt.ticks() as u128;
    }
}

impl AddAssign for Ledger {
    fn add_assign(&mut self, o: Ledger) {
        for k in 0..2 {
            self.flows[k] += o.flows[k];
            self.loan_volume[k] += o.loan_volume[k];
        }
        self.births += o.births;
        self.deaths += o.deaths;
        self.kills += o.kills;
        self.trades += o.trades;
        self.trade_volume += o.trade_volume;
        self.loans_made += o.loans_made;
    }
}
