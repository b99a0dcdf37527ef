//! Cultural transmission, disease transmission and the immune response.

use rand::seq::IteratorRandom;

use crate::amount::Amount;
use crate::bitstring::{flip_tags, respond, BitString};
use crate::ledger::Ledger;
use crate::rng::{stream, Site};
use crate::rules_sync::lifecycle::active;
use crate::state::{AgentId, SimState};

/// `id`'s culture after each neighbour, in id order, copies one random tag into it.
pub(crate) fn culture_for(view: &SimState, id: AgentId) -> BitString {
    let a = view.agent(id).expect("agent exists");
    let neighbours = view.neighbours(id);
    let mut rng = stream(view.seed, Site::Culture, view.step, id);
    flip_tags(&a.culture, &neighbours, |n| view.agent(n).map(|b| &b.culture), &mut rng)
        .expect("cultures share one length")
}

/// One disease drawn from each neighbour that carries any.
pub(crate) fn infections_for(view: &SimState, id: AgentId) -> Vec<BitString> {
    let mut rng = stream(view.seed, Site::Transmission, view.step, id);
    view.neighbours(id)
        .into_iter()
        .filter_map(|n| view.agent(n).unwrap().diseases.iter().choose(&mut rng).cloned())
        .collect()
}

pub fn culture(state: &mut SimState) {
    let new: Vec<BitString> = state.ids().into_iter().map(|id| culture_for(state, id)).collect();
    for (a, c) in state.agents_mut().iter_mut().zip(new) {
        a.culture = c;
    }
}

pub fn transmission(state: &mut SimState) {
    let new: Vec<Vec<BitString>> = state.ids().into_iter().map(|id| infections_for(state, id)).collect();
    for (a, got) in state.agents_mut().iter_mut().zip(new) {
        a.diseases.extend(got);
    }
}

/// Every carried disease nudges the immunity string towards itself; each
/// disease the agent was not already immune to costs one unit of every
/// resource it consumes.
pub fn immune_response(state: &mut SimState, ledger: &mut Ledger) {
    let dual = state.dual;
    for a in state.agents_mut() {
        let exposed = respond(&mut a.immunity, &a.diseases) as u64;
        for &r in active(dual) {
            let k = r.idx();
            let paid = a.store[k].min(Amount::from_units(exposed));
            a.store[k] -= paid;
            Ledger::add(&mut ledger.flow(r).immune_penalty, paid);
        }
    }
}
