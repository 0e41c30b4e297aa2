//! Event structure semantics of networks.
//!
//! A network event pairs the send-side and receive-side histories of one
//! synchronization: two located process events whose mutual projections
//! agree step by step. Causality (flow) is inherited from the prefix order
//! within a shared participant; conflict arises either from a shared
//! participant with diverging histories or from two participants whose past
//! exchanges with each other disagree. Because an interaction can be
//! reachable along several mutually exclusive pasts, the result is a flow
//! event structure, not a prime one: an event owns one causal set per
//! realizable past, and narrowing discards events none of whose causal sets
//! can be assembled from the set itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::es_core::{FlowEs, PrimeEs, Truncated};
use crate::proc_es::{p_events, pe_conflict, PEvent};
use crate::syntax::{Action, Communication, Direction, Message, Network, Participant, Trace};

/// A process event together with the participant that performs it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocatedEvent {
    pub owner: Participant,
    pub event: PEvent,
}

impl LocatedEvent {
    pub fn new(owner: Participant, event: PEvent) -> Self {
        LocatedEvent { owner, event }
    }
}

impl fmt::Display for LocatedEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.owner, self.event)
    }
}

/// What one participant sees of another's history: the directions and
/// messages of their common actions, with the peer name dropped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UndirectedSeq(Vec<(Direction, Message)>);

impl UndirectedSeq {
    pub fn items(&self) -> &[(Direction, Message)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Duality: same length, same message and opposite direction at every
    /// position. Two empty sequences are dual.
    pub fn is_dual_of(&self, other: &UndirectedSeq) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|((da, ma), (db, mb))| da != db && ma == mb)
    }
}

impl fmt::Display for UndirectedSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (direction, message) in &self.0 {
            if !first {
                f.write_str(".")?;
            }
            let mark = match direction {
                Direction::Output => '!',
                Direction::Input => '?',
            };
            write!(f, "{mark}{message}")?;
            first = false;
        }
        Ok(())
    }
}

/// The projection of a process event on a participant: the subsequence of
/// actions addressed to that participant, peers dropped.
pub fn proj_pevent(eta: &PEvent, p: &Participant) -> UndirectedSeq {
    UndirectedSeq(
        eta.actions()
            .iter()
            .filter(|a| a.peer == *p)
            .map(|a| (a.direction, a.message.clone()))
            .collect(),
    )
}

/// Duality of located events: each history ends by addressing the other's
/// owner, and their mutual projections are dual. The two histories may well
/// have different lengths; only their common part must match.
pub fn dual_located(a: &LocatedEvent, b: &LocatedEvent) -> bool {
    a.event.act().peer == b.owner
        && b.event.act().peer == a.owner
        && proj_pevent(&a.event, &b.owner).is_dual_of(&proj_pevent(&b.event, &a.owner))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NEventError {
    #[error("located events share the owner {owner}")]
    SharedOwner { owner: Participant },
    #[error("located events {first} and {second} are not dual")]
    NotDual { first: LocatedEvent, second: LocatedEvent },
}

/// A network event: an unordered pair of dual located events, one
/// synchronization seen from both sides. Stored with owners in increasing
/// order so that structural equality is equality of unordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NEvent {
    fst: LocatedEvent,
    snd: LocatedEvent,
}

impl NEvent {
    pub fn new(a: LocatedEvent, b: LocatedEvent) -> Result<NEvent, NEventError> {
        if a.owner == b.owner {
            return Err(NEventError::SharedOwner { owner: a.owner });
        }
        if !dual_located(&a, &b) {
            return Err(NEventError::NotDual { first: a, second: b });
        }
        Ok(NEvent::ordered(a, b))
    }

    /// Pairs two located events known to be dual by construction.
    pub(crate) fn new_unchecked(a: LocatedEvent, b: LocatedEvent) -> NEvent {
        debug_assert!(a.owner != b.owner, "network events pair distinct owners");
        debug_assert!(dual_located(&a, &b), "network events pair dual located events");
        NEvent::ordered(a, b)
    }

    fn ordered(a: LocatedEvent, b: LocatedEvent) -> NEvent {
        if a.owner <= b.owner {
            NEvent { fst: a, snd: b }
        } else {
            NEvent { fst: b, snd: a }
        }
    }

    pub fn components(&self) -> [&LocatedEvent; 2] {
        [&self.fst, &self.snd]
    }

    /// The history of the given participant in this event, if it has one.
    pub fn located(&self, p: &Participant) -> Option<&PEvent> {
        if self.fst.owner == *p {
            Some(&self.fst.event)
        } else if self.snd.owner == *p {
            Some(&self.snd.event)
        } else {
            None
        }
    }

    pub fn contains(&self, le: &LocatedEvent) -> bool {
        self.located(&le.owner).is_some_and(|event| *event == le.event)
    }

    pub fn locations(&self) -> [&Participant; 2] {
        [&self.fst.owner, &self.snd.owner]
    }

    /// The communication this event performs, read off the sending side:
    /// exactly one component ends with an output.
    pub fn cm(&self) -> Communication {
        let (out, inp) = if self.fst.event.act().direction == Direction::Output {
            (&self.fst, &self.snd)
        } else {
            (&self.snd, &self.fst)
        };
        Communication::new(out.owner.clone(), out.event.act().message.clone(), inp.owner.clone())
            .expect("dual located events have distinct owners")
    }
}

impl fmt::Display for NEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.fst, self.snd)
    }
}

impl Serialize for NEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let events: BTreeMap<&str, Vec<String>> = self
            .components()
            .iter()
            .map(|le| {
                (le.owner.as_str(), le.event.actions().iter().map(|a| a.to_string()).collect())
            })
            .collect();
        let mut st = serializer.serialize_struct("NEvent", 3)?;
        st.serialize_field("loc", &[self.fst.owner.as_str(), self.snd.owner.as_str()])?;
        st.serialize_field("events", &events)?;
        st.serialize_field("cm", &self.cm().to_string())?;
        st.end()
    }
}

/// Flow between network events: some shared participant does strictly less
/// in the first event than in the second.
pub fn n_flow(a: &NEvent, b: &NEvent) -> bool {
    a.components().iter().any(|x| {
        b.located(&x.owner)
            .is_some_and(|eta| x.event.is_prefix_of(eta) && x.event != *eta)
    })
}

/// Conflict inherited from a shared participant with diverging histories.
fn conflict_shared_owner(a: &NEvent, b: &NEvent) -> bool {
    a.components()
        .iter()
        .any(|x| b.located(&x.owner).is_some_and(|eta| pe_conflict(&x.event, eta)))
}

/// Conflict between two distinct participants who have exchanged the same
/// number of messages with each other, but not matching ones.
fn conflict_crossed(a: &NEvent, b: &NEvent) -> bool {
    a.components().iter().any(|x| {
        b.components().iter().any(|y| {
            x.owner != y.owner && {
                let xs = proj_pevent(&x.event, &y.owner);
                let ys = proj_pevent(&y.event, &x.owner);
                xs.len() == ys.len() && !xs.is_dual_of(&ys)
            }
        })
    })
}

/// Conflict between network events; the two clauses may overlap, and an
/// event pair may be in both flow and conflict.
pub fn n_conflict(a: &NEvent, b: &NEvent) -> bool {
    conflict_shared_owner(a, b) || conflict_crossed(a, b)
}

/// The strict prefixes of both component histories: the located events a
/// causal set must supply.
fn causal_slots(nu: &NEvent) -> Vec<LocatedEvent> {
    let mut slots = Vec::new();
    for le in nu.components() {
        for k in 1..le.event.len() {
            slots.push(LocatedEvent::new(
                le.owner.clone(),
                PEvent::new(le.event.actions()[..k].to_vec()),
            ));
        }
    }
    slots
}

/// True when every member covers some slot no other member covers; with
/// full coverage this is exactly minimality, since dropping any event of a
/// larger cover keeps clause 1 intact.
fn is_minimal_cover(set: &BTreeSet<NEvent>, slots: &[LocatedEvent]) -> bool {
    set.iter().all(|m| {
        slots
            .iter()
            .any(|s| m.contains(s) && !set.iter().any(|o| o != m && o.contains(s)))
    })
}

fn cover_search<'a>(
    slots: &[LocatedEvent],
    covers: &[Vec<&'a NEvent>],
    index: usize,
    chosen: &mut Vec<&'a NEvent>,
    results: &mut BTreeSet<BTreeSet<NEvent>>,
    first_only: bool,
) -> bool {
    if index == slots.len() {
        let set: BTreeSet<NEvent> = chosen.iter().map(|e| (*e).clone()).collect();
        if first_only || is_minimal_cover(&set, slots) {
            results.insert(set);
        }
        return first_only;
    }
    if chosen.iter().any(|c| c.contains(&slots[index])) {
        return cover_search(slots, covers, index + 1, chosen, results, first_only);
    }
    for cand in &covers[index] {
        if chosen.iter().any(|c| n_conflict(c, cand)) {
            continue;
        }
        chosen.push(cand);
        let stop = cover_search(slots, covers, index + 1, chosen, results, first_only);
        chosen.pop();
        if stop {
            return true;
        }
    }
    false
}

fn collect_causal_sets(
    nu: &NEvent,
    universe: &BTreeSet<NEvent>,
    first_only: bool,
) -> Vec<BTreeSet<NEvent>> {
    let slots = causal_slots(nu);
    if slots.is_empty() {
        return vec![BTreeSet::new()];
    }
    let covers: Vec<Vec<&NEvent>> = slots
        .iter()
        .map(|slot| {
            universe
                .iter()
                .filter(|cand| *cand != nu && cand.contains(slot) && !n_conflict(cand, nu))
                .collect()
        })
        .collect();
    let mut results = BTreeSet::new();
    cover_search(&slots, &covers, 0, &mut Vec::new(), &mut results, first_only);
    results.into_iter().collect()
}

/// All causal sets of `nu` within `universe`: the minimal conflict-free
/// subsets supplying every strict prefix of both component histories. An
/// event whose components are single actions has exactly the empty causal
/// set.
pub fn causal_sets(nu: &NEvent, universe: &BTreeSet<NEvent>) -> Vec<BTreeSet<NEvent>> {
    collect_causal_sets(nu, universe, false)
}

pub fn has_causal_set(nu: &NEvent, universe: &BTreeSet<NEvent>) -> bool {
    !collect_causal_sets(nu, universe, true).is_empty()
}

/// Keeps only the events that can happen: the greatest fixpoint, within the
/// given set, of "has a causal set in the current set". Computed by
/// discarding unsupported events until stable; starting from the empty set
/// instead would make every result empty.
pub fn narrowing(events: &BTreeSet<NEvent>) -> BTreeSet<NEvent> {
    let mut current = events.clone();
    loop {
        let next: BTreeSet<NEvent> = current
            .iter()
            .filter(|nu| has_causal_set(nu, &current))
            .cloned()
            .collect();
        if next.len() == current.len() {
            return current;
        }
        current = next;
    }
}

/// All dual pairs of process events across distinct participants of the
/// network, truncated at component histories of `max_len` actions.
pub fn de_events(net: &Network, max_len: usize) -> Truncated<BTreeSet<NEvent>> {
    let mut exact = true;
    let mut by_owner: Vec<(&Participant, Vec<PEvent>)> = Vec::new();
    for (p, proc) in net.iter() {
        let events = p_events(proc, max_len);
        exact &= events.exact;
        by_owner.push((p, events.value));
    }
    let mut out = BTreeSet::new();
    for (i, (p, ps)) in by_owner.iter().enumerate() {
        for (q, qs) in by_owner.iter().skip(i + 1) {
            for eta in ps.iter().filter(|e| e.act().peer == **q) {
                for eta2 in qs.iter().filter(|e| e.act().peer == **p) {
                    let a = LocatedEvent::new((*p).clone(), eta.clone());
                    let b = LocatedEvent::new((*q).clone(), eta2.clone());
                    if dual_located(&a, &b) {
                        out.insert(NEvent::new_unchecked(a, b));
                    }
                }
            }
        }
    }
    Truncated { value: out, exact }
}

/// The flow event structure of a network: narrowed dual pairs under flow
/// and conflict. The exactness flag is inherited from the process event
/// enumeration; a truncated structure may lack events with longer
/// histories, and narrowing near the bound may prune events whose causal
/// sets need those.
pub fn esn(net: &Network, max_len: usize) -> Truncated<FlowEs<NEvent>> {
    de_events(net, max_len).map(|de| FlowEs::new(narrowing(&de), n_flow, n_conflict))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NotBinaryError {
    #[error("expected exactly two bound participants, found {found}")]
    ParticipantCount { found: usize },
    #[error("the process of {owner} addresses {peer} instead of {expected}")]
    ForeignPeer { owner: Participant, peer: Participant, expected: Participant },
}

/// The prime event structure of a binary network: flow is replaced by its
/// reflexive-transitive closure. For two participants talking only to each
/// other every dual pair survives narrowing, which is asserted here.
pub fn esn_star(
    net: &Network,
    max_len: usize,
) -> Result<Truncated<PrimeEs<NEvent>>, NotBinaryError> {
    let parts: Vec<Participant> = net.participants().into_iter().collect();
    if parts.len() != 2 {
        return Err(NotBinaryError::ParticipantCount { found: parts.len() });
    }
    for (owner, expected) in [(&parts[0], &parts[1]), (&parts[1], &parts[0])] {
        let proc = net.get(owner).expect("participant is bound");
        for peer in proc.peers() {
            if peer != *expected {
                return Err(NotBinaryError::ForeignPeer {
                    owner: owner.clone(),
                    peer,
                    expected: expected.clone(),
                });
            }
        }
    }
    let de = de_events(net, max_len);
    let exact = de.exact;
    let de = de.value;
    let ne = narrowing(&de);
    assert_eq!(ne, de, "every dual pair of a binary network survives narrowing");

    let events: Vec<NEvent> = ne.into_iter().collect();
    let n = events.len();
    let index: BTreeMap<&NEvent, usize> = events.iter().zip(0..).collect();
    let mut reach = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            reach[i * n + j] = i == j || n_flow(&events[i], &events[j]);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    reach[i * n + j] |= reach[k * n + j];
                }
            }
        }
    }
    let leq = |a: &NEvent, b: &NEvent| reach[index[a] * n + index[b]];
    Ok(Truncated { value: PrimeEs::new(events.clone(), leq, n_conflict), exact })
}

/// The histories the given participant contributes to the given events.
pub fn project_nevents(events: &BTreeSet<NEvent>, p: &Participant) -> BTreeSet<PEvent> {
    events.iter().filter_map(|nu| nu.located(p).cloned()).collect()
}

fn retrieve_located(le: &LocatedEvent, alpha: &Communication) -> LocatedEvent {
    match alpha.action_for(&le.owner) {
        Some(action) => LocatedEvent::new(le.owner.clone(), le.event.prepended(action)),
        None => le.clone(),
    }
}

fn residual_located(le: &LocatedEvent, alpha: &Communication) -> Option<LocatedEvent> {
    match alpha.action_for(&le.owner) {
        Some(action) => le
            .event
            .strip_head(&action)
            .map(|event| LocatedEvent::new(le.owner.clone(), event)),
        None => Some(le.clone()),
    }
}

/// How a network event looked one step earlier: each component history of a
/// participant involved in `alpha` gains that step as its first action.
/// Always defined, and preserves the event's own communication.
pub fn n_retrieval(nu: &NEvent, alpha: &Communication) -> NEvent {
    let [a, b] = nu.components();
    NEvent::new_unchecked(retrieve_located(a, alpha), retrieve_located(b, alpha))
}

/// The same event after `alpha` has happened: strips `alpha`'s projection
/// from the head of each involved component. `None` when an involved
/// component does not start with that projection or would become empty.
pub fn n_residual(nu: &NEvent, alpha: &Communication) -> Option<NEvent> {
    let [a, b] = nu.components();
    Some(NEvent::new_unchecked(residual_located(a, alpha)?, residual_located(b, alpha)?))
}

/// Retrieval along a trace, latest communication first, so that the
/// trace's first step ends up as the outermost prefix.
pub fn n_retrieval_trace(nu: &NEvent, sigma: &Trace) -> NEvent {
    sigma.items().iter().rev().fold(nu.clone(), |acc, alpha| n_retrieval(&acc, alpha))
}

/// Residual along a trace, first communication first.
pub fn n_residual_trace(nu: &NEvent, sigma: &Trace) -> Option<NEvent> {
    sigma.items().iter().try_fold(nu.clone(), |acc, alpha| n_residual(&acc, alpha))
}

/// The event performing one communication with no history on either side.
fn atomic_event(alpha: &Communication) -> NEvent {
    NEvent::new_unchecked(
        LocatedEvent::new(
            alpha.sender().clone(),
            PEvent::single(Action::output(alpha.receiver().clone(), alpha.message().clone())),
        ),
        LocatedEvent::new(
            alpha.receiver().clone(),
            PEvent::single(Action::input(alpha.sender().clone(), alpha.message().clone())),
        ),
    )
}

/// The sequence of network events a trace performs: the i-th event is the
/// atomic event of the i-th communication, retrieved through everything
/// that came before it. Its communication is exactly the i-th item.
pub fn nec(sigma: &Trace) -> Vec<NEvent> {
    sigma
        .items()
        .iter()
        .enumerate()
        .map(|(i, alpha)| n_retrieval_trace(&atomic_event(alpha), &sigma.prefix(i)))
        .collect()
}
