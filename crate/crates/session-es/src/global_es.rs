//! Event structure semantics of global types.
//!
//! A global event is a permutation-equivalence class of pointed traces.
//! Adjacent communications may be swapped when they share no participant,
//! and a trace is pointed when every communication shares a participant
//! with some later one, so a class pins down one final communication
//! together with exactly the exchanges it depends on. The events of a
//! global type collect, for every path of its tree, the class of the causes
//! of the last exchange on the path; causality is member prefixing and
//! conflict is a participant seeing two incomparable histories. The result
//! is a prime event structure, in contrast to the flow structures that
//! networks produce.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::es_core::{PrimeEs, Truncated};
use crate::net_es::{LocatedEvent, NEvent};
use crate::proc_es::PEvent;
use crate::syntax::{Action, Communication, Global, GlobalView, Participant, Trace};
use crate::typing::{well_formed, WellFormedError};

/// Whether every communication of `t` shares a participant with the part of
/// the trace that follows it. The empty trace is not pointed; a single
/// communication always is.
pub fn is_pointed(t: &Trace) -> bool {
    if t.is_empty() {
        return false;
    }
    let mut suffix = BTreeSet::new();
    for c in t.items().iter().rev() {
        let parts = c.participants();
        if !suffix.is_empty() && parts.is_disjoint(&suffix) {
            return false;
        }
        suffix.extend(parts);
    }
    true
}

/// Every trace obtained from `t` by repeatedly swapping adjacent
/// communications with disjoint participants, in ascending order.
pub fn class_members(t: &Trace) -> Vec<Trace> {
    let mut seen = BTreeSet::from([t.clone()]);
    let mut queue = VecDeque::from([t.clone()]);
    while let Some(cur) = queue.pop_front() {
        let items = cur.items();
        for i in 1..items.len() {
            if items[i - 1].disjoint(&items[i]) {
                let mut swapped = items.to_vec();
                swapped.swap(i - 1, i);
                let swapped = Trace::new(swapped);
                if seen.insert(swapped.clone()) {
                    queue.push_back(swapped);
                }
            }
        }
    }
    seen.into_iter().collect()
}

/// Whether two traces are permutation equivalent.
pub fn trace_equiv(a: &Trace, b: &Trace) -> bool {
    a.len() == b.len() && class_members(a).binary_search(b).is_ok()
}

/// A global event: the permutation-equivalence class of a pointed trace.
///
/// The class is carried in full and named by its least member; equality,
/// ordering, and hashing consult the least member only.
#[derive(Debug, Clone)]
pub struct GEvent {
    canonical: Trace,
    members: Vec<Trace>,
}

impl GEvent {
    fn from_pointed(t: Trace) -> GEvent {
        debug_assert!(is_pointed(&t), "global events are classes of pointed traces");
        let members = class_members(&t);
        GEvent { canonical: members[0].clone(), members }
    }

    /// The least member of the class.
    pub fn canonical(&self) -> &Trace {
        &self.canonical
    }

    /// All members of the class, in ascending order.
    pub fn members(&self) -> &[Trace] {
        &self.members
    }

    pub fn class_size(&self) -> usize {
        self.members.len()
    }

    /// The communication the event stands for: the last one of every
    /// member, which pointedness forces all members to share.
    pub fn cm(&self) -> &Communication {
        self.canonical.last().expect("a pointed trace is nonempty")
    }
}

impl PartialEq for GEvent {
    fn eq(&self, other: &GEvent) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for GEvent {}

impl PartialOrd for GEvent {
    fn partial_cmp(&self, other: &GEvent) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GEvent {
    fn cmp(&self, other: &GEvent) -> std::cmp::Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl std::hash::Hash for GEvent {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl fmt::Display for GEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.canonical)
    }
}

impl Serialize for GEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let comms: Vec<String> = self.canonical.iter().map(|c| c.to_string()).collect();
        let mut st = serializer.serialize_struct("GEvent", 3)?;
        st.serialize_field("canonical", &comms)?;
        st.serialize_field("cm", &self.cm().to_string())?;
        st.serialize_field("classSize", &self.class_size())?;
        st.end()
    }
}

/// The decoration sequences of the paths from the root of `g` to the edges
/// of its tree, up to `max_len` communications, in ascending order. Exact
/// when no path was cut short at the bound, so always exact on types whose
/// height does not exceed it.
pub fn g_traces(g: &Global, max_len: usize) -> Truncated<Vec<Trace>> {
    fn walk(
        g: &Global,
        budget: usize,
        path: &mut Vec<Communication>,
        out: &mut Vec<Trace>,
        exact: &mut bool,
    ) {
        let (sender, receiver, branches) = match g.view() {
            GlobalView::End => return,
            GlobalView::Comm { sender, receiver, branches } => (sender, receiver, branches),
        };
        if budget == 0 {
            *exact = false;
            return;
        }
        for (message, cont) in branches {
            let comm = Communication::new(sender.clone(), message, receiver.clone())
                .expect("an exchange relates distinct participants");
            path.push(comm);
            out.push(Trace::new(path.clone()));
            walk(&cont, budget - 1, path, out, exact);
            path.pop();
        }
    }
    let mut out = Vec::new();
    let mut exact = true;
    walk(g, max_len, &mut Vec::new(), &mut out, &mut exact);
    out.sort();
    Truncated { value: out, exact }
}

/// The event `gamma` as it was before `alpha` happened: `alpha` is
/// prepended to every member it shares a participant with, and the event is
/// left alone otherwise. Unlike its network analogue, this operator is
/// total.
pub fn g_retrieval(alpha: &Communication, gamma: &GEvent) -> GEvent {
    if alpha.participants().is_disjoint(&gamma.canonical.participants()) {
        return gamma.clone();
    }
    let mut items = Vec::with_capacity(gamma.canonical.len() + 1);
    items.push(alpha.clone());
    items.extend(gamma.canonical.iter().cloned());
    GEvent::from_pointed(Trace::new(items))
}

/// Folds [`g_retrieval`] over a trace, rightmost communication first.
pub fn g_retrieval_trace(sigma: &Trace, gamma: &GEvent) -> GEvent {
    sigma.items().iter().rev().fold(gamma.clone(), |acc, alpha| g_retrieval(alpha, &acc))
}

/// The global event reached by executing `sigma`: the last communication of
/// `sigma` together with its causes, everything else forgotten.
///
/// Panics on the empty trace, which reaches no event.
pub fn ev(sigma: &Trace) -> GEvent {
    let last = sigma.last().expect("only a nonempty trace reaches an event");
    let atomic = GEvent::from_pointed(Trace::new(vec![last.clone()]));
    g_retrieval_trace(&sigma.prefix(sigma.len() - 1), &atomic)
}

/// The event `gamma` as it is after `alpha` happened: `alpha` is dropped
/// from the member starting with it when a nonempty tail remains, and the
/// event is left alone when `alpha` involves none of its participants.
/// Undefined (`None`) otherwise; in particular the event of `alpha` itself
/// does not survive `alpha`.
pub fn g_residual(gamma: &GEvent, alpha: &Communication) -> Option<GEvent> {
    if alpha.participants().is_disjoint(&gamma.canonical.participants()) {
        return Some(gamma.clone());
    }
    let member = gamma.members.iter().find(|m| m.items().first() == Some(alpha))?;
    if member.len() < 2 {
        return None;
    }
    Some(GEvent::from_pointed(Trace::new(member.items()[1..].to_vec())))
}

/// Folds [`g_residual`] over a trace, leftmost communication first.
pub fn g_residual_trace(gamma: &GEvent, sigma: &Trace) -> Option<GEvent> {
    sigma.iter().try_fold(gamma.clone(), |acc, alpha| g_residual(&acc, alpha))
}

/// Projects a trace onto one participant: each communication becomes the
/// action `r` performs in it and the others vanish. Permutation-equivalent
/// traces project identically, since swaps never reorder a participant's
/// own actions.
pub fn proj_trace(t: &Trace, r: &Participant) -> Vec<Action> {
    t.iter().filter_map(|c| c.action_for(r)).collect()
}

/// Causality between global events: some member of `a` is a prefix of some
/// member of `b`. Quadratic in the class sizes, which stay small because
/// every swap needs disjoint neighbours.
pub fn g_leq(a: &GEvent, b: &GEvent) -> bool {
    a.members.iter().any(|x| b.members.iter().any(|y| x.is_prefix_of(y)))
}

fn diverge(x: &[Action], y: &[Action]) -> bool {
    let shared = x.len().min(y.len());
    x[..shared] != y[..shared]
}

/// Conflict between global events: some participant is offered two
/// histories neither of which extends the other. Projections are
/// class-invariant, so checking the least members suffices.
pub fn g_conflict(a: &GEvent, b: &GEvent) -> bool {
    let mut parts = a.canonical.participants();
    parts.extend(b.canonical.participants());
    parts
        .iter()
        .any(|p| diverge(&proj_trace(&a.canonical, p), &proj_trace(&b.canonical, p)))
}

/// The prime event structure of a well-formed global type, built from the
/// events of its tree paths of at most `max_len` communications.
pub fn esg(g: &Global, max_len: usize) -> Result<Truncated<PrimeEs<GEvent>>, WellFormedError> {
    well_formed(g)?;
    Ok(g_traces(g, max_len).map(|traces| {
        let events: BTreeSet<GEvent> = traces.iter().map(ev).collect();
        PrimeEs::new(events, g_leq, g_conflict)
    }))
}

/// The sequence of global events corresponding to a trace: the event of
/// each nonempty prefix. For a trace executable by a well-formed global
/// type this is a proving sequence of its event structure.
pub fn gec(sigma: &Trace) -> Vec<GEvent> {
    (1..=sigma.len()).map(|i| ev(&sigma.prefix(i))).collect()
}

/// The network event realizing a global event: each of the two participants
/// of its communication, located at its own projection of the class.
pub fn g_to_n(gamma: &GEvent) -> NEvent {
    let p = gamma.cm().sender().clone();
    let q = gamma.cm().receiver().clone();
    let fst = LocatedEvent::new(p.clone(), PEvent::new(proj_trace(&gamma.canonical, &p)));
    let snd = LocatedEvent::new(q.clone(), PEvent::new(proj_trace(&gamma.canonical, &q)));
    NEvent::new_unchecked(fst, snd)
}
