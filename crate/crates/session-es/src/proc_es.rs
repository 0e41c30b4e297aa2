//! Event structure semantics of single processes.
//!
//! An event of a process is a nonempty sequence of actions: the path from
//! the root of the process tree to the action the event performs. Causality
//! is the prefix order and two events conflict when they lie on different
//! branches, i.e. neither is a prefix of the other. This always yields a
//! prime event structure whose configurations are the finite runs of the
//! process.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::es_core::{PrimeEs, Truncated};
use crate::syntax::{Action, Direction, ProcNode, Process};

/// A process event: the actions performed from the start of the process up
/// to and including the one this event stands for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PEvent(Vec<Action>);

impl PEvent {
    /// Creates an event from a nonempty action sequence.
    pub fn new(actions: Vec<Action>) -> Self {
        assert!(!actions.is_empty(), "a process event performs at least one action");
        PEvent(actions)
    }

    pub fn single(action: Action) -> Self {
        PEvent(vec![action])
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    /// The action the event performs: the last one of its history.
    pub fn act(&self) -> &Action {
        self.0.last().expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_prefix_of(&self, other: &PEvent) -> bool {
        self.0.len() <= other.0.len() && self.0[..] == other.0[..self.0.len()]
    }

    /// The event extended by one more action.
    pub fn extended(&self, action: Action) -> PEvent {
        let mut actions = self.0.clone();
        actions.push(action);
        PEvent(actions)
    }

    /// The event with the given action prepended (an earlier first step).
    pub fn prepended(&self, action: Action) -> PEvent {
        let mut actions = Vec::with_capacity(self.0.len() + 1);
        actions.push(action);
        actions.extend(self.0.iter().cloned());
        PEvent(actions)
    }

    /// Drops the first action; `None` when that would leave the event
    /// empty or the head differs.
    pub fn strip_head(&self, action: &Action) -> Option<PEvent> {
        if self.0.len() >= 2 && &self.0[0] == action {
            Some(PEvent(self.0[1..].to_vec()))
        } else {
            None
        }
    }
}

impl fmt::Display for PEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.0 {
            if !first {
                f.write_str(".")?;
            }
            write!(f, "{a}")?;
            first = false;
        }
        Ok(())
    }
}

/// Serializes as the list of its action strings.
impl Serialize for PEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|a| a.to_string()))
    }
}

/// Causality of process events: the prefix order.
pub fn pe_leq(a: &PEvent, b: &PEvent) -> bool {
    a.is_prefix_of(b)
}

/// Conflict of process events: distinct events on diverging branches,
/// neither the prefix of the other.
pub fn pe_conflict(a: &PEvent, b: &PEvent) -> bool {
    !a.is_prefix_of(b) && !b.is_prefix_of(a)
}

/// The events of a process up to `max_len` actions. The set is
/// prefix-closed, so relations restricted to it are exact even when the
/// event set itself is truncated.
pub fn p_events(p: &Process, max_len: usize) -> Truncated<Vec<PEvent>> {
    let mut out = Vec::new();
    let mut exact = true;
    let mut stack: Vec<(usize, Vec<Action>)> = vec![(p.root(), Vec::new())];
    while let Some((n, prefix)) = stack.pop() {
        if prefix.len() == max_len {
            if !matches!(p.graph().nodes[n], ProcNode::End) {
                exact = false;
            }
            continue;
        }
        let (direction, peer, branches) = match &p.graph().nodes[n] {
            ProcNode::End => continue,
            ProcNode::Out { peer, branches } => (Direction::Output, peer, branches),
            ProcNode::In { peer, branches } => (Direction::Input, peer, branches),
        };
        for (label, child) in branches {
            let action = Action { direction, peer: peer.clone(), message: label.clone() };
            let mut next = prefix.clone();
            next.push(action);
            out.push(PEvent::new(next.clone()));
            stack.push((*child, next));
        }
    }
    out.sort();
    Truncated { value: out, exact }
}

/// The event structure of a process, over its events up to `max_len`
/// actions.
pub fn esp(p: &Process, max_len: usize) -> Truncated<PrimeEs<PEvent>> {
    p_events(p, max_len).map(|events| PrimeEs::new(events, pe_leq, pe_conflict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse::parse_module;

    fn process(src: &str, name: &str) -> Process {
        parse_module(src).unwrap().processes[name].clone()
    }

    fn ev(text: &str) -> PEvent {
        let actions = text
            .split('.')
            .map(|part| {
                let (mark, dir) = if part.contains('!') {
                    ('!', Direction::Output)
                } else {
                    ('?', Direction::Input)
                };
                let (peer, msg) = part.split_once(mark).unwrap();
                Action {
                    direction: dir,
                    peer: crate::syntax::Participant::new(peer),
                    message: crate::syntax::Message::new(msg),
                }
            })
            .collect();
        PEvent::new(actions)
    }

    #[test]
    fn recursive_output_choice_has_two_events_per_level() {
        let p = process("process P = +{q!l;P, q!lp;0}", "P");
        let events = p_events(&p, 3);
        assert!(!events.exact);
        assert_eq!(events.value.len(), 6);
        assert!(events.value.contains(&ev("q!l.q!l.q!lp")));
        assert!(events.value.contains(&ev("q!lp")));
        assert!(!events.value.contains(&ev("q!lp.q!l")));
    }

    #[test]
    fn finite_process_enumerates_exactly() {
        let p = process("process P = q!l;&{q?a;0, q?b;r!m;0}", "P");
        let events = p_events(&p, 10);
        assert!(events.exact);
        let rendered: Vec<String> = events.value.iter().map(|e| e.to_string()).collect();
        assert_eq!(
            rendered,
            vec!["q!l", "q!l.q?a", "q!l.q?b", "q!l.q?b.r!m"],
        );
        // Cutting at the exact height is still exact.
        assert!(p_events(&p, 3).exact);
        assert!(!p_events(&p, 2).exact);
    }

    #[test]
    fn events_order_by_prefix_and_diverge_into_conflict() {
        let a = ev("q!l");
        let b = ev("q!l.q?a");
        let c = ev("q!l.q?b");
        assert!(pe_leq(&a, &b));
        assert!(!pe_leq(&b, &a));
        assert!(pe_leq(&a, &a));
        assert!(pe_conflict(&b, &c));
        assert!(!pe_conflict(&a, &b));
    }

    #[test]
    fn process_events_form_a_prime_structure() {
        let p = process("process P = +{q!l;P, q!lp;0}", "P");
        let es = esp(&p, 3).value;
        assert!(es.check().is_ok());
        // Runs of the process: chains of unfoldings, one choice at a time.
        let domain = es.enumerate_configs(3).value;
        let contains = |evs: &[&str]| {
            let xs = evs.iter().map(|e| ev(e)).collect();
            domain.contains(&xs)
        };
        assert!(contains(&[]));
        assert!(contains(&["q!l"]));
        assert!(contains(&["q!lp"]));
        assert!(contains(&["q!l", "q!l.q!lp"]));
        assert!(!contains(&["q!l", "q!lp"]));
        assert!(!contains(&["q!l.q!lp"]));
    }
}
