//! Operational semantics: synchronous communication steps for networks and
//! for global types.
//!
//! A network steps when some participant's output choice meets the matching
//! input choice of its peer. A global type steps either by consuming its
//! root exchange or, for an exchange whose participants are not involved at
//! the root, by stepping inside every branch simultaneously. Enabledness of
//! the latter kind is a least fixed point over the (finite) node graph:
//! recursion can make an exchange enabled in a branch only because it is
//! enabled at the definition it loops back to.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::syntax::{
    Communication, Global, GlobalGraph, GlobalNode, Message, Network, NodeId, ProcNode, Trace,
};
use crate::typing::{self, WellFormedError};

/// Errors of the step and run operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtsError {
    #[error("global type is not well formed: {0}")]
    NotWellFormed(#[from] WellFormedError),
    #[error("communication `{comm}` is not enabled")]
    NotEnabled { comm: Communication },
    #[error("communication `{comm}` (trace position {index}) is not enabled")]
    NotEnabledAt { index: usize, comm: Communication },
}

/// The communications a network can perform right now: every pair of an
/// output choice and the matching input choice with a shared label.
pub fn net_enabled(net: &Network) -> Vec<Communication> {
    let mut out = BTreeSet::new();
    for (p, proc) in net.iter() {
        let ProcNode::Out { peer: q, branches: outs } = proc.node() else { continue };
        if q == p {
            continue;
        }
        let Some(qproc) = net.get(q) else { continue };
        let ProcNode::In { peer: sender, branches: ins } = qproc.node() else { continue };
        if sender != p {
            continue;
        }
        for label in outs.keys() {
            if ins.contains_key(label) {
                out.insert(
                    Communication::new(p.clone(), label.clone(), q.clone())
                        .expect("peer differs from owner"),
                );
            }
        }
    }
    out.into_iter().collect()
}

/// Performs one communication: both endpoints proceed with the branch
/// labelled by the message.
pub fn net_step(net: &Network, comm: &Communication) -> Result<Network, LtsError> {
    let not_enabled = || LtsError::NotEnabled { comm: comm.clone() };
    let (p, q, label) = (comm.sender(), comm.receiver(), comm.message());
    let pproc = net.get(p).ok_or_else(not_enabled)?;
    let qproc = net.get(q).ok_or_else(not_enabled)?;
    let (ProcNode::Out { peer: to, branches: outs }, ProcNode::In { peer: from, branches: ins }) =
        (pproc.node(), qproc.node())
    else {
        return Err(not_enabled());
    };
    if to != q || from != p {
        return Err(not_enabled());
    }
    match (outs.get(label), ins.get(label)) {
        (Some(&pc), Some(&qc)) => {
            Ok(net.updated(p.clone(), pproc.at(pc)).updated(q.clone(), qproc.at(qc)))
        }
        _ => Err(not_enabled()),
    }
}

/// Runs a whole trace; on failure reports the position of the first
/// communication that is not enabled.
pub fn run_network(net: &Network, trace: &Trace) -> Result<Network, LtsError> {
    let mut current = net.clone();
    for (index, comm) in trace.iter().enumerate() {
        current = net_step(&current, comm)
            .map_err(|_| LtsError::NotEnabledAt { index, comm: comm.clone() })?;
    }
    Ok(current)
}

/// The enabled communications of every reachable node of a global type,
/// computed as a least fixed point: a node enables its root exchanges, plus
/// every exchange of disjoint participants enabled in all of its branches.
/// (A node-local cache misses exchanges that recursion makes available only
/// through the looping branch, so the whole graph is iterated to
/// stability.)
pub(crate) fn global_enabled_map(g: &Global) -> BTreeMap<NodeId, BTreeSet<Communication>> {
    let nodes = g.reachable();
    let mut map: BTreeMap<NodeId, BTreeSet<Communication>> =
        nodes.iter().map(|n| (*n, BTreeSet::new())).collect();
    loop {
        let mut changed = false;
        for &n in &nodes {
            let GlobalNode::Comm { sender, receiver, branches } = &g.graph().nodes[n] else {
                continue;
            };
            let mut next: BTreeSet<Communication> = branches
                .keys()
                .map(|label| {
                    Communication::new(sender.clone(), label.clone(), receiver.clone())
                        .expect("validated on construction")
                })
                .collect();
            let mut children = branches.values();
            let first = children.next().expect("nonempty choice");
            let mut inner = map[first].clone();
            for c in children {
                inner = inner.intersection(&map[c]).cloned().collect();
            }
            next.extend(
                inner.into_iter().filter(|a| !a.involves(sender) && !a.involves(receiver)),
            );
            if next != map[&n] {
                map.insert(n, next);
                changed = true;
            }
        }
        if !changed {
            return map;
        }
    }
}

/// The communications a well-formed global type can perform right now.
pub fn global_enabled(g: &Global) -> Result<Vec<Communication>, LtsError> {
    typing::well_formed(g)?;
    Ok(global_enabled_map(g)[&g.root()].iter().cloned().collect())
}

/// Steps `g` by an enabled communication without re-checking
/// well-formedness; `map` must come from [`global_enabled_map`] on `g`.
/// Returns `None` when the communication is not enabled.
pub(crate) fn global_step_with_map(
    g: &Global,
    comm: &Communication,
    map: &BTreeMap<NodeId, BTreeSet<Communication>>,
) -> Option<Global> {
    if !map[&g.root()].contains(comm) {
        return None;
    }
    let mut nodes = g.graph().nodes.clone();
    let mut memo: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    fn step(
        nodes: &mut Vec<GlobalNode>,
        n: NodeId,
        comm: &Communication,
        memo: &mut BTreeMap<NodeId, NodeId>,
    ) -> NodeId {
        if let Some(&r) = memo.get(&n) {
            return r;
        }
        let GlobalNode::Comm { sender, receiver, branches } = nodes[n].clone() else {
            unreachable!("an enabled communication implies a communication node");
        };
        let result = if comm.sender() == &sender
            && comm.receiver() == &receiver
            && branches.contains_key(comm.message())
        {
            // Root exchange: select the branch.
            branches[comm.message()]
        } else {
            // Disjoint exchange: it is enabled in every branch, so step all
            // of them and rebuild the choice.
            let stepped: BTreeMap<Message, NodeId> = branches
                .iter()
                .map(|(l, c)| (l.clone(), step(nodes, *c, comm, memo)))
                .collect();
            nodes.push(GlobalNode::Comm { sender, receiver, branches: stepped });
            nodes.len() - 1
        };
        memo.insert(n, result);
        result
    }
    let root = step(&mut nodes, g.root(), comm, &mut memo);
    Some(Global::from_parts(std::sync::Arc::new(GlobalGraph { nodes }), root).compacted())
}

/// Performs one communication of a well-formed global type.
pub fn global_step(g: &Global, comm: &Communication) -> Result<Global, LtsError> {
    typing::well_formed(g)?;
    let map = global_enabled_map(g);
    global_step_with_map(g, comm, &map)
        .ok_or_else(|| LtsError::NotEnabled { comm: comm.clone() })
}

/// Runs a whole trace on a well-formed global type; on failure reports the
/// position of the first communication that is not enabled.
pub fn run_global(g: &Global, trace: &Trace) -> Result<Global, LtsError> {
    typing::well_formed(g)?;
    let mut current = g.clone();
    for (index, comm) in trace.iter().enumerate() {
        let map = global_enabled_map(&current);
        current = global_step_with_map(&current, comm, &map)
            .ok_or_else(|| LtsError::NotEnabledAt { index, comm: comm.clone() })?;
    }
    Ok(current)
}

/// All traces a well-formed global type can perform, up to the given
/// length, in canonical order. Inner communications may come first, so this
/// is a larger set than the decoration sequences of the type's tree paths.
pub fn global_traces(g: &Global, max_len: usize) -> Result<Vec<Trace>, LtsError> {
    typing::well_formed(g)?;
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(g.clone(), Trace::empty())]);
    while let Some((state, prefix)) = queue.pop_front() {
        if prefix.len() >= max_len {
            continue;
        }
        let map = global_enabled_map(&state);
        for comm in map[&state.root()].clone() {
            let next = global_step_with_map(&state, &comm, &map)
                .expect("enabled communications step");
            let trace = prefix.appended(comm);
            out.push(trace.clone());
            queue.push_back((next, trace));
        }
    }
    out.sort();
    Ok(out)
}

/// All traces a network can perform, up to the given length, in canonical
/// order. The result is exact when no run can exceed `max_len`.
pub fn network_traces(net: &Network, max_len: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(net.clone(), Trace::empty())]);
    while let Some((state, prefix)) = queue.pop_front() {
        if prefix.len() >= max_len {
            continue;
        }
        for comm in net_enabled(&state) {
            let next = net_step(&state, &comm).expect("enabled communications step");
            let trace = prefix.appended(comm);
            out.push(trace.clone());
            queue.push_back((next, trace));
        }
    }
    out.sort();
    out
}
