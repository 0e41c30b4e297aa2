//! The type system: participant depths, boundedness, projection of global
//! types onto participants, the process refinement preorder, and network
//! typechecking.
//!
//! A global type is *bounded* when no participant can be postponed forever
//! along any path of any of its subtrees, and *well formed* when it is
//! bounded and projects onto every participant. Typechecking a network
//! requires every participant of the type to be bound to a process refining
//! its projection.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{
    process_equal, Global, GlobalNode, Message, Network, NodeId, Participant, ProcGraph,
    ProcNode, Process,
};

/// How long a participant can be kept waiting: the largest number of
/// consecutive communications, along any single path, up to and including
/// the first one that involves the participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Depth {
    Finite(u64),
    Infinite,
}

impl Depth {
    pub fn is_finite(&self) -> bool {
        matches!(self, Depth::Finite(_))
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Finite(n) => write!(f, "{n}"),
            Depth::Infinite => f.write_str("inf"),
        }
    }
}

/// Why a projection is undefined.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectError {
    #[error("branches of `{node}` project onto `{participant}` differently")]
    BranchMismatch { node: String, participant: Participant },
    #[error("participant `{participant}` occurs below `{node}` but not in its branch `{label}`")]
    MissingFromBranch { node: String, label: Message, participant: Participant },
    #[error(
        "projection onto `{participant}` never reaches one of its communications \
         (unguarded cycle through `{node}`)"
    )]
    UnguardedRecursion { node: String, participant: Participant },
}

/// Why a global type is not well formed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WellFormedError {
    #[error("participant `{participant}` can be postponed forever (unbounded depth)")]
    Unbounded { participant: Participant },
    #[error(transparent)]
    NotProjectable(#[from] ProjectError),
}

/// Why a network fails to typecheck.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("global type is not well formed: {0}")]
    NotWellFormed(#[from] WellFormedError),
    #[error("participant `{participant}` is required by the global type but not in the network")]
    MissingParticipant { participant: Participant },
    #[error("process of `{participant}` does not refine its projection")]
    Mismatch { participant: Participant },
}

fn involves(g: &Global, n: NodeId, p: &Participant) -> bool {
    match &g.graph().nodes[n] {
        GlobalNode::End => false,
        GlobalNode::Comm { sender, receiver, .. } => sender == p || receiver == p,
    }
}

/// The number of communications along a path of the tree of `g`, up to and
/// including the first one involving `p`, maximized over all paths;
/// `Finite(0)` when `p` does not occur at all.
pub fn depth(g: &Global, p: &Participant) -> Depth {
    if involves(g, g.root(), p) {
        return Depth::Finite(1);
    }
    // The region of nodes reachable from the root without crossing a
    // communication of `p`.
    let mut region = BTreeSet::from([g.root()]);
    let mut queue = VecDeque::from([g.root()]);
    let mut hits_p = false;
    while let Some(n) = queue.pop_front() {
        for c in g.graph().nodes[n].children() {
            if involves(g, c, p) {
                hits_p = true;
            } else if region.insert(c) {
                queue.push_back(c);
            }
        }
    }
    if !hits_p {
        return Depth::Finite(0);
    }
    // Restrict to nodes that can still reach a communication of `p`; paths
    // that wander elsewhere never involve `p` and contribute depth 0.
    let mut useful: BTreeSet<NodeId> = BTreeSet::new();
    loop {
        let mut changed = false;
        for &n in &region {
            if useful.contains(&n) {
                continue;
            }
            let reaches = g.graph().nodes[n]
                .children()
                .any(|c| involves(g, c, p) || useful.contains(&c));
            if reaches {
                useful.insert(n);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // A cycle that can still reach `p` delays it arbitrarily long.
    let cyclic = {
        let mut color: BTreeMap<NodeId, u8> = BTreeMap::new();
        let mut found = false;
        let mut stack = vec![(g.root(), false)];
        while let Some((n, done)) = stack.pop() {
            if done {
                color.insert(n, 2);
                continue;
            }
            match color.get(&n) {
                Some(_) => continue,
                None => color.insert(n, 1),
            };
            stack.push((n, true));
            for c in g.graph().nodes[n].children() {
                if !useful.contains(&c) {
                    continue;
                }
                match color.get(&c) {
                    Some(1) => found = true,
                    Some(_) => {}
                    None => stack.push((c, false)),
                }
            }
        }
        found
    };
    if cyclic {
        return Depth::Infinite;
    }
    // Acyclic: longest chain of `p`-free communications followed by one
    // involving `p`.
    fn longest(
        g: &Global,
        n: NodeId,
        p: &Participant,
        useful: &BTreeSet<NodeId>,
        memo: &mut BTreeMap<NodeId, u64>,
    ) -> u64 {
        if let Some(&v) = memo.get(&n) {
            return v;
        }
        let mut best = 0;
        for c in g.graph().nodes[n].children() {
            let via = if involves(g, c, p) {
                1
            } else if useful.contains(&c) {
                longest(g, c, p, useful, memo)
            } else {
                continue;
            };
            best = best.max(via);
        }
        let v = 1 + best;
        memo.insert(n, v);
        v
    }
    Depth::Finite(longest(g, g.root(), p, &useful, &mut BTreeMap::new()))
}

/// True when every participant has finite depth in every subtree.
pub fn bounded(g: &Global) -> bool {
    unbounded_witness(g).is_none()
}

fn unbounded_witness(g: &Global) -> Option<Participant> {
    let participants = g.participants();
    for n in g.reachable() {
        let sub = g.at(n);
        for p in &participants {
            if depth(&sub, p) == Depth::Infinite {
                return Some(p.clone());
            }
        }
    }
    None
}

/// Participants of the subtree rooted at each reachable node.
fn subtree_participants(g: &Global) -> BTreeMap<NodeId, BTreeSet<Participant>> {
    let mut out = BTreeMap::new();
    for n in g.reachable() {
        out.insert(n, g.at(n).participants());
    }
    out
}

/// Renders the root of a subtree for error messages.
fn render_node(g: &Global, n: NodeId) -> String {
    match &g.graph().nodes[n] {
        GlobalNode::End => "end".to_owned(),
        GlobalNode::Comm { sender, receiver, branches } => {
            let labels: Vec<String> = branches.keys().map(|l| l.to_string()).collect();
            if labels.len() == 1 {
                format!("{sender}->{receiver}:{}", labels[0])
            } else {
                format!("{sender}->{receiver}:{{{}}}", labels.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    /// The subtree does not mention the participant: it projects to `0`.
    Zero,
    /// The participant sends or receives the root communication: the
    /// projection starts with a choice constructor here.
    Ctor,
    /// The participant is a bystander: the projection is that of the
    /// branches, which must all agree.
    Alias(NodeId),
}

/// Projects a global type onto one participant. Bystander nodes require all
/// branches to contain the participant and to project to equal processes;
/// the result is built first and the equations are checked on it afterwards.
pub fn project(g: &Global, r: &Participant) -> Result<Process, ProjectError> {
    let reach = g.reachable();
    let prts = subtree_participants(g);
    let mut class: BTreeMap<NodeId, Class> = BTreeMap::new();
    for &n in &reach {
        let c = match &g.graph().nodes[n] {
            GlobalNode::End => Class::Zero,
            GlobalNode::Comm { sender, receiver, branches } => {
                if !prts[&n].contains(r) {
                    Class::Zero
                } else if r == sender || r == receiver {
                    Class::Ctor
                } else {
                    for (label, child) in branches {
                        if !prts[child].contains(r) {
                            return Err(ProjectError::MissingFromBranch {
                                node: render_node(g, n),
                                label: label.clone(),
                                participant: r.clone(),
                            });
                        }
                    }
                    Class::Alias(*branches.values().next().expect("nonempty choice"))
                }
            }
        };
        class.insert(n, c);
    }
    // Follow bystander aliases to the node providing the constructor.
    let mut resolved: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &start in &reach {
        let mut seen = BTreeSet::new();
        let mut n = start;
        loop {
            if let Some(&t) = resolved.get(&n) {
                n = t;
                break;
            }
            match class[&n] {
                Class::Alias(t) => {
                    if !seen.insert(n) {
                        return Err(ProjectError::UnguardedRecursion {
                            node: render_node(g, start),
                            participant: r.clone(),
                        });
                    }
                    n = t;
                }
                _ => break,
            }
        }
        for m in seen {
            resolved.insert(m, n);
        }
        resolved.insert(start, n);
    }
    // Build the candidate projection: one process node per constructor
    // node, a shared terminated node for the rest.
    let mut nodes = vec![ProcNode::End];
    let mut out_id: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &n in &reach {
        if class[&n] == Class::Ctor {
            out_id.insert(n, nodes.len());
            nodes.push(ProcNode::End); // placeholder, filled below
        }
    }
    let target = |m: NodeId, out_id: &BTreeMap<NodeId, NodeId>, resolved: &BTreeMap<NodeId, NodeId>| {
        let t = resolved[&m];
        match class[&t] {
            Class::Zero => 0,
            Class::Ctor => out_id[&t],
            Class::Alias(_) => unreachable!("aliases are fully resolved"),
        }
    };
    for &n in &reach {
        if class[&n] != Class::Ctor {
            continue;
        }
        let GlobalNode::Comm { sender, receiver, branches } = &g.graph().nodes[n] else {
            unreachable!("constructor nodes are communications");
        };
        let mapped: BTreeMap<Message, NodeId> = branches
            .iter()
            .map(|(l, c)| (l.clone(), target(*c, &out_id, &resolved)))
            .collect();
        nodes[out_id[&n]] = if r == sender {
            ProcNode::Out { peer: receiver.clone(), branches: mapped }
        } else {
            ProcNode::In { peer: sender.clone(), branches: mapped }
        };
    }
    let root = target(g.root(), &out_id, &resolved);
    let raw = Process::from_parts(Arc::new(ProcGraph { nodes }), root);
    // Check the agreement equations on the built processes.
    for &n in &reach {
        let GlobalNode::Comm { branches, .. } = &g.graph().nodes[n] else { continue };
        if !matches!(class[&n], Class::Alias(_)) {
            continue;
        }
        let ids: Vec<NodeId> =
            branches.values().map(|c| target(*c, &out_id, &resolved)).collect();
        let first = raw.at(ids[0]);
        for &id in &ids[1..] {
            if !process_equal(&first, &raw.at(id)) {
                return Err(ProjectError::BranchMismatch {
                    node: render_node(g, n),
                    participant: r.clone(),
                });
            }
        }
    }
    Ok(raw.compacted())
}

/// A well-formed global type is bounded and projects onto every
/// participant.
pub fn well_formed(g: &Global) -> Result<(), WellFormedError> {
    if let Some(p) = unbounded_witness(g) {
        return Err(WellFormedError::Unbounded { participant: p });
    }
    for p in g.participants() {
        project(g, &p)?;
    }
    Ok(())
}

/// The refinement preorder on processes: `p` refines `q` when it offers the
/// same outputs and at least the inputs of `q`, with refining
/// continuations. Decided coinductively.
pub fn proc_leq(p: &Process, q: &Process) -> bool {
    let mut assumed: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut stack = vec![(p.root(), q.root())];
    while let Some((a, b)) = stack.pop() {
        if !assumed.insert((a, b)) {
            continue;
        }
        match (&p.graph().nodes[a], &q.graph().nodes[b]) {
            (ProcNode::End, ProcNode::End) => {}
            (
                ProcNode::In { peer: pa, branches: ba },
                ProcNode::In { peer: pb, branches: bb },
            ) => {
                if pa != pb {
                    return false;
                }
                // `p` may offer extra inputs; on the shared ones the
                // continuations must refine.
                for (label, cb) in bb {
                    match ba.get(label) {
                        Some(ca) => stack.push((*ca, *cb)),
                        None => return false,
                    }
                }
            }
            (
                ProcNode::Out { peer: pa, branches: ba },
                ProcNode::Out { peer: pb, branches: bb },
            ) => {
                if pa != pb || ba.len() != bb.len() {
                    return false;
                }
                for ((la, ca), (lb, cb)) in ba.iter().zip(bb.iter()) {
                    if la != lb {
                        return false;
                    }
                    stack.push((*ca, *cb));
                }
            }
            _ => return false,
        }
    }
    true
}

/// Typechecks a network against a global type: the type must be well
/// formed, every participant of the type must be bound, and every bound
/// process must refine its projection. Participants are examined in order,
/// so the reported participant is the least failing one.
pub fn typecheck(net: &Network, g: &Global) -> Result<(), TypeError> {
    well_formed(g)?;
    for p in g.participants() {
        if net.get(&p).is_none() {
            return Err(TypeError::MissingParticipant { participant: p });
        }
    }
    for (p, proc) in net.iter() {
        let projection =
            project(g, p).expect("well-formed global types project onto every participant");
        if !proc_leq(proc, &projection) {
            return Err(TypeError::Mismatch { participant: p.clone() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse::parse_module;

    fn global(src: &str, name: &str) -> Global {
        parse_module(src).unwrap().globals[name].clone()
    }

    fn process(src: &str, name: &str) -> Process {
        parse_module(src).unwrap().processes[name].clone()
    }

    fn p(name: &str) -> Participant {
        Participant::new(name)
    }

    const RECURSIVE_DEAL: &str = "global G = p->q:{l1. q->r:l3;end, l2. G}";

    #[test]
    fn projections_of_a_recursive_choice() {
        let g = global(RECURSIVE_DEAL, "G");
        let expected_p = process("process P = +{q!l1;0, q!l2;P}", "P");
        let expected_q = process("process Q = &{p?l1;r!l3;0, p?l2;Q}", "Q");
        let expected_r = process("process R = q?l3;0", "R");
        assert!(project(&g, &p("p")).unwrap().equal(&expected_p));
        assert!(project(&g, &p("q")).unwrap().equal(&expected_q));
        assert!(project(&g, &p("r")).unwrap().equal(&expected_r));
        // A participant that does not occur projects to the terminated
        // process.
        assert!(project(&g, &p("z")).unwrap().is_end());
    }

    #[test]
    fn depths_of_the_recursive_choice() {
        let g = global(RECURSIVE_DEAL, "G");
        assert_eq!(depth(&g, &p("p")), Depth::Finite(1));
        assert_eq!(depth(&g, &p("q")), Depth::Finite(1));
        assert_eq!(depth(&g, &p("r")), Depth::Infinite);
        assert_eq!(depth(&g, &p("z")), Depth::Finite(0));
        assert!(!bounded(&g));

        let g_prefixed = global(
            "global Gp = q->r:l;G global G = p->q:{l1. q->r:l3;end, l2. G}",
            "Gp",
        );
        assert_eq!(depth(&g_prefixed, &p("p")), Depth::Finite(2));
        assert_eq!(depth(&g_prefixed, &p("q")), Depth::Finite(1));
        assert_eq!(depth(&g_prefixed, &p("r")), Depth::Finite(1));
        // Depth at the root is finite, but the recursive subtree still
        // postpones `r` forever.
        assert!(!bounded(&g_prefixed));
    }

    #[test]
    fn chain_type_is_well_formed() {
        let g = global("global G = p->q:l1;q->r:l2;r->s:l3;end", "G");
        assert!(bounded(&g));
        assert!(well_formed(&g).is_ok());
        assert_eq!(depth(&g, &p("s")), Depth::Finite(3));
        assert_eq!(depth(&g, &p("r")), Depth::Finite(2));
    }

    #[test]
    fn mutual_recursion_is_well_formed() {
        let src = "global A = p->q:l;B global B = r->s:lp;A";
        let a = global(src, "A");
        assert_eq!(depth(&a, &p("r")), Depth::Finite(2));
        assert_eq!(depth(&a, &p("p")), Depth::Finite(1));
        assert!(bounded(&a));
        assert!(well_formed(&a).is_ok());
        let expected = process("process P = q!l;P", "P");
        assert!(project(&a, &p("p")).unwrap().equal(&expected));
    }

    #[test]
    fn unbounded_type_is_detected() {
        let g = global("global G = p->q:{l. G, lp. p->r:l;r->s:lp;end}", "G");
        assert!(!bounded(&g));
        assert!(matches!(
            well_formed(&g),
            Err(WellFormedError::Unbounded { .. })
        ));
    }

    #[test]
    fn projection_requires_participants_in_all_branches() {
        let g = global("global G = p->q:{l1. q->r:l;end, l2. end}", "G");
        let err = project(&g, &p("r")).unwrap_err();
        assert!(matches!(err, ProjectError::MissingFromBranch { .. }));
    }

    #[test]
    fn projection_requires_agreeing_branches() {
        let g = global("global G = p->q:{l1. r->s:m1;end, l2. r->s:m2;end}", "G");
        let err = project(&g, &p("r")).unwrap_err();
        assert!(matches!(err, ProjectError::BranchMismatch { .. }));
        // Same shape but agreeing branches projects fine.
        let g = global("global G = p->q:{l1. r->s:m1;end, l2. r->s:m1;end}", "G");
        let proj = project(&g, &p("r")).unwrap();
        assert!(proj.equal(&process("process R = s!m1;0", "R")));
    }

    #[test]
    fn projection_detects_unguarded_cycles() {
        let g = global("global G = p->q:{a. G, b. r->s:l;end}", "G");
        let err = project(&g, &p("r")).unwrap_err();
        assert!(matches!(err, ProjectError::UnguardedRecursion { .. }));
    }

    #[test]
    fn refinement_allows_wider_inputs_only() {
        let wide = process("process P = &{p?l1;0, p?l2;0}", "P");
        let narrow = process("process P = p?l1;0", "P");
        assert!(proc_leq(&wide, &narrow));
        assert!(!proc_leq(&narrow, &wide));
        // Outputs must have exactly the same labels.
        let out_wide = process("process P = +{q!l1;0, q!l2;0}", "P");
        let out_narrow = process("process P = q!l1;0", "P");
        assert!(!proc_leq(&out_wide, &out_narrow));
        assert!(!proc_leq(&out_narrow, &out_wide));
        assert!(proc_leq(&out_wide, &out_wide));
        // Reflexive on recursive processes.
        let rec = process("process P = +{q!l1;P, q!l2;0}", "P");
        assert!(proc_leq(&rec, &rec));
        assert!(proc_leq(&Process::end(), &Process::end()));
        assert!(!proc_leq(&narrow, &Process::end()));
        assert!(!proc_leq(&Process::end(), &narrow));
    }

    #[test]
    fn typechecks_projected_network() {
        let module = parse_module(
            "global G = p->q:l1;q->r:l2;r->s:l3;end
             network N = p::q!l1;0 | q::p?l1;r!l2;0 | r::q?l2;s!l3;0 | s::r?l3;0",
        )
        .unwrap();
        assert!(typecheck(&module.networks["N"], &module.globals["G"]).is_ok());
    }

    #[test]
    fn typechecks_recursive_network() {
        let module = parse_module(
            "global G = p->q:{l. G, lp. end}
             process P = +{q!l;P, q!lp;0}
             process Q = &{p?l;Q, p?lp;0}
             network N = p::P | q::Q",
        )
        .unwrap();
        assert!(typecheck(&module.networks["N"], &module.globals["G"]).is_ok());
    }

    #[test]
    fn typecheck_reports_least_failing_participant() {
        let module = parse_module(
            "global G = p->q:l1;q->r:l2;r->s:l3;end
             network Deadlock = p::r?l;q!lp;0 | q::p?lp;r!lpp;0 | r::q?lpp;p!l;0 | s::r?l3;0
             network Missing = p::q!l1;0 | q::p?l1;r!l2;0 | r::q?l2;s!l3;0
             network Extra = p::q!l1;0 | q::p?l1;r!l2;0 | r::q?l2;s!l3;0 | s::r?l3;0 | t::p?x;0",
        )
        .unwrap();
        let g = &module.globals["G"];
        assert_eq!(
            typecheck(&module.networks["Deadlock"], g),
            Err(TypeError::Mismatch { participant: p("p") })
        );
        assert_eq!(
            typecheck(&module.networks["Missing"], g),
            Err(TypeError::MissingParticipant { participant: p("s") })
        );
        // A live participant outside the type cannot refine the terminated
        // projection.
        assert_eq!(
            typecheck(&module.networks["Extra"], g),
            Err(TypeError::Mismatch { participant: p("t") })
        );
    }

    #[test]
    fn typecheck_rejects_ill_formed_types() {
        let module = parse_module(
            "global G = p->q:{l1. q->r:l3;end, l2. G}
             network N = p::q!l1;0 | q::p?l1;r!l3;0 | r::q?l3;0",
        )
        .unwrap();
        assert!(matches!(
            typecheck(&module.networks["N"], &module.globals["G"]),
            Err(TypeError::NotWellFormed(_))
        ));
    }
}
