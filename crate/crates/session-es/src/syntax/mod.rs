//! Terms of the calculus: participants, messages, actions, communications,
//! traces, processes, global types, and networks.
//!
//! Processes and global types are coinductive (regular) terms: trees with
//! finitely many distinct subtrees. They are represented as finite node
//! graphs in which recursion appears as back-edges, so every operation on
//! them is a finite graph traversal. Terms are immutable after construction
//! and cheap to clone; a subterm handle is a shared graph plus a root index.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub mod parse;

/// A named session role (`p`, `q`, `r`, ...). Ordered by name; the order
/// fixes all canonical enumerations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Participant(String);

impl Participant {
    /// Creates a participant. The name must be nonempty; names that are
    /// valid identifiers (`[A-Za-z][A-Za-z0-9_]*`) round-trip through the
    /// printers and the parser.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "participant name must be nonempty");
        Participant(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A message label (`l`, `msg`, ...). Ordered by label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message(String);

impl Message {
    /// Creates a message label. The label must be nonempty.
    pub fn new(label: impl Into<String>) -> Self {
        let label = label.into();
        assert!(!label.is_empty(), "message label must be nonempty");
        Message(label)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Direction of an atomic action: sending or receiving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Output,
    Input,
}

/// An atomic process action: `q!l` (send `l` to `q`) or `q?l` (receive `l`
/// from `q`). The peer of an action is total.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    pub direction: Direction,
    pub peer: Participant,
    pub message: Message,
}

impl Action {
    pub fn output(peer: Participant, message: Message) -> Self {
        Action { direction: Direction::Output, peer, message }
    }

    pub fn input(peer: Participant, message: Message) -> Self {
        Action { direction: Direction::Input, peer, message }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.direction {
            Direction::Output => '!',
            Direction::Input => '?',
        };
        write!(f, "{}{}{}", self.peer, mark, self.message)
    }
}

/// A synchronous exchange of one message between two distinct participants,
/// written `p->q:l`. Ordered lexicographically by (sender, message,
/// receiver); the order is used only for canonical forms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Communication {
    sender: Participant,
    message: Message,
    receiver: Participant,
}

impl Communication {
    pub fn new(
        sender: Participant,
        message: Message,
        receiver: Participant,
    ) -> Result<Self, BuildError> {
        if sender == receiver {
            return Err(BuildError::SelfCommunication { participant: sender });
        }
        Ok(Communication { sender, message, receiver })
    }

    pub fn sender(&self) -> &Participant {
        &self.sender
    }

    pub fn message(&self) -> &Message {
        &self.message
    }

    pub fn receiver(&self) -> &Participant {
        &self.receiver
    }

    /// True if `r` is the sender or the receiver.
    pub fn involves(&self, r: &Participant) -> bool {
        self.sender == *r || self.receiver == *r
    }

    pub fn participants(&self) -> BTreeSet<Participant> {
        BTreeSet::from([self.sender.clone(), self.receiver.clone()])
    }

    /// The action this exchange induces for `r`: the send for the sender,
    /// the receive for the receiver, nothing for anyone else.
    pub fn action_for(&self, r: &Participant) -> Option<Action> {
        if *r == self.sender {
            Some(Action::output(self.receiver.clone(), self.message.clone()))
        } else if *r == self.receiver {
            Some(Action::input(self.sender.clone(), self.message.clone()))
        } else {
            None
        }
    }

    /// True if the two exchanges have no participant in common.
    pub fn disjoint(&self, other: &Communication) -> bool {
        !other.involves(&self.sender) && !other.involves(&self.receiver)
    }
}

impl fmt::Display for Communication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.sender, self.receiver, self.message)
    }
}

/// A finite sequence of communications. Ordered lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace(Vec<Communication>);

impl Trace {
    pub fn new(items: Vec<Communication>) -> Self {
        Trace(items)
    }

    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn items(&self) -> &[Communication] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Communication> {
        self.0.iter()
    }

    /// The union of the participants of all items.
    pub fn participants(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        for c in &self.0 {
            out.insert(c.sender.clone());
            out.insert(c.receiver.clone());
        }
        out
    }

    /// The prefix of length `n` (all of the trace if `n >= len`).
    pub fn prefix(&self, n: usize) -> Trace {
        Trace(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn last(&self) -> Option<&Communication> {
        self.0.last()
    }

    pub fn appended(&self, c: Communication) -> Trace {
        let mut items = self.0.clone();
        items.push(c);
        Trace(items)
    }

    /// True if `self` is a (possibly equal) prefix of `other`.
    pub fn is_prefix_of(&self, other: &Trace) -> bool {
        self.len() <= other.len() && self.0[..] == other.0[..self.len()]
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromIterator<Communication> for Trace {
    fn from_iter<I: IntoIterator<Item = Communication>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

pub(crate) type NodeId = usize;

/// Errors raised while assembling terms from equation systems or bindings.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("undefined name `{0}`")]
    UndefinedName(String),
    #[error("duplicate definition of `{0}`")]
    DuplicateDefinition(String),
    #[error("definition of `{0}` is not contractive (it is just a name)")]
    NonContractive(String),
    #[error("duplicate branch label `{label}` in {context}")]
    DuplicateBranchLabel { context: String, label: Message },
    #[error("empty choice in {context}")]
    EmptyChoice { context: String },
    #[error("participant `{participant}` communicates with itself")]
    SelfCommunication { participant: Participant },
    #[error("participant `{0}` is bound twice in a network")]
    DuplicateParticipant(Participant),
}

// ---------------------------------------------------------------------------
// Processes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ProcNode {
    End,
    Out { peer: Participant, branches: BTreeMap<Message, NodeId> },
    In { peer: Participant, branches: BTreeMap<Message, NodeId> },
}

impl ProcNode {
    pub(crate) fn children(&self) -> Box<dyn Iterator<Item = NodeId> + '_> {
        match self {
            ProcNode::End => Box::new(std::iter::empty()),
            ProcNode::Out { branches, .. } | ProcNode::In { branches, .. } => {
                Box::new(branches.values().copied())
            }
        }
    }
}

#[derive(Debug)]
pub(crate) struct ProcGraph {
    pub(crate) nodes: Vec<ProcNode>,
}

/// A process: a single participant's behaviour, either terminated (`0`), an
/// output choice `+{q!l1;P1, ...}`, or an input choice `&{q?l1;P1, ...}`.
/// Recursive behaviour is a cycle in the underlying graph. Cloning is cheap;
/// equality of the infinite unfoldings is [`process_equal`].
#[derive(Clone)]
pub struct Process {
    graph: Arc<ProcGraph>,
    root: NodeId,
}

/// One layer of a process, for external traversal. Branch continuations are
/// subterm handles into the same shared graph.
#[derive(Debug, Clone)]
pub enum ProcessView {
    End,
    Choice { direction: Direction, peer: Participant, branches: Vec<(Message, Process)> },
}

/// The right-hand side of a process equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProcExpr {
    End,
    Ref(String),
    Out { peer: Participant, branches: Vec<(Message, ProcExpr)> },
    In { peer: Participant, branches: Vec<(Message, ProcExpr)> },
}

impl ProcExpr {
    /// Singleton output `peer!message;cont`.
    pub fn send(peer: Participant, message: Message, cont: ProcExpr) -> Self {
        ProcExpr::Out { peer, branches: vec![(message, cont)] }
    }

    /// Singleton input `peer?message;cont`.
    pub fn recv(peer: Participant, message: Message, cont: ProcExpr) -> Self {
        ProcExpr::In { peer, branches: vec![(message, cont)] }
    }
}

struct ProcBuilder<'a> {
    defs: &'a [(String, ProcExpr)],
    index: BTreeMap<&'a str, NodeId>,
    nodes: Vec<ProcNode>,
    end_node: Option<NodeId>,
}

impl<'a> ProcBuilder<'a> {
    fn new(defs: &'a [(String, ProcExpr)]) -> Result<Self, BuildError> {
        let mut index = BTreeMap::new();
        for (i, (name, _)) in defs.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(BuildError::DuplicateDefinition(name.clone()));
            }
        }
        // Definition slots are allocated up front so references can point at
        // them before their bodies are built.
        let nodes = vec![ProcNode::End; defs.len()];
        Ok(ProcBuilder { defs, index, nodes, end_node: None })
    }

    fn build_defs(&mut self) -> Result<(), BuildError> {
        for (slot, (name, body)) in self.defs.iter().enumerate() {
            match body {
                ProcExpr::Ref(_) => {
                    return Err(BuildError::NonContractive(name.clone()));
                }
                ProcExpr::End => self.nodes[slot] = ProcNode::End,
                ProcExpr::Out { peer, branches } => {
                    let node = self.build_choice(name, true, peer, branches)?;
                    self.nodes[slot] = node;
                }
                ProcExpr::In { peer, branches } => {
                    let node = self.build_choice(name, false, peer, branches)?;
                    self.nodes[slot] = node;
                }
            }
        }
        Ok(())
    }

    fn build_choice(
        &mut self,
        context: &str,
        output: bool,
        peer: &Participant,
        branches: &[(Message, ProcExpr)],
    ) -> Result<ProcNode, BuildError> {
        if branches.is_empty() {
            return Err(BuildError::EmptyChoice { context: context.to_owned() });
        }
        let mut map = BTreeMap::new();
        for (label, cont) in branches {
            let child = self.build_expr(context, cont)?;
            if map.insert(label.clone(), child).is_some() {
                return Err(BuildError::DuplicateBranchLabel {
                    context: context.to_owned(),
                    label: label.clone(),
                });
            }
        }
        let peer = peer.clone();
        Ok(if output {
            ProcNode::Out { peer, branches: map }
        } else {
            ProcNode::In { peer, branches: map }
        })
    }

    fn build_expr(&mut self, context: &str, expr: &ProcExpr) -> Result<NodeId, BuildError> {
        match expr {
            ProcExpr::End => Ok(self.end()),
            ProcExpr::Ref(name) => self
                .index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| BuildError::UndefinedName(name.clone())),
            ProcExpr::Out { peer, branches } => {
                let node = self.build_choice(context, true, peer, branches)?;
                Ok(self.push(node))
            }
            ProcExpr::In { peer, branches } => {
                let node = self.build_choice(context, false, peer, branches)?;
                Ok(self.push(node))
            }
        }
    }

    fn end(&mut self) -> NodeId {
        if let Some(id) = self.end_node {
            return id;
        }
        let id = self.push(ProcNode::End);
        self.end_node = Some(id);
        id
    }

    fn push(&mut self, node: ProcNode) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

/// Builds the process defined by `entry` from a system of (possibly mutually
/// recursive) named equations.
pub fn build_process(defs: &[(String, ProcExpr)], entry: &str) -> Result<Process, BuildError> {
    build_process_expr(defs, &ProcExpr::Ref(entry.to_owned()))
}

/// Builds an anonymous process expression over a system of named equations.
pub fn build_process_expr(
    defs: &[(String, ProcExpr)],
    expr: &ProcExpr,
) -> Result<Process, BuildError> {
    let mut b = ProcBuilder::new(defs)?;
    b.build_defs()?;
    let root = b.build_expr("<expression>", expr)?;
    Ok(Process { graph: Arc::new(ProcGraph { nodes: b.nodes }), root }.compacted())
}

impl Process {
    /// The terminated process `0`.
    pub fn end() -> Self {
        Process { graph: Arc::new(ProcGraph { nodes: vec![ProcNode::End] }), root: 0 }
    }

    pub(crate) fn graph(&self) -> &ProcGraph {
        &self.graph
    }

    pub(crate) fn root(&self) -> NodeId {
        self.root
    }

    pub(crate) fn node(&self) -> &ProcNode {
        &self.graph.nodes[self.root]
    }

    /// Subterm handle rooted at `id` in the same graph.
    pub(crate) fn at(&self, id: NodeId) -> Process {
        Process { graph: Arc::clone(&self.graph), root: id }
    }

    pub(crate) fn from_parts(graph: Arc<ProcGraph>, root: NodeId) -> Process {
        Process { graph, root }
    }

    pub fn is_end(&self) -> bool {
        matches!(self.node(), ProcNode::End)
    }

    /// One layer of structure, with subterm handles for the continuations.
    pub fn view(&self) -> ProcessView {
        match self.node() {
            ProcNode::End => ProcessView::End,
            ProcNode::Out { peer, branches } => ProcessView::Choice {
                direction: Direction::Output,
                peer: peer.clone(),
                branches: branches.iter().map(|(m, id)| (m.clone(), self.at(*id))).collect(),
            },
            ProcNode::In { peer, branches } => ProcessView::Choice {
                direction: Direction::Input,
                peer: peer.clone(),
                branches: branches.iter().map(|(m, id)| (m.clone(), self.at(*id))).collect(),
            },
        }
    }

    /// The node ids reachable from the root, in BFS order.
    pub(crate) fn reachable(&self) -> Vec<NodeId> {
        reachable_from(self.root, |n| self.graph.nodes[*n].children().collect::<Vec<_>>())
    }

    /// All participants this process's actions mention.
    pub fn peers(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        for id in self.reachable() {
            match &self.graph.nodes[id] {
                ProcNode::End => {}
                ProcNode::Out { peer, .. } | ProcNode::In { peer, .. } => {
                    out.insert(peer.clone());
                }
            }
        }
        out
    }

    /// True if the reachable graph has a cycle, i.e. the tree unfolding is
    /// infinite.
    pub fn is_recursive(&self) -> bool {
        has_cycle(self.root, |n| self.graph.nodes[n].children().collect::<Vec<_>>())
    }

    /// Length in actions of the longest path from the root to a leaf;
    /// `None` when the process is recursive.
    pub fn height(&self) -> Option<usize> {
        if self.is_recursive() {
            return None;
        }
        fn go(g: &ProcGraph, n: NodeId, memo: &mut BTreeMap<NodeId, usize>) -> usize {
            if let Some(&h) = memo.get(&n) {
                return h;
            }
            let h = g.nodes[n].children().map(|c| 1 + go(g, c, memo)).max().unwrap_or(0);
            memo.insert(n, h);
            h
        }
        Some(go(&self.graph, self.root, &mut BTreeMap::new()))
    }

    /// Number of reachable graph nodes (distinct subterms, up to sharing).
    pub fn node_count(&self) -> usize {
        self.reachable().len()
    }

    /// Structural equality of the (possibly infinite) tree unfoldings,
    /// decided coinductively over node pairs.
    pub fn equal(&self, other: &Process) -> bool {
        process_equal(self, other)
    }

    /// Rewrites the graph to contain exactly the nodes reachable from the
    /// root, renumbered in BFS order.
    pub(crate) fn compacted(&self) -> Process {
        let order = self.reachable();
        if order.len() == self.graph.nodes.len() && order.iter().enumerate().all(|(i, n)| i == *n)
        {
            return self.clone();
        }
        let remap: BTreeMap<NodeId, NodeId> =
            order.iter().enumerate().map(|(new, old)| (*old, new)).collect();
        let nodes = order
            .iter()
            .map(|old| match &self.graph.nodes[*old] {
                ProcNode::End => ProcNode::End,
                ProcNode::Out { peer, branches } => ProcNode::Out {
                    peer: peer.clone(),
                    branches: branches.iter().map(|(m, c)| (m.clone(), remap[c])).collect(),
                },
                ProcNode::In { peer, branches } => ProcNode::In {
                    peer: peer.clone(),
                    branches: branches.iter().map(|(m, c)| (m.clone(), remap[c])).collect(),
                },
            })
            .collect();
        Process { graph: Arc::new(ProcGraph { nodes }), root: remap[&self.root] }
    }

    /// Renders this process as a parseable equation system whose main
    /// definition is `name`. Recursive positions become references to
    /// auxiliary definitions.
    pub fn to_definitions(&self, name: &str) -> String {
        let p = self.compacted();
        let printer = ProcPrinter::new(&p, name);
        printer.render()
    }
}

impl fmt::Debug for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Process({self})")
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_recursive() {
            // A cyclic term has no closed inline form; fall back to the
            // equation system on one line.
            let defs = self.to_definitions("P");
            f.write_str(&defs.lines().collect::<Vec<_>>().join("  "))
        } else {
            f.write_str(&ProcPrinter::new(self, "P").render_inline(self.root))
        }
    }
}

struct ProcPrinter<'a> {
    p: &'a Process,
    names: BTreeMap<NodeId, String>,
}

impl<'a> ProcPrinter<'a> {
    fn new(p: &'a Process, name: &str) -> Self {
        let mut targets = back_edge_targets(p.root, |n| {
            p.graph.nodes[n].children().collect::<Vec<_>>()
        });
        targets.insert(p.root);
        let mut names = BTreeMap::new();
        names.insert(p.root, name.to_owned());
        let mut k = 0;
        for t in targets {
            if t != p.root {
                k += 1;
                names.insert(t, format!("{name}_{k}"));
            }
        }
        ProcPrinter { p, names }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let mut order: Vec<NodeId> = self.names.keys().copied().collect();
        // Main definition first.
        order.sort_by_key(|n| (*n != self.p.root, *n));
        for n in order {
            out.push_str(&format!("process {} = {}\n", self.names[&n], self.render_body(n)));
        }
        out
    }

    fn render_body(&self, n: NodeId) -> String {
        match &self.p.graph.nodes[n] {
            ProcNode::End => "0".to_owned(),
            ProcNode::Out { peer, branches } => self.render_choice('!', "+", peer, branches),
            ProcNode::In { peer, branches } => self.render_choice('?', "&", peer, branches),
        }
    }

    fn render_choice(
        &self,
        mark: char,
        opener: &str,
        peer: &Participant,
        branches: &BTreeMap<Message, NodeId>,
    ) -> String {
        let body = |label: &Message, child: NodeId| {
            format!("{peer}{mark}{label};{}", self.render_ref(child))
        };
        if branches.len() == 1 {
            let (label, child) = branches.iter().next().expect("nonempty choice");
            body(label, *child)
        } else {
            let items: Vec<String> = branches.iter().map(|(l, c)| body(l, *c)).collect();
            format!("{opener}{{{}}}", items.join(", "))
        }
    }

    fn render_ref(&self, n: NodeId) -> String {
        match self.names.get(&n) {
            Some(name) => name.clone(),
            None => self.render_body(n),
        }
    }

    fn render_inline(&self, n: NodeId) -> String {
        self.render_body(n)
    }
}

/// Structural equality of tree unfoldings: the largest relation matching
/// constructors, peers, and branch labels, and relating continuations. The
/// assumed-pairs set makes the coinduction terminate on cyclic graphs.
pub fn process_equal(p: &Process, q: &Process) -> bool {
    if Arc::ptr_eq(&p.graph, &q.graph) && p.root == q.root {
        return true;
    }
    let mut assumed: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut stack = vec![(p.root, q.root)];
    while let Some((a, b)) = stack.pop() {
        if !assumed.insert((a, b)) {
            continue;
        }
        match (&p.graph.nodes[a], &q.graph.nodes[b]) {
            (ProcNode::End, ProcNode::End) => {}
            (
                ProcNode::Out { peer: pa, branches: ba },
                ProcNode::Out { peer: pb, branches: bb },
            )
            | (
                ProcNode::In { peer: pa, branches: ba },
                ProcNode::In { peer: pb, branches: bb },
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

// ---------------------------------------------------------------------------
// Global types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum GlobalNode {
    End,
    Comm { sender: Participant, receiver: Participant, branches: BTreeMap<Message, NodeId> },
}

impl GlobalNode {
    pub(crate) fn children(&self) -> Box<dyn Iterator<Item = NodeId> + '_> {
        match self {
            GlobalNode::End => Box::new(std::iter::empty()),
            GlobalNode::Comm { branches, .. } => Box::new(branches.values().copied()),
        }
    }
}

#[derive(Debug)]
pub(crate) struct GlobalGraph {
    pub(crate) nodes: Vec<GlobalNode>,
}

/// A global type: `end`, or a labelled choice of exchanges
/// `p->q:{l1. G1, ...}` between two distinct participants. Recursion is a
/// cycle in the underlying graph.
#[derive(Clone)]
pub struct Global {
    graph: Arc<GlobalGraph>,
    root: NodeId,
}

/// One layer of a global type, for external traversal.
#[derive(Debug, Clone)]
pub enum GlobalView {
    End,
    Comm { sender: Participant, receiver: Participant, branches: Vec<(Message, Global)> },
}

/// The right-hand side of a global type equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlobalExpr {
    End,
    Ref(String),
    Comm { sender: Participant, receiver: Participant, branches: Vec<(Message, GlobalExpr)> },
}

impl GlobalExpr {
    /// Singleton exchange `sender->receiver:message;cont`.
    pub fn comm(
        sender: Participant,
        receiver: Participant,
        message: Message,
        cont: GlobalExpr,
    ) -> Self {
        GlobalExpr::Comm { sender, receiver, branches: vec![(message, cont)] }
    }
}

struct GlobalBuilder<'a> {
    defs: &'a [(String, GlobalExpr)],
    index: BTreeMap<&'a str, NodeId>,
    nodes: Vec<GlobalNode>,
    end_node: Option<NodeId>,
}

impl<'a> GlobalBuilder<'a> {
    fn new(defs: &'a [(String, GlobalExpr)]) -> Result<Self, BuildError> {
        let mut index = BTreeMap::new();
        for (i, (name, _)) in defs.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(BuildError::DuplicateDefinition(name.clone()));
            }
        }
        let nodes = vec![GlobalNode::End; defs.len()];
        Ok(GlobalBuilder { defs, index, nodes, end_node: None })
    }

    fn build_defs(&mut self) -> Result<(), BuildError> {
        for (slot, (name, body)) in self.defs.iter().enumerate() {
            match body {
                GlobalExpr::Ref(_) => {
                    return Err(BuildError::NonContractive(name.clone()));
                }
                GlobalExpr::End => self.nodes[slot] = GlobalNode::End,
                GlobalExpr::Comm { sender, receiver, branches } => {
                    let node = self.build_comm(name, sender, receiver, branches)?;
                    self.nodes[slot] = node;
                }
            }
        }
        Ok(())
    }

    fn build_comm(
        &mut self,
        context: &str,
        sender: &Participant,
        receiver: &Participant,
        branches: &[(Message, GlobalExpr)],
    ) -> Result<GlobalNode, BuildError> {
        if sender == receiver {
            return Err(BuildError::SelfCommunication { participant: sender.clone() });
        }
        if branches.is_empty() {
            return Err(BuildError::EmptyChoice { context: context.to_owned() });
        }
        let mut map = BTreeMap::new();
        for (label, cont) in branches {
            let child = self.build_expr(context, cont)?;
            if map.insert(label.clone(), child).is_some() {
                return Err(BuildError::DuplicateBranchLabel {
                    context: context.to_owned(),
                    label: label.clone(),
                });
            }
        }
        Ok(GlobalNode::Comm {
            sender: sender.clone(),
            receiver: receiver.clone(),
            branches: map,
        })
    }

    fn build_expr(&mut self, context: &str, expr: &GlobalExpr) -> Result<NodeId, BuildError> {
        match expr {
            GlobalExpr::End => Ok(self.end()),
            GlobalExpr::Ref(name) => self
                .index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| BuildError::UndefinedName(name.clone())),
            GlobalExpr::Comm { sender, receiver, branches } => {
                let node = self.build_comm(context, sender, receiver, branches)?;
                Ok(self.push(node))
            }
        }
    }

    fn end(&mut self) -> NodeId {
        if let Some(id) = self.end_node {
            return id;
        }
        let id = self.push(GlobalNode::End);
        self.end_node = Some(id);
        id
    }

    fn push(&mut self, node: GlobalNode) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

/// Builds the global type defined by `entry` from a system of (possibly
/// mutually recursive) named equations.
pub fn build_global(defs: &[(String, GlobalExpr)], entry: &str) -> Result<Global, BuildError> {
    build_global_expr(defs, &GlobalExpr::Ref(entry.to_owned()))
}

/// Builds an anonymous global type expression over a system of equations.
pub fn build_global_expr(
    defs: &[(String, GlobalExpr)],
    expr: &GlobalExpr,
) -> Result<Global, BuildError> {
    let mut b = GlobalBuilder::new(defs)?;
    b.build_defs()?;
    let root = b.build_expr("<expression>", expr)?;
    Ok(Global { graph: Arc::new(GlobalGraph { nodes: b.nodes }), root }.compacted())
}

impl Global {
    /// The terminated protocol `end`.
    pub fn end() -> Self {
        Global { graph: Arc::new(GlobalGraph { nodes: vec![GlobalNode::End] }), root: 0 }
    }

    pub(crate) fn graph(&self) -> &GlobalGraph {
        &self.graph
    }

    pub(crate) fn root(&self) -> NodeId {
        self.root
    }

    pub(crate) fn node(&self) -> &GlobalNode {
        &self.graph.nodes[self.root]
    }

    pub(crate) fn at(&self, id: NodeId) -> Global {
        Global { graph: Arc::clone(&self.graph), root: id }
    }

    pub(crate) fn from_parts(graph: Arc<GlobalGraph>, root: NodeId) -> Global {
        Global { graph, root }
    }

    pub fn is_end(&self) -> bool {
        matches!(self.node(), GlobalNode::End)
    }

    pub fn view(&self) -> GlobalView {
        match self.node() {
            GlobalNode::End => GlobalView::End,
            GlobalNode::Comm { sender, receiver, branches } => GlobalView::Comm {
                sender: sender.clone(),
                receiver: receiver.clone(),
                branches: branches.iter().map(|(m, id)| (m.clone(), self.at(*id))).collect(),
            },
        }
    }

    pub(crate) fn reachable(&self) -> Vec<NodeId> {
        reachable_from(self.root, |n| self.graph.nodes[*n].children().collect::<Vec<_>>())
    }

    /// All participants of reachable exchanges. Regularity makes this set
    /// finite.
    pub fn participants(&self) -> BTreeSet<Participant> {
        let mut out = BTreeSet::new();
        for id in self.reachable() {
            if let GlobalNode::Comm { sender, receiver, .. } = &self.graph.nodes[id] {
                out.insert(sender.clone());
                out.insert(receiver.clone());
            }
        }
        out
    }

    pub fn is_recursive(&self) -> bool {
        has_cycle(self.root, |n| self.graph.nodes[n].children().collect::<Vec<_>>())
    }

    /// Length in exchanges of the longest path from the root to a leaf;
    /// `None` when the type is recursive.
    pub fn height(&self) -> Option<usize> {
        if self.is_recursive() {
            return None;
        }
        fn go(g: &GlobalGraph, n: NodeId, memo: &mut BTreeMap<NodeId, usize>) -> usize {
            if let Some(&h) = memo.get(&n) {
                return h;
            }
            let h = g.nodes[n].children().map(|c| 1 + go(g, c, memo)).max().unwrap_or(0);
            memo.insert(n, h);
            h
        }
        Some(go(&self.graph, self.root, &mut BTreeMap::new()))
    }

    pub fn node_count(&self) -> usize {
        self.reachable().len()
    }

    pub fn equal(&self, other: &Global) -> bool {
        global_equal(self, other)
    }

    pub(crate) fn compacted(&self) -> Global {
        let order = self.reachable();
        if order.len() == self.graph.nodes.len() && order.iter().enumerate().all(|(i, n)| i == *n)
        {
            return self.clone();
        }
        let remap: BTreeMap<NodeId, NodeId> =
            order.iter().enumerate().map(|(new, old)| (*old, new)).collect();
        let nodes = order
            .iter()
            .map(|old| match &self.graph.nodes[*old] {
                GlobalNode::End => GlobalNode::End,
                GlobalNode::Comm { sender, receiver, branches } => GlobalNode::Comm {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    branches: branches.iter().map(|(m, c)| (m.clone(), remap[c])).collect(),
                },
            })
            .collect();
        Global { graph: Arc::new(GlobalGraph { nodes }), root: remap[&self.root] }
    }

    /// Renders this global type as a parseable equation system whose main
    /// definition is `name`.
    pub fn to_definitions(&self, name: &str) -> String {
        let g = self.compacted();
        let printer = GlobalPrinter::new(&g, name);
        printer.render()
    }
}

impl fmt::Debug for Global {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Global({self})")
    }
}

impl fmt::Display for Global {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_recursive() {
            let defs = self.to_definitions("G");
            f.write_str(&defs.lines().collect::<Vec<_>>().join("  "))
        } else {
            f.write_str(&GlobalPrinter::new(self, "G").render_body(self.root))
        }
    }
}

struct GlobalPrinter<'a> {
    g: &'a Global,
    names: BTreeMap<NodeId, String>,
}

impl<'a> GlobalPrinter<'a> {
    fn new(g: &'a Global, name: &str) -> Self {
        let mut targets =
            back_edge_targets(g.root, |n| g.graph.nodes[n].children().collect::<Vec<_>>());
        targets.insert(g.root);
        let mut names = BTreeMap::new();
        names.insert(g.root, name.to_owned());
        let mut k = 0;
        for t in targets {
            if t != g.root {
                k += 1;
                names.insert(t, format!("{name}_{k}"));
            }
        }
        GlobalPrinter { g, names }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let mut order: Vec<NodeId> = self.names.keys().copied().collect();
        order.sort_by_key(|n| (*n != self.g.root, *n));
        for n in order {
            out.push_str(&format!("global {} = {}\n", self.names[&n], self.render_body(n)));
        }
        out
    }

    fn render_body(&self, n: NodeId) -> String {
        match &self.g.graph.nodes[n] {
            GlobalNode::End => "end".to_owned(),
            GlobalNode::Comm { sender, receiver, branches } => {
                if branches.len() == 1 {
                    let (label, child) = branches.iter().next().expect("nonempty choice");
                    format!("{sender}->{receiver}:{label};{}", self.render_ref(*child))
                } else {
                    let items: Vec<String> = branches
                        .iter()
                        .map(|(l, c)| format!("{l}. {}", self.render_ref(*c)))
                        .collect();
                    format!("{sender}->{receiver}:{{{}}}", items.join(", "))
                }
            }
        }
    }

    fn render_ref(&self, n: NodeId) -> String {
        match self.names.get(&n) {
            Some(name) => name.clone(),
            None => self.render_body(n),
        }
    }
}

/// Structural equality of global type unfoldings, decided coinductively.
pub fn global_equal(g: &Global, h: &Global) -> bool {
    if Arc::ptr_eq(&g.graph, &h.graph) && g.root == h.root {
        return true;
    }
    let mut assumed: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut stack = vec![(g.root, h.root)];
    while let Some((a, b)) = stack.pop() {
        if !assumed.insert((a, b)) {
            continue;
        }
        match (&g.graph.nodes[a], &h.graph.nodes[b]) {
            (GlobalNode::End, GlobalNode::End) => {}
            (
                GlobalNode::Comm { sender: sa, receiver: ra, branches: ba },
                GlobalNode::Comm { sender: sb, receiver: rb, branches: bb },
            ) => {
                if sa != sb || ra != rb || ba.len() != bb.len() {
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

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// A network: a finite map from participants to processes. Terminated
/// bindings are dropped on construction, so parallel composition with `p::0`
/// never changes a network and the empty network is the terminated one.
#[derive(Debug, Clone, Default)]
pub struct Network {
    bindings: BTreeMap<Participant, Process>,
}

impl Network {
    pub fn new(
        bindings: impl IntoIterator<Item = (Participant, Process)>,
    ) -> Result<Self, BuildError> {
        let mut seen = BTreeSet::new();
        let mut map = BTreeMap::new();
        for (p, proc) in bindings {
            if !seen.insert(p.clone()) {
                return Err(BuildError::DuplicateParticipant(p));
            }
            if !proc.is_end() {
                map.insert(p, proc);
            }
        }
        Ok(Network { bindings: map })
    }

    pub fn empty() -> Self {
        Network::default()
    }

    pub fn get(&self, p: &Participant) -> Option<&Process> {
        self.bindings.get(p)
    }

    /// The participants with a live (non-terminated) process.
    pub fn participants(&self) -> BTreeSet<Participant> {
        self.bindings.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Participant, &Process)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// The network with `p` rebound to `proc` (or dropped if terminated).
    pub fn updated(&self, p: Participant, proc: Process) -> Network {
        let mut bindings = self.bindings.clone();
        if proc.is_end() {
            bindings.remove(&p);
        } else {
            bindings.insert(p, proc);
        }
        Network { bindings }
    }

    /// Equality up to structural congruence: same live participants, with
    /// process unfoldings equal participantwise.
    pub fn equal(&self, other: &Network) -> bool {
        self.bindings.len() == other.bindings.len()
            && self.bindings.iter().all(|(p, proc)| {
                other.bindings.get(p).is_some_and(|oproc| process_equal(proc, oproc))
            })
    }

    /// Renders the network as a parseable definition named `name`, together
    /// with auxiliary process definitions for recursive bindings.
    pub fn to_definitions(&self, name: &str) -> String {
        debug_assert!(!self.is_empty(), "an empty network has no surface form");
        let mut defs = String::new();
        let mut parts = Vec::new();
        for (p, proc) in &self.bindings {
            if proc.is_recursive() {
                let pname = format!("{name}_{p}");
                defs.push_str(&proc.to_definitions(&pname));
                parts.push(format!("{p}::{pname}"));
            } else {
                parts.push(format!("{p}::{proc}"));
            }
        }
        format!("{defs}network {name} = {}\n", parts.join(" | "))
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bindings.is_empty() {
            return f.write_str("(empty network)");
        }
        let parts: Vec<String> =
            self.bindings.iter().map(|(p, proc)| format!("{p}::{proc}")).collect();
        f.write_str(&parts.join(" | "))
    }
}

// ---------------------------------------------------------------------------
// Shared graph helpers
// ---------------------------------------------------------------------------

fn reachable_from(root: NodeId, children: impl Fn(&NodeId) -> Vec<NodeId>) -> Vec<NodeId> {
    let mut seen = BTreeSet::from([root]);
    let mut order = vec![root];
    let mut queue = VecDeque::from([root]);
    while let Some(n) = queue.pop_front() {
        for c in children(&n) {
            if seen.insert(c) {
                order.push(c);
                queue.push_back(c);
            }
        }
    }
    order
}

fn has_cycle(root: NodeId, children: impl Fn(NodeId) -> Vec<NodeId>) -> bool {
    // Iterative DFS with gray/black colouring.
    let mut color: BTreeMap<NodeId, u8> = BTreeMap::new();
    let mut stack = vec![(root, false)];
    while let Some((n, done)) = stack.pop() {
        if done {
            color.insert(n, 2);
            continue;
        }
        match color.get(&n) {
            Some(1) | Some(2) => continue,
            _ => {}
        }
        color.insert(n, 1);
        stack.push((n, true));
        for c in children(n) {
            match color.get(&c) {
                Some(1) => return true,
                Some(2) => {}
                _ => stack.push((c, false)),
            }
        }
    }
    false
}

fn back_edge_targets(
    root: NodeId,
    children: impl Fn(NodeId) -> Vec<NodeId>,
) -> BTreeSet<NodeId> {
    let mut color: BTreeMap<NodeId, u8> = BTreeMap::new();
    let mut targets = BTreeSet::new();
    let mut stack = vec![(root, false)];
    while let Some((n, done)) = stack.pop() {
        if done {
            color.insert(n, 2);
            continue;
        }
        match color.get(&n) {
            Some(1) | Some(2) => continue,
            _ => {}
        }
        color.insert(n, 1);
        stack.push((n, true));
        for c in children(n) {
            match color.get(&c) {
                Some(1) => {
                    targets.insert(c);
                }
                Some(2) => {}
                _ => stack.push((c, false)),
            }
        }
    }
    targets
}
