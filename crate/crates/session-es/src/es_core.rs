//! Event structures: prime event structures (causality as a partial order
//! with hereditary conflict) and flow event structures (non-transitive
//! flow, where an event may have alternative conflicting causes).
//!
//! Both carry finitely many events; structures of richer semantics are
//! represented here by a bounded window of their events together with an
//! exactness flag ([`Truncated`]). Configurations are enumerated through
//! proving sequences, which characterize configurations in both kinds of
//! structure, so enumeration up to a size bound is complete for that bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A value computed under a bound, together with whether the bound was
/// actually reached: when `exact` is true the value is the untruncated one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncated<T> {
    pub value: T,
    pub exact: bool,
}

impl<T> Truncated<T> {
    pub fn exact(value: T) -> Self {
        Truncated { value, exact: true }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Truncated<U> {
        Truncated { value: f(self.value), exact: self.exact }
    }
}

/// A violated axiom, reported with the offending events (rendered).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EsViolation {
    #[error("causality is not reflexive at `{0}`")]
    NotReflexive(String),
    #[error("causality is not antisymmetric on `{0}`, `{1}`")]
    NotAntisymmetric(String, String),
    #[error("causality is not transitive on `{0}`, `{1}`, `{2}`")]
    NotTransitive(String, String, String),
    #[error("conflict is reflexive at `{0}`")]
    ConflictReflexive(String),
    #[error("conflict is not symmetric on `{0}`, `{1}`")]
    ConflictNotSymmetric(String, String),
    #[error("conflict is not inherited: `{0}` # `{1}` <= `{2}`")]
    ConflictNotHereditary(String, String, String),
    #[error("flow is reflexive at `{0}`")]
    FlowReflexive(String),
}

#[derive(Clone, PartialEq, Eq)]
struct RelMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl RelMatrix {
    fn new(n: usize) -> Self {
        RelMatrix { n, bits: vec![false; n * n] }
    }

    fn build(n: usize, mut rel: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = RelMatrix::new(n);
        for i in 0..n {
            for j in 0..n {
                if rel(i, j) {
                    m.set(i, j);
                }
            }
        }
        m
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }
}

fn sorted_events<E: Ord>(events: impl IntoIterator<Item = E>) -> Vec<E> {
    let set: BTreeSet<E> = events.into_iter().collect();
    set.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Prime event structures
// ---------------------------------------------------------------------------

/// A prime event structure: events with a causality partial order `<=` and a
/// conflict relation. Constructors accept arbitrary relations; [`check`]
/// verifies the axioms.
///
/// [`check`]: PrimeEs::check
#[derive(Clone)]
pub struct PrimeEs<E> {
    events: Vec<E>,
    leq: RelMatrix,
    conflict: RelMatrix,
}

impl<E: Ord + Clone + fmt::Display> PrimeEs<E> {
    pub fn new(
        events: impl IntoIterator<Item = E>,
        leq: impl Fn(&E, &E) -> bool,
        conflict: impl Fn(&E, &E) -> bool,
    ) -> Self {
        let events = sorted_events(events);
        let n = events.len();
        let leq = RelMatrix::build(n, |i, j| leq(&events[i], &events[j]));
        let conflict = RelMatrix::build(n, |i, j| conflict(&events[i], &events[j]));
        PrimeEs { events, leq, conflict }
    }

    pub fn events(&self) -> &[E] {
        &self.events
    }

    pub fn index_of(&self, e: &E) -> Option<usize> {
        self.events.binary_search(e).ok()
    }

    pub fn leq(&self, a: &E, b: &E) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.leq.get(i, j),
            _ => false,
        }
    }

    pub fn conflict(&self, a: &E, b: &E) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.conflict.get(i, j),
            _ => false,
        }
    }

    /// The strict causes of an event, in canonical order.
    pub fn strict_causes(&self, e: &E) -> Vec<E> {
        let Some(j) = self.index_of(e) else { return Vec::new() };
        (0..self.events.len())
            .filter(|&i| i != j && self.leq.get(i, j))
            .map(|i| self.events[i].clone())
            .collect()
    }

    /// Verifies the axioms: causality is a partial order, conflict is
    /// irreflexive, symmetric, and inherited along causality. (Together
    /// these imply that no event causes a conflicting one.)
    pub fn check(&self) -> Result<(), EsViolation> {
        let n = self.events.len();
        let name = |i: usize| self.events[i].to_string();
        for i in 0..n {
            if !self.leq.get(i, i) {
                return Err(EsViolation::NotReflexive(name(i)));
            }
            if self.conflict.get(i, i) {
                return Err(EsViolation::ConflictReflexive(name(i)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && self.leq.get(i, j) && self.leq.get(j, i) {
                    return Err(EsViolation::NotAntisymmetric(name(i), name(j)));
                }
                if self.conflict.get(i, j) != self.conflict.get(j, i) {
                    return Err(EsViolation::ConflictNotSymmetric(name(i), name(j)));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !self.leq.get(i, j) {
                    continue;
                }
                for k in 0..n {
                    if self.leq.get(j, k) && !self.leq.get(i, k) {
                        return Err(EsViolation::NotTransitive(name(i), name(j), name(k)));
                    }
                }
            }
        }
        // Heredity: e # e' <= e'' implies e # e''.
        for i in 0..n {
            for j in 0..n {
                if !self.conflict.get(i, j) {
                    continue;
                }
                for k in 0..n {
                    if self.leq.get(j, k) && !self.conflict.get(i, k) {
                        return Err(EsViolation::ConflictNotHereditary(name(i), name(j), name(k)));
                    }
                }
            }
        }
        Ok(())
    }

    fn indices_of(&self, xs: &BTreeSet<E>) -> Option<BTreeSet<usize>> {
        xs.iter().map(|e| self.index_of(e)).collect()
    }

    /// A configuration is a downward-closed, conflict-free set of events.
    pub fn is_config(&self, xs: &BTreeSet<E>) -> bool {
        let Some(ids) = self.indices_of(xs) else { return false };
        for &i in &ids {
            for j in 0..self.events.len() {
                if self.leq.get(j, i) && !ids.contains(&j) {
                    return false;
                }
            }
            for &j in &ids {
                if self.conflict.get(i, j) {
                    return false;
                }
            }
        }
        true
    }

    /// A proving sequence lists distinct, pairwise conflict-free events
    /// with every strict cause appearing earlier.
    pub fn is_proving_sequence(&self, seq: &[E]) -> bool {
        let Some(ids) = seq.iter().map(|e| self.index_of(e)).collect::<Option<Vec<_>>>() else {
            return false;
        };
        let distinct: BTreeSet<usize> = ids.iter().copied().collect();
        if distinct.len() != ids.len() {
            return false;
        }
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[..a] {
                if self.conflict.get(i, j) || self.conflict.get(j, i) {
                    return false;
                }
            }
            if self.conflict.get(i, i) {
                return false;
            }
            for c in 0..self.events.len() {
                if c != i && self.leq.get(c, i) && !ids[..a].contains(&c) {
                    return false;
                }
            }
        }
        true
    }

    fn admissible(&self, current: &BTreeSet<usize>, e: usize) -> bool {
        if current.contains(&e) || self.conflict.get(e, e) {
            return false;
        }
        for &x in current {
            if self.conflict.get(e, x) || self.conflict.get(x, e) {
                return false;
            }
        }
        (0..self.events.len()).all(|c| c == e || !self.leq.get(c, e) || current.contains(&c))
    }

    /// All configurations up to `max_size`, each with one witnessing
    /// proving sequence.
    pub fn enumerate_configs_with_witness(
        &self,
        max_size: usize,
    ) -> Truncated<Vec<(BTreeSet<E>, Vec<E>)>> {
        enumerate_by_extension(
            self.events.len(),
            max_size,
            |current, e| self.admissible(current, e),
            &self.events,
        )
    }

    /// The configuration domain up to `max_size`.
    pub fn enumerate_configs(&self, max_size: usize) -> Truncated<ConfigDomain<E>> {
        self.enumerate_configs_with_witness(max_size)
            .map(|items| ConfigDomain::from_sets(items.into_iter().map(|(c, _)| c)))
    }

    /// All proving sequences up to `max_len`, in canonical order.
    pub fn enumerate_proving_sequences(&self, max_len: usize) -> Truncated<Vec<Vec<E>>> {
        enumerate_sequences(
            self.events.len(),
            max_len,
            |current, e| self.admissible(current, e),
            &self.events,
        )
    }

    /// Renders the structure in DOT format: solid arrows for immediate
    /// causality (the covering relation), dashed lines for immediate
    /// conflicts.
    pub fn to_dot(&self, name: &str) -> String {
        let n = self.events.len();
        let strictly_less = |i: usize, j: usize| i != j && self.leq.get(i, j);
        let mut lines = dot_header(name, &self.events);
        for i in 0..n {
            for j in 0..n {
                if !strictly_less(i, j) {
                    continue;
                }
                let covering =
                    !(0..n).any(|k| strictly_less(i, k) && strictly_less(k, j));
                if covering {
                    lines.push(format!("  e{i} -> e{j};"));
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if !self.conflict.get(i, j) {
                    continue;
                }
                // Immediate conflict: not inherited from conflicting causes.
                let inherited = (0..n).any(|a| {
                    (0..n).any(|b| {
                        (a, b) != (i, j)
                            && self.leq.get(a, i)
                            && self.leq.get(b, j)
                            && self.conflict.get(a, b)
                    })
                });
                if !inherited {
                    lines.push(format!("  e{i} -> e{j} [style=dashed, dir=none];"));
                }
            }
        }
        lines.push("}".to_owned());
        lines.join("\n") + "\n"
    }
}

// ---------------------------------------------------------------------------
// Flow event structures
// ---------------------------------------------------------------------------

/// A flow event structure: events with an irreflexive flow relation (the
/// possible immediate causes) and a symmetric conflict relation. Conflict
/// between the causes of an event expresses alternative ways to enable it;
/// a self-conflicting event can never occur.
#[derive(Clone)]
pub struct FlowEs<E> {
    events: Vec<E>,
    flow: RelMatrix,
    conflict: RelMatrix,
}

impl<E: Ord + Clone + fmt::Display> FlowEs<E> {
    pub fn new(
        events: impl IntoIterator<Item = E>,
        flow: impl Fn(&E, &E) -> bool,
        conflict: impl Fn(&E, &E) -> bool,
    ) -> Self {
        let events = sorted_events(events);
        let n = events.len();
        let flow = RelMatrix::build(n, |i, j| flow(&events[i], &events[j]));
        let conflict = RelMatrix::build(n, |i, j| conflict(&events[i], &events[j]));
        FlowEs { events, flow, conflict }
    }

    pub fn events(&self) -> &[E] {
        &self.events
    }

    pub fn index_of(&self, e: &E) -> Option<usize> {
        self.events.binary_search(e).ok()
    }

    pub fn flow(&self, a: &E, b: &E) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.flow.get(i, j),
            _ => false,
        }
    }

    pub fn conflict(&self, a: &E, b: &E) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.conflict.get(i, j),
            _ => false,
        }
    }

    /// The flow predecessors (possible immediate causes) of an event.
    pub fn flow_predecessors(&self, e: &E) -> Vec<E> {
        let Some(j) = self.index_of(e) else { return Vec::new() };
        (0..self.events.len())
            .filter(|&i| self.flow.get(i, j))
            .map(|i| self.events[i].clone())
            .collect()
    }

    /// Verifies the axioms: flow is irreflexive and conflict is symmetric.
    pub fn check(&self) -> Result<(), EsViolation> {
        let n = self.events.len();
        let name = |i: usize| self.events[i].to_string();
        for i in 0..n {
            if self.flow.get(i, i) {
                return Err(EsViolation::FlowReflexive(name(i)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.conflict.get(i, j) != self.conflict.get(j, i) {
                    return Err(EsViolation::ConflictNotSymmetric(name(i), name(j)));
                }
            }
        }
        Ok(())
    }

    /// True when conflict is also irreflexive (not required in general).
    pub fn conflict_irreflexive(&self) -> bool {
        (0..self.events.len()).all(|i| !self.conflict.get(i, i))
    }

    /// A configuration is conflict-free, has for every unfulfilled possible
    /// cause a conflicting fulfilled one, and orders its members without
    /// flow cycles.
    pub fn is_config(&self, xs: &BTreeSet<E>) -> bool {
        let Some(ids) = xs.iter().map(|e| self.index_of(e)).collect::<Option<BTreeSet<_>>>()
        else {
            return false;
        };
        for &i in &ids {
            for &j in &ids {
                if self.conflict.get(i, j) {
                    return false;
                }
            }
        }
        for &i in &ids {
            for p in 0..self.events.len() {
                if !self.flow.get(p, i) || ids.contains(&p) {
                    continue;
                }
                let excused = ids
                    .iter()
                    .any(|&w| self.conflict.get(p, w) && self.flow.get(w, i));
                if !excused {
                    return false;
                }
            }
        }
        // No cycle of flow inside the set.
        let mut state: BTreeMap<usize, u8> = BTreeMap::new();
        for &start in &ids {
            if state.contains_key(&start) {
                continue;
            }
            let mut stack = vec![(start, false)];
            while let Some((v, done)) = stack.pop() {
                if done {
                    state.insert(v, 2);
                    continue;
                }
                if state.contains_key(&v) {
                    continue;
                }
                state.insert(v, 1);
                stack.push((v, true));
                for &w in &ids {
                    if self.flow.get(v, w) {
                        match state.get(&w) {
                            Some(1) => return false,
                            Some(_) => {}
                            None => stack.push((w, false)),
                        }
                    }
                }
            }
        }
        true
    }

    /// A proving sequence lists distinct, pairwise conflict-free events
    /// such that every possible cause of a member either appears earlier or
    /// conflicts with an earlier member that is also a possible cause.
    pub fn is_proving_sequence(&self, seq: &[E]) -> bool {
        let Some(ids) = seq.iter().map(|e| self.index_of(e)).collect::<Option<Vec<_>>>() else {
            return false;
        };
        let distinct: BTreeSet<usize> = ids.iter().copied().collect();
        if distinct.len() != ids.len() {
            return false;
        }
        for (a, &i) in ids.iter().enumerate() {
            if self.conflict.get(i, i) {
                return false;
            }
            for &j in &ids[..a] {
                if self.conflict.get(i, j) || self.conflict.get(j, i) {
                    return false;
                }
            }
            let current: BTreeSet<usize> = ids[..a].iter().copied().collect();
            for p in 0..self.events.len() {
                if !self.flow.get(p, i) || current.contains(&p) {
                    continue;
                }
                let excused =
                    current.iter().any(|&w| self.conflict.get(p, w) && self.flow.get(w, i));
                if !excused {
                    return false;
                }
            }
        }
        true
    }

    fn admissible(&self, current: &BTreeSet<usize>, e: usize) -> bool {
        if current.contains(&e) || self.conflict.get(e, e) {
            return false;
        }
        for &x in current {
            if self.conflict.get(e, x) || self.conflict.get(x, e) {
                return false;
            }
        }
        for p in 0..self.events.len() {
            if !self.flow.get(p, e) || current.contains(&p) {
                continue;
            }
            let excused = current.iter().any(|&w| self.conflict.get(p, w) && self.flow.get(w, e));
            if !excused {
                return false;
            }
        }
        true
    }

    /// All configurations up to `max_size`, each with one witnessing
    /// proving sequence.
    pub fn enumerate_configs_with_witness(
        &self,
        max_size: usize,
    ) -> Truncated<Vec<(BTreeSet<E>, Vec<E>)>> {
        enumerate_by_extension(
            self.events.len(),
            max_size,
            |current, e| self.admissible(current, e),
            &self.events,
        )
    }

    /// The configuration domain up to `max_size`.
    pub fn enumerate_configs(&self, max_size: usize) -> Truncated<ConfigDomain<E>> {
        self.enumerate_configs_with_witness(max_size)
            .map(|items| ConfigDomain::from_sets(items.into_iter().map(|(c, _)| c)))
    }

    /// All proving sequences up to `max_len`, in canonical order.
    pub fn enumerate_proving_sequences(&self, max_len: usize) -> Truncated<Vec<Vec<E>>> {
        enumerate_sequences(
            self.events.len(),
            max_len,
            |current, e| self.admissible(current, e),
            &self.events,
        )
    }

    /// Renders the structure in DOT format: solid arrows for flow, dashed
    /// lines for conflict.
    pub fn to_dot(&self, name: &str) -> String {
        let n = self.events.len();
        let mut lines = dot_header(name, &self.events);
        for i in 0..n {
            for j in 0..n {
                if self.flow.get(i, j) {
                    lines.push(format!("  e{i} -> e{j};"));
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                if self.conflict.get(i, j) {
                    lines.push(format!("  e{i} -> e{j} [style=dashed, dir=none];"));
                }
            }
        }
        lines.push("}".to_owned());
        lines.join("\n") + "\n"
    }
}

fn dot_header<E: fmt::Display>(name: &str, events: &[E]) -> Vec<String> {
    let mut lines = vec![format!("digraph {name} {{")];
    for (i, e) in events.iter().enumerate() {
        let label = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
        lines.push(format!("  e{i} [label=\"{label}\"];"));
    }
    lines
}

/// Breadth-first enumeration of configurations by admissible extension,
/// carrying the first witnessing proving sequence found for each one. The
/// result is exact unless some configuration at the size bound still has an
/// admissible extension.
fn enumerate_by_extension<E: Ord + Clone>(
    n: usize,
    max_size: usize,
    admissible: impl Fn(&BTreeSet<usize>, usize) -> bool,
    events: &[E],
) -> Truncated<Vec<(BTreeSet<E>, Vec<E>)>> {
    let mut found: BTreeMap<BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
    found.insert(BTreeSet::new(), Vec::new());
    let mut frontier: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    let mut exact = true;
    for _ in 0..max_size {
        let mut next: Vec<BTreeSet<usize>> = Vec::new();
        for config in &frontier {
            for e in 0..n {
                if !admissible(config, e) {
                    continue;
                }
                let mut bigger = config.clone();
                bigger.insert(e);
                if !found.contains_key(&bigger) {
                    let mut witness = found[config].clone();
                    witness.push(e);
                    found.insert(bigger.clone(), witness);
                    next.push(bigger);
                }
            }
        }
        frontier = next;
    }
    // Anything still extendable at the bound means the domain goes on.
    for config in &frontier {
        if (0..n).any(|e| admissible(config, e)) {
            exact = false;
            break;
        }
    }
    let value = found
        .into_iter()
        .map(|(c, w)| {
            (
                c.iter().map(|&i| events[i].clone()).collect(),
                w.iter().map(|&i| events[i].clone()).collect(),
            )
        })
        .collect();
    Truncated { value, exact }
}

/// Depth-first enumeration of all proving sequences up to a length bound.
fn enumerate_sequences<E: Ord + Clone>(
    n: usize,
    max_len: usize,
    admissible: impl Fn(&BTreeSet<usize>, usize) -> bool,
    events: &[E],
) -> Truncated<Vec<Vec<E>>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut exact = true;
    let mut stack: Vec<(Vec<usize>, BTreeSet<usize>)> = vec![(Vec::new(), BTreeSet::new())];
    while let Some((seq, set)) = stack.pop() {
        if seq.len() == max_len {
            if (0..n).any(|e| admissible(&set, e)) {
                exact = false;
            }
            continue;
        }
        for e in (0..n).rev() {
            if !admissible(&set, e) {
                continue;
            }
            let mut seq2 = seq.clone();
            seq2.push(e);
            let mut set2 = set.clone();
            set2.insert(e);
            out.push(seq2.clone());
            stack.push((seq2, set2));
        }
    }
    out.sort();
    let value = out
        .into_iter()
        .map(|seq| seq.into_iter().map(|i| events[i].clone()).collect())
        .collect();
    Truncated { value, exact }
}

// ---------------------------------------------------------------------------
// Configuration domains
// ---------------------------------------------------------------------------

/// A family of configurations ordered by inclusion, in canonical order
/// (size, then lexicographic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigDomain<E> {
    configs: Vec<BTreeSet<E>>,
}

impl<E: Ord + Clone> ConfigDomain<E> {
    pub fn from_sets(sets: impl IntoIterator<Item = BTreeSet<E>>) -> Self {
        let dedup: BTreeSet<BTreeSet<E>> = sets.into_iter().collect();
        let mut configs: Vec<BTreeSet<E>> = dedup.into_iter().collect();
        configs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        ConfigDomain { configs }
    }

    pub fn configs(&self) -> &[BTreeSet<E>] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn contains(&self, xs: &BTreeSet<E>) -> bool {
        self.configs.iter().any(|c| c == xs)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BTreeSet<E>> {
        self.configs.iter()
    }
}

/// Label-collision failure: the labelling was expected to identify events
/// uniquely.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("events `{a}` and `{b}` carry the same label `{label}`")]
pub struct LabelCollision {
    pub label: String,
    pub a: String,
    pub b: String,
}

/// Decides whether two configuration domains are isomorphic as partial
/// orders, via label functions injective on the events of each domain: the
/// relabelled families of sets must coincide. (Injectivity makes label-set
/// equality a bijection preserving inclusion both ways.)
pub fn poset_iso<E1, E2, L>(
    d1: &ConfigDomain<E1>,
    d2: &ConfigDomain<E2>,
    label1: impl Fn(&E1) -> L,
    label2: impl Fn(&E2) -> L,
) -> Result<bool, LabelCollision>
where
    E1: Ord + Clone + fmt::Display,
    E2: Ord + Clone + fmt::Display,
    L: Ord + Clone + fmt::Display,
{
    fn relabel<E: Ord + Clone + fmt::Display, L: Ord + Clone + fmt::Display>(
        d: &ConfigDomain<E>,
        label: impl Fn(&E) -> L,
    ) -> Result<BTreeSet<BTreeSet<L>>, LabelCollision> {
        let mut seen: BTreeMap<L, &E> = BTreeMap::new();
        for c in d.iter() {
            for e in c {
                let l = label(e);
                if let Some(prev) = seen.get(&l) {
                    if **prev != *e {
                        return Err(LabelCollision {
                            label: l.to_string(),
                            a: prev.to_string(),
                            b: e.to_string(),
                        });
                    }
                } else {
                    seen.insert(l, e);
                }
            }
        }
        Ok(d.iter().map(|c| c.iter().map(&label).collect()).collect())
    }
    let s1 = relabel(d1, label1)?;
    let s2 = relabel(d2, label2)?;
    Ok(s1 == s2)
}

/// Downward surjectivity of a total-on-its-domain event map: every
/// predecessor (under the target structure's precedence, supplied as
/// `predecessors`) of an image event is itself an image.
pub fn downward_surjective<E0, E1>(
    f: &BTreeMap<E0, E1>,
    predecessors: impl Fn(&E1) -> Vec<E1>,
) -> bool
where
    E0: Ord,
    E1: Ord,
{
    let image: BTreeSet<&E1> = f.values().collect();
    f.values().all(|e| predecessors(e).iter().all(|p| image.contains(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// a <= b, with c in conflict with b: configurations are all
    /// downward-closed conflict-free sets.
    fn sample_pes() -> PrimeEs<String> {
        let events = ["a", "b", "c"].map(String::from);
        PrimeEs::new(
            events,
            |x, y| x == y || (x == "a" && y == "b"),
            |x, y| (x == "b" && y == "c") || (x == "c" && y == "b"),
        )
    }

    /// e1 # e2, both possible causes of e3: e3 occurs after either.
    fn sample_fes() -> FlowEs<String> {
        let events = ["e1", "e2", "e3"].map(String::from);
        FlowEs::new(
            events,
            |x, y| (x == "e1" || x == "e2") && y == "e3",
            |x, y| (x == "e1" && y == "e2") || (x == "e2" && y == "e1"),
        )
    }

    #[test]
    fn pes_axioms_hold_and_violations_are_reported() {
        assert!(sample_pes().check().is_ok());
        let not_hereditary = PrimeEs::new(
            ["a", "b", "c"].map(String::from),
            |x, y| x == y || (x == "b" && y == "c"),
            |x, y| (x == "a" && y == "b") || (x == "b" && y == "a"),
        );
        assert!(matches!(
            not_hereditary.check(),
            Err(EsViolation::ConflictNotHereditary(..))
        ));
        let not_transitive = PrimeEs::new(
            ["a", "b", "c"].map(String::from),
            |x, y| x == y || (x == "a" && y == "b") || (x == "b" && y == "c"),
            |_, _| false,
        );
        assert!(matches!(not_transitive.check(), Err(EsViolation::NotTransitive(..))));
        let reflexive_conflict =
            PrimeEs::new(["a"].map(String::from), |x, y| x == y, |_, _| true);
        assert!(matches!(reflexive_conflict.check(), Err(EsViolation::ConflictReflexive(_))));
    }

    #[test]
    fn pes_configs_are_downward_closed_and_conflict_free() {
        let es = sample_pes();
        assert!(es.is_config(&set(&[])));
        assert!(es.is_config(&set(&["a", "b"])));
        assert!(es.is_config(&set(&["a", "c"])));
        assert!(!es.is_config(&set(&["b"])), "not downward closed");
        assert!(!es.is_config(&set(&["a", "b", "c"])), "conflicting");
        let domain = es.enumerate_configs(3);
        assert!(domain.exact);
        assert_eq!(domain.value.len(), 5);
    }

    #[test]
    fn fes_configs_allow_alternative_causes() {
        let es = sample_fes();
        assert!(es.check().is_ok());
        assert!(es.is_config(&set(&["e1", "e3"])));
        assert!(es.is_config(&set(&["e2", "e3"])));
        assert!(!es.is_config(&set(&["e3"])), "no cause present");
        assert!(!es.is_config(&set(&["e1", "e2"])), "conflicting");
        let domain = es.enumerate_configs(3);
        assert!(domain.exact);
        assert_eq!(domain.value.len(), 5);
        assert!(es.is_proving_sequence(&["e1".into(), "e3".into()]));
        assert!(!es.is_proving_sequence(&["e3".into()]));
        assert!(!es.is_proving_sequence(&["e1".into(), "e2".into()]));
        let seqs = es.enumerate_proving_sequences(3);
        assert!(seqs.exact);
        assert_eq!(seqs.value.len(), 4);
    }

    #[test]
    fn fes_flow_cycles_admit_only_the_empty_config() {
        let events = ["x", "y", "z"].map(String::from);
        let es = FlowEs::new(
            events,
            |a, b| {
                matches!(
                    (a.as_str(), b.as_str()),
                    ("x", "y") | ("y", "z") | ("z", "x")
                )
            },
            |_, _| false,
        );
        assert!(es.check().is_ok());
        let domain = es.enumerate_configs(3);
        assert!(domain.exact);
        assert_eq!(domain.value.len(), 1);
        assert!(domain.value.contains(&BTreeSet::new()));
        assert!(!es.is_config(&set(&["x", "y", "z"])), "flow cycle");
    }

    #[test]
    fn enumeration_agrees_with_the_subset_filter() {
        let es = sample_fes();
        let enumerated = es.enumerate_configs(3).value;
        let events = es.events().to_vec();
        let mut brute = Vec::new();
        for mask in 0..(1u32 << events.len()) {
            let xs: BTreeSet<String> = events
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, e)| e.clone())
                .collect();
            if es.is_config(&xs) {
                brute.push(xs);
            }
        }
        let brute = ConfigDomain::from_sets(brute);
        assert_eq!(enumerated, brute);
    }

    #[test]
    fn truncation_is_reported() {
        let chain = PrimeEs::new(
            ["a", "b", "c"].map(String::from),
            |x, y| x <= y,
            |_, _| false,
        );
        let cut = chain.enumerate_configs(2);
        assert!(!cut.exact);
        assert_eq!(cut.value.len(), 3);
        let full = chain.enumerate_configs(3);
        assert!(full.exact);
        assert_eq!(full.value.len(), 4);
    }

    #[test]
    fn poset_iso_matches_structure_not_names() {
        let es = sample_pes();
        let domain = es.enumerate_configs(3).value;
        let renamed = PrimeEs::new(
            ["u", "v", "w"].map(String::from),
            |x, y| x == y || (x == "u" && y == "v"),
            |x, y| (x == "v" && y == "w") || (x == "w" && y == "v"),
        )
        .enumerate_configs(3)
        .value;
        let rename = |e: &String| match e.as_str() {
            "a" => "u".to_owned(),
            "b" => "v".to_owned(),
            other => other.replace('c', "w"),
        };
        assert!(poset_iso(&domain, &renamed, rename, |e| e.clone()).unwrap());
        // The flow domain has the same size but a different shape.
        let fes_domain = sample_fes().enumerate_configs(3).value;
        assert!(!poset_iso(&domain, &fes_domain, |e| e.clone(), |e| e.clone()).unwrap());
        // Colliding labels are rejected.
        let collide = poset_iso(&domain, &renamed, |_| "same".to_owned(), |e| e.clone());
        assert!(collide.is_err());
    }

    #[test]
    fn downward_surjectivity_checks_the_image() {
        let es = sample_pes();
        let mut f: BTreeMap<String, String> = BTreeMap::new();
        f.insert("x".into(), "b".into());
        assert!(!downward_surjective(&f, |e| es.strict_causes(e)));
        f.insert("y".into(), "a".into());
        assert!(downward_surjective(&f, |e| es.strict_causes(e)));
    }

    #[test]
    fn dot_output_mentions_every_event() {
        let pes = sample_pes().to_dot("sample");
        assert!(pes.contains("digraph sample"));
        assert!(pes.contains("label=\"a\""));
        assert!(pes.contains("e0 -> e1;"));
        assert!(pes.contains("style=dashed"));
        let fes = sample_fes().to_dot("flows");
        assert!(fes.contains("e0 -> e2;"));
        assert!(fes.contains("style=dashed"));
    }
}
