//! Executable metatheory: bounded checks of the correspondence between
//! networks and their global types.
//!
//! Each check explores runs up to an explicit bound and returns a report
//! rather than an error: a failure carries a counterexample with enough
//! material (terms, trace, failing step) to be re-checked independently.
//! The isomorphism check compares the configuration domains that traces
//! reach on the two sides, which sidesteps the mismatch between bounding
//! local histories (networks) and bounding tree depth (types).
//!
//! Random exploration is driven by seeded generators of well-formed global
//! types and of networks typed by construction, with greedy shrinking of
//! failing pairs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::global_es::{gec, GEvent};
use crate::lts::{global_step, global_traces, net_enabled, net_step, network_traces};
use crate::net_es::{nec, NEvent};
use crate::syntax::{
    build_global, Communication, Global, GlobalExpr, GlobalGraph, GlobalNode, Message, Network,
    Participant, Trace,
};
use crate::typing::{depth, project, typecheck, well_formed, Depth};

/// The outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Material to re-check a failure independently of this crate: the terms as
/// re-parseable definition text, the offending trace, and what went wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    pub detail: String,
}

/// The result of one property check, optionally tagged with the seed that
/// generated its input pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub property: String,
    pub seed: Option<u64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl VerifyReport {
    pub fn pass(property: &str) -> Self {
        VerifyReport {
            property: property.to_owned(),
            seed: None,
            verdict: Verdict::Pass,
            counterexample: None,
        }
    }

    pub fn fail(property: &str, counterexample: Counterexample) -> Self {
        VerifyReport {
            property: property.to_owned(),
            seed: None,
            verdict: Verdict::Fail,
            counterexample: Some(counterexample),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            self.property,
            match self.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
            }
        )?;
        if let Some(seed) = self.seed {
            write!(f, " (seed {seed})")?;
        }
        if let Some(cx) = &self.counterexample {
            write!(f, "\n  {}", cx.detail)?;
            if let Some(trace) = &cx.trace {
                write!(f, "\n  trace: {trace}")?;
            }
        }
        Ok(())
    }
}

/// A dedup key for visited states; total, unlike the surface form, which
/// cannot render the fully terminated (empty) network.
fn net_key(net: &Network) -> String {
    if net.is_empty() {
        String::new()
    } else {
        net.to_definitions("N")
    }
}

fn counterexample(
    net: &Network,
    g: &Global,
    trace: Option<&Trace>,
    detail: String,
) -> Counterexample {
    Counterexample {
        network: Some(net.to_definitions("N")),
        global: Some(g.to_definitions("G")),
        trace: trace.map(|t| t.to_string()),
        detail,
    }
}

/// A failed precondition is reported as a failure that names the
/// precondition, so that it cannot be mistaken for a verdict about the
/// property itself.
fn precondition_failure(
    property: &str,
    net: &Network,
    g: &Global,
    error: impl fmt::Display,
) -> VerifyReport {
    VerifyReport::fail(
        property,
        counterexample(net, g, None, format!("precondition violated: {error}")),
    )
}

/// Checks that along every network run of at most `max_len` communications,
/// each network step is matched by a step of the global type and the
/// residual pair stays typed.
pub fn check_subject_reduction(net: &Network, g: &Global, max_len: usize) -> VerifyReport {
    const PROPERTY: &str = "subject reduction";
    if let Err(e) = typecheck(net, g) {
        return precondition_failure(PROPERTY, net, g, e);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(net.clone(), g.clone(), Trace::empty())]);
    while let Some((n, t, sigma)) = queue.pop_front() {
        for alpha in net_enabled(&n) {
            let stepped_net = net_step(&n, &alpha).expect("enabled communications step");
            let run = sigma.appended(alpha.clone());
            let stepped_type = match global_step(&t, &alpha) {
                Ok(stepped) => stepped,
                Err(_) => {
                    return VerifyReport::fail(
                        PROPERTY,
                        counterexample(
                            net,
                            g,
                            Some(&run),
                            format!("network step `{alpha}` has no matching step of the type"),
                        ),
                    );
                }
            };
            if let Err(e) = typecheck(&stepped_net, &stepped_type) {
                return VerifyReport::fail(
                    PROPERTY,
                    counterexample(
                        net,
                        g,
                        Some(&run),
                        format!("after this trace the residual pair fails to typecheck: {e}"),
                    ),
                );
            }
            if run.len() < max_len
                && seen.insert((net_key(&stepped_net), stepped_type.to_definitions("G")))
            {
                queue.push_back((stepped_net, stepped_type, run));
            }
        }
    }
    VerifyReport::pass(PROPERTY)
}

/// Checks that along every run of the global type of at most `max_len`
/// communications, each type step is matched by a network step and the
/// residual pair stays typed.
pub fn check_session_fidelity(net: &Network, g: &Global, max_len: usize) -> VerifyReport {
    const PROPERTY: &str = "session fidelity";
    if let Err(e) = typecheck(net, g) {
        return precondition_failure(PROPERTY, net, g, e);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(net.clone(), g.clone(), Trace::empty())]);
    while let Some((n, t, sigma)) = queue.pop_front() {
        let enabled = crate::lts::global_enabled(&t).expect("typed types are well formed");
        for alpha in enabled {
            let stepped_type = global_step(&t, &alpha).expect("enabled communications step");
            let run = sigma.appended(alpha.clone());
            let stepped_net = match net_step(&n, &alpha) {
                Ok(stepped) => stepped,
                Err(_) => {
                    return VerifyReport::fail(
                        PROPERTY,
                        counterexample(
                            net,
                            g,
                            Some(&run),
                            format!("type step `{alpha}` is not matched by the network"),
                        ),
                    );
                }
            };
            if let Err(e) = typecheck(&stepped_net, &stepped_type) {
                return VerifyReport::fail(
                    PROPERTY,
                    counterexample(
                        net,
                        g,
                        Some(&run),
                        format!("after this trace the residual pair fails to typecheck: {e}"),
                    ),
                );
            }
            if run.len() < max_len
                && seen.insert((net_key(&stepped_net), stepped_type.to_definitions("G")))
            {
                queue.push_back((stepped_net, stepped_type, run));
            }
        }
    }
    VerifyReport::pass(PROPERTY)
}

/// The default progress search bound for one participant: the sum of its
/// depth values over the reachable subtrees of the type. Finite because the
/// type is well formed, and sufficient because a participant of depth `d`
/// communicates within `d` steps along some run.
fn progress_bound(g: &Global, p: &Participant) -> usize {
    g.reachable()
        .into_iter()
        .map(|id| match depth(&g.at(id), p) {
            Depth::Finite(d) => d as usize,
            Depth::Infinite => unreachable!("well-formed types have finite depths"),
        })
        .sum()
}

/// Checks that every bound participant can eventually communicate: for each
/// `p` of the network, some run of at most its bound many communications
/// ends in one involving `p`. The per-participant default bound may be
/// capped by an explicit `bound`.
pub fn check_progress(net: &Network, g: &Global, bound: Option<usize>) -> VerifyReport {
    const PROPERTY: &str = "progress";
    if let Err(e) = typecheck(net, g) {
        return precondition_failure(PROPERTY, net, g, e);
    }
    let bounds: BTreeMap<Participant, usize> = net
        .participants()
        .into_iter()
        .map(|p| {
            let default = progress_bound(g, &p);
            let effective = bound.map_or(default, |b| default.min(b));
            (p, effective)
        })
        .collect();
    let horizon = bounds.values().copied().max().unwrap_or(0);
    let mut witnessed: BTreeMap<Participant, usize> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(net.clone(), 0usize)]);
    while let Some((state, len)) = queue.pop_front() {
        if bounds.iter().all(|(p, b)| witnessed.get(p).is_some_and(|w| w <= b)) {
            break;
        }
        if len >= horizon {
            continue;
        }
        for alpha in net_enabled(&state) {
            witnessed.entry(alpha.sender().clone()).or_insert(len + 1);
            witnessed.entry(alpha.receiver().clone()).or_insert(len + 1);
            let next = net_step(&state, &alpha).expect("enabled communications step");
            if seen.insert(net_key(&next)) {
                queue.push_back((next, len + 1));
            }
        }
    }
    for (p, b) in &bounds {
        if !witnessed.get(p).is_some_and(|w| w <= b) {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(
                    net,
                    g,
                    None,
                    format!("participant `{p}` performs no communication within {b} steps"),
                ),
            );
        }
    }
    VerifyReport::pass(PROPERTY)
}

fn render_config<E: fmt::Display>(config: &BTreeSet<E>) -> String {
    let items: Vec<String> = config.iter().map(|e| e.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn sorted_comms<E>(config: &BTreeSet<E>, cm: impl Fn(&E) -> Communication) -> Vec<Communication> {
    let mut comms: Vec<Communication> = config.iter().map(cm).collect();
    comms.sort();
    comms
}

/// Checks that the configuration domains of the network and of its global
/// type are isomorphic on everything reachable within `k` communications.
///
/// Both domains are enumerated through traces: a network trace yields the
/// network events of its communications and, on the type side, the global
/// events of its prefixes. The check verifies that this correspondence is a
/// well-defined bijection between the two domains that preserves inclusion
/// in both directions and the multiset of communications of every
/// configuration.
pub fn check_isomorphism(net: &Network, g: &Global, k: usize) -> VerifyReport {
    const PROPERTY: &str = "isomorphism";
    if let Err(e) = typecheck(net, g) {
        return precondition_failure(PROPERTY, net, g, e);
    }

    let mut image: BTreeMap<BTreeSet<NEvent>, (BTreeSet<GEvent>, Trace)> = BTreeMap::new();
    image.insert(BTreeSet::new(), (BTreeSet::new(), Trace::empty()));
    for sigma in network_traces(net, k) {
        if crate::lts::run_global(g, &sigma).is_err() {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(net, g, Some(&sigma), "network run is not a run of the type".into()),
            );
        }
        let n_config: BTreeSet<NEvent> = nec(&sigma).into_iter().collect();
        let g_config: BTreeSet<GEvent> = gec(&sigma).into_iter().collect();
        match image.get(&n_config) {
            None => {
                image.insert(n_config, (g_config, sigma));
            }
            Some((existing, witness)) => {
                if *existing != g_config {
                    return VerifyReport::fail(
                        PROPERTY,
                        counterexample(
                            net,
                            g,
                            Some(&sigma),
                            format!(
                                "runs `{witness}` and `{sigma}` reach one network \
                                 configuration but different type configurations",
                            ),
                        ),
                    );
                }
            }
        }
    }

    let mut g_domain: BTreeSet<BTreeSet<GEvent>> = BTreeSet::from([BTreeSet::new()]);
    for sigma in global_traces(g, k).expect("typed types are well formed") {
        if crate::lts::run_network(net, &sigma).is_err() {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(net, g, Some(&sigma), "type run is not a run of the network".into()),
            );
        }
        g_domain.insert(gec(&sigma).into_iter().collect());
    }

    let image_configs: BTreeSet<&BTreeSet<GEvent>> =
        image.values().map(|(config, _)| config).collect();
    if image_configs.len() != image.len() {
        return VerifyReport::fail(
            PROPERTY,
            counterexample(
                net,
                g,
                None,
                "two network configurations map to one type configuration".into(),
            ),
        );
    }
    for config in &g_domain {
        if !image_configs.contains(config) {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(
                    net,
                    g,
                    None,
                    format!(
                        "type configuration {} is not the image of any network configuration",
                        render_config(config),
                    ),
                ),
            );
        }
    }
    for config in image_configs {
        if !g_domain.contains(config) {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(
                    net,
                    g,
                    None,
                    format!(
                        "image configuration {} is not reached by any run of the type",
                        render_config(config),
                    ),
                ),
            );
        }
    }

    for (x, (fx, _)) in &image {
        if sorted_comms(x, |nu| nu.cm()) != sorted_comms(fx, |gamma| gamma.cm().clone()) {
            return VerifyReport::fail(
                PROPERTY,
                counterexample(
                    net,
                    g,
                    None,
                    format!(
                        "configuration {} and its image carry different communications",
                        render_config(x),
                    ),
                ),
            );
        }
        for (y, (fy, _)) in &image {
            if x.is_subset(y) != fx.is_subset(fy) {
                return VerifyReport::fail(
                    PROPERTY,
                    counterexample(
                        net,
                        g,
                        None,
                        format!(
                            "inclusion is not preserved between {} and {}",
                            render_config(x),
                            render_config(y),
                        ),
                    ),
                );
            }
        }
    }
    VerifyReport::pass(PROPERTY)
}

/// No candidate survived rejection sampling within the retry budget.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no well-formed global type found in {attempts} attempts")]
pub struct GenerationExhausted {
    pub attempts: usize,
}

const GEN_ATTEMPTS: usize = 500;
const LABEL_POOL: [&str; 6] = ["m1", "m2", "m3", "m4", "m5", "m6"];

fn gen_comm(rng: &mut ChaCha8Rng, parts: &[Participant], fuel: usize) -> GlobalExpr {
    let sender = parts[rng.random_range(0..parts.len())].clone();
    let receiver = loop {
        let candidate = parts[rng.random_range(0..parts.len())].clone();
        if candidate != sender {
            break candidate;
        }
    };
    let mut pool: Vec<&str> = LABEL_POOL.to_vec();
    let branch_count = rng.random_range(1..=3);
    let mut branches = Vec::new();
    for _ in 0..branch_count {
        let label = Message::new(pool.swap_remove(rng.random_range(0..pool.len())));
        let continues = fuel > 1 && rng.random_bool(0.75);
        let cont = if continues {
            gen_comm(rng, parts, fuel - 1)
        } else if rng.random_bool(0.3) {
            GlobalExpr::Ref("G0".to_owned())
        } else {
            GlobalExpr::End
        };
        branches.push((label, cont));
    }
    GlobalExpr::Comm { sender, receiver, branches }
}

fn gen_candidate(rng: &mut ChaCha8Rng, size: usize) -> Global {
    let max_parts = size.clamp(2, 5);
    let count = rng.random_range(2..=max_parts);
    let parts: Vec<Participant> =
        (0..count).map(|i| Participant::new(format!("p{}", i + 1))).collect();
    let fuel = rng.random_range(2..=size.clamp(2, 5) + 1);
    let body = gen_comm(rng, &parts, fuel);
    build_global(&[("G0".to_owned(), body)], "G0")
        .expect("generated equation systems are closed and contractive")
}

/// Draws random global types until one is well formed. The same seed and
/// size always yield the same type.
pub fn gen_well_formed(seed: u64, size: usize) -> Result<Global, GenerationExhausted> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GEN_ATTEMPTS {
        let g = gen_candidate(&mut rng, size);
        if well_formed(&g).is_ok() {
            return Ok(g);
        }
    }
    Err(GenerationExhausted { attempts: GEN_ATTEMPTS })
}

/// The network whose processes are the projections of a well-formed global
/// type; it typechecks against the type by construction.
pub fn projection_network(g: &Global) -> Network {
    let bindings: Vec<(Participant, crate::syntax::Process)> = g
        .participants()
        .into_iter()
        .map(|p| {
            let proc = project(g, &p).expect("well-formed types project onto every participant");
            (p, proc)
        })
        .collect();
    Network::new(bindings).expect("participants are distinct")
}

/// Draws a random well-formed global type together with its projection
/// network. The same seed and size always yield the same pair.
pub fn gen_typed_pair(seed: u64, size: usize) -> Result<(Network, Global), GenerationExhausted> {
    let g = gen_well_formed(seed, size)?;
    let net = projection_network(&g);
    debug_assert!(typecheck(&net, &g).is_ok());
    Ok((net, g))
}

/// The size a shrink must decrease: reachable nodes plus reachable
/// branches.
fn weight(g: &Global) -> usize {
    g.reachable()
        .into_iter()
        .map(|id| match &g.graph().nodes[id] {
            GlobalNode::End => 1,
            GlobalNode::Comm { branches, .. } => 1 + branches.len(),
        })
        .sum()
}

/// One-step shrink candidates of a global type: a branch dropped from some
/// choice, a subtree cut to `end`, or the root replaced by one of its
/// children. Only well-formed, strictly smaller candidates are kept, so
/// repeated shrinking terminates.
pub fn shrink_global(g: &Global) -> Vec<Global> {
    let mut out = Vec::new();
    let reachable = g.reachable();
    for &id in &reachable {
        let GlobalNode::Comm { branches, .. } = &g.graph().nodes[id] else { continue };
        if branches.len() >= 2 {
            for label in branches.keys() {
                let mut nodes = g.graph().nodes.clone();
                let GlobalNode::Comm { branches, .. } = &mut nodes[id] else { unreachable!() };
                branches.remove(label);
                out.push(rebuilt(g, nodes, g.root()));
            }
        }
        if id != g.root() {
            let mut nodes = g.graph().nodes.clone();
            nodes[id] = GlobalNode::End;
            out.push(rebuilt(g, nodes, g.root()));
        } else {
            for child in branches.values() {
                out.push(g.at(*child).compacted());
            }
        }
    }
    let bound = weight(g);
    out.retain(|candidate| weight(candidate) < bound && well_formed(candidate).is_ok());
    out
}

fn rebuilt(g: &Global, nodes: Vec<GlobalNode>, root: usize) -> Global {
    let _ = g;
    Global::from_parts(std::sync::Arc::new(GlobalGraph { nodes }), root).compacted()
}

/// Greedily shrinks a failing typed pair: while some one-step shrink of the
/// type still fails the predicate (with its projection network), descend to
/// it. The result still fails, and no smaller single step does.
pub fn shrink_failing_pair(
    g: &Global,
    fails: impl Fn(&Network, &Global) -> bool,
) -> (Network, Global) {
    let mut current = g.clone();
    loop {
        let next = shrink_global(&current)
            .into_iter()
            .find(|candidate| fails(&projection_network(candidate), candidate));
        match next {
            Some(candidate) => current = candidate,
            None => break,
        }
    }
    (projection_network(&current), current)
}

/// Parameters of a randomized property campaign.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub start_seed: u64,
    pub count: usize,
    /// Size budget handed to the generator (participants and depth).
    pub size: usize,
    /// Trace length bound for subject reduction and session fidelity.
    pub max_len: usize,
    /// Communication bound for the isomorphism check.
    pub k: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { start_seed: 0, count: 200, size: 5, max_len: 6, k: 5 }
    }
}

type Check<'a> = Box<dyn Fn(&Network, &Global) -> VerifyReport + 'a>;

/// Runs subject reduction, session fidelity, progress, and the domain
/// isomorphism over `count` generated pairs. A failing report is first
/// shrunk to a smaller pair that still fails the same check. Reports come
/// in seed order, four per seed.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<VerifyReport>, GenerationExhausted> {
    let checks: [(&str, Check<'_>); 4] = [
        ("sr", Box::new(|n, g| check_subject_reduction(n, g, cfg.max_len))),
        ("sf", Box::new(|n, g| check_session_fidelity(n, g, cfg.max_len))),
        ("progress", Box::new(|n, g| check_progress(n, g, None))),
        ("iso", Box::new(|n, g| check_isomorphism(n, g, cfg.k))),
    ];
    let mut reports = Vec::new();
    for i in 0..cfg.count {
        let seed = cfg.start_seed + i as u64;
        let (net, g) = gen_typed_pair(seed, cfg.size)?;
        for (_, check) in &checks {
            let mut report = check(&net, &g);
            if !report.passed() {
                let (snet, sg) = shrink_failing_pair(&g, |n, t| !check(n, t).passed());
                report = check(&snet, &sg);
            }
            reports.push(report.with_seed(seed));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse::parse_module;

    const EXCHANGE: &str = "process P = +{q!l;P, q!lp;0}\n\
                            process Q = &{p?l;Q, p?lp;0}\n\
                            network N = p::P | q::Q\n\
                            global G = p->q:{l. G, lp. end}";

    const CHAIN: &str = "network N = p::q!l1;0 | q::p?l1;r!l2;0 | r::q?l2;s!l3;0 | s::r?l3;0\n\
                         global G = p->q:l1;q->r:l2;r->s:l3;end";

    const DEADLOCK: &str = "network D = p::r?l;q!lp;0 | q::p?lp;r!lpp;0 | r::q?lpp;p!l;0";

    fn pair(src: &str) -> (Network, Global) {
        let module = parse_module(src).unwrap();
        (
            module.networks.values().next().unwrap().clone(),
            module.globals.values().next().unwrap().clone(),
        )
    }

    #[test]
    fn subject_reduction_holds_for_the_recursive_exchange() {
        let (net, g) = pair(EXCHANGE);
        assert!(check_subject_reduction(&net, &g, 6).passed());
        let (net, g) = pair(CHAIN);
        assert!(check_subject_reduction(&net, &g, 4).passed());
    }

    #[test]
    fn corrupting_a_branch_label_is_caught_with_a_counterexample() {
        let src = "process P = +{q!l;P, q!lp;0}\n\
                   process Q = &{p?l;Q, p?wrong;0}\n\
                   network N = p::P | q::Q\n\
                   global G = p->q:{l. G, lp. end}";
        let (net, g) = pair(src);
        let report = check_subject_reduction(&net, &g, 6);
        assert!(!report.passed());
        let cx = report.counterexample.expect("failures carry a counterexample");
        assert!(cx.detail.contains("precondition violated"));
        assert!(cx.network.is_some());
        assert!(cx.global.is_some());
        // The counterexample text re-parses.
        let reparsed = parse_module(&format!("{}{}", cx.network.unwrap(), cx.global.unwrap()));
        assert!(reparsed.is_ok());
    }

    #[test]
    fn session_fidelity_holds_for_the_examples() {
        let (net, g) = pair(EXCHANGE);
        assert!(check_session_fidelity(&net, &g, 6).passed());
        let (net, g) = pair(CHAIN);
        assert!(check_session_fidelity(&net, &g, 4).passed());
    }

    #[test]
    fn progress_finds_every_participant_a_witness() {
        let (net, g) = pair(EXCHANGE);
        assert!(check_progress(&net, &g, None).passed());
        let (net, g) = pair(CHAIN);
        assert!(check_progress(&net, &g, Some(3)).passed());
        // Capping the bound below the chain depth starves `s`.
        let starved = check_progress(&net, &g, Some(1));
        assert!(!starved.passed());
        let detail = starved.counterexample.unwrap().detail;
        assert!(detail.contains('`'), "{detail}");
    }

    #[test]
    fn untyped_inputs_are_reported_as_precondition_violations() {
        let module = parse_module(&format!("{DEADLOCK}\nglobal G = p->q:l;end")).unwrap();
        let net = module.networks["D"].clone();
        let g = module.globals["G"].clone();
        let report = check_progress(&net, &g, None);
        assert!(!report.passed());
        let detail = report.counterexample.unwrap().detail;
        assert!(detail.contains("precondition violated"));
    }

    #[test]
    fn configuration_domains_correspond_for_the_examples() {
        let (net, g) = pair(CHAIN);
        assert!(check_isomorphism(&net, &g, 3).passed());

        let (net, g) = pair(EXCHANGE);
        assert!(check_isomorphism(&net, &g, 5).passed());

        let diamond = "network N = p::q!l1;r?l3;0 | q::p?l1;0 | r::s!l2;p!l3;0 | s::r?l2;0\n\
                       global G = p->q:l1;r->s:l2;r->p:l3;end";
        let (net, g) = pair(diamond);
        assert!(check_isomorphism(&net, &g, 3).passed());

        // A type for a different protocol fails the precondition.
        let module = parse_module(
            "network N = p::q!l1;0 | q::p?l1;0\nglobal G = p->q:l1;q->r:l2;r->s:l3;end",
        )
        .unwrap();
        let report = check_isomorphism(
            &module.networks["N"].clone(),
            &module.globals["G"].clone(),
            3,
        );
        assert!(!report.passed());
    }

    /// The local-history bound of a network structure and the tree-depth
    /// bound of a type structure measure different things; the trace-based
    /// domains must agree even when a communication sits shallow locally
    /// but deep in the tree.
    #[test]
    fn isomorphism_is_insensitive_to_the_bound_mismatch() {
        let src = "network N = a::b!n1;b!n2;b!n3;b!n4;b!n5;0 \
                   | b::a?n1;a?n2;a?n3;a?n4;a?n5;0 | p::q!m;0 | q::p?m;0\n\
                   global G = a->b:n1;a->b:n2;a->b:n3;a->b:n4;a->b:n5;p->q:m;end";
        let (net, g) = pair(src);
        assert!(check_isomorphism(&net, &g, 5).passed());
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        for seed in 0..25 {
            let g = gen_well_formed(seed, 4).unwrap();
            assert!(well_formed(&g).is_ok());
            let again = gen_well_formed(seed, 4).unwrap();
            assert!(g.equal(&again));
            let (net, g) = gen_typed_pair(seed, 4).unwrap();
            assert!(typecheck(&net, &g).is_ok());
        }
    }

    #[test]
    fn shrinking_keeps_well_formedness_and_the_failure() {
        let g = parse_module("global G = p->q:{l1. q->r:l2;end, l2. q->r:l2;r->p:l3;end}")
            .unwrap()
            .globals["G"]
            .clone();
        let candidates = shrink_global(&g);
        assert!(!candidates.is_empty());
        for candidate in &candidates {
            assert!(well_formed(candidate).is_ok());
            assert!(weight(candidate) < weight(&g));
        }

        // Shrinking against "mentions r" lands on a minimal type with r.
        let fails = |_: &Network, t: &Global| t.participants().contains(&Participant::new("r"));
        let (net, shrunk) = shrink_failing_pair(&g, fails);
        assert!(fails(&net, &shrunk));
        assert!(shrink_global(&shrunk).into_iter().all(|c| !fails(&projection_network(&c), &c)));
    }

    #[test]
    fn small_campaign_passes_and_orders_reports_by_seed() {
        let cfg = CampaignConfig { start_seed: 11, count: 5, size: 4, max_len: 4, k: 3 };
        let reports = run_campaign(&cfg).unwrap();
        assert_eq!(reports.len(), 20);
        for report in &reports {
            assert!(report.passed(), "{report}");
        }
        let seeds: Vec<u64> = reports.iter().map(|r| r.seed.unwrap()).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        assert_eq!(seeds, sorted);
    }

    #[test]
    fn reports_serialize_with_the_fixed_schema() {
        let report = VerifyReport::pass("subject reduction");
        assert_eq!(
            serde_json::to_value(&report).unwrap(),
            serde_json::json!({
                "property": "subject reduction",
                "seed": null,
                "verdict": "pass",
            }),
        );
        let report = VerifyReport::fail(
            "progress",
            Counterexample {
                network: None,
                global: None,
                trace: Some("p->q:l".to_owned()),
                detail: "example".to_owned(),
            },
        )
        .with_seed(7);
        assert_eq!(
            serde_json::to_value(&report).unwrap(),
            serde_json::json!({
                "property": "progress",
                "seed": 7,
                "verdict": "fail",
                "counterexample": {"trace": "p->q:l", "detail": "example"},
            }),
        );
    }
}
