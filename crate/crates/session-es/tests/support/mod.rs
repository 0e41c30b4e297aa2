//! A bounded law battery shared by the acceptance and property suites.
//!
//! Given one typed pair, [`law_check_pair`] checks every finitary
//! consequence of the theory that the library exposes: the four verdicts of
//! the verifier, the algebra of events under retrieval and residual, the
//! causal-set discipline of network structures, the class discipline of
//! global events, both trace-to-proving-sequence constructions and their
//! converses, and brute-force agreement of the configuration enumerators on
//! small instances. Every violation is reported as the first failing law.

use std::collections::{BTreeMap, BTreeSet};

use session_es::es_core::{downward_surjective, ConfigDomain, FlowEs, PrimeEs, Truncated};
use session_es::global_es::{
    esg, ev, g_conflict, g_leq, g_residual, g_retrieval, g_to_n, g_traces, gec, is_pointed,
    GEvent,
};
use session_es::lts::{global_traces, net_enabled, network_traces, run_global, run_network};
use session_es::net_es::{
    causal_sets, de_events, esn, n_conflict, n_flow, n_residual, n_retrieval, nec,
    project_nevents, NEvent,
};
use session_es::proc_es::{esp, PEvent};
use session_es::syntax::{Communication, Global, Network, Trace};
use session_es::typing::typecheck;
use session_es::verify::{
    check_isomorphism, check_progress, check_session_fidelity, check_subject_reduction,
};

/// Proving sequences are enumerated exhaustively up to this length wherever
/// a law quantifies over them.
const SEQ_LEN: usize = 3;

/// Ceiling on the events sampled for the quadratic event-pair laws.
const PAIR_SAMPLE: usize = 12;

/// Brute-force subset enumeration runs only on structures this small.
const BRUTE_LIMIT: usize = 12;

/// Runs the whole battery on one typed pair. `k` bounds the event
/// structures whose configuration domains are enumerated; `max_len` bounds
/// the executable traces (and the structures they are replayed in).
pub fn law_check_pair(
    net: &Network,
    g: &Global,
    k: usize,
    max_len: usize,
) -> Result<(), String> {
    typecheck(net, g).map_err(|e| format!("pair does not typecheck: {e}"))?;
    for report in [
        check_subject_reduction(net, g, max_len),
        check_session_fidelity(net, g, max_len),
        check_progress(net, g, None),
        check_isomorphism(net, g, k),
    ] {
        if !report.passed() {
            return Err(report.to_string());
        }
    }

    let de = de_events(net, max_len).value;
    let es_k = esn(net, k);
    let es_t = esn(net, max_len).value;
    let es_g =
        esg(g, max_len).map_err(|e| format!("well-formedness lost after typechecking: {e}"))?.value;
    let n_traces = network_traces(net, max_len);
    let g_exec = global_traces(g, max_len).map_err(|e| e.to_string())?;

    overlapping_events_conflict(&de)?;
    flow_structure_sanity(&es_t)?;
    causal_sets_fit_the_slot_count(&es_t)?;
    configurations_pick_one_causal_set(&es_k.value)?;
    projections_of_configurations(&es_k, net, k)?;
    nec_laws(&n_traces, &es_t)?;
    nec_converse(net, &es_t)?;
    net_shift_laws(&es_t, net)?;
    prime_structure_sanity(&es_g)?;
    class_members_agree(&es_g)?;
    gec_laws(&g_exec, &es_g)?;
    gec_converse(g, &es_g)?;
    global_events_realize_network_events(&es_g, &de)?;
    global_shift_laws(&es_g, g, max_len)?;
    brute_force_agreement(
        es_k.value.events(),
        |xs| es_k.value.is_config(xs),
        &es_k.value.enumerate_configs(es_k.value.events().len()).value,
        &es_k.value.enumerate_configs_with_witness(es_k.value.events().len()).value,
        |seq| es_k.value.is_proving_sequence(seq),
        &es_k.value.enumerate_proving_sequences(SEQ_LEN).value,
    )?;
    brute_force_agreement(
        es_g.events(),
        |xs| es_g.is_config(xs),
        &es_g.enumerate_configs(es_g.events().len()).value,
        &es_g.enumerate_configs_with_witness(es_g.events().len()).value,
        |seq| es_g.is_proving_sequence(seq),
        &es_g.enumerate_proving_sequences(SEQ_LEN).value,
    )?;
    Ok(())
}

/// Deterministic evenly spaced selection of at most `cap` items.
fn sample<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    (0..cap).map(|i| items[i * items.len() / cap].clone()).collect()
}

/// Distinct dual pairs sharing a located event exclude each other.
fn overlapping_events_conflict(de: &BTreeSet<NEvent>) -> Result<(), String> {
    let events: Vec<&NEvent> = de.iter().collect();
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            let overlap = a.components().iter().any(|le| b.contains(le));
            if overlap && !(n_conflict(a, b) && n_conflict(b, a)) {
                return Err(format!(
                    "distinct events sharing a located event must conflict: {a} and {b}"
                ));
            }
        }
    }
    Ok(())
}

/// Flow is irreflexive and conflict is a symmetric irreflexive relation.
fn flow_structure_sanity(es: &FlowEs<NEvent>) -> Result<(), String> {
    es.check().map_err(|e| format!("network event structure: {e}"))?;
    if !es.conflict_irreflexive() {
        return Err("network conflict must be irreflexive".into());
    }
    Ok(())
}

/// A causal set covers one strict prefix slot per member, so it can never
/// outgrow the combined history length of the two components.
fn causal_sets_fit_the_slot_count(es: &FlowEs<NEvent>) -> Result<(), String> {
    let universe: BTreeSet<NEvent> = es.events().iter().cloned().collect();
    for nu in es.events() {
        let [a, b] = nu.components();
        let slots = a.event.len() + b.event.len() - 2;
        for cs in causal_sets(nu, &universe) {
            if cs.len() > slots {
                return Err(format!(
                    "a causal set of {nu} has {} members for {slots} history slots",
                    cs.len()
                ));
            }
        }
    }
    Ok(())
}

/// Configurations are conflict-free and justify each member through exactly
/// one of its causal sets.
fn configurations_pick_one_causal_set(es: &FlowEs<NEvent>) -> Result<(), String> {
    let universe: BTreeSet<NEvent> = es.events().iter().cloned().collect();
    let mut cache: BTreeMap<&NEvent, Vec<BTreeSet<NEvent>>> = BTreeMap::new();
    for nu in es.events() {
        cache.insert(nu, causal_sets(nu, &universe));
    }
    let domain = es.enumerate_configs(es.events().len()).value;
    for config in domain.iter() {
        let members: Vec<&NEvent> = config.iter().collect();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if n_conflict(a, b) || n_conflict(b, a) {
                    return Err(format!(
                        "a configuration holds conflicting events {a} and {b}"
                    ));
                }
            }
        }
        for nu in config {
            let hits = cache[nu].iter().filter(|cs| cs.is_subset(config)).count();
            if hits != 1 {
                return Err(format!(
                    "{nu} finds {hits} of its causal sets inside one configuration, \
                     expected exactly one"
                ));
            }
        }
    }
    Ok(())
}

/// On exact structures, projecting any configuration onto a participant
/// lands in the configuration domain of its process, and the projection map
/// itself is downward surjective.
fn projections_of_configurations(
    es: &Truncated<FlowEs<NEvent>>,
    net: &Network,
    k: usize,
) -> Result<(), String> {
    if !es.exact {
        return Ok(());
    }
    let events = es.value.events();
    let domain = es.value.enumerate_configs(events.len()).value;
    for (p, proc) in net.iter() {
        let local = esp(proc, k).value;
        for config in domain.iter() {
            let projected = project_nevents(config, p);
            if !local.is_config(&projected) {
                return Err(format!(
                    "projecting a configuration onto `{p}` must give a configuration \
                     of its process"
                ));
            }
        }
        let map: BTreeMap<NEvent, PEvent> = events
            .iter()
            .filter_map(|nu| nu.located(p).map(|eta| (nu.clone(), eta.clone())))
            .collect();
        let prefixes = |eta: &PEvent| -> Vec<PEvent> {
            (1..eta.len()).map(|n| PEvent::new(eta.actions()[..n].to_vec())).collect()
        };
        if !downward_surjective(&map, prefixes) {
            return Err(format!("the event projection onto `{p}` must be downward surjective"));
        }
    }
    Ok(())
}

/// Every executable trace unfolds into a conflict-free proving sequence
/// whose i-th event performs the i-th communication.
fn nec_laws(traces: &[Trace], es: &FlowEs<NEvent>) -> Result<(), String> {
    for sigma in traces {
        let events = nec(sigma);
        for (nu, alpha) in events.iter().zip(sigma.iter()) {
            if nu.cm() != *alpha {
                return Err(format!("event {nu} of `{sigma}` must perform `{alpha}`"));
            }
        }
        for (i, a) in events.iter().enumerate() {
            for b in &events[..i] {
                if n_conflict(a, b) || n_conflict(b, a) {
                    return Err(format!(
                        "the events of `{sigma}` must be conflict-free: {a} and {b}"
                    ));
                }
            }
        }
        if let (Some(first), Some(alpha)) = (events.first(), sigma.items().first()) {
            if n_residual(first, alpha).is_some() {
                return Err(format!("the event of `{alpha}` must not survive it"));
            }
        }
        let set: BTreeSet<NEvent> = events.iter().cloned().collect();
        if !es.is_config(&set) {
            return Err(format!("the events of `{sigma}` must form a configuration"));
        }
        if !es.is_proving_sequence(&events) {
            return Err(format!("the events of `{sigma}` must form a proving sequence"));
        }
    }
    Ok(())
}

/// Conversely, replaying the communications of any proving sequence
/// executes, and rebuilds the sequence it came from.
fn nec_converse(net: &Network, es: &FlowEs<NEvent>) -> Result<(), String> {
    for seq in es.enumerate_proving_sequences(SEQ_LEN).value {
        let trace: Trace = seq.iter().map(|nu| nu.cm()).collect();
        if let Err(e) = run_network(net, &trace) {
            return Err(format!("a network proving sequence must execute: {e}"));
        }
        if nec(&trace) != seq {
            return Err(format!("executing `{trace}` must rebuild its proving sequence"));
        }
    }
    Ok(())
}

/// Retrieval and residual of network events invert each other, keep the
/// event's communication, and transport flow and conflict.
fn net_shift_laws(es: &FlowEs<NEvent>, net: &Network) -> Result<(), String> {
    let events = sample(es.events(), PAIR_SAMPLE);
    let mut alphas: BTreeSet<Communication> = es.events().iter().map(|nu| nu.cm()).collect();
    alphas.extend(net_enabled(net));
    for nu in &events {
        for alpha in &alphas {
            let before = n_retrieval(nu, alpha);
            if before.cm() != nu.cm() {
                return Err(format!("retrieval along `{alpha}` must not change what {nu} does"));
            }
            if n_residual(&before, alpha).as_ref() != Some(nu) {
                return Err(format!(
                    "shifting {nu} before and after `{alpha}` must give it back"
                ));
            }
            if let Some(after) = n_residual(nu, alpha) {
                if after.cm() != nu.cm() {
                    return Err(format!(
                        "residual along `{alpha}` must not change what {nu} does"
                    ));
                }
                if n_retrieval(&after, alpha) != *nu {
                    return Err(format!(
                        "shifting {nu} after and before `{alpha}` must give it back"
                    ));
                }
            }
        }
    }
    for a in &events {
        for b in &events {
            for alpha in &alphas {
                let (ra, rb) = (n_retrieval(a, alpha), n_retrieval(b, alpha));
                if n_flow(a, b) && !n_flow(&ra, &rb) {
                    return Err(format!(
                        "retrieval along `{alpha}` must preserve the flow {a} to {b}"
                    ));
                }
                if n_conflict(a, b) != n_conflict(&ra, &rb) {
                    return Err(format!(
                        "retrieval along `{alpha}` must neither lose nor invent the \
                         conflict between {a} and {b}"
                    ));
                }
                if let (Some(sa), Some(sb)) = (n_residual(a, alpha), n_residual(b, alpha)) {
                    if n_flow(a, b) && !n_flow(&sa, &sb) {
                        return Err(format!(
                            "residual along `{alpha}` must preserve the flow {a} to {b}"
                        ));
                    }
                    if n_conflict(a, b) && !n_conflict(&sa, &sb) {
                        return Err(format!(
                            "residual along `{alpha}` must preserve the conflict between \
                             {a} and {b}"
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The structure of a global type is a partial order with hereditary
/// conflict.
fn prime_structure_sanity(es: &PrimeEs<GEvent>) -> Result<(), String> {
    es.check().map_err(|e| format!("global event structure: {e}"))
}

/// All members of a global event are pointed traces of one length that end
/// with the event's communication, and each rebuilds the same event.
fn class_members_agree(es: &PrimeEs<GEvent>) -> Result<(), String> {
    for gamma in es.events() {
        let canonical = gamma.canonical();
        if gamma.members().first() != Some(canonical) {
            return Err(format!("the canonical member of {gamma} must be its least"));
        }
        for member in gamma.members() {
            if !is_pointed(member) {
                return Err(format!("class member `{member}` of {gamma} must be pointed"));
            }
            if member.len() != canonical.len() || member.last() != canonical.last() {
                return Err(format!(
                    "class members of {gamma} must share length and last communication"
                ));
            }
            if ev(member) != *gamma {
                return Err(format!("member `{member}` must rebuild {gamma}"));
            }
        }
    }
    Ok(())
}

/// The proper causes of a global event: the classes of the pointed strict
/// prefixes of its members.
fn g_causes(gamma: &GEvent) -> BTreeSet<GEvent> {
    let mut out = BTreeSet::new();
    for member in gamma.members() {
        for n in 1..member.len() {
            let prefix = member.prefix(n);
            if is_pointed(&prefix) {
                out.insert(ev(&prefix));
            }
        }
    }
    out
}

/// Every executable trace of the type unfolds into a conflict-free sequence
/// of distinct events that performs the trace and lists causes first. When
/// the bounded structure holds all of its events, it also recognizes the
/// sequence.
fn gec_laws(traces: &[Trace], es: &PrimeEs<GEvent>) -> Result<(), String> {
    let known: BTreeSet<GEvent> = es.events().iter().cloned().collect();
    for sigma in traces {
        let events = gec(sigma);
        for (gamma, alpha) in events.iter().zip(sigma.iter()) {
            if gamma.cm() != alpha {
                return Err(format!("event {gamma} of `{sigma}` must perform `{alpha}`"));
            }
        }
        let mut seen: BTreeSet<GEvent> = BTreeSet::new();
        for (i, gamma) in events.iter().enumerate() {
            for other in &events[..i] {
                if gamma == other {
                    return Err(format!("the events of `{sigma}` must be distinct: {gamma}"));
                }
                if g_conflict(gamma, other) || g_conflict(other, gamma) {
                    return Err(format!(
                        "the events of `{sigma}` must be conflict-free: {gamma} and {other}"
                    ));
                }
            }
            for cause in g_causes(gamma) {
                if !seen.contains(&cause) {
                    return Err(format!(
                        "cause {cause} of {gamma} must come earlier in `{sigma}`"
                    ));
                }
            }
            seen.insert(gamma.clone());
        }
        if events.iter().all(|gamma| known.contains(gamma)) {
            let set: BTreeSet<GEvent> = events.iter().cloned().collect();
            if !es.is_config(&set) {
                return Err(format!("the events of `{sigma}` must form a configuration"));
            }
            if !es.is_proving_sequence(&events) {
                return Err(format!("the events of `{sigma}` must form a proving sequence"));
            }
        }
    }
    Ok(())
}

/// Conversely, replaying the communications of any proving sequence of the
/// type executes, and rebuilds the sequence.
fn gec_converse(g: &Global, es: &PrimeEs<GEvent>) -> Result<(), String> {
    for seq in es.enumerate_proving_sequences(SEQ_LEN).value {
        let trace: Trace = seq.iter().map(|gamma| gamma.cm().clone()).collect();
        if let Err(e) = run_global(g, &trace) {
            return Err(format!("a global proving sequence must execute: {e}"));
        }
        if gec(&trace) != seq {
            return Err(format!("executing `{trace}` must rebuild its proving sequence"));
        }
    }
    Ok(())
}

/// Every global event is realized by a dual pair of the typed network, with
/// the same communication.
fn global_events_realize_network_events(
    es: &PrimeEs<GEvent>,
    de: &BTreeSet<NEvent>,
) -> Result<(), String> {
    for gamma in es.events() {
        let nu = g_to_n(gamma);
        if nu.cm() != *gamma.cm() {
            return Err(format!(
                "{gamma} and its network event must perform the same communication"
            ));
        }
        if !de.contains(&nu) {
            return Err(format!("the network event of {gamma} must be a dual pair"));
        }
    }
    Ok(())
}

/// Retrieval and residual of global events invert each other, transport
/// strict causality and conflict, explain the causes of shifted events, and
/// commute on disjoint communications.
fn global_shift_laws(es: &PrimeEs<GEvent>, g: &Global, max_len: usize) -> Result<(), String> {
    let events = sample(es.events(), PAIR_SAMPLE);
    let alphas: BTreeSet<Communication> =
        g_traces(g, max_len).value.iter().flat_map(|t| t.iter().cloned()).collect();
    let strictly = |a: &GEvent, b: &GEvent| g_leq(a, b) && a != b;

    for gamma in &events {
        for alpha in &alphas {
            let before = g_retrieval(alpha, gamma);
            if g_residual(&before, alpha).as_ref() != Some(gamma) {
                return Err(format!(
                    "shifting {gamma} before and after `{alpha}` must give it back"
                ));
            }
            if let Some(after) = g_residual(gamma, alpha) {
                if g_retrieval(alpha, &after) != *gamma {
                    return Err(format!(
                        "shifting {gamma} after and before `{alpha}` must give it back"
                    ));
                }
            }
        }
    }
    for a in &events {
        for b in &events {
            for alpha in &alphas {
                let (ra, rb) = (g_retrieval(alpha, a), g_retrieval(alpha, b));
                if strictly(a, b) && !strictly(&ra, &rb) {
                    return Err(format!(
                        "retrieval along `{alpha}` must preserve the order {a} below {b}"
                    ));
                }
                if g_conflict(a, b) && !g_conflict(&ra, &rb) {
                    return Err(format!(
                        "retrieval along `{alpha}` must preserve the conflict between \
                         {a} and {b}"
                    ));
                }
                if let (Some(sa), Some(sb)) = (g_residual(a, alpha), g_residual(b, alpha)) {
                    if strictly(a, b) && !strictly(&sa, &sb) {
                        return Err(format!(
                            "residual along `{alpha}` must preserve the order {a} below {b}"
                        ));
                    }
                }
                if strictly(a, &rb) && *a != ev(&Trace::new(vec![alpha.clone()])) {
                    match g_residual(a, alpha) {
                        Some(sa) if strictly(&sa, b) => {}
                        _ => {
                            return Err(format!(
                                "{a} precedes the shifted {b} but is neither `{alpha}` \
                                 itself nor a surviving cause"
                            ));
                        }
                    }
                }
            }
        }
    }
    let disjoint: Vec<(&Communication, &Communication)> = alphas
        .iter()
        .flat_map(|x| alphas.iter().map(move |y| (x, y)))
        .filter(|(x, y)| x.participants().is_disjoint(&y.participants()))
        .collect();
    for gamma in &events {
        for (alpha, beta) in &disjoint {
            let ab = g_retrieval(beta, &g_retrieval(alpha, gamma));
            let ba = g_retrieval(alpha, &g_retrieval(beta, gamma));
            if ab != ba {
                return Err(format!(
                    "retrievals along the disjoint `{alpha}` and `{beta}` must commute"
                ));
            }
            if let Some(after) = g_residual(gamma, beta) {
                if g_residual(&g_retrieval(alpha, gamma), beta)
                    != Some(g_retrieval(alpha, &after))
                {
                    return Err(format!(
                        "retrieval along `{alpha}` and residual along the disjoint \
                         `{beta}` must commute"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// On small structures, the configuration enumerator agrees with filtering
/// all subsets, every witness is a proving sequence of its configuration,
/// and every enumerated proving sequence settles into a configuration.
fn brute_force_agreement<E: Ord + Clone + std::fmt::Display>(
    events: &[E],
    is_config: impl Fn(&BTreeSet<E>) -> bool,
    domain: &ConfigDomain<E>,
    witnesses: &[(BTreeSet<E>, Vec<E>)],
    is_proving: impl Fn(&[E]) -> bool,
    sequences: &[Vec<E>],
) -> Result<(), String> {
    if events.len() > BRUTE_LIMIT {
        return Ok(());
    }
    for mask in 0u32..(1 << events.len()) {
        let subset: BTreeSet<E> = events
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, e)| e.clone())
            .collect();
        if is_config(&subset) != domain.contains(&subset) {
            let listed: Vec<String> = subset.iter().map(|e| e.to_string()).collect();
            return Err(format!(
                "subset filtering and enumeration disagree on {{{}}}",
                listed.join(", ")
            ));
        }
    }
    for (config, witness) in witnesses {
        if !is_proving(witness) {
            return Err("a configuration witness must be a proving sequence".into());
        }
        if &witness.iter().cloned().collect::<BTreeSet<E>>() != config {
            return Err("a witness must enumerate exactly its configuration".into());
        }
    }
    for seq in sequences {
        if !is_config(&seq.iter().cloned().collect()) {
            return Err("the events of a proving sequence must form a configuration".into());
        }
    }
    Ok(())
}
