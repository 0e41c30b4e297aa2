//! A synchronous multiparty session calculus with two event structure
//! semantics and a global-type system connecting them.
//!
//! The crate is organised in layers:
//!
//! * [`syntax`] defines participants, messages, communications, traces,
//!   processes, global types, and networks. Recursive (regular) terms are
//!   finite cyclic graphs with decidable structural equality, built from
//!   named equation systems or parsed from a small surface language.
//! * [`lts`] gives the labelled transition semantics of networks and of
//!   global types, plus multi-step trace execution.
//! * [`typing`] computes participant depths, boundedness, projections of
//!   global types, the process preorder, and the network typing judgment.
//! * [`es_core`] is the generic event-structure layer: prime and flow event
//!   structures, configurations, proving sequences, configuration domains,
//!   poset isomorphism, and DOT export.
//! * [`proc_es`], [`net_es`], and [`global_es`] instantiate that layer with
//!   process events, network events (dual pairs of located events, causal
//!   sets, narrowing), and global events (permutation classes of pointed
//!   traces).
//! * [`verify`] packages the metatheory as executable checks: subject
//!   reduction, session fidelity, progress, and the isomorphism between the
//!   configuration domains of a typed network and its global type, together
//!   with seeded random generators of well-formed types and typed networks.
//!
//! Infinite objects (recursive processes and types have denumerable event
//! sets) are explored up to an explicit bound; every bounded enumeration
//! reports whether it is exact or a truncation.

pub mod es_core;
pub mod global_es;
pub mod lts;
pub mod net_es;
pub mod proc_es;
pub mod syntax;
pub mod typing;
pub mod verify;
