//! SRPS: a secure routing protocol for static sensor networks, together with
//! the machinery needed to study it: a deterministic packet-level simulator,
//! a scripted adversary harness, and closed-form coverage/cost analysis.
//!
//! The crate is organized around six pieces:
//!
//! - [`crypto`]: one-way hash chains, MAC tags, a deterministic keyed
//!   invertible primitive, and sequence-number-verification (SNV) index
//!   arithmetic.
//! - [`message`]: node identifiers, the wire message set, byte layouts and
//!   wire sizes.
//! - [`protocol`]: the per-node state machine — setup, route discovery with
//!   per-hop and end-to-end authentication, guard-based neighbor monitoring,
//!   disjoint multipath discovery, and route maintenance.
//! - [`adversary`]: scripted Byzantine behaviors (wormhole tunneling,
//!   rushing, replay, spoofing, Sybil, inclusion, data dropping).
//! - [`simnet`]: topology generation, the collision-probability radio medium,
//!   traffic generation, the discrete-event loop, metrics, and multi-run
//!   aggregation.
//! - [`analysis`]: detection-coverage probabilities and memory / computation /
//!   communication cost models, with curve emission for the standard figures.
//!
//! Everything is deterministic given a scenario configuration and a master
//! seed; repeated runs produce byte-identical outputs.

pub mod adversary;
pub mod analysis;
pub mod crypto;
pub mod message;
pub mod protocol;
pub mod simnet;
pub mod trace;
