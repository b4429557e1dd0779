//! Per-node tables: neighbors, routes, pair chain records, collect rounds,
//! watch buffers, the accusation ledger, and crypto-op counters.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::crypto::HashValue;
use crate::message::{AccusationKind, NodeId};

/// First- and second-hop neighborhood knowledge plus the stored commitment
/// anchor of each neighbor.
#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    pub one_hop: BTreeSet<NodeId>,
    /// For each direct neighbor, the set of that neighbor's own neighbors.
    pub two_hop: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub commitments: BTreeMap<NodeId, HashValue>,
}

impl NeighborTable {
    pub fn is_neighbor(&self, id: NodeId) -> bool {
        self.one_hop.contains(&id)
    }

    /// Whether `claimed` is a known neighbor of `of`, per the exchanged
    /// lists.
    pub fn two_hop_linked(&self, of: NodeId, claimed: NodeId) -> bool {
        self.two_hop.get(&of).is_some_and(|s| s.contains(&claimed))
    }

    pub fn remove(&mut self, id: NodeId) {
        self.one_hop.remove(&id);
        self.two_hop.remove(&id);
        self.commitments.remove(&id);
    }
}

/// One installed route. `next` is always a current one-hop neighbor of the
/// owning node.
#[derive(Debug, Clone)]
pub struct RouteEntry {
    pub next: NodeId,
    pub sn: u32,
    pub installed_us: u64,
    /// Hop record from the reply that installed the entry (initiator side
    /// only; empty elsewhere).
    pub trail: Vec<NodeId>,
    /// Later replies of the same discovery, ranked by arrival.
    pub alternates: Vec<AltRoute>,
}

#[derive(Debug, Clone)]
pub struct AltRoute {
    pub next: NodeId,
    pub installed_us: u64,
    pub trail: Vec<NodeId>,
}

/// What an intermediate node remembers about one (source, destination)
/// request stream: the last sequence number, the current chain value and its
/// index, and where the conflicting state came from (for fake-route
/// tracing).
#[derive(Debug, Clone)]
pub struct PairRecord {
    pub sn: u32,
    pub stored_v: HashValue,
    pub stored_index: u32,
    /// Request seen, reply not yet verified.
    pub pending: bool,
    /// Highest sequence number whose collect round finished here.
    pub completed_sn: u32,
    pub heard_from: NodeId,
    pub second_hop: Option<NodeId>,
}

/// One buffered route-request announcement.
#[derive(Debug, Clone)]
pub struct ReqEntry {
    pub snv_value: HashValue,
    pub snv_index: u32,
    pub e2e_mac: crate::crypto::MacTag,
    pub heard_from: NodeId,
    pub second_hop: Option<NodeId>,
    pub suppressed: bool,
}

/// Wait-while-collect state for one (source, sn) request.
#[derive(Debug, Clone)]
pub struct CollectRound {
    pub dst: NodeId,
    pub entries: Vec<ReqEntry>,
    pub deadline_us: u64,
    pub flushed: bool,
    /// Hop this node forwarded the request from, once flushed.
    pub forwarded_via: Option<NodeId>,
    /// Origins whose announcements were overheard being forwarded by a
    /// neighbor; entries heard directly from these are excluded from the
    /// random selection.
    pub burned: BTreeSet<NodeId>,
}

/// Streams a guard can match transmissions against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StreamKey {
    Req { src: NodeId, dst: NodeId, sn: u32 },
    Rep { src: NodeId, dst: NodeId, sn: u32 },
    Data { src: NodeId, dst: NodeId, seq: u32 },
}

/// A forwarding expectation: `receiver` must retransmit the packet digested
/// here before `deadline_us`.
#[derive(Debug, Clone)]
pub struct WatchEntry {
    pub seq: u64,
    pub key: StreamKey,
    pub digest: HashValue,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub recorded_us: u64,
    pub deadline_us: u64,
    pub fulfilled: bool,
}

/// A recently overheard transmission, kept for fabricate/change checks.
#[derive(Debug, Clone)]
pub struct InboundRecord {
    pub key: StreamKey,
    pub digest: HashValue,
    pub sender: NodeId,
    pub at_us: u64,
}

/// Watch buffer: forwarding expectations plus the recent-transmission log,
/// both bounded.
#[derive(Debug, Default)]
pub struct WatchState {
    pub entries: VecDeque<WatchEntry>,
    pub inbound: VecDeque<InboundRecord>,
    pub next_seq: u64,
}

impl WatchState {
    pub fn record_inbound(&mut self, rec: InboundRecord, cap: usize) {
        if self.inbound.len() >= cap {
            self.inbound.pop_front();
        }
        self.inbound.push_back(rec);
    }

    pub fn find_inbound(&self, sender: NodeId, key: StreamKey) -> Option<&InboundRecord> {
        self.inbound.iter().rev().find(|r| r.sender == sender && r.key == key)
    }

    pub fn push_entry(&mut self, mut entry: WatchEntry, cap: usize) -> u64 {
        if self.entries.len() >= cap {
            self.entries.pop_front();
        }
        entry.seq = self.next_seq;
        self.next_seq += 1;
        let seq = entry.seq;
        self.entries.push_back(entry);
        seq
    }
}

/// Per-neighbor misbehavior bookkeeping: timestamped events within the
/// sliding window, alerts received from distinct guards, and the isolated
/// set.
#[derive(Debug, Default)]
pub struct AccusationLedger {
    pub events: BTreeMap<NodeId, VecDeque<(u64, AccusationKind)>>,
    /// accused -> (alerting guard -> time of latest alert)
    pub alerts_received: BTreeMap<NodeId, BTreeMap<NodeId, u64>>,
    pub isolated: BTreeSet<NodeId>,
}

impl AccusationLedger {
    /// Records one observed event and returns how many fall inside the
    /// window ending at `now`.
    pub fn record_event(&mut self, accused: NodeId, kind: AccusationKind, now: u64, window: u64) -> usize {
        let q = self.events.entry(accused).or_default();
        q.push_back((now, kind));
        let cutoff = now.saturating_sub(window);
        while q.front().is_some_and(|(t, _)| *t < cutoff) {
            q.pop_front();
        }
        q.len()
    }

    /// Records an alert from `guard` and returns the number of distinct
    /// guards alerting within the window.
    pub fn record_alert(&mut self, accused: NodeId, guard: NodeId, now: u64, window: u64) -> usize {
        let m = self.alerts_received.entry(accused).or_default();
        m.insert(guard, now);
        let cutoff = now.saturating_sub(window);
        m.retain(|_, t| *t >= cutoff);
        m.len()
    }
}

/// Labeled crypto-op sites. Sites are counted wherever they fire; role
/// tallies are extracted per the published per-role enumeration, and the
/// remaining sites stay visible rather than being folded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpSite {
    E2eMacComputeReq,
    E2eMacVerifyReq,
    NbrMacComputeReq,
    NbrMacVerifyReq,
    /// The keyed encryption that seeds a pair's SNV chain.
    RsnEncrypt,
    /// Producing the request's SNV value at the initiator.
    SnvChainEvalSrc,
    NextKeyReq,
    DisclosureVerifyReq,
    E2eMacComputeRep,
    E2eMacVerifyRep,
    NbrMacComputeRep,
    NbrMacVerifyRep,
    NextKeyRep,
    DisclosureVerifyRep,
    /// The reply-side chain check F(reply value) = stored value.
    PairVerifyHash,
    /// Hash work outside the published taxonomy (request-side chain walks,
    /// commitment advances with nothing held).
    OtherHash,
    /// MAC work outside the published taxonomy.
    OtherMac,
}

/// Counts of crypto operations by site.
#[derive(Debug, Clone, Default)]
pub struct CostCounters {
    counts: BTreeMap<OpSite, u64>,
}

impl CostCounters {
    pub fn bump(&mut self, site: OpSite) {
        *self.counts.entry(site).or_insert(0) += 1;
    }

    pub fn get(&self, site: OpSite) -> u64 {
        self.counts.get(&site).copied().unwrap_or(0)
    }

    /// (MAC, hash) ops attributable to the source role of one discovery.
    pub fn source_tally(&self) -> (u64, u64) {
        (
            self.get(OpSite::E2eMacComputeReq) + self.get(OpSite::NbrMacComputeReq) + self.get(OpSite::RsnEncrypt),
            self.get(OpSite::SnvChainEvalSrc) + self.get(OpSite::NextKeyReq),
        )
    }

    /// (MAC, hash) ops attributable to the intermediate role.
    pub fn intermediate_tally(&self) -> (u64, u64) {
        (
            self.get(OpSite::NbrMacVerifyReq) + self.get(OpSite::NbrMacComputeReq),
            self.get(OpSite::DisclosureVerifyReq) + self.get(OpSite::NextKeyReq) + self.get(OpSite::PairVerifyHash),
        )
    }

    /// (MAC, hash) ops attributable to the destination role.
    pub fn destination_tally(&self) -> (u64, u64) {
        (
            self.get(OpSite::E2eMacVerifyReq)
                + self.get(OpSite::NbrMacVerifyReq)
                + self.get(OpSite::RsnEncrypt)
                + self.get(OpSite::E2eMacComputeRep)
                + self.get(OpSite::NbrMacComputeRep),
            self.get(OpSite::NextKeyRep),
        )
    }
}
