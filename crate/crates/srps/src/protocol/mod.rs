//! The per-node protocol state machine.
//!
//! Each node is a deterministic transition function from (state, event) to
//! (state, actions). Events are message deliveries and timer fires; actions
//! are radio transmissions, timer requests, and notes the host folds into
//! metrics and traces. A single logical thread drives all nodes of one run;
//! node states are independent values.

mod discovery;
mod monitor;
mod node;
mod tables;

pub use node::{Ctx, NodeState};
pub use tables::{
    AccusationLedger, CollectRound, CostCounters, NeighborTable, OpSite, PairRecord, ReqEntry,
    RouteEntry, StreamKey, WatchEntry,
};

use crate::message::{AccusationKind, Message, NodeId};

/// Route maintenance policy applied when an established route breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaintenancePolicy {
    /// Switch to a stored alternate disjoint route, rediscovering only when
    /// none is fresh.
    AlternateThenRediscover,
    /// Always run a fresh discovery.
    RediscoverAlways,
    /// Ask the node before the faulty hop to discover a bypass around it,
    /// falling back to rediscovery.
    LocalRepair,
}

/// Engine-facing knobs of the state machine. Field names describe roles; the
/// scenario file keys they mirror are noted where the mapping is not obvious.
#[derive(Debug, Clone)]
pub struct ProtocolParams {
    /// Full protocol when true; first-heard flooding with no defenses when
    /// false.
    pub srps_enabled: bool,
    /// Observed malicious events before a guard alerts (key `beta`).
    pub events_to_alert: u32,
    /// Distinct alerting guards needed to isolate (key `gamma`).
    pub guards_to_isolate: u32,
    /// Sliding window for both event counting and alert aggregation, in
    /// microseconds (key `t`, seconds).
    pub event_window_us: u64,
    /// Reply acceptance / duplicate-reply watch window (key `tau`).
    pub reply_window_us: u64,
    /// Request collect wait is drawn uniformly from this range.
    pub collect_min_us: u64,
    pub collect_max_us: u64,
    /// Collected announcements that trigger an early flush (N_r).
    pub collect_cap: usize,
    /// How long a guard gives a receiver to forward before accusing a drop.
    pub forward_threshold_us: u64,
    /// Maximum hash-chain gap accepted when verifying disclosures and
    /// request values.
    pub max_gap: u32,
    /// Length of each pair's SNV hash sequence.
    pub snv_chain_len: u32,
    /// Length of a node's own neighborhood commitment chain.
    pub commit_chain_len: u32,
    /// Watch buffer capacity (NBE); oldest entries are evicted.
    pub watch_capacity: usize,
    /// Whether guards also monitor data packets.
    pub monitor_data: bool,
    /// Challenge the initiator before installing routes at intermediates.
    pub version2: bool,
    /// Challenge the initiator instead of silently dropping a
    /// chain-inconsistent request, and report the conflicting route.
    pub on_demand_challenge: bool,
    pub maintenance: MaintenancePolicy,
    /// Replies the destination issues per request round.
    pub max_replies_per_request: usize,
    pub route_timeout_us: u64,
    pub discovery_timeout_us: u64,
    /// How long an unverified packet is held awaiting its key disclosure.
    pub hold_timeout_us: u64,
    /// Delay between a broadcast and the disclosure of its key.
    pub disclosure_delay_us: u64,
    /// Seed of the pairwise key oracle.
    pub key_oracle_seed: u64,
    /// Queued data packets per destination awaiting a route.
    pub data_queue_cap: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            srps_enabled: true,
            events_to_alert: 5,
            guards_to_isolate: 3,
            event_window_us: 200_000_000,
            reply_window_us: 500_000,
            collect_min_us: 50_000,
            collect_max_us: 250_000,
            collect_cap: 5,
            forward_threshold_us: 25_000,
            max_gap: 4,
            snv_chain_len: 200,
            commit_chain_len: 8192,
            watch_capacity: 64,
            monitor_data: true,
            version2: false,
            on_demand_challenge: false,
            maintenance: MaintenancePolicy::AlternateThenRediscover,
            max_replies_per_request: 3,
            route_timeout_us: 50_000_000,
            discovery_timeout_us: 5_000_000,
            hold_timeout_us: 100_000,
            disclosure_delay_us: 12_000,
            key_oracle_seed: 0,
            data_queue_cap: 16,
        }
    }
}

/// Why a handler refused a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    NotNeighbor,
    Replay,
    BadSnv,
    BadNbrMac,
    BadE2eMac,
    NoRequest,
    DuplicateReply,
    Stale,
    Isolated,
    Unverified,
    LateReply,
    QueueFull,
    Exhausted,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NotNeighbor => "not-neighbor",
            DropReason::Replay => "replay",
            DropReason::BadSnv => "bad-snv",
            DropReason::BadNbrMac => "bad-nbr-mac",
            DropReason::BadE2eMac => "bad-e2e-mac",
            DropReason::NoRequest => "no-request",
            DropReason::DuplicateReply => "duplicate-reply",
            DropReason::Stale => "stale",
            DropReason::Isolated => "isolated",
            DropReason::Unverified => "unverified",
            DropReason::LateReply => "late-reply",
            DropReason::QueueFull => "queue-full",
            DropReason::Exhausted => "exhausted",
        }
    }
}

/// Timers a node can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    /// Collect window for (request source, sn) expired.
    FlushRequest { src: NodeId, sn: u32 },
    /// Sweep packets held too long awaiting a key disclosure.
    HoldSweep { sender: NodeId },
    /// A watch-buffer forwarding deadline.
    WatchDeadline { entry_seq: u64 },
    /// Garbage-collect a completed collect round.
    RoundGc { src: NodeId, sn: u32 },
    /// Discovery toward `dst` gave no route in time.
    DiscoveryTimeout { dst: NodeId, sn: u32 },
    /// A pending challenge went unanswered.
    ChallengeTimeout { challenge_id: u64 },
    /// A local repair request went unanswered at the initiator.
    RepairTimeout { dst: NodeId },
}

/// Where a route entry was installed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteRole {
    Initiator,
    Intermediate,
    Destination,
}

/// Observable protocol events; the simulation folds these into metrics and
/// the trace log.
#[derive(Debug, Clone)]
pub enum Note {
    Dropped {
        kind: &'static str,
        reason: DropReason,
        from: NodeId,
    },
    Buffered {
        src: NodeId,
        sn: u32,
    },
    ForwardedRequest {
        src: NodeId,
        sn: u32,
        origin: NodeId,
    },
    SuppressedAll {
        src: NodeId,
        sn: u32,
    },
    RouteInstalled {
        target: NodeId,
        next: NodeId,
        sn: u32,
        role: RouteRole,
        trail: Vec<NodeId>,
    },
    ReplyRanked {
        dst: NodeId,
        sn: u32,
        rank: usize,
    },
    DiscoveryStarted {
        dst: NodeId,
        sn: u32,
    },
    DiscoveryFailed {
        dst: NodeId,
        reason: DropReason,
    },
    MaliciousEvent {
        accused: NodeId,
        kind: AccusationKind,
        count_in_window: usize,
    },
    AlertEmitted {
        accused: NodeId,
        kind: AccusationKind,
    },
    IsolatedNode {
        accused: NodeId,
    },
    DataDelivered {
        src: NodeId,
        seq: u32,
    },
    DataForwarded {
        src: NodeId,
        dst: NodeId,
        seq: u32,
    },
    DataDropped {
        dst: NodeId,
        reason: DropReason,
    },
    RouteSwitched {
        dst: NodeId,
        to_alternate: bool,
    },
    RouteErrorSent {
        orig_src: NodeId,
        orig_dst: NodeId,
    },
    RepairSpliced {
        orig_dst: NodeId,
        via: NodeId,
    },
    RenewalAdopted {
        initiator: NodeId,
        responder: NodeId,
        neighborhood: bool,
    },
    RenewalRejected {
        initiator: NodeId,
        reason: DropReason,
    },
    ChallengeAccepted {
        peer: NodeId,
    },
    ChallengeRejected {
        peer: NodeId,
    },
    FakeRouteReported {
        reporter: NodeId,
        prev_hops: Vec<NodeId>,
    },
}

/// Effects a handler hands back to the simulation.
#[derive(Debug, Clone)]
pub enum Action {
    /// Put a message on the air. `to` marks the addressed receiver (reliable
    /// delivery); everyone else in range overhears with collision losses.
    Send {
        msg: Message,
        to: Option<NodeId>,
        delay_us: u64,
    },
    /// Request a timer callback at an absolute simulation time.
    Timer { kind: TimerKind, at_us: u64 },
    /// Deliver through an adversary tunnel instead of the radio. Only the
    /// adversary harness emits this.
    Tunnel { msg: Message, to: NodeId },
    Note(Note),
}
