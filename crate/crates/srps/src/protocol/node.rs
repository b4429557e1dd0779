//! Node state, setup, event dispatch, delayed key disclosure, the data
//! plane, alert handling, and isolation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::RngCore;

use crate::crypto::{
    derive_pair_key, verify_and_advance, verify_mac, ChainState, HashValue, SnvChain, SymKey,
};
use crate::message::{AccusationKind, Message, NodeId, RenewalScope};

use super::tables::{
    AccusationLedger, CollectRound, CostCounters, InboundRecord, NeighborTable, OpSite, PairRecord,
    RouteEntry, WatchState,
};
use super::{Action, DropReason, Note, ProtocolParams, RouteRole, TimerKind};

/// Per-call context: parameters, the current simulation time, and the run's
/// random stream.
pub struct Ctx<'a> {
    pub params: &'a ProtocolParams,
    pub now: u64,
    pub rng: &'a mut dyn RngCore,
}

impl Ctx<'_> {
    pub(super) fn uniform_us(&mut self, lo: u64, hi: u64) -> u64 {
        if hi <= lo {
            return lo;
        }
        lo + self.rng.next_u64() % (hi - lo + 1)
    }
}

/// Initiator-side discovery bookkeeping.
#[derive(Debug, Clone)]
pub(super) struct Discovery {
    pub sn: u32,
    pub expected_rep: HashValue,
    pub first_reply_us: Option<u64>,
    pub replies: usize,
}

/// Destination-side reply bookkeeping for one (source, sn).
#[derive(Debug, Clone, Default)]
pub(super) struct DestReplies {
    pub first_us: u64,
    pub replied_to: BTreeSet<NodeId>,
}

/// One endpoint's view of a pair SNV sequence.
#[derive(Debug, Clone)]
pub(super) struct EndpointChain {
    pub chain: SnvChain,
    /// Next request round ordinal.
    pub next_ordinal: u32,
}

#[derive(Debug, Clone)]
pub(super) struct HeldPacket {
    pub at_us: u64,
    pub msg: Message,
    pub addressed: Option<NodeId>,
}

/// What a pending challenge guards.
#[derive(Debug, Clone)]
pub(super) enum ChallengeGoal {
    /// Version-II: install these routes once the initiator answers.
    InstallRoutes {
        src: NodeId,
        dst: NodeId,
        sn: u32,
        toward_dst: NodeId,
        toward_src: NodeId,
        trail: Vec<NodeId>,
    },
    /// On-demand: accept this held request (resetting the pair record) and
    /// report the conflicting route state.
    AcceptConflicting {
        msg: Box<Message>,
        fake_prev_hops: Vec<NodeId>,
    },
}

#[derive(Debug, Clone)]
pub(super) struct PendingChallenge {
    pub peer: NodeId,
    pub nonce: u32,
    pub goal: ChallengeGoal,
    pub deadline_us: u64,
}

/// Renewal material an intermediate stores between the three messages.
#[derive(Debug, Clone, Default)]
pub(super) struct RenewalSlot {
    pub sn: u32,
    pub ct: Vec<u8>,
    pub anchor: Option<HashValue>,
}

/// Local-repair job at the node asked to bypass a faulty hop.
#[derive(Debug, Clone)]
pub(super) struct RepairJob {
    pub orig_dst: NodeId,
    pub requester: NodeId,
}

/// The full per-node protocol state.
pub struct NodeState {
    pub id: NodeId,
    pub(super) own_chain: ChainState,
    pub nbr: NeighborTable,
    pub(super) routes: BTreeMap<NodeId, RouteEntry>,
    pub(super) node_sn: u32,
    pub(super) endpoint_chains: BTreeMap<(NodeId, NodeId), EndpointChain>,
    pub(super) pair_records: BTreeMap<(NodeId, NodeId), PairRecord>,
    pub(super) rounds: BTreeMap<(NodeId, u32), CollectRound>,
    pub(super) held: BTreeMap<NodeId, Vec<HeldPacket>>,
    pub(super) dest_replies: BTreeMap<(NodeId, u32), DestReplies>,
    pub(super) forwarded_replies: BTreeSet<(NodeId, NodeId, u32)>,
    pub(super) discoveries: BTreeMap<NodeId, Discovery>,
    pub(super) data_queue: BTreeMap<NodeId, VecDeque<u16>>,
    pub(super) data_seq: u32,
    pub(super) watch: WatchState,
    /// (forwarder, src, dst, sn) -> last forward time, for the
    /// duplicate-reply watch.
    pub(super) reply_watch: BTreeMap<(NodeId, NodeId, NodeId, u32), u64>,
    pub ledger: AccusationLedger,
    pub(super) challenges: BTreeMap<u64, PendingChallenge>,
    pub(super) next_challenge_id: u64,
    pub(super) pair_renewals: BTreeMap<(NodeId, NodeId), RenewalSlot>,
    pub(super) nbhd_renewals: BTreeMap<NodeId, RenewalSlot>,
    pub(super) repairs: BTreeMap<NodeId, RepairJob>,
    /// Destinations whose repair we are waiting on before falling back.
    pub(super) repair_waits: BTreeSet<NodeId>,
    /// Baseline mode: (src, sn) pairs already forwarded.
    pub(super) baseline_seen: BTreeSet<(NodeId, u32)>,
    pub counters: CostCounters,
    commit_renewals: u32,
}

impl NodeState {
    pub fn new(id: NodeId, params: &ProtocolParams) -> NodeState {
        let seed = own_chain_seed(id, params.key_oracle_seed, 0);
        let own_chain = ChainState::derive_commitment(seed, params.commit_chain_len)
            .expect("commitment chain length below 2");
        NodeState {
            id,
            own_chain,
            nbr: NeighborTable::default(),
            routes: BTreeMap::new(),
            node_sn: 0,
            endpoint_chains: BTreeMap::new(),
            pair_records: BTreeMap::new(),
            rounds: BTreeMap::new(),
            held: BTreeMap::new(),
            dest_replies: BTreeMap::new(),
            forwarded_replies: BTreeSet::new(),
            discoveries: BTreeMap::new(),
            data_queue: BTreeMap::new(),
            data_seq: 0,
            watch: WatchState::default(),
            reply_watch: BTreeMap::new(),
            ledger: AccusationLedger::default(),
            challenges: BTreeMap::new(),
            next_challenge_id: 1,
            pair_renewals: BTreeMap::new(),
            nbhd_renewals: BTreeMap::new(),
            repairs: BTreeMap::new(),
            repair_waits: BTreeSet::new(),
            baseline_seen: BTreeSet::new(),
            counters: CostCounters::default(),
            commit_renewals: 0,
        }
    }

    /// The anchor this node distributes to neighbors during setup.
    pub fn commitment_anchor(&self) -> HashValue {
        self.own_chain.current_commitment()
    }

    pub fn pair_key(&self, peer: NodeId, params: &ProtocolParams) -> SymKey {
        derive_pair_key(params.key_oracle_seed, self.id.raw(), peer.raw())
    }

    pub fn route_next_hop(&self, dst: NodeId) -> Option<NodeId> {
        self.routes.get(&dst).map(|r| r.next)
    }

    pub fn route_trail(&self, dst: NodeId) -> Option<&[NodeId]> {
        self.routes.get(&dst).map(|r| r.trail.as_slice())
    }

    pub fn routes_iter(&self) -> impl Iterator<Item = (&NodeId, &RouteEntry)> {
        self.routes.iter()
    }

    pub fn is_isolated(&self, id: NodeId) -> bool {
        self.ledger.isolated.contains(&id)
    }

    // ------------------------------------------------------------------
    // Setup phase (trusted, collision free, before time zero)
    // ------------------------------------------------------------------

    /// Consumes the HELLO replies heard during setup: populates the one-hop
    /// set and stores each neighbor's commitment anchor. An isolated node
    /// simply ends up with empty tables.
    pub fn setup_round(&mut self, neighbor_replies: &[(NodeId, HashValue)]) {
        for (id, anchor) in neighbor_replies {
            self.nbr.one_hop.insert(*id);
            self.nbr.commitments.insert(*id, *anchor);
        }
    }

    /// Second setup step: each neighbor shares its own neighbor list.
    pub fn exchange_neighbor_lists(&mut self, lists: &BTreeMap<NodeId, BTreeSet<NodeId>>) {
        for (id, list) in lists {
            if self.nbr.one_hop.contains(id) {
                self.nbr.two_hop.insert(*id, list.clone());
            }
        }
    }

    // ------------------------------------------------------------------
    // Event dispatch
    // ------------------------------------------------------------------

    /// Handles one radio delivery. `addressed` is the transmission's
    /// designated receiver, if any; promiscuous observation happens
    /// regardless of addressing.
    pub fn on_receive(&mut self, msg: &Message, addressed: Option<NodeId>, ctx: &mut Ctx) -> Vec<Action> {
        let mut out = Vec::new();
        if ctx.params.srps_enabled {
            self.observe_for_watch(msg, addressed, ctx, &mut out);
        }
        let to_me = addressed == Some(self.id);
        match msg {
            Message::Rdp { .. } => self.on_rdp_receive(msg, addressed, ctx, &mut out),
            Message::Rrp { next_hop, .. } => {
                if *next_hop == self.id {
                    self.on_rrp_receive(msg, addressed, ctx, &mut out);
                }
            }
            Message::KeyDisclosure { src, key } => self.on_key_disclosure(*src, key, ctx, &mut out),
            Message::Data { .. } if to_me => self.on_data(msg, ctx, &mut out),
            Message::Alert { .. } if to_me => self.on_alert(msg, ctx, &mut out),
            Message::Challenge { .. } if to_me => self.on_challenge(msg, ctx, &mut out),
            Message::ChallengeResponse { .. } if to_me => self.on_challenge_response(msg, ctx, &mut out),
            Message::FakeRouteReport { .. } if to_me => self.on_fake_route_report(msg, ctx, &mut out),
            Message::RenewalCommit { .. } | Message::RenewalValue { .. } | Message::RenewalProof { .. } => {
                self.on_renewal(msg, addressed, ctx, &mut out)
            }
            Message::RouteError { .. } if to_me => self.on_route_error(msg, ctx, &mut out),
            Message::RepairRequest { .. } if to_me => self.on_repair_request(msg, ctx, &mut out),
            Message::RepairDone { .. } if to_me => self.on_repair_done(msg, ctx, &mut out),
            _ => {}
        }
        out
    }

    pub fn on_timer(&mut self, kind: TimerKind, ctx: &mut Ctx) -> Vec<Action> {
        let mut out = Vec::new();
        match kind {
            TimerKind::FlushRequest { src, sn } => self.flush_request_buffer(src, sn, ctx, &mut out),
            TimerKind::HoldSweep { sender } => self.sweep_held(sender, ctx, &mut out),
            TimerKind::WatchDeadline { entry_seq } => self.watch_deadline(entry_seq, ctx, &mut out),
            TimerKind::RoundGc { src, sn } => {
                self.rounds.remove(&(src, sn));
                self.dest_replies.remove(&(src, sn));
            }
            TimerKind::DiscoveryTimeout { dst, sn } => self.discovery_timeout(dst, sn, ctx, &mut out),
            TimerKind::ChallengeTimeout { challenge_id } => self.challenge_timeout(challenge_id, ctx, &mut out),
            TimerKind::RepairTimeout { dst } => self.repair_timeout(dst, ctx, &mut out),
        }
        out
    }

    // ------------------------------------------------------------------
    // Neighborhood authentication: delayed key disclosure
    // ------------------------------------------------------------------

    /// Next authentication key for this node's own broadcast, renewing the
    /// commitment chain in place when it is nearly exhausted.
    pub(super) fn next_nbr_key(&mut self, site: OpSite, ctx: &mut Ctx, out: &mut Vec<Action>) -> SymKey {
        if self.own_chain.remaining() <= 1 {
            self.renew_own_chain(ctx, out);
        }
        self.counters.bump(site);
        self.own_chain.next_auth_key().expect("renewed chain cannot be exhausted")
    }

    /// Links a fresh commitment chain to the nearly spent one with the
    /// three-message pattern, broadcast to the neighborhood.
    fn renew_own_chain(&mut self, ctx: &mut Ctx, out: &mut Vec<Action>) {
        // The last undisclosed element authenticates the new anchor.
        let link = self.own_chain.value_at(0);
        self.commit_renewals += 1;
        let seed = own_chain_seed(self.id, ctx.params.key_oracle_seed, self.commit_renewals);
        let fresh = ChainState::derive_commitment(seed, ctx.params.commit_chain_len).unwrap();
        let anchor = fresh.current_commitment();
        let ct = crate::crypto::encrypt(&SymKey::from(link), anchor.as_bytes());
        let gap_us = 2_000;
        for (i, msg) in [
            Message::RenewalCommit {
                scope: RenewalScope::Neighborhood,
                src: self.id,
                dst: self.id,
                sn: self.commit_renewals,
                ct,
                forwarder: self.id,
            },
            Message::RenewalValue {
                scope: RenewalScope::Neighborhood,
                src: self.id,
                dst: self.id,
                sn: self.commit_renewals,
                anchor,
                forwarder: self.id,
            },
            Message::RenewalProof {
                scope: RenewalScope::Neighborhood,
                src: self.id,
                dst: self.id,
                sn: self.commit_renewals,
                proof: link,
                forwarder: self.id,
            },
        ]
        .into_iter()
        .enumerate()
        {
            out.push(Action::Send {
                msg,
                to: None,
                delay_us: i as u64 * gap_us,
            });
        }
        self.own_chain = fresh;
    }

    /// Holds a packet until its sender's key is disclosed.
    pub(super) fn hold_for_disclosure(
        &mut self,
        sender: NodeId,
        msg: &Message,
        addressed: Option<NodeId>,
        ctx: &mut Ctx,
        out: &mut Vec<Action>,
    ) {
        let held = self.held.entry(sender).or_default();
        if held.len() >= 32 {
            held.remove(0);
        }
        held.push(HeldPacket {
            at_us: ctx.now,
            msg: msg.clone(),
            addressed,
        });
        out.push(Action::Timer {
            kind: TimerKind::HoldSweep { sender },
            at_us: ctx.now + ctx.params.hold_timeout_us,
        });
    }

    /// Verifies a disclosed key against the stored commitment, recovers any
    /// keys skipped by lost disclosures, and releases held packets whose
    /// neighborhood MACs verify. Held packets failing every recovered key are
    /// tampered: a malicious event against the sender.
    fn on_key_disclosure(&mut self, src: NodeId, key: &SymKey, ctx: &mut Ctx, out: &mut Vec<Action>) {
        if !ctx.params.srps_enabled {
            return;
        }
        if !self.nbr.is_neighbor(src) || self.is_isolated(src) {
            return;
        }
        let Some(stored) = self.nbr.commitments.get(&src).copied() else {
            return;
        };
        let had_held = self.held.get(&src).is_some_and(|v| !v.is_empty());
        let Some(gap) = verify_and_advance(stored, key.as_bytes(), ctx.params.max_gap) else {
            out.push(Action::Note(Note::Dropped {
                kind: "key-disclosure",
                reason: DropReason::BadSnv,
                from: src,
            }));
            return;
        };
        if !had_held {
            self.counters.bump(OpSite::OtherHash);
        }
        self.nbr.commitments.insert(src, HashValue::from_bytes(*key.as_bytes()));
        // Keys for rounds whose disclosures were lost are the intermediate
        // chain values between the candidate and the old commitment.
        let mut keys = vec![*key];
        let mut v = HashValue::from_bytes(*key.as_bytes());
        for _ in 1..gap {
            v = v.next();
            keys.push(SymKey::from(v));
        }
        let held = self.held.remove(&src).unwrap_or_default();
        for packet in held {
            let payload = packet.msg.nbr_mac_payload().expect("only MAC-bearing packets are held");
            let tag = match &packet.msg {
                Message::Rdp { nbr_mac, .. } | Message::Rrp { nbr_mac, .. } => *nbr_mac,
                _ => unreachable!(),
            };
            let is_req = matches!(packet.msg, Message::Rdp { .. });
            self.counters.bump(if is_req {
                OpSite::DisclosureVerifyReq
            } else {
                OpSite::DisclosureVerifyRep
            });
            self.counters.bump(if is_req {
                OpSite::NbrMacVerifyReq
            } else {
                OpSite::NbrMacVerifyRep
            });
            if keys.iter().any(|k| verify_mac(k, &payload, &tag)) {
                if is_req {
                    self.on_rdp_verified(&packet.msg, ctx, out);
                } else {
                    self.on_rrp_verified(&packet.msg, ctx, out);
                }
            } else {
                out.push(Action::Note(Note::Dropped {
                    kind: packet.msg.kind(),
                    reason: DropReason::BadNbrMac,
                    from: src,
                }));
                self.accuse(src, AccusationKind::Change, ctx, out);
            }
        }
    }

    fn sweep_held(&mut self, sender: NodeId, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Some(held) = self.held.get_mut(&sender) else {
            return;
        };
        let cutoff = ctx.now.saturating_sub(ctx.params.hold_timeout_us);
        let before = held.len();
        held.retain(|p| p.at_us > cutoff);
        let dropped = before - held.len();
        for _ in 0..dropped {
            out.push(Action::Note(Note::Dropped {
                kind: "held-packet",
                reason: DropReason::Unverified,
                from: sender,
            }));
        }
        if held.is_empty() {
            self.held.remove(&sender);
        }
    }

    // ------------------------------------------------------------------
    // Data plane
    // ------------------------------------------------------------------

    /// Traffic-source entry point: send one payload toward `dst`, starting a
    /// discovery when no fresh route exists.
    pub fn send_data(&mut self, dst: NodeId, payload_len: u16, ctx: &mut Ctx) -> Vec<Action> {
        let mut out = Vec::new();
        if dst == self.id {
            return out;
        }
        if let Some(next) = self.lookup_route(dst, ctx, &mut out) {
            self.data_seq += 1;
            out.push(Action::Send {
                msg: Message::Data {
                    src: self.id,
                    dst,
                    seq: self.data_seq,
                    payload_len,
                    forwarder: self.id,
                },
                to: Some(next),
                delay_us: 0,
            });
        } else {
            let q = self.data_queue.entry(dst).or_default();
            if q.len() >= ctx.params.data_queue_cap {
                out.push(Action::Note(Note::DataDropped {
                    dst,
                    reason: DropReason::QueueFull,
                }));
            } else {
                q.push_back(payload_len);
            }
            self.start_discovery(dst, ctx, &mut out);
        }
        out
    }

    fn on_data(&mut self, msg: &Message, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Message::Data {
            src,
            dst,
            seq,
            payload_len,
            forwarder,
        } = msg
        else {
            return;
        };
        if ctx.params.srps_enabled && (self.is_isolated(*forwarder) || !self.nbr.is_neighbor(*forwarder)) {
            out.push(Action::Note(Note::Dropped {
                kind: "data",
                reason: DropReason::Isolated,
                from: *forwarder,
            }));
            return;
        }
        if *dst == self.id {
            out.push(Action::Note(Note::DataDelivered { src: *src, seq: *seq }));
            return;
        }
        if let Some(next) = self.lookup_route(*dst, ctx, out) {
            out.push(Action::Note(Note::DataForwarded {
                src: *src,
                dst: *dst,
                seq: *seq,
            }));
            out.push(Action::Send {
                msg: Message::Data {
                    src: *src,
                    dst: *dst,
                    seq: *seq,
                    payload_len: *payload_len,
                    forwarder: self.id,
                },
                to: Some(next),
                delay_us: 0,
            });
        } else {
            out.push(Action::Note(Note::DataDropped {
                dst: *dst,
                reason: DropReason::Stale,
            }));
            if let Some(back) = self.routes.get(&src).map(|r| r.next) {
                out.push(Action::Note(Note::RouteErrorSent {
                    orig_src: *src,
                    orig_dst: *dst,
                }));
                out.push(Action::Send {
                    msg: Message::RouteError {
                        reporter: self.id,
                        orig_src: *src,
                        orig_dst: *dst,
                        broken_from: self.id,
                        broken_next: *dst,
                    },
                    to: Some(back),
                    delay_us: 0,
                });
            }
        }
    }

    /// Route lookup with timeout eviction and alternate promotion.
    pub(super) fn lookup_route(&mut self, dst: NodeId, ctx: &mut Ctx, out: &mut Vec<Action>) -> Option<NodeId> {
        let timeout = ctx.params.route_timeout_us;
        let entry = self.routes.get_mut(&dst)?;
        if ctx.now.saturating_sub(entry.installed_us) <= timeout {
            return Some(entry.next);
        }
        // Primary expired; promote the first fresh alternate.
        while let Some(alt) = entry.alternates.first().cloned() {
            entry.alternates.remove(0);
            if ctx.now.saturating_sub(alt.installed_us) <= timeout {
                entry.next = alt.next;
                entry.installed_us = alt.installed_us;
                entry.trail = alt.trail;
                out.push(Action::Note(Note::RouteSwitched { dst, to_alternate: true }));
                return Some(entry.next);
            }
        }
        self.routes.remove(&dst);
        None
    }

    /// Flushes queued payloads once a route to `dst` exists.
    pub(super) fn flush_data_queue(&mut self, dst: NodeId, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Some(q) = self.data_queue.remove(&dst) else {
            return;
        };
        let Some(next) = self.lookup_route(dst, ctx, out) else {
            return;
        };
        for payload_len in q {
            self.data_seq += 1;
            out.push(Action::Send {
                msg: Message::Data {
                    src: self.id,
                    dst,
                    seq: self.data_seq,
                    payload_len,
                    forwarder: self.id,
                },
                to: Some(next),
                delay_us: 0,
            });
        }
    }

    // ------------------------------------------------------------------
    // Route maintenance
    // ------------------------------------------------------------------

    fn on_route_error(&mut self, msg: &Message, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Message::RouteError {
            orig_src,
            orig_dst,
            broken_from,
            broken_next,
            ..
        } = msg
        else {
            return;
        };
        if *orig_src != self.id {
            // Relay toward the source.
            if let Some(next) = self.routes.get(orig_src).map(|r| r.next) {
                out.push(Action::Send {
                    msg: msg.clone(),
                    to: Some(next),
                    delay_us: 0,
                });
            }
            return;
        }
        self.route_maintenance(*orig_dst, *broken_from, *broken_next, ctx, out);
    }

    /// Applies the configured repair policy for a broken route to `dst`.
    pub fn route_maintenance(
        &mut self,
        dst: NodeId,
        broken_from: NodeId,
        broken_next: NodeId,
        ctx: &mut Ctx,
        out: &mut Vec<Action>,
    ) {
        use super::MaintenancePolicy::*;
        match ctx.params.maintenance {
            AlternateThenRediscover => {
                if let Some(entry) = self.routes.get_mut(&dst) {
                    if let Some(alt) = entry.alternates.first().cloned() {
                        entry.alternates.remove(0);
                        if ctx.now.saturating_sub(alt.installed_us) <= ctx.params.route_timeout_us {
                            entry.next = alt.next;
                            entry.installed_us = alt.installed_us;
                            entry.trail = alt.trail;
                            out.push(Action::Note(Note::RouteSwitched { dst, to_alternate: true }));
                            self.flush_data_queue(dst, ctx, out);
                            return;
                        }
                    }
                }
                self.routes.remove(&dst);
                self.start_discovery(dst, ctx, out);
            }
            RediscoverAlways => {
                self.routes.remove(&dst);
                self.start_discovery(dst, ctx, out);
            }
            LocalRepair => {
                // The node before the faulty hop searches a bypass to the node
                // after it; the trail from the installing reply names both.
                let trail = self.routes.get(&dst).map(|r| r.trail.clone()).unwrap_or_default();
                let after = trail
                    .iter()
                    .position(|h| *h == broken_next)
                    .and_then(|i| trail.get(i + 1))
                    .copied()
                    .unwrap_or(dst);
                if after == broken_next || broken_from == self.id {
                    self.routes.remove(&dst);
                    self.start_discovery(dst, ctx, out);
                    return;
                }
                self.repair_waits.insert(dst);
                out.push(Action::Timer {
                    kind: TimerKind::RepairTimeout { dst },
                    at_us: ctx.now + 2 * ctx.params.discovery_timeout_us,
                });
                if let Some(next) = self.routes.get(&dst).map(|r| r.next) {
                    out.push(Action::Send {
                        msg: Message::RepairRequest {
                            from: self.id,
                            to: broken_from,
                            faulty: broken_next,
                            target: after,
                            orig_dst: dst,
                        },
                        to: Some(next),
                        delay_us: 0,
                    });
                }
            }
        }
    }

    fn on_repair_request(&mut self, msg: &Message, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Message::RepairRequest {
            from,
            to,
            faulty,
            target,
            orig_dst,
        } = msg
        else {
            return;
        };
        if *to != self.id {
            if let Some(next) = self.routes.get(orig_dst).map(|r| r.next) {
                out.push(Action::Send {
                    msg: msg.clone(),
                    to: Some(next),
                    delay_us: 0,
                });
            }
            return;
        }
        let _ = faulty;
        if self.routes.contains_key(target) {
            // A bypass already exists: splice immediately.
            self.splice_repair(*target, *orig_dst, *from, ctx, out);
            return;
        }
        self.repairs.insert(
            *target,
            RepairJob {
                orig_dst: *orig_dst,
                requester: *from,
            },
        );
        self.start_discovery(*target, ctx, out);
    }

    pub(super) fn splice_repair(&mut self, target: NodeId, orig_dst: NodeId, requester: NodeId, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Some(via) = self.routes.get(&target).map(|r| r.next) else {
            return;
        };
        let installed = ctx.now;
        let entry = self.routes.entry(orig_dst).or_insert_with(|| RouteEntry {
            next: via,
            sn: 0,
            installed_us: installed,
            trail: Vec::new(),
            alternates: Vec::new(),
        });
        entry.next = via;
        entry.installed_us = installed;
        out.push(Action::Note(Note::RepairSpliced { orig_dst, via }));
        if let Some(back) = self.routes.get(&requester).map(|r| r.next) {
            out.push(Action::Send {
                msg: Message::RepairDone {
                    from: self.id,
                    to: requester,
                    orig_dst,
                    ok: true,
                },
                to: Some(back),
                delay_us: 0,
            });
        }
    }

    fn on_repair_done(&mut self, msg: &Message, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Message::RepairDone { to, orig_dst, ok, .. } = msg else {
            return;
        };
        if *to != self.id {
            if let Some(next) = self.routes.get(orig_dst).map(|r| r.next) {
                out.push(Action::Send {
                    msg: msg.clone(),
                    to: Some(next),
                    delay_us: 0,
                });
            }
            return;
        }
        if *ok && self.repair_waits.remove(orig_dst) {
            self.flush_data_queue(*orig_dst, ctx, out);
        }
    }

    fn repair_timeout(&mut self, dst: NodeId, ctx: &mut Ctx, out: &mut Vec<Action>) {
        if self.repair_waits.remove(&dst) {
            self.routes.remove(&dst);
            self.start_discovery(dst, ctx, out);
        }
    }

    // ------------------------------------------------------------------
    // Alerts and isolation
    // ------------------------------------------------------------------

    /// Records one observed malicious event; crossing the alert threshold
    /// sends alerts to every neighbor of the accused (relaying through a
    /// mutual neighbor where needed) and counts this node's own alert.
    pub(super) fn accuse(&mut self, accused: NodeId, kind: AccusationKind, ctx: &mut Ctx, out: &mut Vec<Action>) {
        if !ctx.params.srps_enabled || accused == self.id || self.is_isolated(accused) {
            return;
        }
        let count = self
            .ledger
            .record_event(accused, kind, ctx.now, ctx.params.event_window_us);
        out.push(Action::Note(Note::MaliciousEvent {
            accused,
            kind,
            count_in_window: count,
        }));
        if count < ctx.params.events_to_alert as usize {
            return;
        }
        out.push(Action::Note(Note::AlertEmitted { accused, kind }));
        // Own alert counts once.
        if self.nbr.is_neighbor(accused) {
            let distinct = self
                .ledger
                .record_alert(accused, self.id, ctx.now, ctx.params.event_window_us);
            if distinct >= ctx.params.guards_to_isolate as usize {
                self.isolate(accused, out);
            }
        }
        let targets: Vec<NodeId> = self
            .nbr
            .two_hop
            .get(&accused)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        for target in targets {
            if target == self.id || target == accused {
                continue;
            }
            let alert = Message::Alert {
                guard: self.id,
                accused,
                kind,
                relay_to: None,
            };
            if self.nbr.is_neighbor(target) {
                out.push(Action::Send {
                    msg: alert,
                    to: Some(target),
                    delay_us: 0,
                });
            } else if let Some(relay) = self
                .nbr
                .one_hop
                .iter()
                .copied()
                .find(|m| *m != accused && self.nbr.two_hop_linked(*m, target))
            {
                out.push(Action::Send {
                    msg: Message::Alert {
                        guard: self.id,
                        accused,
                        kind,
                        relay_to: Some(target),
                    },
                    to: Some(relay),
                    delay_us: 0,
                });
            }
        }
    }

    fn on_alert(&mut self, msg: &Message, ctx: &mut Ctx, out: &mut Vec<Action>) {
        let Message::Alert {
            guard,
            accused,
            kind,
            relay_to,
        } = msg
        else {
            return;
        };
        if !ctx.params.srps_enabled {
            return;
        }
        let transmitter = msg.claimed_sender();
        if !self.nbr.is_neighbor(transmitter) && transmitter != *guard {
            return;
        }
        if let Some(target) = relay_to {
            if *target != self.id {
                return;
            }
        }
        if relay_to.is_none() && !self.nbr.is_neighbor(*guard) {
            // Direct alerts must come from a neighbor guard; relayed ones are
            // vouched by the relay being our neighbor.
            return;
        }
        if *accused == self.id || self.is_isolated(*accused) {
            return;
        }
        if !self.nbr.is_neighbor(*accused) {
            return;
        }
        let _ = kind;
        let distinct = self
            .ledger
            .record_alert(*accused, *guard, ctx.now, ctx.params.event_window_us);
        if distinct >= ctx.params.guards_to_isolate as usize {
            self.isolate(*accused, out);
        }
    }

    /// Relay step for alerts targeted through this node.
    pub(super) fn maybe_relay_alert(&mut self, msg: &Message, out: &mut Vec<Action>) {
        let Message::Alert {
            guard,
            accused,
            kind,
            relay_to: Some(target),
        } = msg
        else {
            return;
        };
        if *target == self.id || !self.nbr.is_neighbor(*target) {
            return;
        }
        out.push(Action::Send {
            msg: Message::Alert {
                guard: *guard,
                accused: *accused,
                kind: *kind,
                relay_to: None,
            },
            to: Some(*target),
            delay_us: 0,
        });
    }

    /// Purges an isolated node from every table and refuses its traffic from
    /// now on.
    fn isolate(&mut self, accused: NodeId, out: &mut Vec<Action>) {
        if !self.ledger.isolated.insert(accused) {
            return;
        }
        self.nbr.remove(accused);
        let stale: Vec<NodeId> = self
            .routes
            .iter()
            .filter(|(_, e)| e.next == accused || e.trail.contains(&accused))
            .map(|(d, _)| *d)
            .collect();
        for dst in stale {
            let entry = self.routes.get_mut(&dst).unwrap();
            entry.alternates.retain(|a| a.next != accused && !a.trail.contains(&accused));
            if let Some(alt) = entry.alternates.first().cloned() {
                entry.alternates.remove(0);
                entry.next = alt.next;
                entry.installed_us = alt.installed_us;
                entry.trail = alt.trail;
                out.push(Action::Note(Note::RouteSwitched { dst, to_alternate: true }));
            } else {
                self.routes.remove(&dst);
            }
        }
        self.routes.remove(&accused);
        out.push(Action::Note(Note::IsolatedNode { accused }));
    }
}

/// Deterministic per-node commitment seed; `epoch` increments at each
/// neighborhood renewal.
fn own_chain_seed(id: NodeId, oracle_seed: u64, epoch: u32) -> SymKey {
    let mut material = Vec::with_capacity(20);
    material.extend_from_slice(b"own-chain");
    material.extend_from_slice(&oracle_seed.to_le_bytes());
    material.extend_from_slice(&id.raw().to_le_bytes());
    material.extend_from_slice(&epoch.to_le_bytes());
    SymKey::from(crate::crypto::hash_f(&material))
}
