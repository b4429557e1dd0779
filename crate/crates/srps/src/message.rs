//! Wire messages and their byte layouts.
//!
//! Layouts are fixed so that wire sizes, MAC payloads, and watch-buffer
//! digests are all derived from one serialization. The route reply trail is
//! instrumentation the initiator uses for alternate-route bookkeeping; it is
//! excluded from MAC payloads and core digests so per-hop appends do not look
//! like tampering.

use crate::crypto::{hash_f, HashValue, MacTag, SymKey};

/// A 4-byte node identifier, unique within a scenario.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn raw(self) -> u32 {
        self.0
    }
}

impl std::fmt::Debug for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const FLAG_REQ: u8 = 0x01;
pub const FLAG_REP: u8 = 0x02;

/// Kinds of misbehavior a guard can accuse a neighbor of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccusationKind {
    /// The receiver never forwarded a packet it was given.
    Drop,
    /// The receiver forwarded a packet whose content differs from what it
    /// received.
    Change,
    /// The claimed previous hop never transmitted the packet.
    Fabricate,
    /// The same route reply was forwarded twice within the watch window.
    DuplicateReply,
}

impl AccusationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccusationKind::Drop => "drop",
            AccusationKind::Change => "change",
            AccusationKind::Fabricate => "fabricate",
            AccusationKind::DuplicateReply => "dup-reply",
        }
    }

    fn code(self) -> u8 {
        match self {
            AccusationKind::Drop => 1,
            AccusationKind::Change => 2,
            AccusationKind::Fabricate => 3,
            AccusationKind::DuplicateReply => 4,
        }
    }
}

/// Whether a chain renewal targets one pair's SNV sequence or a node's own
/// neighborhood commitment chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalScope {
    Pair,
    Neighborhood,
}

/// Every transmission the radio medium can carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello {
        src: NodeId,
        commitment: HashValue,
    },
    HelloReply {
        src: NodeId,
        commitment: HashValue,
    },
    NeighborList {
        src: NodeId,
        neighbors: Vec<NodeId>,
    },
    KeyDisclosure {
        src: NodeId,
        key: SymKey,
    },
    Rdp {
        src: NodeId,
        dst: NodeId,
        sn: u32,
        snv_value: HashValue,
        snv_index: u32,
        e2e_mac: MacTag,
        forwarder: NodeId,
        /// Hop the forwarder claims to have heard the request from; `None`
        /// only on the initiator's own broadcast.
        prev_hop: Option<NodeId>,
        nbr_mac: MacTag,
    },
    Rrp {
        src: NodeId,
        dst: NodeId,
        sn: u32,
        snv_value: HashValue,
        e2e_mac: MacTag,
        forwarder: NodeId,
        /// Hop the forwarder claims to have heard the reply from; `None` only
        /// on the destination's own transmission.
        prev_hop: Option<NodeId>,
        /// The neighbor this reply is addressed to next.
        next_hop: NodeId,
        dst_echo: NodeId,
        nbr_mac: MacTag,
        /// Hop record accumulated along the reply path; used by the initiator
        /// for alternate-route and repair bookkeeping. Not covered by MACs.
        trail: Vec<NodeId>,
    },
    Challenge {
        from: NodeId,
        to: NodeId,
        /// Sequence number of the discovery whose reverse path routes this.
        sn: u32,
        ct: Vec<u8>,
        /// Hops the challenge traversed, so the response can retrace them.
        trail: Vec<NodeId>,
    },
    ChallengeResponse {
        from: NodeId,
        to: NodeId,
        ct: Vec<u8>,
        /// Remaining hops back to the challenger; the sender pops the next
        /// hop off before each transmission.
        return_trail: Vec<NodeId>,
    },
    /// Reports the hops adjacent to a conflicting (fake) route so the request
    /// initiator can trace its origin.
    FakeRouteReport {
        from: NodeId,
        to: NodeId,
        sn: u32,
        prev_hops: Vec<NodeId>,
        next_hop: Option<NodeId>,
    },
    RenewalCommit {
        scope: RenewalScope,
        src: NodeId,
        dst: NodeId,
        sn: u32,
        ct: Vec<u8>,
        forwarder: NodeId,
    },
    RenewalValue {
        scope: RenewalScope,
        src: NodeId,
        dst: NodeId,
        sn: u32,
        anchor: HashValue,
        forwarder: NodeId,
    },
    RenewalProof {
        scope: RenewalScope,
        src: NodeId,
        dst: NodeId,
        sn: u32,
        proof: HashValue,
        forwarder: NodeId,
    },
    RouteError {
        reporter: NodeId,
        orig_src: NodeId,
        orig_dst: NodeId,
        broken_from: NodeId,
        broken_next: NodeId,
    },
    RepairRequest {
        from: NodeId,
        to: NodeId,
        faulty: NodeId,
        target: NodeId,
        orig_dst: NodeId,
    },
    RepairDone {
        from: NodeId,
        to: NodeId,
        orig_dst: NodeId,
        ok: bool,
    },
    Alert {
        guard: NodeId,
        accused: NodeId,
        kind: AccusationKind,
        /// Set when the alert is being relayed through a mutual neighbor.
        relay_to: Option<NodeId>,
    },
    Data {
        src: NodeId,
        dst: NodeId,
        seq: u32,
        payload_len: u16,
        /// The hop currently transmitting; what guards attribute behavior to.
        forwarder: NodeId,
    },
}

fn push_id(buf: &mut Vec<u8>, id: NodeId) {
    buf.extend_from_slice(&id.0.to_be_bytes());
}

fn push_opt_id(buf: &mut Vec<u8>, id: Option<NodeId>) {
    push_id(buf, id.unwrap_or(NodeId(0)));
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::HelloReply { .. } => "hello-reply",
            Message::NeighborList { .. } => "nbr-list",
            Message::KeyDisclosure { .. } => "key-disclosure",
            Message::Rdp { .. } => "rdp",
            Message::Rrp { .. } => "rrp",
            Message::Challenge { .. } => "challenge",
            Message::ChallengeResponse { .. } => "challenge-resp",
            Message::FakeRouteReport { .. } => "fake-route-report",
            Message::RenewalCommit { .. } => "renewal-commit",
            Message::RenewalValue { .. } => "renewal-value",
            Message::RenewalProof { .. } => "renewal-proof",
            Message::RouteError { .. } => "route-error",
            Message::RepairRequest { .. } => "repair-request",
            Message::RepairDone { .. } => "repair-done",
            Message::Alert { .. } => "alert",
            Message::Data { .. } => "data",
        }
    }

    /// The node whose radio this message claims to come from. Receivers trust
    /// this header field, not physics; spoofing it is exactly what the
    /// neighborhood authentication machinery detects.
    pub fn claimed_sender(&self) -> NodeId {
        match self {
            Message::Hello { src, .. }
            | Message::HelloReply { src, .. }
            | Message::NeighborList { src, .. }
            | Message::KeyDisclosure { src, .. } => *src,
            Message::Rdp { forwarder, .. } | Message::Rrp { forwarder, .. } => *forwarder,
            Message::Challenge { trail, from, .. } => *trail.last().unwrap_or(from),
            Message::ChallengeResponse { from, .. } => *from,
            Message::FakeRouteReport { from, .. } => *from,
            Message::RenewalCommit { forwarder, .. }
            | Message::RenewalValue { forwarder, .. }
            | Message::RenewalProof { forwarder, .. } => *forwarder,
            Message::RouteError { reporter, .. } => *reporter,
            Message::RepairRequest { from, .. } => *from,
            Message::RepairDone { from, .. } => *from,
            Message::Alert { guard, .. } => *guard,
            Message::Data { forwarder, .. } => *forwarder,
        }
    }

    /// The immutable request core `REQ || ID_S || ID_D || SN || SNV`. This is
    /// the payload of the end-to-end MAC and the watch-buffer digest.
    pub fn rdp_core_bytes(src: NodeId, dst: NodeId, sn: u32, snv_value: &HashValue, snv_index: u32) -> Vec<u8> {
        let mut buf = vec![FLAG_REQ];
        push_id(&mut buf, src);
        push_id(&mut buf, dst);
        buf.extend_from_slice(&sn.to_be_bytes());
        buf.extend_from_slice(snv_value.as_bytes());
        buf.extend_from_slice(&(snv_index as u16).to_be_bytes());
        buf
    }

    /// The immutable reply core `REP || ID_S || ID_D || SN || SNV`.
    pub fn rrp_core_bytes(src: NodeId, dst: NodeId, sn: u32, snv_value: &HashValue) -> Vec<u8> {
        let mut buf = vec![FLAG_REP];
        push_id(&mut buf, src);
        push_id(&mut buf, dst);
        buf.extend_from_slice(&sn.to_be_bytes());
        buf.extend_from_slice(snv_value.as_bytes());
        buf
    }

    /// Payload of the per-hop neighborhood MAC: the core, the end-to-end MAC,
    /// and the hop fields the forwarder appended.
    pub fn nbr_mac_payload(&self) -> Option<Vec<u8>> {
        match self {
            Message::Rdp {
                src,
                dst,
                sn,
                snv_value,
                snv_index,
                e2e_mac,
                forwarder,
                prev_hop,
                ..
            } => {
                let mut buf = Message::rdp_core_bytes(*src, *dst, *sn, snv_value, *snv_index);
                buf.extend_from_slice(e2e_mac.as_bytes());
                push_id(&mut buf, *forwarder);
                push_opt_id(&mut buf, *prev_hop);
                Some(buf)
            }
            Message::Rrp {
                src,
                dst,
                sn,
                snv_value,
                e2e_mac,
                forwarder,
                prev_hop,
                next_hop,
                dst_echo,
                ..
            } => {
                let mut buf = Message::rrp_core_bytes(*src, *dst, *sn, snv_value);
                buf.extend_from_slice(e2e_mac.as_bytes());
                push_id(&mut buf, *forwarder);
                push_opt_id(&mut buf, *prev_hop);
                push_id(&mut buf, *next_hop);
                push_id(&mut buf, *dst_echo);
                Some(buf)
            }
            _ => None,
        }
    }

    /// Digest over the immutable core fields; what guards store and compare.
    pub fn core_digest(&self) -> Option<HashValue> {
        match self {
            Message::Rdp {
                src,
                dst,
                sn,
                snv_value,
                snv_index,
                e2e_mac,
                ..
            } => {
                let mut buf = Message::rdp_core_bytes(*src, *dst, *sn, snv_value, *snv_index);
                buf.extend_from_slice(e2e_mac.as_bytes());
                Some(hash_f(&buf))
            }
            Message::Rrp {
                src,
                dst,
                sn,
                snv_value,
                e2e_mac,
                ..
            } => {
                let mut buf = Message::rrp_core_bytes(*src, *dst, *sn, snv_value);
                buf.extend_from_slice(e2e_mac.as_bytes());
                Some(hash_f(&buf))
            }
            Message::Data { src, dst, seq, .. } => {
                let mut buf = vec![0xdd];
                push_id(&mut buf, *src);
                push_id(&mut buf, *dst);
                buf.extend_from_slice(&seq.to_be_bytes());
                Some(hash_f(&buf))
            }
            _ => None,
        }
    }

    /// Actual bytes this implementation puts on the air. The request carries
    /// both the forwarder and the claimed previous hop, which is four bytes
    /// more than the 47-byte single-previous-hop accounting model; see
    /// `analysis::packet_sizes` for both numbers.
    pub fn wire_size(&self) -> usize {
        match self {
            Message::Hello { .. } | Message::HelloReply { .. } => 1 + 4 + 8,
            Message::NeighborList { neighbors, .. } => 1 + 4 + 1 + 4 * neighbors.len(),
            Message::KeyDisclosure { .. } => 4 + 8,
            Message::Rdp { .. } => 1 + 4 + 4 + 4 + 8 + 2 + 10 + 4 + 4 + 10,
            Message::Rrp { trail, .. } => 1 + 4 + 4 + 4 + 8 + 10 + 4 + 4 + 4 + 4 + 10 + 1 + 4 * trail.len(),
            Message::Challenge { ct, trail, .. } => 1 + 4 + 4 + 4 + 1 + ct.len() + 1 + 4 * trail.len(),
            Message::ChallengeResponse { ct, return_trail, .. } => 1 + 4 + 4 + 1 + ct.len() + 1 + 4 * return_trail.len(),
            Message::FakeRouteReport { prev_hops, .. } => 1 + 4 + 4 + 4 + 1 + 4 * prev_hops.len() + 4,
            Message::RenewalCommit { ct, .. } => 1 + 1 + 4 + 4 + 4 + 4 + 1 + ct.len(),
            Message::RenewalValue { .. } => 1 + 1 + 4 + 4 + 4 + 4 + 8,
            Message::RenewalProof { .. } => 1 + 1 + 4 + 4 + 4 + 4 + 8,
            Message::RouteError { .. } => 1 + 4 + 4 + 4 + 4 + 4,
            Message::RepairRequest { .. } => 1 + 4 + 4 + 4 + 4 + 4,
            Message::RepairDone { .. } => 1 + 4 + 4 + 4 + 1,
            Message::Alert { .. } => 1 + 4 + 4 + 1 + 4,
            Message::Data { payload_len, .. } => 4 + 4 + 4 + *payload_len as usize,
        }
    }

    /// Stable byte encoding, used where a serialized form is needed (digests
    /// of whole packets in tests). Not a parser target; the simulator passes
    /// structured messages around.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.wire_size());
        match self {
            Message::Hello { src, commitment } => {
                buf.push(0x10);
                push_id(&mut buf, *src);
                buf.extend_from_slice(commitment.as_bytes());
            }
            Message::HelloReply { src, commitment } => {
                buf.push(0x11);
                push_id(&mut buf, *src);
                buf.extend_from_slice(commitment.as_bytes());
            }
            Message::NeighborList { src, neighbors } => {
                buf.push(0x12);
                push_id(&mut buf, *src);
                buf.push(neighbors.len() as u8);
                for n in neighbors {
                    push_id(&mut buf, *n);
                }
            }
            Message::KeyDisclosure { src, key } => {
                push_id(&mut buf, *src);
                buf.extend_from_slice(key.as_bytes());
            }
            Message::Rdp {
                forwarder,
                prev_hop,
                nbr_mac,
                ..
            } => {
                buf.extend_from_slice(&self.nbr_mac_payload().unwrap());
                let _ = (forwarder, prev_hop);
                buf.extend_from_slice(nbr_mac.as_bytes());
            }
            Message::Rrp { nbr_mac, trail, .. } => {
                buf.extend_from_slice(&self.nbr_mac_payload().unwrap());
                buf.extend_from_slice(nbr_mac.as_bytes());
                buf.push(trail.len() as u8);
                for n in trail {
                    push_id(&mut buf, *n);
                }
            }
            Message::Challenge { from, to, sn, ct, trail } => {
                buf.push(0x20);
                push_id(&mut buf, *from);
                push_id(&mut buf, *to);
                buf.extend_from_slice(&sn.to_be_bytes());
                buf.push(ct.len() as u8);
                buf.extend_from_slice(ct);
                buf.push(trail.len() as u8);
                for n in trail {
                    push_id(&mut buf, *n);
                }
            }
            Message::ChallengeResponse {
                from,
                to,
                ct,
                return_trail,
            } => {
                buf.push(0x21);
                push_id(&mut buf, *from);
                push_id(&mut buf, *to);
                buf.push(ct.len() as u8);
                buf.extend_from_slice(ct);
                buf.push(return_trail.len() as u8);
                for n in return_trail {
                    push_id(&mut buf, *n);
                }
            }
            Message::FakeRouteReport {
                from,
                to,
                prev_hops,
                next_hop,
                return_trail,
            } => {
                buf.push(0x22);
                push_id(&mut buf, *from);
                push_id(&mut buf, *to);
                buf.push(prev_hops.len() as u8);
                for n in prev_hops {
                    push_id(&mut buf, *n);
                }
                push_opt_id(&mut buf, *next_hop);
                buf.push(return_trail.len() as u8);
                for n in return_trail {
                    push_id(&mut buf, *n);
                }
            }
            Message::RenewalCommit {
                scope,
                src,
                dst,
                sn,
                ct,
                forwarder,
            } => {
                buf.push(0x30);
                buf.push(matches!(scope, RenewalScope::Pair) as u8);
                push_id(&mut buf, *src);
                push_id(&mut buf, *dst);
                buf.extend_from_slice(&sn.to_be_bytes());
                push_id(&mut buf, *forwarder);
                buf.push(ct.len() as u8);
                buf.extend_from_slice(ct);
            }
            Message::RenewalValue {
                scope,
                src,
                dst,
                sn,
                anchor,
                forwarder,
            } => {
                buf.push(0x31);
                buf.push(matches!(scope, RenewalScope::Pair) as u8);
                push_id(&mut buf, *src);
                push_id(&mut buf, *dst);
                buf.extend_from_slice(&sn.to_be_bytes());
                push_id(&mut buf, *forwarder);
                buf.extend_from_slice(anchor.as_bytes());
            }
            Message::RenewalProof {
                scope,
                src,
                dst,
                sn,
                proof,
                forwarder,
            } => {
                buf.push(0x32);
                buf.push(matches!(scope, RenewalScope::Pair) as u8);
                push_id(&mut buf, *src);
                push_id(&mut buf, *dst);
                buf.extend_from_slice(&sn.to_be_bytes());
                push_id(&mut buf, *forwarder);
                buf.extend_from_slice(proof.as_bytes());
            }
            Message::RouteError {
                reporter,
                orig_src,
                orig_dst,
                broken_from,
                broken_next,
            } => {
                buf.push(0x40);
                push_id(&mut buf, *reporter);
                push_id(&mut buf, *orig_src);
                push_id(&mut buf, *orig_dst);
                push_id(&mut buf, *broken_from);
                push_id(&mut buf, *broken_next);
            }
            Message::RepairRequest {
                from,
                to,
                faulty,
                target,
                orig_dst,
            } => {
                buf.push(0x41);
                push_id(&mut buf, *from);
                push_id(&mut buf, *to);
                push_id(&mut buf, *faulty);
                push_id(&mut buf, *target);
                push_id(&mut buf, *orig_dst);
            }
            Message::RepairDone { from, to, orig_dst, ok } => {
                buf.push(0x42);
                push_id(&mut buf, *from);
                push_id(&mut buf, *to);
                push_id(&mut buf, *orig_dst);
                buf.push(*ok as u8);
            }
            Message::Alert {
                guard,
                accused,
                kind,
                relay_to,
            } => {
                buf.push(0x50);
                push_id(&mut buf, *guard);
                push_id(&mut buf, *accused);
                buf.push(kind.code());
                push_opt_id(&mut buf, *relay_to);
            }
            Message::Data {
                src,
                dst,
                seq,
                payload_len,
            } => {
                push_id(&mut buf, *src);
                push_id(&mut buf, *dst);
                buf.extend_from_slice(&seq.to_be_bytes());
                buf.extend(std::iter::repeat(0).take(*payload_len as usize));
            }
        }
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{mac, ChainState, HashValue, MacTag, SymKey};

    fn sample_rdp() -> Message {
        let v = HashValue::from_bytes([1; 8]);
        Message::Rdp {
            src: NodeId(1),
            dst: NodeId(2),
            sn: 7,
            snv_value: v,
            snv_index: 10,
            e2e_mac: MacTag::from_bytes([2; 10]),
            forwarder: NodeId(3),
            prev_hop: Some(NodeId(1)),
            nbr_mac: MacTag::from_bytes([4; 10]),
        }
    }

    #[test]
    fn rdp_actual_wire_size_is_model_plus_extra_prev_hop() {
        // Model is 47 bytes with one previous-hop ID; we carry forwarder and
        // previous hop, so 51.
        assert_eq!(sample_rdp().wire_size(), 51);
    }

    #[test]
    fn key_disclosure_matches_model() {
        let key = SymKey::from_bytes([0; 8]);
        let msg = Message::KeyDisclosure { src: NodeId(1), key };
        assert_eq!(msg.wire_size(), 12);
        assert_eq!(msg.encode().len(), 12);
    }

    #[test]
    fn core_digest_ignores_hop_fields() {
        let a = sample_rdp();
        let mut b = a.clone();
        if let Message::Rdp { forwarder, prev_hop, nbr_mac, .. } = &mut b {
            *forwarder = NodeId(9);
            *prev_hop = Some(NodeId(3));
            *nbr_mac = MacTag::from_bytes([9; 10]);
        }
        assert_eq!(a.core_digest(), b.core_digest());
        let mut c = a.clone();
        if let Message::Rdp { sn, .. } = &mut c {
            *sn = 8;
        }
        assert_ne!(a.core_digest(), c.core_digest());
    }

    #[test]
    fn nbr_mac_payload_binds_hop_fields() {
        let a = sample_rdp();
        let mut b = a.clone();
        if let Message::Rdp { prev_hop, .. } = &mut b {
            *prev_hop = Some(NodeId(5));
        }
        assert_ne!(a.nbr_mac_payload(), b.nbr_mac_payload());
        // A disclosed chain key verifies the payload end to end.
        let mut chain = ChainState::derive_commitment(SymKey::from_bytes([7; 8]), 4).unwrap();
        let k = chain.next_auth_key().unwrap();
        let tag = mac(&k, &a.nbr_mac_payload().unwrap());
        assert_eq!(tag, mac(&k, &a.nbr_mac_payload().unwrap()));
    }
}
