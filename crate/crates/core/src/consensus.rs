//! Leaderless agreement on a superblock per instance.
//!
//! Every committee member owns one slot. Members reliably broadcast their
//! proposal into their slot (3-phase send/echo/ready with quorum
//! `ceil((n+t+1)/2)` echoes, `t+1` ready amplification, `2t+1` delivery),
//! and one binary consensus instance per slot decides whether that slot's
//! proposal enters the block. A member inputs 1 to a slot the moment the
//! slot's proposal is delivered; once `n - t` slots have decided 1, or the
//! instance budget expires, it inputs 0 everywhere it has not spoken yet.
//! The decided bit vector ANDed with the delivered proposals is the
//! superblock, identical at every correct node.
//!
//! Binary consensus is round-based: binary-value broadcast of estimates
//! (`t+1` amplification, `2t+1` acceptance), aux quorums of `n - t`
//! messages, a rotating weak coordinator whose round value steers
//! convergence after the network stabilizes, and decision when the aux
//! union is a singleton matching the round's parity value. Nodes that have
//! decided answer later rounds with their decision, so stragglers always
//! assemble quorums. All node logic is identical; no code path depends on
//! a distinguished identity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codec::{Digest32, Enc};
use crate::ledger::Transaction;

/// One node's batch for one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub proposer: String,
    pub txs: Vec<Transaction>,
    pub timestamp: u64,
}

impl Proposal {
    pub fn digest(&self) -> Digest32 {
        let mut enc = Enc::new()
            .str("proposal")
            .str(&self.proposer)
            .u64(self.timestamp)
            .u64(self.txs.len() as u64);
        for tx in &self.txs {
            enc = enc.digest(&tx.digest());
        }
        enc.into_digest()
    }
}

/// The decided combination for one instance: every slot whose binary
/// consensus decided 1, with its delivered proposal, in slot order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superblock {
    pub instance: u64,
    pub entries: Vec<(usize, Proposal)>,
}

impl Superblock {
    pub fn digest(&self) -> Digest32 {
        let mut enc = Enc::new().str("superblock").u64(self.instance).u64(self.entries.len() as u64);
        for (slot, prop) in &self.entries {
            enc = enc.u64(*slot as u64).digest(&prop.digest());
        }
        enc.into_digest()
    }
}

/// A set of binary values, at most `{0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinSet(u8);

impl BinSet {
    pub const EMPTY: BinSet = BinSet(0);

    pub fn singleton(v: bool) -> BinSet {
        BinSet(1 << v as u8)
    }

    pub fn insert(&mut self, v: bool) {
        self.0 |= 1 << v as u8;
    }

    pub fn contains(&self, v: bool) -> bool {
        self.0 & (1 << v as u8) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(&self, other: &BinSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: &BinSet) -> BinSet {
        BinSet(self.0 | other.0)
    }

    /// The sole value, if exactly one is present.
    pub fn sole(&self) -> Option<bool> {
        match self.0 {
            0b01 => Some(false),
            0b10 => Some(true),
            _ => None,
        }
    }

    /// Smallest value present, used when the coordinator picks one.
    pub fn first(&self) -> Option<bool> {
        if self.contains(false) {
            Some(false)
        } else if self.contains(true) {
            Some(true)
        } else {
            None
        }
    }
}

/// Consensus wire messages. `slot` addresses the per-slot sub-protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConsensusMsg {
    RbSend { slot: usize, prop: Proposal },
    RbEcho { slot: usize, prop: Proposal },
    RbReady { slot: usize, prop: Proposal },
    BinEst { slot: usize, round: u32, value: bool },
    BinAux { slot: usize, round: u32, values: BinSet },
    BinCoord { slot: usize, round: u32, value: bool },
}

impl ConsensusMsg {
    pub fn is_binary(&self) -> bool {
        matches!(
            self,
            ConsensusMsg::BinEst { .. } | ConsensusMsg::BinAux { .. } | ConsensusMsg::BinCoord { .. }
        )
    }

    /// Digest recorded in traces for this message's payload.
    pub fn payload_digest(&self) -> Digest32 {
        match self {
            ConsensusMsg::RbSend { prop, .. }
            | ConsensusMsg::RbEcho { prop, .. }
            | ConsensusMsg::RbReady { prop, .. } => prop.digest(),
            ConsensusMsg::BinEst { slot, round, value } => Enc::new()
                .str("est")
                .u64(*slot as u64)
                .u64(*round as u64)
                .u64(*value as u64)
                .into_digest(),
            ConsensusMsg::BinAux { slot, round, values } => Enc::new()
                .str("aux")
                .u64(*slot as u64)
                .u64(*round as u64)
                .u64(values.0 as u64)
                .into_digest(),
            ConsensusMsg::BinCoord { slot, round, value } => Enc::new()
                .str("coord")
                .u64(*slot as u64)
                .u64(*round as u64)
                .u64(*value as u64)
                .into_digest(),
        }
    }
}

/// Timers an instance arms; delays are simulated-time microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusTimer {
    /// Instance budget: stop waiting for more deliveries and input 0 to
    /// every slot not yet spoken for.
    Flip,
    /// Per-round fallback when the coordinator is silent.
    BinRound { slot: usize, round: u32 },
}

/// Protocol-visible happenings, surfaced for tracing and monitors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceEvent {
    RbDelivered { slot: usize, digest: Digest32 },
    BinDecided { slot: usize, value: bool },
    Decided(Superblock),
}

/// Messages to broadcast and timers to arm, collected per handler call.
#[derive(Debug, Default)]
pub struct Outbox {
    pub broadcasts: Vec<ConsensusMsg>,
    pub timers: Vec<(ConsensusTimer, u64)>,
    pub events: Vec<InstanceEvent>,
}

#[derive(Clone, Debug)]
pub struct InstanceConfig {
    pub instance: u64,
    /// Committee size for this epoch.
    pub n: usize,
    /// Fault bound for this epoch.
    pub t: usize,
    /// This node's slot, if it is a committee member.
    pub my_slot: Option<usize>,
    /// Budget before undelivered slots are voted down, in microseconds.
    pub flip_timeout: u64,
    /// Base per-round coordinator wait, in microseconds. Doubles per round.
    pub round_timeout: u64,
}

impl InstanceConfig {
    fn echo_quorum(&self) -> usize {
        (self.n + self.t) / 2 + 1
    }

    fn ready_amplify(&self) -> usize {
        self.t + 1
    }

    fn deliver_quorum(&self) -> usize {
        2 * self.t + 1
    }

    fn aux_quorum(&self) -> usize {
        self.n - self.t
    }
}

#[derive(Clone, Debug, Default)]
struct RbState {
    sent_echo: bool,
    sent_ready: bool,
    echoes: BTreeMap<Digest32, BTreeSet<usize>>,
    readies: BTreeMap<Digest32, BTreeSet<usize>>,
    payloads: BTreeMap<Digest32, Proposal>,
    delivered: Option<Digest32>,
}

#[derive(Clone, Debug, Default)]
struct BinState {
    input: Option<bool>,
    round: u32,
    est: bool,
    decided: Option<bool>,
    decided_round: u32,
    est_recv: BTreeMap<(u32, bool), BTreeSet<usize>>,
    est_sent: BTreeSet<(u32, bool)>,
    bin_values: BTreeMap<u32, BinSet>,
    coord_sent: BTreeSet<u32>,
    coord_recv: BTreeMap<u32, bool>,
    aux_sent: BTreeSet<u32>,
    aux_recv: BTreeMap<u32, BTreeMap<usize, BinSet>>,
    timer_fired: BTreeSet<u32>,
    replied: BTreeSet<u32>,
}

/// Parity fallback value for a round: 1, 0, 1, 0, ... so a unanimous-1
/// slot decides in its first round.
fn coin(round: u32) -> bool {
    round % 2 == 0
}

/// One consensus instance at one node.
#[derive(Clone, Debug)]
pub struct Instance {
    cfg: InstanceConfig,
    rb: Vec<RbState>,
    bin: Vec<BinState>,
    props: Vec<Option<Proposal>>,
    bitmask: Vec<Option<bool>>,
    ones: usize,
    decided_slots: usize,
    /// Still collecting 1-inputs; flips on quorum of ones or budget expiry.
    collecting: bool,
    my_proposal: Option<Proposal>,
    superblock: Option<Superblock>,
}

impl Instance {
    /// Create the instance and arm its budget timer.
    pub fn new(cfg: InstanceConfig, out: &mut Outbox) -> Self {
        out.timers.push((ConsensusTimer::Flip, cfg.flip_timeout));
        let n = cfg.n;
        Instance {
            cfg,
            rb: alloc::vec![RbState::default(); n],
            bin: alloc::vec![BinState::default(); n],
            props: alloc::vec![None; n],
            bitmask: alloc::vec![None; n],
            ones: 0,
            decided_slots: 0,
            collecting: true,
            my_proposal: None,
            superblock: None,
        }
    }

    pub fn instance_id(&self) -> u64 {
        self.cfg.instance
    }

    pub fn superblock(&self) -> Option<&Superblock> {
        self.superblock.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.superblock.is_some()
    }

    pub fn my_proposal(&self) -> Option<&Proposal> {
        self.my_proposal.as_ref()
    }

    pub fn bitmask_string(&self) -> String {
        self.bitmask
            .iter()
            .map(|b| match b {
                None => '?',
                Some(false) => '0',
                Some(true) => '1',
            })
            .collect()
    }

    /// Reliably broadcast our proposal into our slot. One call per instance.
    pub fn propose(&mut self, prop: Proposal, out: &mut Outbox) {
        let slot = self.cfg.my_slot.expect("only committee members propose");
        assert!(self.my_proposal.is_none(), "double propose");
        self.my_proposal = Some(prop.clone());
        out.broadcasts.push(ConsensusMsg::RbSend { slot, prop });
    }

    pub fn on_timer(&mut self, timer: ConsensusTimer, out: &mut Outbox) {
        match timer {
            ConsensusTimer::Flip => self.flip(out),
            ConsensusTimer::BinRound { slot, round } => {
                self.bin[slot].timer_fired.insert(round);
                self.bin_try_aux(slot, round, out);
            }
        }
    }

    pub fn on_msg(&mut self, from_slot: usize, msg: ConsensusMsg, out: &mut Outbox) {
        if self.cfg.my_slot.is_none() {
            return;
        }
        match msg {
            ConsensusMsg::RbSend { slot, prop } => self.rb_on_send(from_slot, slot, prop, out),
            ConsensusMsg::RbEcho { slot, prop } => self.rb_on_echo(from_slot, slot, prop, out),
            ConsensusMsg::RbReady { slot, prop } => self.rb_on_ready(from_slot, slot, prop, out),
            ConsensusMsg::BinEst { slot, round, value } => {
                self.bin_on_est(from_slot, slot, round, value, out)
            }
            ConsensusMsg::BinAux { slot, round, values } => {
                self.bin_on_aux(from_slot, slot, round, values, out)
            }
            ConsensusMsg::BinCoord { slot, round, value } => {
                self.bin_on_coord(from_slot, slot, round, value, out)
            }
        }
    }

    // ---- reliable broadcast ----

    fn rb_on_send(&mut self, from_slot: usize, slot: usize, prop: Proposal, out: &mut Outbox) {
        // Only the slot owner may originate.
        if from_slot != slot || slot >= self.cfg.n {
            return;
        }
        let rb = &mut self.rb[slot];
        if rb.sent_echo {
            return;
        }
        rb.sent_echo = true;
        out.broadcasts.push(ConsensusMsg::RbEcho { slot, prop });
    }

    fn rb_on_echo(&mut self, from_slot: usize, slot: usize, prop: Proposal, out: &mut Outbox) {
        if slot >= self.cfg.n {
            return;
        }
        let digest = prop.digest();
        let rb = &mut self.rb[slot];
        rb.payloads.entry(digest).or_insert(prop);
        let echoes = rb.echoes.entry(digest).or_default();
        echoes.insert(from_slot);
        if echoes.len() >= self.cfg.echo_quorum() && !rb.sent_ready {
            rb.sent_ready = true;
            let prop = rb.payloads[&digest].clone();
            out.broadcasts.push(ConsensusMsg::RbReady { slot, prop });
        }
    }

    fn rb_on_ready(&mut self, from_slot: usize, slot: usize, prop: Proposal, out: &mut Outbox) {
        if slot >= self.cfg.n {
            return;
        }
        let digest = prop.digest();
        let rb = &mut self.rb[slot];
        rb.payloads.entry(digest).or_insert(prop);
        let readies = rb.readies.entry(digest).or_default();
        readies.insert(from_slot);
        let count = readies.len();
        if count >= self.cfg.ready_amplify() && !rb.sent_ready {
            rb.sent_ready = true;
            let prop = rb.payloads[&digest].clone();
            out.broadcasts.push(ConsensusMsg::RbReady { slot, prop });
        }
        if count >= self.cfg.deliver_quorum() && rb.delivered.is_none() {
            rb.delivered = Some(digest);
            self.props[slot] = Some(self.rb[slot].payloads[&digest].clone());
            out.events.push(InstanceEvent::RbDelivered { slot, digest });
            if self.collecting && self.bin[slot].input.is_none() {
                self.bin_input(slot, true, out);
            }
            self.try_complete(out);
        }
    }

    // ---- instance-level control ----

    fn flip(&mut self, out: &mut Outbox) {
        if !self.collecting || self.is_complete() {
            return;
        }
        self.collecting = false;
        for slot in 0..self.cfg.n {
            if self.bin[slot].input.is_none() {
                self.bin_input(slot, false, out);
            }
        }
    }

    fn on_bin_decided(&mut self, slot: usize, value: bool, out: &mut Outbox) {
        debug_assert!(self.bitmask[slot].is_none());
        self.bitmask[slot] = Some(value);
        self.decided_slots += 1;
        if value {
            self.ones += 1;
        }
        out.events.push(InstanceEvent::BinDecided { slot, value });
        if self.collecting && self.ones >= self.cfg.aux_quorum() {
            self.flip(out);
        }
        self.try_complete(out);
    }

    fn try_complete(&mut self, out: &mut Outbox) {
        if self.superblock.is_some() || self.decided_slots < self.cfg.n {
            return;
        }
        // Wait until every 1-slot's proposal is locally delivered;
        // agreement of the broadcast guarantees it arrives.
        for slot in 0..self.cfg.n {
            if self.bitmask[slot] == Some(true) && self.props[slot].is_none() {
                return;
            }
        }
        let bits: Vec<bool> = self.bitmask.iter().map(|b| b.unwrap()).collect();
        let sb = assemble_superblock(self.cfg.instance, &bits, &self.props)
            .expect("completion waited for every decided proposal");
        self.superblock = Some(sb.clone());
        out.events.push(InstanceEvent::Decided(sb));
    }

    // ---- binary consensus ----

    fn round_timeout(&self, round: u32) -> u64 {
        self.cfg.round_timeout << round.min(5)
    }

    fn bin_input(&mut self, slot: usize, value: bool, out: &mut Outbox) {
        debug_assert!(self.bin[slot].input.is_none());
        let bin = &mut self.bin[slot];
        bin.input = Some(value);
        bin.est = value;
        bin.round = 0;
        self.bin_start_round(slot, 0, out);
    }

    fn bin_start_round(&mut self, slot: usize, round: u32, out: &mut Outbox) {
        let est = self.bin[slot].est;
        if self.bin[slot].est_sent.insert((round, est)) {
            out.broadcasts.push(ConsensusMsg::BinEst {
                slot,
                round,
                value: est,
            });
        }
        out.timers.push((
            ConsensusTimer::BinRound { slot, round },
            self.round_timeout(round),
        ));
        // Catch up on anything that arrived for this round already.
        self.bin_recheck_round(slot, round, out);
    }

    fn bin_recheck_round(&mut self, slot: usize, round: u32, out: &mut Outbox) {
        for value in [false, true] {
            let count = self.bin[slot]
                .est_recv
                .get(&(round, value))
                .map_or(0, BTreeSet::len);
            if count >= self.cfg.deliver_quorum() {
                self.bin_accept_value(slot, round, value, out);
            }
        }
        self.bin_try_aux(slot, round, out);
        self.bin_try_transition(slot, round, out);
    }

    fn bin_on_est(&mut self, from_slot: usize, slot: usize, round: u32, value: bool, out: &mut Outbox) {
        if slot >= self.cfg.n {
            return;
        }
        {
            let bin = &mut self.bin[slot];
            bin.est_recv.entry((round, value)).or_default().insert(from_slot);
        }
        if self.bin_reply_if_decided(slot, round, out) {
            return;
        }
        let bin = &self.bin[slot];
        let count = bin.est_recv[&(round, value)].len();
        if count >= self.cfg.ready_amplify() && !bin.est_sent.contains(&(round, value)) {
            self.bin[slot].est_sent.insert((round, value));
            out.broadcasts.push(ConsensusMsg::BinEst { slot, round, value });
        }
        if count >= self.cfg.deliver_quorum() {
            self.bin_accept_value(slot, round, value, out);
        }
    }

    /// `value` has reached the acceptance quorum for `round`.
    fn bin_accept_value(&mut self, slot: usize, round: u32, value: bool, out: &mut Outbox) {
        let already = {
            let bin = &mut self.bin[slot];
            let set = bin.bin_values.entry(round).or_insert(BinSet::EMPTY);
            let had = set.contains(value);
            set.insert(value);
            had
        };
        if already {
            return;
        }
        // Weak coordinator: slot (round mod n) announces the first accepted
        // value so that, once delays stabilize, every node adopts the same
        // aux value.
        let coordinator = (round as usize) % self.cfg.n;
        if self.cfg.my_slot == Some(coordinator)
            && self.bin[slot].decided.is_none()
            && self.bin[slot].coord_sent.insert(round)
        {
            out.broadcasts.push(ConsensusMsg::BinCoord { slot, round, value });
        }
        self.bin_try_aux(slot, round, out);
        self.bin_try_transition(slot, round, out);
    }

    fn bin_on_coord(&mut self, from_slot: usize, slot: usize, round: u32, value: bool, out: &mut Outbox) {
        if slot >= self.cfg.n || from_slot != (round as usize) % self.cfg.n {
            return;
        }
        self.bin[slot].coord_recv.entry(round).or_insert(value);
        self.bin_try_aux(slot, round, out);
    }

    fn bin_on_aux(&mut self, from_slot: usize, slot: usize, round: u32, values: BinSet, out: &mut Outbox) {
        if slot >= self.cfg.n || values.is_empty() {
            return;
        }
        self.bin[slot]
            .aux_recv
            .entry(round)
            .or_default()
            .insert(from_slot, values);
        if self.bin_reply_if_decided(slot, round, out) {
            return;
        }
        self.bin_try_transition(slot, round, out);
    }

    /// After deciding, answer each later round once with the decision so
    /// slower nodes can still assemble their quorums.
    fn bin_reply_if_decided(&mut self, slot: usize, round: u32, out: &mut Outbox) -> bool {
        let bin = &mut self.bin[slot];
        let Some(v) = bin.decided else { return false };
        if round > bin.decided_round && bin.replied.insert(round) {
            out.broadcasts.push(ConsensusMsg::BinEst {
                slot,
                round,
                value: v,
            });
            out.broadcasts.push(ConsensusMsg::BinAux {
                slot,
                round,
                values: BinSet::singleton(v),
            });
        }
        true
    }

    fn bin_try_aux(&mut self, slot: usize, round: u32, out: &mut Outbox) {
        let bin = &self.bin[slot];
        if bin.input.is_none()
            || bin.decided.is_some()
            || bin.round != round
            || bin.aux_sent.contains(&round)
        {
            return;
        }
        let Some(values) = bin.bin_values.get(&round).copied() else {
            return;
        };
        if values.is_empty() {
            return;
        }
        let coord_value = bin.coord_recv.get(&round).copied();
        let usable_coord = coord_value.filter(|v| values.contains(*v));
        if usable_coord.is_none() && !bin.timer_fired.contains(&round) {
            return;
        }
        let aux = match usable_coord {
            Some(v) => BinSet::singleton(v),
            None => values,
        };
        self.bin[slot].aux_sent.insert(round);
        out.broadcasts.push(ConsensusMsg::BinAux {
            slot,
            round,
            values: aux,
        });
    }

    fn bin_try_transition(&mut self, slot: usize, round: u32, out: &mut Outbox) {
        let (vals, est_next, decide) = {
            let bin = &self.bin[slot];
            if bin.input.is_none() || bin.decided.is_some() || bin.round != round {
                return;
            }
            // An aux message only counts once every value it carries has
            // been accepted locally.
            let Some(bin_values) = bin.bin_values.get(&round).copied() else {
                return;
            };
            let Some(aux) = bin.aux_recv.get(&round) else {
                return;
            };
            let mut vals = BinSet::EMPTY;
            let mut count = 0;
            for values in aux.values() {
                if values.is_subset(&bin_values) {
                    vals = vals.union(values);
                    count += 1;
                    if count == self.cfg.aux_quorum() {
                        break;
                    }
                }
            }
            if count < self.cfg.aux_quorum() {
                return;
            }
            match vals.sole() {
                Some(v) => (vals, v, v == coin(round)),
                None => (vals, coin(round), false),
            }
        };
        let _ = vals;
        let bin = &mut self.bin[slot];
        bin.est = est_next;
        if decide {
            bin.decided = Some(est_next);
            bin.decided_round = round;
            self.on_bin_decided(slot, est_next, out);
        } else {
            bin.round = round + 1;
            self.bin_start_round(slot, round + 1, out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AssembleError {
    #[error("slot {0} decided 1 but its proposal is missing")]
    MissingProposal(usize),
    #[error("bitmask has {bits} slots but {props} proposal slots")]
    LengthMismatch { bits: usize, props: usize },
}

/// Deterministic bitwise-AND combination of decided bits and delivered
/// proposals. A missing proposal for a 1-slot is a broadcast-contract
/// violation and aborts the run upstream.
pub fn assemble_superblock(
    instance: u64,
    bits: &[bool],
    props: &[Option<Proposal>],
) -> Result<Superblock, AssembleError> {
    if bits.len() != props.len() {
        return Err(AssembleError::LengthMismatch {
            bits: bits.len(),
            props: props.len(),
        });
    }
    let mut entries = Vec::new();
    for (slot, &bit) in bits.iter().enumerate() {
        if !bit {
            continue;
        }
        match &props[slot] {
            Some(prop) => entries.push((slot, prop.clone())),
            None => return Err(AssembleError::MissingProposal(slot)),
        }
    }
    Ok(Superblock { instance, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(name: &str) -> Proposal {
        Proposal {
            proposer: String::from(name),
            txs: Vec::new(),
            timestamp: 3,
        }
    }

    #[test]
    fn assemble_picks_one_slots_in_order() {
        let props = alloc::vec![Some(prop("a")), None, Some(prop("c")), Some(prop("d"))];
        let sb = assemble_superblock(7, &[true, false, true, false], &props).unwrap();
        assert_eq!(sb.instance, 7);
        assert_eq!(sb.entries.len(), 2);
        assert_eq!(sb.entries[0].0, 0);
        assert_eq!(sb.entries[1].0, 2);
    }

    #[test]
    fn assemble_empty_bitmask_is_empty_superblock() {
        let props = alloc::vec![None, None];
        let sb = assemble_superblock(1, &[false, false], &props).unwrap();
        assert!(sb.entries.is_empty());
    }

    #[test]
    fn assemble_rejects_missing_proposal() {
        let props = alloc::vec![None];
        assert_eq!(
            assemble_superblock(1, &[true], &props),
            Err(AssembleError::MissingProposal(0))
        );
    }

    #[test]
    fn binset_subset_and_union() {
        let mut a = BinSet::EMPTY;
        a.insert(true);
        assert!(a.is_subset(&BinSet::singleton(true)));
        assert!(!BinSet::singleton(false).is_subset(&a));
        let both = a.union(&BinSet::singleton(false));
        assert_eq!(both.sole(), None);
        assert_eq!(a.sole(), Some(true));
    }
}
