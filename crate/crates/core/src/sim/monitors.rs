//! Runtime invariant monitors.
//!
//! The simulator feeds these as events happen and aborts on the first
//! violation; the offline checker feeds the same monitors from a recorded
//! trace. Only events at correct nodes are registered: byzantine nodes
//! carry no guarantees.
//!
//! Checked here:
//! * prefix safety — all correct nodes append the same block at each height;
//! * superblock agreement — one decided superblock per instance;
//! * broadcast agreement — at most one delivered payload per slot;
//! * binary agreement — one decided bit per slot;
//! * epoch agreement — identical committee and start height per epoch;
//! * validity — committed transactions are correctly signed with exact
//!   nonces and funds, digests match content, total balance is conserved;
//! * liveness — transactions admitted at correct nodes commit within the
//!   configured number of instances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::Digest32;
use crate::ledger::{self, Block, TxKind};
use crate::sim::trace::{NodeMeta, TraceEvent};

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub monitor: &'static str,
    pub description: String,
}

#[derive(Clone, Debug, Default)]
struct ShadowAccount {
    balance: u64,
    next_nonce: u64,
}

/// Liveness bookkeeping for one transaction digest.
#[derive(Clone, Copy, Debug, Default)]
struct TxTimeline {
    admitted_instance: Option<u64>,
    committed_instance: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Monitors {
    correct: BTreeMap<String, bool>,
    chain: BTreeMap<u64, Digest32>,
    superblocks: BTreeMap<u64, Digest32>,
    rb: BTreeMap<(u64, usize), Digest32>,
    bins: BTreeMap<(u64, usize), bool>,
    epochs: BTreeMap<u64, (u64, Vec<String>)>,
    shadow: BTreeMap<String, ShadowAccount>,
    genesis_total: u128,
    next_body_height: u64,
    txs: BTreeMap<Digest32, TxTimeline>,
    liveness_bound: u64,
    violation: Option<Violation>,
}

impl Monitors {
    pub fn new(nodes: &[NodeMeta], genesis: &BTreeMap<String, u64>, liveness_bound: u64) -> Self {
        Monitors {
            correct: nodes
                .iter()
                .map(|n| (n.id.clone(), !n.byzantine))
                .collect(),
            chain: BTreeMap::new(),
            superblocks: BTreeMap::new(),
            rb: BTreeMap::new(),
            bins: BTreeMap::new(),
            epochs: BTreeMap::new(),
            shadow: genesis
                .iter()
                .map(|(id, balance)| {
                    (
                        id.clone(),
                        ShadowAccount {
                            balance: *balance,
                            next_nonce: 0,
                        },
                    )
                })
                .collect(),
            genesis_total: genesis.values().map(|b| *b as u128).sum(),
            next_body_height: 1,
            txs: BTreeMap::new(),
            liveness_bound,
            violation: None,
        }
    }

    pub fn violation(&self) -> Option<&Violation> {
        self.violation.as_ref()
    }

    fn fail(&mut self, monitor: &'static str, description: String) {
        if self.violation.is_none() {
            self.violation = Some(Violation {
                monitor,
                description,
            });
        }
    }

    fn is_correct(&self, node: &str) -> bool {
        self.correct.get(node).copied().unwrap_or(false)
    }

    pub fn on_block_appended(&mut self, node: &str, height: u64, digest: Digest32) {
        if !self.is_correct(node) {
            return;
        }
        match self.chain.get(&height) {
            None => {
                self.chain.insert(height, digest);
            }
            Some(existing) if *existing != digest => self.fail(
                "prefix-safety",
                format!(
                    "height {height}: node {node} appended {digest} but another correct node appended {existing}"
                ),
            ),
            _ => {}
        }
    }

    /// Validity replay over the unique body per height.
    pub fn on_block_body(&mut self, height: u64, instance: u64, block: &Block) {
        if height != self.next_body_height {
            self.fail(
                "validity",
                format!(
                    "block bodies out of order: got height {height}, expected {}",
                    self.next_body_height
                ),
            );
            return;
        }
        self.next_body_height += 1;
        if let Some(registered) = self.chain.get(&height) {
            if *registered != block.digest() {
                self.fail(
                    "validity",
                    format!("body at height {height} does not match the appended digest"),
                );
                return;
            }
        }
        if block.header.tx_digest != ledger::txs_digest(&block.txs) {
            self.fail(
                "validity",
                format!("height {height}: tx digest does not cover the listed transactions"),
            );
            return;
        }
        if block.header.receipt_digest != ledger::receipts_digest(&block.receipts) {
            self.fail(
                "validity",
                format!("height {height}: receipt digest does not cover the listed receipts"),
            );
            return;
        }
        for tx in &block.txs {
            if !tx.verify_signature() {
                self.fail(
                    "validity",
                    format!("height {height}: committed tx {} has a bad signature", tx.digest()),
                );
                return;
            }
            let Some(account) = self.shadow.get(&tx.issuer) else {
                self.fail(
                    "validity",
                    format!("height {height}: unknown issuer {}", tx.issuer),
                );
                return;
            };
            let expected_nonce = account.next_nonce;
            if tx.nonce != expected_nonce {
                self.fail(
                    "validity",
                    format!(
                        "height {height}: tx {} nonce {} but expected {}",
                        tx.digest(),
                        tx.nonce,
                        expected_nonce
                    ),
                );
                return;
            }
            self.shadow.get_mut(&tx.issuer).unwrap().next_nonce += 1;
            if let TxKind::Transfer { to, amount } = &tx.kind {
                if self.shadow[&tx.issuer].balance < *amount {
                    self.fail(
                        "validity",
                        format!("height {height}: tx {} overspends", tx.digest()),
                    );
                    return;
                }
                self.shadow.get_mut(&tx.issuer).unwrap().balance -= amount;
                match self.shadow.get_mut(to) {
                    Some(recipient) => recipient.balance += amount,
                    None => {
                        self.fail(
                            "validity",
                            format!("height {height}: transfer to unknown account {to}"),
                        );
                        return;
                    }
                }
            }
            let digest = tx.digest();
            let entry = self.txs.entry(digest).or_default();
            if entry.committed_instance.is_none() {
                entry.committed_instance = Some(instance);
            }
            if let (Some(admitted), Some(committed)) =
                (entry.admitted_instance, entry.committed_instance)
            {
                if committed > admitted + self.liveness_bound {
                    self.fail(
                        "liveness",
                        format!(
                            "tx {digest} admitted at instance {admitted} committed only at {committed} (bound {})",
                            self.liveness_bound
                        ),
                    );
                }
            }
        }
        let total: u128 = self.shadow.values().map(|a| a.balance as u128).sum();
        if total != self.genesis_total {
            self.fail(
                "validity",
                format!(
                    "height {height}: total balance {total} != genesis total {}",
                    self.genesis_total
                ),
            );
        }
    }

    pub fn on_superblock(&mut self, node: &str, instance: u64, digest: Digest32) {
        if !self.is_correct(node) {
            return;
        }
        match self.superblocks.get(&instance) {
            None => {
                self.superblocks.insert(instance, digest);
            }
            Some(existing) if *existing != digest => self.fail(
                "superblock-agreement",
                format!("instance {instance}: node {node} decided {digest}, another correct node decided {existing}"),
            ),
            _ => {}
        }
    }

    pub fn on_rb_delivered(&mut self, node: &str, instance: u64, slot: usize, digest: Digest32) {
        if !self.is_correct(node) {
            return;
        }
        match self.rb.get(&(instance, slot)) {
            None => {
                self.rb.insert((instance, slot), digest);
            }
            Some(existing) if *existing != digest => self.fail(
                "broadcast-agreement",
                format!("instance {instance} slot {slot}: conflicting deliveries {digest} vs {existing}"),
            ),
            _ => {}
        }
    }

    pub fn on_bin_decided(&mut self, node: &str, instance: u64, slot: usize, value: bool) {
        if !self.is_correct(node) {
            return;
        }
        match self.bins.get(&(instance, slot)) {
            None => {
                self.bins.insert((instance, slot), value);
            }
            Some(existing) if *existing != value => self.fail(
                "binary-agreement",
                format!("instance {instance} slot {slot}: decided both bits"),
            ),
            _ => {}
        }
    }

    pub fn on_epoch_started(
        &mut self,
        node: &str,
        epoch: u64,
        start_height: u64,
        members: &[String],
    ) {
        if !self.is_correct(node) {
            return;
        }
        match self.epochs.get(&epoch) {
            None => {
                self.epochs
                    .insert(epoch, (start_height, members.to_vec()));
            }
            Some((h, m)) if *h != start_height || m.as_slice() != members => self.fail(
                "epoch-agreement",
                format!("epoch {epoch}: node {node} adopted a different committee or height"),
            ),
            _ => {}
        }
    }

    pub fn on_tx_admitted(&mut self, node: &str, tx: Digest32, instance: u64) {
        if !self.is_correct(node) {
            return;
        }
        let entry = self.txs.entry(tx).or_default();
        match entry.admitted_instance {
            None => entry.admitted_instance = Some(instance),
            Some(prev) if instance < prev => entry.admitted_instance = Some(instance),
            _ => {}
        }
    }

    /// End-of-run liveness sweep. `final_instance` is the highest instance
    /// any correct node executed; only transactions whose deadline passed
    /// inside the run count as violations.
    pub fn finish(&mut self, final_instance: u64) {
        let mut overdue = Vec::new();
        for (digest, timeline) in &self.txs {
            let Some(admitted) = timeline.admitted_instance else {
                continue;
            };
            let deadline = admitted + self.liveness_bound;
            match timeline.committed_instance {
                Some(committed) if committed <= deadline => {}
                Some(committed) => overdue.push(format!(
                    "tx {digest} admitted {admitted} committed {committed}"
                )),
                None if final_instance > deadline => {
                    overdue.push(format!("tx {digest} admitted {admitted} never committed"))
                }
                None => {}
            }
        }
        if let Some(first) = overdue.first() {
            self.fail("liveness", first.clone());
        }
    }

    /// Feed one recorded trace event. Meta must have been consumed by the
    /// caller to construct the monitors.
    pub fn on_trace_event(&mut self, event: &TraceEvent) {
        match event {
            TraceEvent::BlockAppended {
                node,
                height,
                digest,
                ..
            } => self.on_block_appended(node, *height, *digest),
            TraceEvent::BlockBody {
                height,
                instance,
                block,
                ..
            } => self.on_block_body(*height, *instance, block),
            TraceEvent::SuperblockDecided {
                node,
                instance,
                digest,
                ..
            } => self.on_superblock(node, *instance, *digest),
            TraceEvent::RbDelivered {
                node,
                instance,
                slot,
                digest,
                ..
            } => self.on_rb_delivered(node, *instance, *slot, *digest),
            TraceEvent::BinDecided {
                node,
                instance,
                slot,
                value,
                ..
            } => self.on_bin_decided(node, *instance, *slot, *value),
            TraceEvent::EpochStarted {
                node,
                epoch,
                start_height,
                members,
                ..
            } => self.on_epoch_started(node, *epoch, *start_height, members),
            TraceEvent::TxAdmitted {
                node, tx, instance, ..
            } => self.on_tx_admitted(node, *tx, *instance),
            _ => {}
        }
    }
}
