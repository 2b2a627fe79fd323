//! The totally ordered event log a run produces.
//!
//! Replaying the same scenario and seed reproduces the identical sequence,
//! and the offline checker re-runs the safety monitors from nothing else.
//! Times are simulated microseconds. Full block bodies appear once per
//! height (from the first correct node to append); per-node events carry
//! digests only.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codec::Digest32;
use crate::ledger::Block;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub id: String,
    pub role: String,
    pub byzantine: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// First line of every trace: what the checker needs to re-verify it.
    Meta {
        seed: u64,
        gst_us: u64,
        liveness_bound: u64,
        nodes: Vec<NodeMeta>,
        genesis: BTreeMap<String, u64>,
    },
    ClientSubmit {
        t: u64,
        node: String,
        tx: Digest32,
    },
    TxAdmitted {
        t: u64,
        node: String,
        tx: Digest32,
        instance: u64,
    },
    TxRejected {
        t: u64,
        node: String,
        tx: Digest32,
        reason: String,
    },
    ProposalBuilt {
        t: u64,
        node: String,
        instance: u64,
        digest: Digest32,
        txs: u64,
    },
    RbDelivered {
        t: u64,
        node: String,
        instance: u64,
        slot: usize,
        digest: Digest32,
    },
    BinDecided {
        t: u64,
        node: String,
        instance: u64,
        slot: usize,
        value: bool,
    },
    SuperblockDecided {
        t: u64,
        node: String,
        instance: u64,
        digest: Digest32,
        bits: String,
    },
    BlockAppended {
        t: u64,
        node: String,
        height: u64,
        instance: u64,
        digest: Digest32,
    },
    /// Full body, once per height, from the first correct appender.
    BlockBody {
        t: u64,
        height: u64,
        instance: u64,
        block: Block,
    },
    BallotExecuted {
        t: u64,
        node: String,
        tx: Digest32,
        accepted: bool,
        detail: String,
    },
    ElectionDecided {
        t: u64,
        node: String,
        epoch: u64,
        members: Vec<String>,
        rounds: u32,
    },
    EpochStarted {
        t: u64,
        node: String,
        epoch: u64,
        start_height: u64,
        members: Vec<String>,
    },
    ReconfigStop {
        t: u64,
        node: String,
        epoch: u64,
    },
    ReconfigRestart {
        t: u64,
        node: String,
        epoch: u64,
    },
    ChainSnapshot {
        t: u64,
        node: String,
        height: u64,
        tip: Digest32,
    },
    Violation {
        t: u64,
        at_event: u64,
        description: String,
    },
}

impl TraceEvent {
    pub fn time(&self) -> u64 {
        match self {
            TraceEvent::Meta { .. } => 0,
            TraceEvent::ClientSubmit { t, .. }
            | TraceEvent::TxAdmitted { t, .. }
            | TraceEvent::TxRejected { t, .. }
            | TraceEvent::ProposalBuilt { t, .. }
            | TraceEvent::RbDelivered { t, .. }
            | TraceEvent::BinDecided { t, .. }
            | TraceEvent::SuperblockDecided { t, .. }
            | TraceEvent::BlockAppended { t, .. }
            | TraceEvent::BlockBody { t, .. }
            | TraceEvent::BallotExecuted { t, .. }
            | TraceEvent::ElectionDecided { t, .. }
            | TraceEvent::EpochStarted { t, .. }
            | TraceEvent::ReconfigStop { t, .. }
            | TraceEvent::ReconfigRestart { t, .. }
            | TraceEvent::ChainSnapshot { t, .. }
            | TraceEvent::Violation { t, .. } => *t,
        }
    }
}
