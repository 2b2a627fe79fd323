//! Deterministic discrete-event network and adversary.
//!
//! A scenario plus a seed fully determine a run: the event queue pops in
//! `(time, actor, sequence)` order, every delay and shuffle is drawn from
//! forked streams of one seeded generator, and node state machines touch
//! nothing outside their inputs. Message delays are log-normal (capped)
//! before the stabilization time and bounded after it.

mod engine;
pub mod monitors;
pub mod trace;

pub use engine::run;
pub use monitors::{Monitors, Violation};
pub use trace::{NodeMeta, TraceEvent};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::election::QuotaMode;
use crate::governance::ElectionSchedule;
use crate::ledger::Block;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Epoch-0 committee member: runs consensus, votes in elections.
    Governor,
    /// Registered stand-by node: follows the chain, eligible for election.
    Candidate,
    /// Issues transactions only.
    Client,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub byzantine: bool,
}

/// Scripted byzantine behaviors. They attach only to byzantine-flagged
/// nodes and manipulate that node's own traffic and ballots; forging
/// another node's authentication tag is impossible by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Behavior {
    /// Send nothing to anyone.
    Silent,
    /// Send one proposal to half the committee and a different one to the
    /// rest when reliably broadcasting.
    EquivocateRb,
    /// Tailor binary-consensus votes per receiver: estimates, coordinator
    /// announcements and aux values are flipped for odd committee
    /// positions. Splits correct nodes once the byzantine count passes the
    /// fault bound; used by negative controls.
    EquivocateBin,
    /// Add a fixed delay to every outbound message.
    Delay { ms: u64 },
    /// Vote with a scripted preference order, plus a duplicate ballot to
    /// probe the double-vote guard.
    StuffBallots { prefs: Vec<String> },
    /// Withhold the ballot for a while after the election opens.
    VoteLate { by_ms: u64 },
    /// Drop this percentage of outbound binary-consensus messages.
    DropBinMsgs { percent: u8 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryEntry {
    pub node: String,
    pub behavior: Behavior,
    #[serde(default)]
    pub from_ms: u64,
    #[serde(default)]
    pub to_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    /// Bound on message delay after stabilization, milliseconds.
    #[serde(default = "default_post_gst_max_ms")]
    pub post_gst_max_ms: u64,
    /// Cap on the pre-stabilization log-normal draw, milliseconds.
    #[serde(default = "default_pre_gst_cap_ms")]
    pub pre_gst_cap_ms: u64,
    /// Log-normal location parameter of the pre-stabilization draw.
    #[serde(default = "default_pre_gst_mu")]
    pub pre_gst_mu: f64,
    /// Log-normal scale parameter of the pre-stabilization draw.
    #[serde(default = "default_pre_gst_sigma")]
    pub pre_gst_sigma: f64,
}

fn default_post_gst_max_ms() -> u64 {
    100
}
fn default_pre_gst_cap_ms() -> u64 {
    10_000
}
fn default_pre_gst_mu() -> f64 {
    5.0
}
fn default_pre_gst_sigma() -> f64 {
    1.2
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            post_gst_max_ms: default_post_gst_max_ms(),
            pre_gst_cap_ms: default_pre_gst_cap_ms(),
            pre_gst_mu: default_pre_gst_mu(),
            pre_gst_sigma: default_pre_gst_sigma(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    /// Total client transfers to submit.
    #[serde(default)]
    pub client_txs: u64,
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default = "default_interval_ms")]
    pub interval_ms: u64,
    #[serde(default = "default_amount")]
    pub amount: u64,
}

fn default_interval_ms() -> u64 {
    50
}
fn default_amount() -> u64 {
    1
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            client_txs: 0,
            start_ms: 0,
            interval_ms: default_interval_ms(),
            amount: default_amount(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerParams {
    /// Mempool size that triggers an immediate proposal.
    #[serde(default = "default_proposal_threshold")]
    pub proposal_threshold: usize,
    /// Proposal timer: propose whatever is pending after this long.
    #[serde(default = "default_proposal_timer_ms")]
    pub proposal_timer_ms: u64,
    #[serde(default = "default_batch_cap")]
    pub batch_cap: usize,
    #[serde(default = "default_gas_limit")]
    pub gas_limit: u64,
}

fn default_proposal_threshold() -> usize {
    3
}
fn default_proposal_timer_ms() -> u64 {
    150
}
fn default_batch_cap() -> usize {
    1000
}
fn default_gas_limit() -> u64 {
    30_000_000
}

impl Default for LedgerParams {
    fn default() -> Self {
        LedgerParams {
            proposal_threshold: default_proposal_threshold(),
            proposal_timer_ms: default_proposal_timer_ms(),
            batch_cap: default_batch_cap(),
            gas_limit: default_gas_limit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceParams {
    /// Reconfiguration period in blocks.
    #[serde(default = "default_period")]
    pub x: u64,
    /// Idle no-op period, milliseconds. Zero disables heartbeats.
    #[serde(default = "default_heartbeat_ms")]
    pub heartbeat_ms: u64,
    /// Modeled restart latency between stop and the new committee's start.
    #[serde(default = "default_restart_delay_ms")]
    pub restart_delay_ms: u64,
    /// Election shape per upcoming epoch; the last entry repeats.
    #[serde(default)]
    pub elections: Vec<ElectionSchedule>,
    #[serde(default)]
    pub quota: QuotaMode,
}

fn default_period() -> u64 {
    100
}
fn default_heartbeat_ms() -> u64 {
    200
}
fn default_restart_delay_ms() -> u64 {
    500
}

impl Default for GovernanceParams {
    fn default() -> Self {
        GovernanceParams {
            x: default_period(),
            heartbeat_ms: default_heartbeat_ms(),
            restart_delay_ms: default_restart_delay_ms(),
            elections: Vec::new(),
            quota: QuotaMode::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    /// Simulated horizon in milliseconds; events beyond it do not run.
    pub horizon_ms: u64,
    /// Global stabilization time, milliseconds.
    #[serde(default)]
    pub gst_ms: u64,
    #[serde(default)]
    pub delay: DelayModel,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub adversary: Vec<AdversaryEntry>,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub ledger: LedgerParams,
    #[serde(default)]
    pub governance: GovernanceParams,
    #[serde(default = "default_genesis_balance")]
    pub genesis_balance: u64,
    /// Instances within which an admitted transaction must commit.
    #[serde(default = "default_liveness_bound")]
    pub liveness_bound: u64,
    /// Permit more scripted byzantine governors than the fault bound;
    /// safety monitors are expected to fire. Negative controls only.
    #[serde(default)]
    pub allow_fault_budget_breach: bool,
    /// Per-node chain snapshot cadence in the trace, if any.
    #[serde(default)]
    pub snapshot_interval_ms: Option<u64>,
    /// Hard cap on processed events, a runaway guard.
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn default_genesis_balance() -> u64 {
    1_000
}
fn default_liveness_bound() -> u64 {
    10
}
fn default_max_events() -> u64 {
    50_000_000
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario needs at least one governor")]
    NoGovernors,
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("adversary entry references unknown node {0}")]
    UnknownAdversaryNode(String),
    #[error("adversary entry attaches to non-byzantine node {0}")]
    BehaviorOnCorrectNode(String),
    #[error("{got} byzantine governors exceed the fault bound {bound} (set allow_fault_budget_breach for negative controls)")]
    FaultBudgetExceeded { got: usize, bound: usize },
    #[error("workload set but no client nodes")]
    NoClients,
    #[error("event cap {0} exhausted; scenario is runaway")]
    Runaway(u64),
}

impl Scenario {
    pub fn governors(&self) -> Vec<&NodeSpec> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Governor)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let governors = self.governors();
        if governors.is_empty() {
            return Err(ScenarioError::NoGovernors);
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(ScenarioError::DuplicateNode(n.id.clone()));
            }
        }
        for entry in &self.adversary {
            let Some(node) = self.nodes.iter().find(|n| n.id == entry.node) else {
                return Err(ScenarioError::UnknownAdversaryNode(entry.node.clone()));
            };
            if !node.byzantine {
                return Err(ScenarioError::BehaviorOnCorrectNode(entry.node.clone()));
            }
        }
        let byz_governors = governors.iter().filter(|n| n.byzantine).count();
        let bound = (governors.len() - 1) / 3;
        if byz_governors > bound && !self.allow_fault_budget_breach {
            return Err(ScenarioError::FaultBudgetExceeded {
                got: byz_governors,
                bound,
            });
        }
        if self.workload.client_txs > 0
            && !self.nodes.iter().any(|n| n.role == Role::Client)
        {
            return Err(ScenarioError::NoClients);
        }
        Ok(())
    }
}

/// Reconfiguration record for one completed swap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReconfigRecord {
    pub epoch: u64,
    pub start_height: u64,
    pub committee_size: usize,
    /// First correct node's decision time of the triggering instance.
    pub stop_time_us: u64,
    /// First proposal event of the new epoch.
    pub restart_time_us: Option<u64>,
    pub downtime_us: Option<u64>,
}

/// Per-epoch metrics row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub start_height: u64,
    pub committee_size: usize,
    pub downtime_us: u64,
    pub blocks_in_epoch: u64,
    pub txs_committed: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub blocks: u64,
    pub txs_committed: u64,
    pub epochs_completed: u64,
    pub downtimes_us: Vec<u64>,
    pub events_processed: u64,
    pub final_time_us: u64,
    pub stale_sender_drops: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Vec<TraceEvent>,
    /// Final chain per non-client node id.
    pub chains: BTreeMap<String, Vec<Block>>,
    pub epoch_rows: Vec<EpochRow>,
    pub reconfigs: Vec<ReconfigRecord>,
    pub summary: Summary,
    pub violation: Option<Violation>,
}
