//! Epoch management: trigger an election every `x` blocks, route ballot
//! transactions into it, and emit the committee swap once the threshold
//! ballot commits.
//!
//! The state here is part of the replicated state machine: every node
//! mutates it only from executed blocks, so all correct nodes observe the
//! same election lifecycle at the same heights. The swap itself (stop,
//! reconfigure peers, restart) is carried out by the node runtime after
//! the triggering instance finishes executing.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::election::{
    Ballot, CastOutcome, CommitteeResult, ConfigError, Election, ElectionConfig, QuotaMode,
};

/// A node as the governance layer sees it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeIdentity {
    /// Opaque verification key; unique across the universe of nodes and
    /// doubling as the account identifier.
    pub public_key: String,
    /// Network identifier (a simulated address).
    pub net_id: String,
}

/// The governor set in force for a span of blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitteeEpoch {
    pub epoch: u64,
    pub members: Vec<NodeIdentity>,
    /// Chain height at which this committee took effect.
    pub start_height: u64,
    /// Reconfiguration period in blocks.
    pub period: u64,
}

/// Election shape for one upcoming epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionSchedule {
    /// Committee size to elect (`k`).
    pub seats: u64,
    /// Fault bound among the voters (`t`).
    pub fault_bound: u64,
    /// Number of candidates to stand (`m`).
    pub candidates: u64,
}

/// What became of a ballot transaction during execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BallotDisposition {
    /// The transaction was not a ballot at all.
    NotABallot,
    /// Stored; the count has not started.
    Accepted,
    /// Refused with a reason (malformed, duplicate voter, not a voter,
    /// no election open, election already decided).
    Refused(String),
    /// This ballot crossed the threshold and the committee was emitted.
    Decided(CommitteeResult),
}

#[derive(Clone, Debug)]
struct OpenElection {
    /// The epoch this election selects (current + 1).
    for_epoch: u64,
    election: Election,
    voters: BTreeSet<String>,
}

/// A committee emission awaiting the end of its consensus instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingReconfig {
    pub epoch: u64,
    pub members: Vec<NodeIdentity>,
    /// Height of the block whose execution crossed the ballot threshold.
    pub emit_height: u64,
}

#[derive(Clone, Debug)]
pub struct GovernanceState {
    enabled: bool,
    epoch: u64,
    committee: Vec<NodeIdentity>,
    epoch_start_height: u64,
    period: u64,
    quota_mode: QuotaMode,
    /// All registered identities eligible to stand, in registration order.
    candidate_pool: Vec<NodeIdentity>,
    schedule: Vec<ElectionSchedule>,
    elections_held: usize,
    last_height: u64,
    open: Option<OpenElection>,
    pending: Option<PendingReconfig>,
    /// Set when a scheduled election cannot be configured; the simulator
    /// treats this as a scenario defect and aborts.
    poisoned: Option<ConfigError>,
}

impl GovernanceState {
    pub fn new(
        committee: Vec<NodeIdentity>,
        candidate_pool: Vec<NodeIdentity>,
        period: u64,
        schedule: Vec<ElectionSchedule>,
        quota_mode: QuotaMode,
    ) -> Self {
        GovernanceState {
            enabled: true,
            epoch: 0,
            committee,
            epoch_start_height: 0,
            period,
            quota_mode,
            candidate_pool,
            schedule,
            elections_held: 0,
            last_height: 0,
            open: None,
            pending: None,
            poisoned: None,
        }
    }

    /// Governance turned off: ballots are refused, no triggers fire.
    /// Standalone ledger use.
    pub fn disabled() -> Self {
        GovernanceState {
            enabled: false,
            epoch: 0,
            committee: Vec::new(),
            epoch_start_height: 0,
            period: 0,
            quota_mode: QuotaMode::Exact,
            candidate_pool: Vec::new(),
            schedule: Vec::new(),
            elections_held: 0,
            last_height: 0,
            open: None,
            pending: None,
            poisoned: None,
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn committee(&self) -> &[NodeIdentity] {
        &self.committee
    }

    pub fn committee_keys(&self) -> Vec<String> {
        self.committee.iter().map(|n| n.public_key.clone()).collect()
    }

    pub fn is_member(&self, public_key: &str) -> bool {
        self.committee.iter().any(|n| n.public_key == public_key)
    }

    pub fn member_slot(&self, public_key: &str) -> Option<usize> {
        self.committee.iter().position(|n| n.public_key == public_key)
    }

    pub fn epoch_start_height(&self) -> u64 {
        self.epoch_start_height
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn election_open(&self) -> bool {
        self.open.is_some()
    }

    /// The epoch being elected and the candidate identifiers, if an
    /// election is collecting ballots.
    pub fn open_election_info(&self) -> Option<(u64, Vec<String>)> {
        self.open
            .as_ref()
            .map(|o| (o.for_epoch, o.election.config().candidates.clone()))
    }

    pub fn pending(&self) -> Option<&PendingReconfig> {
        self.pending.as_ref()
    }

    pub fn poisoned(&self) -> Option<&ConfigError> {
        self.poisoned.as_ref()
    }

    /// True iff this height starts a reconfiguration: `h > 0` and
    /// `h mod x = 0`.
    pub fn epoch_trigger(&self, height: u64) -> bool {
        self.enabled && height > 0 && height % self.period == 0
    }

    /// Candidates for the next election: the first `m` registered
    /// identities that are not current committee members. Keeps the
    /// candidate set disjoint from the voter set.
    pub fn next_candidates(&self, m: u64) -> Vec<NodeIdentity> {
        let members: BTreeSet<&str> =
            self.committee.iter().map(|n| n.public_key.as_str()).collect();
        self.candidate_pool
            .iter()
            .filter(|n| !members.contains(n.public_key.as_str()))
            .take(m as usize)
            .cloned()
            .collect()
    }

    fn schedule_for(&self, index: usize) -> Option<ElectionSchedule> {
        self.schedule
            .get(index)
            .or_else(|| self.schedule.last())
            .copied()
    }

    /// Ledger hook, called as each block is appended during execution.
    pub fn on_block_appended(&mut self, height: u64) {
        self.last_height = height;
        if !self.epoch_trigger(height) {
            return;
        }
        // One election at a time: a trigger passing while a prior election
        // is still collecting (or its swap is pending) is skipped; the next
        // multiple of x will fire again.
        if self.open.is_some() || self.pending.is_some() || self.poisoned.is_some() {
            return;
        }
        let Some(params) = self.schedule_for(self.elections_held) else {
            return;
        };
        let candidates = self.next_candidates(params.candidates);
        let mut config = ElectionConfig::new(
            self.committee.len() as u64,
            params.fault_bound,
            params.seats,
            candidates.iter().map(|n| n.public_key.clone()).collect(),
        );
        config.quota_mode = self.quota_mode;
        match Election::new(config) {
            Ok(election) => {
                self.open = Some(OpenElection {
                    for_epoch: self.epoch + 1,
                    election,
                    voters: self
                        .committee
                        .iter()
                        .map(|n| n.public_key.clone())
                        .collect(),
                });
            }
            Err(err) => self.poisoned = Some(err),
        }
    }

    /// Ledger hook for an executed ballot transaction.
    pub fn cast_ballot(&mut self, ballot: Ballot) -> BallotDisposition {
        let Some(open) = self.open.as_mut() else {
            return BallotDisposition::Refused("no election open".to_string());
        };
        if !open.voters.contains(&ballot.voter) {
            return BallotDisposition::Refused("not an eligible voter".to_string());
        }
        match open.election.cast_ballot(ballot) {
            Ok(CastOutcome::Accepted { .. }) => BallotDisposition::Accepted,
            Ok(CastOutcome::Decided(result)) => {
                let for_epoch = open.for_epoch;
                let members = result
                    .members
                    .iter()
                    .map(|pk| {
                        self.candidate_pool
                            .iter()
                            .find(|n| &n.public_key == pk)
                            .expect("elected candidate came from the pool")
                            .clone()
                    })
                    .collect();
                self.open = None;
                self.elections_held += 1;
                // The emitting block is the one being built right now.
                self.pending = Some(PendingReconfig {
                    epoch: for_epoch,
                    members,
                    emit_height: self.last_height + 1,
                });
                BallotDisposition::Decided(result)
            }
            Err(err) => BallotDisposition::Refused(err.to_string()),
        }
    }

    /// Apply the pending swap once the triggering instance has fully
    /// executed. Returns the new epoch descriptor.
    pub fn complete_reconfig(&mut self, at_height: u64) -> Option<CommitteeEpoch> {
        let pending = self.pending.take()?;
        self.epoch = pending.epoch;
        self.committee = pending.members;
        self.epoch_start_height = at_height;
        Some(CommitteeEpoch {
            epoch: self.epoch,
            members: self.committee.clone(),
            start_height: at_height,
            period: self.period,
        })
    }
}
