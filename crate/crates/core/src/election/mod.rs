//! Threshold-triggered single transferable vote with a fault-tolerant quota.
//!
//! `n` registered voters rank all `m` candidates; the count starts as soon
//! as `n - t` distinct well-formed ballots have been stored, where `t`
//! bounds the number of byzantine voters (`3t < n`). Candidates are elected
//! against the quota `(n - t) / (k + 1)` held as an exact rational, so
//! every transfer, comparison and tie-break is platform-independent and
//! replayable.
//!
//! Each counting round has two phases. Phase A elects every candidate
//! whose total strictly exceeds the quota (processed in candidate-list
//! order), clamps the winner to the quota and splits the excess equally
//! across the ballots resting on the winner, each share following its
//! ballot to the next standing preference. Phase B runs only when phase A
//! elected nobody: the standing candidate with the least votes (ties broken
//! by smallest identifier in byte order) is eliminated and its full mass is
//! transferred the same way. When the standing pool shrinks to `k`, the
//! remaining seats are filled by scanning ballots in arrival order,
//! preferences in ranked order.

mod classic;
mod proportional;

pub use classic::classic_stv;
pub use proportional::{
    check_proportionality, ProportionalityReport, ProportionalityViolation, SubsetMode,
};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// Opaque candidate identifier. Ordered byte-wise, which is the documented
/// elimination tie-break order.
pub type CandidateId = String;
/// Opaque voter identifier.
pub type VoterId = String;

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// How the election quota is computed from `n - t` and `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuotaMode {
    /// `(n - t) / (k + 1)` as an exact rational, compared strictly.
    #[default]
    Exact,
    /// `floor((n - t) / (k + 1))`, compared strictly. Reproduces integer
    /// tallies that round the quota down; diverges from `Exact` once
    /// fractional transfers matter.
    Floored,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionConfig {
    /// Number of eligible voters (`n`).
    pub voters: u64,
    /// Upper bound on byzantine voters (`t`), `3t < n`.
    pub byzantine_bound: u64,
    /// Target committee size (`k`).
    pub seats: u64,
    /// Candidate identifiers, in processing order. `k < m <= n`.
    pub candidates: Vec<CandidateId>,
    #[serde(default)]
    pub quota_mode: QuotaMode,
}

impl ElectionConfig {
    pub fn new(voters: u64, byzantine_bound: u64, seats: u64, candidates: Vec<CandidateId>) -> Self {
        ElectionConfig {
            voters,
            byzantine_bound,
            seats,
            candidates,
            quota_mode: QuotaMode::Exact,
        }
    }

    /// Ballots required before the count starts: `n - t`.
    pub fn ballot_threshold(&self) -> u64 {
        self.voters - self.byzantine_bound
    }

    /// The election quota under the configured mode.
    pub fn quota(&self) -> BigRational {
        let exact = ratio(self.ballot_threshold(), self.seats + 1);
        match self.quota_mode {
            QuotaMode::Exact => exact,
            QuotaMode::Floored => exact.floor(),
        }
    }

    /// Classic quota `n / (k + 1)`: what the count would use if all `n`
    /// ballots could be awaited. Reference tallies only.
    pub fn droop_quota(&self) -> BigRational {
        ratio(self.voters, self.seats + 1)
    }

    /// Historic quota `n / k`. Documented for completeness, unused by the
    /// count: it over-weights majorities.
    pub fn hare_quota(&self) -> BigRational {
        ratio(self.voters, self.seats)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if 3 * self.byzantine_bound >= self.voters {
            return Err(ConfigError::FaultBoundTooLarge {
                voters: self.voters,
                byzantine_bound: self.byzantine_bound,
            });
        }
        let m = self.candidates.len() as u64;
        if self.seats == 0 || self.seats >= m {
            return Err(ConfigError::SeatsOutOfRange { seats: self.seats, candidates: m });
        }
        if m > self.voters {
            return Err(ConfigError::TooManyCandidates { candidates: m, voters: self.voters });
        }
        let distinct: BTreeSet<&str> = self.candidates.iter().map(String::as_str).collect();
        if distinct.len() != self.candidates.len() {
            return Err(ConfigError::DuplicateCandidate);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("fault bound too large: need 3t < n, got t={byzantine_bound} n={voters}")]
    FaultBoundTooLarge { voters: u64, byzantine_bound: u64 },
    #[error("seats must satisfy 0 < k < m, got k={seats} m={candidates}")]
    SeatsOutOfRange { seats: u64, candidates: u64 },
    #[error("more candidates than voters: m={candidates} n={voters}")]
    TooManyCandidates { candidates: u64, voters: u64 },
    #[error("duplicate candidate identifier")]
    DuplicateCandidate,
}

/// An ordinal ballot: a full ranking of all `m` candidates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: VoterId,
    pub prefs: Vec<CandidateId>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BallotError {
    #[error("ballot must rank every candidate exactly once")]
    IncompleteRanking,
    #[error("duplicated preference: {0}")]
    DuplicatePreference(CandidateId),
    #[error("unknown candidate: {0}")]
    UnknownCandidate(CandidateId),
    #[error("voter {0} appears among the candidates")]
    SelfVote(VoterId),
    #[error("voter {0} already cast a ballot")]
    DuplicateVoter(VoterId),
    #[error("election is not collecting ballots")]
    NotCollecting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collecting,
    Counting,
    Done,
}

/// The emitted committee.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitteeResult {
    /// Elected candidates in election order: quota winners first, then
    /// fill-rule winners.
    pub members: Vec<CandidateId>,
    pub rounds_used: u32,
    pub ballots_counted: u64,
}

/// Outcome of storing one ballot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CastOutcome {
    /// Ballot stored; `stored` ballots held, threshold not yet reached.
    Accepted { stored: u64 },
    /// This ballot reached the threshold and the count ran to completion.
    Decided(CommitteeResult),
}

/// What a single counting round did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub elected: Vec<CandidateId>,
    pub eliminated: Option<CandidateId>,
}

#[derive(Clone, Debug)]
struct BallotSlot {
    prefs: Vec<u32>,
    /// Index into `prefs`; `None` once exhausted.
    pointer: Option<usize>,
}

/// The election state machine. All transitions are deterministic functions
/// of the stored state and the next input.
#[derive(Clone, Debug)]
pub struct Election {
    config: ElectionConfig,
    index: BTreeMap<CandidateId, u32>,
    ballots: Vec<Ballot>,
    slots: Vec<BallotSlot>,
    voters_seen: BTreeSet<VoterId>,
    /// Current vote total per candidate (by candidate index).
    votes: Vec<BigRational>,
    /// Elected, in order. Quota winners during counting; fill winners after.
    elected: Vec<u32>,
    elected_set: Vec<bool>,
    eliminated_set: Vec<bool>,
    eliminated_count: usize,
    /// Candidates whose excess is pending transfer in the current round.
    excess_pending: Vec<u32>,
    exhausted: BigRational,
    quota: BigRational,
    round: u32,
    phase: Phase,
}

impl Election {
    pub fn new(config: ElectionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let m = config.candidates.len();
        let index = config
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();
        let quota = config.quota();
        Ok(Election {
            config,
            index,
            ballots: Vec::new(),
            slots: Vec::new(),
            voters_seen: BTreeSet::new(),
            votes: alloc::vec![BigRational::zero(); m],
            elected: Vec::new(),
            elected_set: alloc::vec![false; m],
            eliminated_set: alloc::vec![false; m],
            eliminated_count: 0,
            excess_pending: Vec::new(),
            exhausted: BigRational::zero(),
            quota,
            round: 0,
            phase: Phase::Collecting,
        })
    }

    pub fn config(&self) -> &ElectionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn ballots_stored(&self) -> u64 {
        self.ballots.len() as u64
    }

    pub fn has_voted(&self, voter: &str) -> bool {
        self.voters_seen.contains(voter)
    }

    /// Current vote total of a candidate.
    pub fn votes_for(&self, candidate: &str) -> Option<&BigRational> {
        self.index.get(candidate).map(|&i| &self.votes[i as usize])
    }

    pub fn elected(&self) -> Vec<CandidateId> {
        self.elected
            .iter()
            .map(|&i| self.config.candidates[i as usize].clone())
            .collect()
    }

    pub fn eliminated(&self) -> BTreeSet<CandidateId> {
        self.config
            .candidates
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.eliminated_set[i])
            .map(|(_, c)| c.clone())
            .collect()
    }

    /// Retired vote mass from exhausted ballots.
    pub fn exhausted_mass(&self) -> &BigRational {
        &self.exhausted
    }

    fn well_formed(&self, ballot: &Ballot) -> Result<Vec<u32>, BallotError> {
        if self.index.contains_key(&ballot.voter) {
            return Err(BallotError::SelfVote(ballot.voter.clone()));
        }
        if ballot.prefs.len() != self.config.candidates.len() {
            // Duplicates inside a short list are worth naming precisely:
            // a repeated entry is a different voter bug than a truncation.
            let mut seen = BTreeSet::new();
            for p in &ballot.prefs {
                if !seen.insert(p.as_str()) {
                    return Err(BallotError::DuplicatePreference(p.clone()));
                }
            }
            return Err(BallotError::IncompleteRanking);
        }
        let mut seen = alloc::vec![false; self.config.candidates.len()];
        let mut prefs = Vec::with_capacity(ballot.prefs.len());
        for p in &ballot.prefs {
            let &i = self
                .index
                .get(p)
                .ok_or_else(|| BallotError::UnknownCandidate(p.clone()))?;
            if seen[i as usize] {
                return Err(BallotError::DuplicatePreference(p.clone()));
            }
            seen[i as usize] = true;
            prefs.push(i);
        }
        Ok(prefs)
    }

    /// Store one ballot without triggering the count. Used by drivers that
    /// step rounds by hand; `cast_ballot` is the normal entry point.
    pub fn store_ballot(&mut self, ballot: Ballot) -> Result<u64, BallotError> {
        if self.phase != Phase::Collecting
            || self.ballots.len() as u64 == self.config.ballot_threshold()
        {
            return Err(BallotError::NotCollecting);
        }
        let prefs = self.well_formed(&ballot)?;
        if self.voters_seen.contains(&ballot.voter) {
            return Err(BallotError::DuplicateVoter(ballot.voter.clone()));
        }
        self.voters_seen.insert(ballot.voter.clone());
        self.ballots.push(ballot);
        self.slots.push(BallotSlot {
            prefs,
            pointer: Some(0),
        });
        Ok(self.ballots.len() as u64)
    }

    /// Store one ballot. Malformed or duplicate-voter ballots are rejected
    /// and leave the state untouched. Storing the `n - t`-th distinct-voter
    /// ballot runs the count immediately and returns the committee.
    pub fn cast_ballot(&mut self, ballot: Ballot) -> Result<CastOutcome, BallotError> {
        let stored = self.store_ballot(ballot)?;
        if stored == self.config.ballot_threshold() {
            let result = self.change_committee();
            return Ok(CastOutcome::Decided(result));
        }
        Ok(CastOutcome::Accepted { stored })
    }

    fn standing(&self, i: u32) -> bool {
        !self.elected_set[i as usize] && !self.eliminated_set[i as usize]
    }

    /// First-preference count. Requires exactly `n - t` stored ballots.
    pub fn start_count(&mut self) {
        assert_eq!(self.phase, Phase::Collecting, "count already started");
        assert_eq!(
            self.ballots.len() as u64,
            self.config.ballot_threshold(),
            "count started off-threshold"
        );
        self.phase = Phase::Counting;
        for slot in &self.slots {
            self.votes[slot.prefs[0] as usize] += BigRational::from(BigInt::from(1));
        }
    }

    /// Run the count to completion. Starts it if the caller has not already
    /// stepped rounds by hand.
    pub fn change_committee(&mut self) -> CommitteeResult {
        if self.phase == Phase::Collecting {
            self.start_count();
        }
        assert_eq!(self.phase, Phase::Counting, "count already finished");
        let k = self.config.seats as usize;
        let m = self.config.candidates.len();
        loop {
            if self.elected.len() >= k || m - self.eliminated_count == k {
                break;
            }
            self.stv_round();
        }
        // Fill rule: scan ballots in arrival order, preferences in ranked
        // order, seating any standing candidate until the committee is full.
        for slot_idx in 0..self.slots.len() {
            if self.elected.len() >= k {
                break;
            }
            for p in 0..self.slots[slot_idx].prefs.len() {
                if self.elected.len() >= k {
                    break;
                }
                let c = self.slots[slot_idx].prefs[p];
                if self.standing(c) {
                    self.elected.push(c);
                    self.elected_set[c as usize] = true;
                }
            }
        }
        debug_assert_eq!(self.elected.len(), k);
        self.phase = Phase::Done;
        CommitteeResult {
            members: self.elected(),
            rounds_used: self.round,
            ballots_counted: self.ballots.len() as u64,
        }
    }

    /// One counting round: phase A elects every quota crosser and transfers
    /// the excess; phase B (only if phase A elected nobody) eliminates the
    /// weakest standing candidate and transfers its full mass.
    pub fn stv_round(&mut self) -> RoundOutcome {
        assert_eq!(self.phase, Phase::Counting, "round outside the count");
        self.round += 1;
        let mut outcome = RoundOutcome {
            elected: Vec::new(),
            eliminated: None,
        };

        // Phase A: in candidate order, elect all crossers before moving any
        // ballot, so a transfer cannot create a second crossing mid-phase.
        let m = self.config.candidates.len();
        let mut excess: BTreeMap<u32, BigRational> = BTreeMap::new();
        for i in 0..m as u32 {
            if self.standing(i) && self.votes[i as usize] > self.quota {
                self.elected.push(i);
                self.elected_set[i as usize] = true;
                self.excess_pending.push(i);
                let x = &self.votes[i as usize] - &self.quota;
                self.votes[i as usize] = self.quota.clone();
                excess.insert(i, x);
                outcome
                    .elected
                    .push(self.config.candidates[i as usize].clone());
            }
        }

        if !excess.is_empty() {
            self.transfer(&excess);
        } else {
            // Phase B: least votes among standing candidates; ties broken by
            // smallest identifier, which is candidate-list-independent.
            let mut weakest: Option<u32> = None;
            for i in 0..m as u32 {
                if !self.standing(i) {
                    continue;
                }
                weakest = Some(match weakest {
                    None => i,
                    Some(w) => {
                        let vi = &self.votes[i as usize];
                        let vw = &self.votes[w as usize];
                        if vi < vw
                            || (vi == vw
                                && self.config.candidates[i as usize]
                                    < self.config.candidates[w as usize])
                        {
                            i
                        } else {
                            w
                        }
                    }
                });
            }
            let e = weakest.expect("phase B with no standing candidates");
            self.eliminated_set[e as usize] = true;
            self.eliminated_count += 1;
            let mass = core::mem::replace(&mut self.votes[e as usize], BigRational::zero());
            let mut transfer = BTreeMap::new();
            transfer.insert(e, mass);
            self.transfer(&transfer);
            outcome.eliminated = Some(self.config.candidates[e as usize].clone());
        }

        self.excess_pending.clear();
        outcome
    }

    /// Move every ballot resting on a source candidate to its next standing
    /// preference and distribute the source's pending mass equally across
    /// the ballots that left it. A ballot with no standing preference left
    /// exhausts and its share is retired.
    fn transfer(&mut self, pending: &BTreeMap<u32, BigRational>) {
        let mut leaving: BTreeMap<u32, u64> = BTreeMap::new();
        let mut arriving: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        let mut exhausted_from: BTreeMap<u32, u64> = BTreeMap::new();
        for slot in &mut self.slots {
            let Some(ptr) = slot.pointer else { continue };
            let source = slot.prefs[ptr];
            if !pending.contains_key(&source) {
                continue;
            }
            *leaving.entry(source).or_insert(0) += 1;
            let next = slot.prefs[ptr + 1..]
                .iter()
                .position(|&c| !self.elected_set[c as usize] && !self.eliminated_set[c as usize]);
            match next {
                Some(off) => {
                    slot.pointer = Some(ptr + 1 + off);
                    let dest = slot.prefs[ptr + 1 + off];
                    *arriving.entry((source, dest)).or_insert(0) += 1;
                }
                None => {
                    slot.pointer = None;
                    *exhausted_from.entry(source).or_insert(0) += 1;
                }
            }
        }
        for ((source, dest), count) in &arriving {
            let share = &pending[source] * ratio(*count, leaving[source]);
            self.votes[*dest as usize] += share;
        }
        for (source, count) in &exhausted_from {
            self.exhausted += &pending[source] * ratio(*count, leaving[source]);
        }
        // Mass on a source no ballot rests on can only be zero (every unit
        // of a candidate's total was carried there by some resting ballot).
        for (source, mass) in pending {
            if !leaving.contains_key(source) {
                debug_assert!(mass.is_zero());
                self.exhausted += mass;
            }
        }
    }

    /// Conservation ledger: live mass on standing candidates, quota mass
    /// locked by elected candidates, and retired mass. Sums to the ballots
    /// counted at every round boundary.
    pub fn mass_ledger(&self) -> (BigRational, BigRational, BigRational) {
        let mut live = BigRational::zero();
        let mut locked = BigRational::zero();
        for (i, v) in self.votes.iter().enumerate() {
            if self.elected_set[i] {
                locked += v;
            } else if !self.eliminated_set[i] {
                live += v;
            }
        }
        (live, locked, self.exhausted.clone())
    }
}
