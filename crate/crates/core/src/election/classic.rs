//! Classic-quota reference tally.
//!
//! Same round structure as the fault-tolerant count, but waiting for all
//! `n` ballots and electing against `n / (k + 1)`. With `t = 0` the two
//! are the same computation; this entry point exists for equivalence
//! testing and the `--oracle` verification path.

use alloc::vec::Vec;

use super::{
    Ballot, BallotError, CandidateId, CastOutcome, CommitteeResult, ConfigError, Election,
    ElectionConfig,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClassicStvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("ballot {index}: {source}")]
    Ballot { index: usize, source: BallotError },
    #[error("expected exactly {expected} ballots, got {got}")]
    WrongBallotCount { expected: u64, got: u64 },
}

/// Tally exactly `n` well-formed ballots against the classic quota.
pub fn classic_stv(
    ballots: &[Ballot],
    voters: u64,
    seats: u64,
    candidates: Vec<CandidateId>,
) -> Result<CommitteeResult, ClassicStvError> {
    if ballots.len() as u64 != voters {
        return Err(ClassicStvError::WrongBallotCount {
            expected: voters,
            got: ballots.len() as u64,
        });
    }
    // t = 0 makes the threshold n and the quota n / (k + 1).
    let config = ElectionConfig::new(voters, 0, seats, candidates);
    let mut election = Election::new(config)?;
    for (index, ballot) in ballots.iter().enumerate() {
        match election.cast_ballot(ballot.clone()) {
            Ok(CastOutcome::Decided(result)) => return Ok(result),
            Ok(CastOutcome::Accepted { .. }) => {}
            Err(source) => return Err(ClassicStvError::Ballot { index, source }),
        }
    }
    unreachable!("casting n well-formed ballots always decides")
}
