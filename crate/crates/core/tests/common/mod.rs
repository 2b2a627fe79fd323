//! Independent reference tally used to derive and freeze expected values.
//!
//! Deliberately written against a flat index layout with per-candidate
//! ballot scans, sharing no code with the library engine. Both follow the
//! same counting rules: elect strict quota crossers in candidate order,
//! split excess equally over the ballots leaving a winner, eliminate the
//! least-vote standing candidate (smallest identifier on ties), stop when
//! standing candidates equal the seat count, fill from ballots in arrival
//! order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

pub struct OracleOutcome {
    pub members: Vec<String>,
    pub rounds: u32,
}

fn rat(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Count `ballots` (each a full ranking, as indices into `candidates`)
/// against the quota `counted / (seats + 1)`.
pub fn oracle_count(candidates: &[String], ballots: &[Vec<usize>], seats: usize) -> OracleOutcome {
    let m = candidates.len();
    let quota = rat(ballots.len() as u64, seats as u64 + 1);

    const STANDING: u8 = 0;
    const ELECTED: u8 = 1;
    const ELIMINATED: u8 = 2;
    let mut status = vec![STANDING; m];
    let mut votes = vec![BigRational::zero(); m];
    let mut ptr: Vec<Option<usize>> = vec![Some(0); ballots.len()];
    let mut elected_order: Vec<usize> = Vec::new();
    let mut eliminated = 0usize;
    let mut rounds = 0u32;

    for b in ballots {
        votes[b[0]] += rat(1, 1);
    }

    let advance = |b: &[usize], from: usize, status: &[u8]| -> Option<usize> {
        b[from + 1..]
            .iter()
            .position(|&c| status[c] == STANDING)
            .map(|off| from + 1 + off)
    };

    while elected_order.len() < seats && m - eliminated != seats {
        rounds += 1;
        let crossers: Vec<usize> = (0..m)
            .filter(|&c| status[c] == STANDING && votes[c] > quota)
            .collect();
        if !crossers.is_empty() {
            for &c in &crossers {
                status[c] = ELECTED;
                elected_order.push(c);
            }
            for &c in &crossers {
                let excess = &votes[c] - &quota;
                votes[c] = quota.clone();
                let resting: Vec<usize> = (0..ballots.len())
                    .filter(|&b| ptr[b].is_some_and(|p| ballots[b][p] == c))
                    .collect();
                let leaving = resting.len() as u64;
                let mut gains: Vec<(usize, u64)> = Vec::new();
                for &b in &resting {
                    match advance(&ballots[b], ptr[b].unwrap(), &status) {
                        Some(p) => {
                            ptr[b] = Some(p);
                            let dest = ballots[b][p];
                            match gains.iter_mut().find(|(d, _)| *d == dest) {
                                Some((_, n)) => *n += 1,
                                None => gains.push((dest, 1)),
                            }
                        }
                        None => ptr[b] = None,
                    }
                }
                for (dest, n) in gains {
                    votes[dest] += &excess * rat(n, leaving);
                }
            }
        } else {
            let weakest = (0..m)
                .filter(|&c| status[c] == STANDING)
                .min_by(|&a, &b| {
                    votes[a]
                        .cmp(&votes[b])
                        .then_with(|| candidates[a].cmp(&candidates[b]))
                })
                .expect("no standing candidate to eliminate");
            status[weakest] = ELIMINATED;
            eliminated += 1;
            let mass = std::mem::replace(&mut votes[weakest], BigRational::zero());
            let resting: Vec<usize> = (0..ballots.len())
                .filter(|&b| ptr[b].is_some_and(|p| ballots[b][p] == weakest))
                .collect();
            let leaving = resting.len() as u64;
            let mut gains: Vec<(usize, u64)> = Vec::new();
            for &b in &resting {
                match advance(&ballots[b], ptr[b].unwrap(), &status) {
                    Some(p) => {
                        ptr[b] = Some(p);
                        let dest = ballots[b][p];
                        match gains.iter_mut().find(|(d, _)| *d == dest) {
                            Some((_, n)) => *n += 1,
                            None => gains.push((dest, 1)),
                        }
                    }
                    None => ptr[b] = None,
                }
            }
            for (dest, n) in gains {
                votes[dest] += &mass * rat(n, leaving);
            }
        }
    }

    for b in ballots {
        for &c in b {
            if elected_order.len() >= seats {
                break;
            }
            if status[c] == STANDING {
                status[c] = ELECTED;
                elected_order.push(c);
            }
        }
        if elected_order.len() >= seats {
            break;
        }
    }

    OracleOutcome {
        members: elected_order
            .into_iter()
            .map(|c| candidates[c].clone())
            .collect(),
        rounds,
    }
}
