//! Proportionality verifier.
//!
//! The criterion: for whole numbers `0 < j <= s <= k`, if strictly more
//! than `j * (n - t) / (k + 1)` of the counted ballots rank the same `s`
//! candidates (in any internal order) at the top, at least `j` of those
//! candidates must be elected.
//!
//! Only subsets that actually head at least one ballot can accumulate
//! support, so exhaustive verification groups ballots by their top-`s`
//! sets instead of walking all `C(m, s)` subsets. Sampled mode draws
//! random `(j, s, subset)` triples for scales where even the grouped scan
//! is unwanted; it draws mostly from observed ballot heads, since a subset
//! nobody ranks on top passes vacuously.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::rng::SimRng;

use super::{Ballot, CandidateId, CommitteeResult, ElectionConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsetMode {
    /// Check every supported subset for every `s <= k`. Exact.
    Exhaustive,
    /// Check `samples` seeded `(j, s, subset)` triples.
    Sampled { samples: u64, seed: u64 },
}

/// A violated instance of the criterion: `support` ballots top-ranked
/// `subset` yet fewer than `group` of its members were elected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProportionalityViolation {
    pub group: u64,
    pub subset_size: u64,
    pub subset: Vec<CandidateId>,
    pub support: u64,
    pub elected_overlap: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProportionalityReport {
    pub pass: bool,
    pub witness: Option<ProportionalityViolation>,
    /// Number of `(j, s, subset)` triples that carried a requirement.
    pub triples_checked: u64,
}

/// Verify a committee against the counted ballots. `ballots` must be the
/// exact `n - t` ballots the count used, in any order.
pub fn check_proportionality(
    ballots: &[Ballot],
    config: &ElectionConfig,
    result: &CommitteeResult,
    mode: SubsetMode,
) -> ProportionalityReport {
    let checker = Checker::new(ballots, config, result);
    match mode {
        SubsetMode::Exhaustive => checker.exhaustive(),
        SubsetMode::Sampled { samples, seed } => checker.sampled(samples, seed),
    }
}

struct Checker<'a> {
    config: &'a ElectionConfig,
    /// Ballot preferences as candidate indices.
    prefs: Vec<Vec<u32>>,
    elected: Vec<bool>,
    quota: BigRational,
}

impl<'a> Checker<'a> {
    fn new(ballots: &'a [Ballot], config: &'a ElectionConfig, result: &CommitteeResult) -> Self {
        let index: BTreeMap<&str, u32> = config
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();
        let prefs = ballots
            .iter()
            .map(|b| b.prefs.iter().map(|p| index[p.as_str()]).collect())
            .collect();
        let mut elected = alloc::vec![false; config.candidates.len()];
        for m in &result.members {
            elected[index[m.as_str()] as usize] = true;
        }
        Checker {
            config,
            prefs,
            elected,
            quota: BigRational::new(
                BigInt::from(config.ballot_threshold()),
                BigInt::from(config.seats + 1),
            ),
        }
    }

    fn top_set(&self, ballot: usize, s: usize) -> Vec<u32> {
        let mut set: Vec<u32> = self.prefs[ballot][..s].to_vec();
        set.sort_unstable();
        set
    }

    /// Largest `j <= s` with `support > j * quota`, or 0 when even `j = 1`
    /// carries no requirement.
    fn max_required(&self, support: u64, s: u64) -> u64 {
        let support = BigRational::from(BigInt::from(support));
        let mut j = 0;
        while j < s {
            let need = &self.quota * BigRational::from(BigInt::from(j + 1));
            if support > need {
                j += 1;
            } else {
                break;
            }
        }
        j
    }

    fn overlap(&self, subset: &[u32]) -> u64 {
        subset.iter().filter(|&&c| self.elected[c as usize]).count() as u64
    }

    fn violation(
        &self,
        subset: &[u32],
        support: u64,
        required: u64,
    ) -> Option<ProportionalityViolation> {
        let overlap = self.overlap(subset);
        if overlap >= required {
            return None;
        }
        Some(ProportionalityViolation {
            group: required,
            subset_size: subset.len() as u64,
            subset: subset
                .iter()
                .map(|&c| self.config.candidates[c as usize].clone())
                .collect(),
            support,
            elected_overlap: overlap,
        })
    }

    fn exhaustive(&self) -> ProportionalityReport {
        let mut triples = 0;
        for s in 1..=self.config.seats as usize {
            let mut support: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
            for b in 0..self.prefs.len() {
                *support.entry(self.top_set(b, s)).or_insert(0) += 1;
            }
            for (subset, count) in &support {
                let required = self.max_required(*count, s as u64);
                triples += required;
                if let Some(w) = self.violation(subset, *count, required) {
                    return ProportionalityReport {
                        pass: false,
                        witness: Some(w),
                        triples_checked: triples,
                    };
                }
            }
        }
        ProportionalityReport {
            pass: true,
            witness: None,
            triples_checked: triples,
        }
    }

    fn sampled(&self, samples: u64, seed: u64) -> ProportionalityReport {
        let mut rng = SimRng::new(seed);
        let m = self.config.candidates.len();
        let k = self.config.seats as usize;
        let mut triples = 0;
        for _ in 0..samples {
            let s = rng.range_usize(1, k + 1);
            // Mostly observed ballot heads; occasionally a uniform subset,
            // which exercises the zero-support vacuous branch.
            let subset: Vec<u32> = if rng.percent(90) {
                let b = rng.range_usize(0, self.prefs.len());
                self.top_set(b, s)
            } else {
                let mut pool: Vec<u32> = (0..m as u32).collect();
                rng.shuffle(&mut pool);
                let mut subset = pool[..s].to_vec();
                subset.sort_unstable();
                subset
            };
            let j = rng.range_u64(1, s as u64 + 1);
            let support = self
                .prefs
                .iter()
                .enumerate()
                .filter(|(b, _)| self.top_set(*b, s) == subset)
                .count() as u64;
            let need = &self.quota * BigRational::from(BigInt::from(j));
            if BigRational::from(BigInt::from(support)) > need {
                triples += 1;
                if let Some(w) = self.violation(&subset, support, j) {
                    return ProportionalityReport {
                        pass: false,
                        witness: Some(w),
                        triples_checked: triples,
                    };
                }
            }
        }
        ProportionalityReport {
            pass: true,
            witness: None,
            triples_checked: triples,
        }
    }
}
