//! Election fixtures with oracle-derived expectations, plus the
//! classic-quota equivalence and the non-dictatorship construction.

mod common;

use govsim_core::election::{
    check_proportionality, classic_stv, Ballot, CastOutcome, CommitteeResult, Election,
    ElectionConfig, SubsetMode,
};
use govsim_core::rng::SimRng;

fn cands(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn run_election(
    n: u64,
    t: u64,
    k: u64,
    candidates: &[String],
    prefs: &[Vec<String>],
) -> (CommitteeResult, Vec<Ballot>) {
    let mut e = Election::new(ElectionConfig::new(n, t, k, candidates.to_vec())).unwrap();
    let mut cast = Vec::new();
    let mut result = None;
    for (i, p) in prefs.iter().enumerate() {
        let b = Ballot {
            voter: format!("voter-{i}"),
            prefs: p.clone(),
        };
        cast.push(b.clone());
        match e.cast_ballot(b).unwrap() {
            CastOutcome::Decided(r) => {
                result = Some(r);
                break;
            }
            CastOutcome::Accepted { .. } => {}
        }
    }
    (result.expect("threshold never reached"), cast)
}

fn to_indexed(candidates: &[String], prefs: &[Vec<String>]) -> Vec<Vec<usize>> {
    prefs
        .iter()
        .map(|p| {
            p.iter()
                .map(|c| candidates.iter().position(|x| x == c).unwrap())
                .collect()
        })
        .collect()
}

/// Random full rankings for `count` voters over `candidates`.
fn random_prefs(rng: &mut SimRng, candidates: &[String], count: usize) -> Vec<Vec<String>> {
    (0..count)
        .map(|_| {
            let mut p = candidates.to_vec();
            rng.shuffle(&mut p);
            p
        })
        .collect()
}

#[test]
fn five_ballot_two_seat_fixture_matches_oracle() {
    // Frozen from the reference tally: A crosses 5/3 with excess 1/3 split
    // to B and C, D is eliminated into C, C crosses. Committee {A, C}.
    let candidates = cands(&["A", "B", "C", "D"]);
    let prefs: Vec<Vec<String>> = [
        ["A", "B", "C", "D"],
        ["A", "C", "B", "D"],
        ["B", "A", "C", "D"],
        ["C", "D", "B", "A"],
        ["D", "C", "B", "A"],
    ]
    .iter()
    .map(|p| cands(p.as_slice()))
    .collect();
    let (result, _) = run_election(5, 0, 2, &candidates, &prefs);
    assert_eq!(result.members, cands(&["A", "C"]));

    let oracle = common::oracle_count(&candidates, &to_indexed(&candidates, &prefs), 2);
    assert_eq!(result.members, oracle.members);
    assert_eq!(result.rounds_used, oracle.rounds);
}

#[test]
fn single_elimination_fixture() {
    // Firsts A=2, B=2, C=1 against quota 5/2: C is eliminated, its ballot
    // lifts A over the quota.
    let candidates = cands(&["A", "B", "C"]);
    let prefs: Vec<Vec<String>> = [
        ["A", "B", "C"],
        ["A", "C", "B"],
        ["B", "A", "C"],
        ["B", "C", "A"],
        ["C", "A", "B"],
    ]
    .iter()
    .map(|p| cands(p.as_slice()))
    .collect();
    let (result, _) = run_election(5, 0, 1, &candidates, &prefs);
    assert_eq!(result.members, cands(&["A"]));
    let oracle = common::oracle_count(&candidates, &to_indexed(&candidates, &prefs), 1);
    assert_eq!(result.members, oracle.members);
}

#[test]
fn randomized_instances_match_oracle() {
    let mut rng = SimRng::new(0x5eed_0001);
    for case in 0..300 {
        let n = rng.range_u64(4, 16);
        let t = rng.range_u64(0, (n - 1) / 3 + 1);
        let m = rng.range_u64(2, n.min(8) + 1).max(2);
        let k = rng.range_u64(1, m);
        let candidates: Vec<String> = (0..m).map(|i| format!("cand-{i:02}")).collect();
        let config = ElectionConfig::new(n, t, k, candidates.clone());
        if config.validate().is_err() {
            continue;
        }
        let prefs = random_prefs(&mut rng, &candidates, config.ballot_threshold() as usize);
        let (result, _) = run_election(n, t, k, &candidates, &prefs);
        let oracle = common::oracle_count(&candidates, &to_indexed(&candidates, &prefs), k as usize);
        assert_eq!(
            result.members, oracle.members,
            "case {case}: n={n} t={t} k={k} m={m} prefs={prefs:?}"
        );
        assert_eq!(result.rounds_used, oracle.rounds, "case {case}");
    }
}

#[test]
fn classic_quota_equals_fault_free_count() {
    // With t = 0 and all n ballots, the two entry points are the same
    // computation; the randomized sweep in the acceptance suite covers
    // volume, this covers the seam.
    let mut rng = SimRng::new(0x5eed_0002);
    for _ in 0..50 {
        let n = rng.range_u64(4, 12);
        let m = rng.range_u64(3, n.min(7) + 1);
        let k = rng.range_u64(1, m);
        let candidates: Vec<String> = (0..m).map(|i| format!("cand-{i:02}")).collect();
        if ElectionConfig::new(n, 0, k, candidates.clone()).validate().is_err() {
            continue;
        }
        let prefs = random_prefs(&mut rng, &candidates, n as usize);
        let ballots: Vec<Ballot> = prefs
            .iter()
            .enumerate()
            .map(|(i, p)| Ballot {
                voter: format!("voter-{i}"),
                prefs: p.clone(),
            })
            .collect();
        let (result, _) = run_election(n, 0, k, &candidates, &prefs);
        let classic = classic_stv(&ballots, n, k, candidates).unwrap();
        assert_eq!(result, classic);
    }
}

#[test]
fn unanimous_classic_single_seat() {
    let candidates = cands(&["A", "B"]);
    let ballots: Vec<Ballot> = (0..5)
        .map(|i| Ballot {
            voter: format!("voter-{i}"),
            prefs: candidates.clone(),
        })
        .collect();
    let result = classic_stv(&ballots, 5, 1, candidates).unwrap();
    assert_eq!(result.members, cands(&["A"]));
}

#[test]
fn adversary_last_choice_can_always_win() {
    // For any adversary ranking, the profile where every counted ballot
    // puts the adversary's last-place candidate first elects that
    // candidate: n - t identical firsts always exceed the quota.
    let mut rng = SimRng::new(0x5eed_0003);
    for _ in 0..100 {
        let n = rng.range_u64(4, 13);
        let t = (n - 1) / 3;
        let m = rng.range_u64(2, n.min(7) + 1);
        let k = rng.range_u64(1, m);
        let candidates: Vec<String> = (0..m).map(|i| format!("cand-{i:02}")).collect();
        let config = ElectionConfig::new(n, t, k, candidates.clone());
        if config.validate().is_err() {
            continue;
        }
        let mut adversary_prefs = candidates.clone();
        rng.shuffle(&mut adversary_prefs);
        let target = adversary_prefs.last().unwrap().clone();

        let prefs: Vec<Vec<String>> = (0..config.ballot_threshold())
            .map(|_| {
                let mut rest: Vec<String> =
                    candidates.iter().filter(|&c| *c != target).cloned().collect();
                rng.shuffle(&mut rest);
                let mut p = vec![target.clone()];
                p.extend(rest);
                p
            })
            .collect();
        let (result, _) = run_election(n, t, k, &candidates, &prefs);
        assert!(
            result.members.contains(&target),
            "adversary's last choice missing: n={n} t={t} k={k} m={m}"
        );
    }
}

#[test]
fn every_committee_is_proportional() {
    // Small-scale slice of the acceptance campaign, kept here so election
    // changes fail fast.
    let mut rng = SimRng::new(0x5eed_0004);
    for _ in 0..200 {
        let n = rng.range_u64(4, 16);
        let t = (n - 1) / 3;
        let m = rng.range_u64(2, n.min(8) + 1);
        let k = rng.range_u64(1, m.min(6));
        let candidates: Vec<String> = (0..m).map(|i| format!("cand-{i:02}")).collect();
        let config = ElectionConfig::new(n, t, k, candidates.clone());
        if config.validate().is_err() {
            continue;
        }
        let prefs = random_prefs(&mut rng, &candidates, config.ballot_threshold() as usize);
        let (result, ballots) = run_election(n, t, k, &candidates, &prefs);
        let report = check_proportionality(&ballots, &config, &result, SubsetMode::Exhaustive);
        assert!(
            report.pass,
            "violation: {:?} on n={n} t={t} k={k} prefs={prefs:?}",
            report.witness
        );
    }
}
