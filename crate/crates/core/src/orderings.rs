//! Bin orderings for the KS statistic and multi-trial ordering experiments.

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{GofError, Result};
use crate::montecarlo::{self, Column, PValueReport, TestSpec};
use crate::rng::{self, Domain};
use crate::statistics::{Ordering, OrderingKind, StatisticKind};

/// Permutations up to this size are written out in full in trial records.
pub const MAX_PRINTED_PERMUTATION: usize = 64;

/// Uniformly random permutation of `0..m` from a Fisher-Yates shuffle on
/// the ordering stream of `(seed, trial)`.
pub fn pseudorandom_ordering(m: usize, seed: u64, trial: u64) -> Ordering {
    let mut perm: Vec<usize> = (0..m).collect();
    let mut rng = rng::stream(seed, Domain::Ordering, trial);
    perm.shuffle(&mut rng);
    Ordering::new(perm, OrderingKind::Pseudorandom { seed, trial })
        .expect("shuffle is a permutation")
}

/// Stable digest of a permutation: SHA-256 over little-endian u64 entries,
/// truncated to 128 bits and hex encoded.
pub fn permutation_digest(perm: &[usize]) -> String {
    let mut hasher = Sha256::new();
    for &p in perm {
        hasher.update((p as u64).to_le_bytes());
    }
    hasher.finalize()[..16]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub ordering: Ordering,
    pub digest: String,
    pub reports: Vec<PValueReport>,
}

impl TrialResult {
    pub fn report(&self, kind: StatisticKind) -> Option<&PValueReport> {
        self.reports.iter().find(|r| r.statistic == kind)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "trial": self.trial,
            "ordering": self.ordering.kind(),
            "digest": self.digest,
            "reports": self.reports.iter().map(PValueReport::to_json_value).collect::<Vec<_>>(),
        });
        if self.ordering.len() <= MAX_PRINTED_PERMUTATION {
            obj["permutation"] = serde_json::json!(self.ordering.perm());
        }
        obj
    }

    /// One JSON line.
    pub fn to_json_line(&self) -> String {
        self.to_json_value().to_string()
    }
}

/// Runs the test under `t_count` orderings. Trial 1 uses the spec's own
/// ordering; trials 2.. use pseudorandom orderings seeded from the spec's
/// seed in the ordering domain. Every trial sees the same simulated
/// experiments, so ordering-invariant reports are identical across trials.
pub fn ordering_trials(spec: &TestSpec, t_count: u64) -> Result<Vec<TrialResult>> {
    if t_count == 0 {
        return Err(GofError::invalid("the number of trials must be at least 1"));
    }
    if !spec.statistics.contains(&StatisticKind::Ks) {
        return Err(GofError::invalid("ordering trials need the ks statistic"));
    }
    let m = spec.model.num_bins();
    let mut orderings = vec![spec.ordering.clone()];
    orderings.extend((2..=t_count).map(|t| pseudorandom_ordering(m, spec.seed, t)));

    let mut columns = Vec::new();
    let mut slot_of = Vec::with_capacity(spec.statistics.len());
    for &kind in &spec.statistics {
        slot_of.push(columns.len());
        if kind.is_ordering_dependent() {
            columns.extend((0..orderings.len()).map(|ordering| Column { kind, ordering }));
        } else {
            columns.push(Column { kind, ordering: 0 });
        }
    }
    let out = montecarlo::run_dense(
        &spec.data,
        &spec.model,
        &columns,
        &orderings,
        spec.sims,
        spec.seed,
    )?;

    Ok(orderings
        .into_iter()
        .enumerate()
        .map(|(t, ordering)| {
            let reports = spec
                .statistics
                .iter()
                .zip(&slot_of)
                .map(|(&kind, &slot)| {
                    let col = if kind.is_ordering_dependent() {
                        slot + t
                    } else {
                        slot
                    };
                    PValueReport::new(kind, out.observed[col], out.hits[col], spec.sims, spec.seed)
                })
                .collect();
            TrialResult {
                trial: t as u64 + 1,
                digest: permutation_digest(ordering.perm()),
                ordering,
                reports,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_uniform;
    use crate::montecarlo::Model;
    use crate::EmpiricalCounts;
    use std::collections::HashSet;

    #[test]
    fn single_bin_is_identity() {
        assert_eq!(pseudorandom_ordering(1, 9, 3).perm(), &[0]);
    }

    #[test]
    fn deterministic_per_seed_and_trial() {
        let a = pseudorandom_ordering(45, 1, 2);
        assert_eq!(a, pseudorandom_ordering(45, 1, 2));
        assert_ne!(a.perm(), pseudorandom_ordering(45, 1, 3).perm());
        assert_ne!(a.perm(), pseudorandom_ordering(45, 2, 2).perm());
    }

    #[test]
    fn position_value_frequencies_are_uniform() {
        let m = 52;
        let samples = 100_000u64;
        let mut freq = vec![0u32; m * m];
        for t in 0..samples {
            for (pos, &v) in pseudorandom_ordering(m, 77, t).perm().iter().enumerate() {
                freq[pos * m + v] += 1;
            }
        }
        let p = 1.0 / m as f64;
        let mean = samples as f64 * p;
        let sd = (samples as f64 * p * (1.0 - p)).sqrt();
        for &f in &freq {
            assert!(
                (f as f64 - mean).abs() < 5.0 * sd,
                "cell count {f}, mean {mean}"
            );
        }
    }

    #[test]
    fn digests_do_not_collide() {
        let digests: HashSet<String> = (0..10_000)
            .map(|t| permutation_digest(pseudorandom_ordering(45, 5, t).perm()))
            .collect();
        let perms: HashSet<Vec<usize>> = (0..10_000)
            .map(|t| pseudorandom_ordering(45, 5, t).perm().to_vec())
            .collect();
        assert_eq!(digests.len(), perms.len());
        assert_ne!(permutation_digest(&[0, 1]), permutation_digest(&[1, 0]));
    }

    fn candy_spec(sims: u64) -> TestSpec {
        TestSpec {
            data: EmpiricalCounts::dense(vec![15, 9, 14, 11, 13]).unwrap(),
            model: Model::Fixed(make_uniform(5).unwrap()),
            statistics: vec![
                StatisticKind::Ks,
                StatisticKind::Euclidean,
                StatisticKind::Chi2,
            ],
            ordering: Ordering::identity(5),
            sims,
            seed: 3,
        }
    }

    #[test]
    fn trials_share_invariant_reports() {
        let trials = ordering_trials(&candy_spec(5000), 10).unwrap();
        assert_eq!(trials.len(), 10);
        assert_eq!(trials[0].ordering.kind(), OrderingKind::Identity);
        let euclid = trials[0]
            .report(StatisticKind::Euclidean)
            .unwrap()
            .to_json();
        for t in &trials {
            assert_eq!(
                t.report(StatisticKind::Euclidean).unwrap().to_json(),
                euclid
            );
        }
        let ks: HashSet<u64> = trials
            .iter()
            .map(|t| t.report(StatisticKind::Ks).unwrap().hits)
            .collect();
        assert!(ks.len() > 1, "KS P-values should vary with the ordering");
    }

    #[test]
    fn trial_one_matches_plain_pvalue() {
        let spec = candy_spec(3000);
        let trials = ordering_trials(&spec, 3).unwrap();
        assert_eq!(trials[0].reports, crate::montecarlo::pvalue(&spec).unwrap());
    }

    #[test]
    fn trials_need_ks_and_a_positive_count() {
        let mut spec = candy_spec(10);
        assert!(ordering_trials(&spec, 0).is_err());
        spec.statistics = vec![StatisticKind::Euclidean];
        assert!(ordering_trials(&spec, 2).is_err());
    }

    #[test]
    fn single_bin_trial() {
        let spec = TestSpec {
            data: EmpiricalCounts::dense(vec![4]).unwrap(),
            model: Model::Fixed(make_uniform(1).unwrap()),
            statistics: vec![StatisticKind::Ks, StatisticKind::L1],
            ordering: Ordering::identity(1),
            sims: 20,
            seed: 0,
        };
        let trials = ordering_trials(&spec, 1).unwrap();
        for r in &trials[0].reports {
            assert_eq!(r.observed, 0.0);
            assert_eq!(r.p_value, 1.0);
        }
        let line = trials[0].to_json_line();
        assert!(line.contains("\"permutation\":[0]"));
    }
}
