use std::sync::Arc;

use dgof::datasets;
use dgof::distributions::{make_uniform, HardyWeinberg};
use dgof::montecarlo::pvalue_sparse;
use dgof::orderings::ordering_trials;
use dgof::rng::{self, Domain};
use dgof::{EmpiricalCounts, Model, Ordering, SparseUniformModel, StatisticKind, TestSpec};
use rand::Rng;

use StatisticKind::{Euclidean, Ks};

fn spread(spec: &TestSpec, euclid_target: f64, tol: f64) {
    let trials = ordering_trials(spec, 10).unwrap();
    assert_eq!(trials.len(), 10);
    let ks: Vec<f64> = trials
        .iter()
        .map(|t| t.report(Ks).unwrap().p_value)
        .collect();
    assert!(ks.iter().all(|p| (0.0..=1.0).contains(p)));
    let (lo, hi) = ks
        .iter()
        .fold((1.0f64, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
    assert!(
        hi - lo > 0.05,
        "KS P-values barely move across orderings: {ks:?}"
    );
    let euclid = trials[0].report(Euclidean).unwrap();
    assert!(trials
        .iter()
        .all(|t| t.report(Euclidean).unwrap() == euclid));
    assert!(
        (euclid.p_value - euclid_target).abs() < tol,
        "{}",
        euclid.p_value
    );
}

#[test]
fn rhesus_ks_pvalues_vary_across_orderings() {
    let spec = TestSpec {
        data: datasets::rhesus_counts(),
        model: Model::Parametric(Arc::new(HardyWeinberg::default())),
        statistics: vec![Ks, Euclidean],
        ordering: Ordering::lexicographic(45),
        sims: 9_000,
        seed: 4,
    };
    spread(&spec, 0.039, 0.01);
}

#[test]
fn candy_ks_pvalues_vary_across_orderings() {
    let spec = TestSpec {
        data: datasets::candy_counts(),
        model: Model::Fixed(datasets::candy_model()),
        statistics: vec![Ks, Euclidean],
        ordering: Ordering::identity(5),
        sims: 20_000,
        seed: 4,
    };
    spread(&spec, 0.770, 0.02);
}

#[test]
fn one_bin_model_fits_perfectly() {
    let spec = TestSpec {
        data: EmpiricalCounts::dense(vec![7]).unwrap(),
        model: Model::Fixed(make_uniform(1).unwrap()),
        statistics: vec![Ks, StatisticKind::L1],
        ordering: Ordering::identity(1),
        sims: 100,
        seed: 0,
    };
    let t = &ordering_trials(&spec, 1).unwrap()[0];
    for r in &t.reports {
        assert_eq!(r.observed, 0.0);
        assert_eq!(r.p_value, 1.0);
    }
}

#[test]
fn sparse_null_pvalues_are_not_extreme() {
    let support = 1u64 << 32;
    let model = SparseUniformModel::new(support).unwrap();
    for seed in 0..100 {
        let mut r = rng::stream(seed, Domain::Dataset, 0);
        let draws: Vec<u64> = (0..200).map(|_| r.random_range(0..support)).collect();
        let data = EmpiricalCounts::sparse_from_draws(support, draws).unwrap();
        let reports = pvalue_sparse(&data, &model, &[Ks, Euclidean], 2_000, seed + 1_000).unwrap();
        for rep in reports {
            assert!(
                rep.p_value > 0.001 && rep.p_value <= 1.0,
                "seed {seed}: {rep}"
            );
        }
    }
}
