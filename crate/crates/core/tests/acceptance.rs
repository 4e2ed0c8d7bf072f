//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dgof::datasets;
use dgof::distributions::{hw_mle, hw_probabilities, make_uniform, HardyWeinberg};
use dgof::montecarlo::{self, pvalue, pvalue_sparse, sample_counts, with_workers};
use dgof::rng::{self, Domain};
use dgof::statistics::{
    euclidean_statistic, ks_statistic, l1_statistic, sparse_euclidean, sparse_ks, statistic,
    worst_case_ks,
};
use dgof::theory::{
    null_expectation_euclid, null_expectation_ks, power_mean_target, power_scenario_mean_ks,
    power_scenario_stats, verify_bridge_constant, PowerScenario,
};
use dgof::{
    BinDistribution, EmpiricalCounts, Model, Ordering, PValueReport, SparseUniformModel,
    StatisticKind, TestSpec,
};
use rand::Rng;

use StatisticKind::{Chi2, Euclidean, FreemanTukey, Ks, G2, L1};

struct Check {
    failures: Vec<String>,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            details: Vec::new(),
        }
    }

    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        let line = format!("{what} = {value:.6} (target {target} +/- {tol})");
        let ok = (value - target).abs() <= tol;
        if !ok {
            self.failures.push(line.clone());
        }
        self.details.push(line);
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
        self.details
            .push(format!("{what}: {}", if ok { "ok" } else { "violated" }));
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn report(reports: &[PValueReport], kind: StatisticKind) -> &PValueReport {
    reports
        .iter()
        .find(|r| r.statistic == kind)
        .expect("requested statistic")
}

fn fixed_spec(
    data: EmpiricalCounts,
    model: BinDistribution,
    stats: &[StatisticKind],
    sims: u64,
    seed: u64,
) -> TestSpec {
    let m = model.len();
    TestSpec {
        data,
        model: Model::Fixed(model),
        statistics: stats.to_vec(),
        ordering: Ordering::identity(m),
        sims,
        seed,
    }
}

fn hw_spec(stats: &[StatisticKind], sims: u64, seed: u64) -> TestSpec {
    TestSpec {
        data: datasets::rhesus_counts(),
        model: Model::Parametric(Arc::new(HardyWeinberg::default())),
        statistics: stats.to_vec(),
        ordering: Ordering::lexicographic(45),
        sims,
        seed,
    }
}

fn criterion_1(c: &mut Check) {
    let model = datasets::poisson100();
    let data = datasets::poisson_observations(&model).unwrap();
    let spec = fixed_spec(
        data,
        model,
        &[Ks, Euclidean, Chi2, G2, FreemanTukey],
        400_000,
        1,
    );
    let r = pvalue(&spec).unwrap();
    c.within("KS", report(&r, Ks).p_value, 0.0075, 0.001);
    c.within("Euclidean", report(&r, Euclidean).p_value, 0.998, 0.001);
    c.within("chi2", report(&r, Chi2).p_value, 0.999, 0.001);
    c.within("G2", report(&r, G2).p_value, 0.999, 0.001);
    c.within(
        "Freeman-Tukey",
        report(&r, FreemanTukey).p_value,
        0.998,
        0.001,
    );
}

fn criterion_2(c: &mut Check) {
    let spec = fixed_spec(
        datasets::candy_counts(),
        datasets::candy_model(),
        &[Euclidean, Chi2, G2, FreemanTukey],
        400_000,
        1,
    );
    let r = pvalue(&spec).unwrap();
    c.within("Euclidean", report(&r, Euclidean).p_value, 0.770, 0.003);
    c.within("chi2", report(&r, Chi2).p_value, 0.770, 0.003);
    c.holds(
        "chi2 hits equal Euclidean hits",
        report(&r, Chi2).hits == report(&r, Euclidean).hits,
    );
    c.within("G2", report(&r, G2).p_value, 0.766, 0.003);
    c.within(
        "Freeman-Tukey",
        report(&r, FreemanTukey).p_value,
        0.755,
        0.003,
    );
}

fn criterion_3(c: &mut Check) {
    let r = pvalue(&hw_spec(&[Euclidean, Chi2, G2, FreemanTukey], 40_000, 1)).unwrap();
    c.within("Euclidean", report(&r, Euclidean).p_value, 0.039, 0.005);
    c.within("chi2", report(&r, Chi2).p_value, 0.693, 0.012);
    c.within("G2", report(&r, G2).p_value, 0.600, 0.013);
    c.within(
        "Freeman-Tukey",
        report(&r, FreemanTukey).p_value,
        0.562,
        0.013,
    );
}

fn criterion_4(c: &mut Check) {
    let support = 1u64 << 32;
    let data = EmpiricalCounts::sparse_from_draws(support, (0..1000).collect()).unwrap();
    let model = SparseUniformModel::new(support).unwrap();
    let start = Instant::now();
    let r = pvalue_sparse(&data, &model, &[Ks, Euclidean], 10_000, 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.holds(
        &format!("KS hits = {} is 0", report(&r, Ks).hits),
        report(&r, Ks).hits == 0,
    );
    let pe = report(&r, Euclidean).p_value;
    c.holds(&format!("Euclidean p = {pe} >= 0.999"), pe >= 0.999);
    c.holds(&format!("runtime {secs:.1}s under 60s"), secs < 60.0);
}

fn criterion_5(c: &mut Check) {
    let big = verify_bridge_constant(10_000, 10_000, 1).unwrap();
    c.within("m=1e4 estimate", big.estimate, 0.86867, 0.015 * 0.86867);
    let small = verify_bridge_constant(4, 100_000, 2).unwrap();
    c.within(
        "m=4 estimate",
        small.estimate,
        2.0 / 3.0,
        5.0 * small.stderr,
    );
}

fn criterion_6(c: &mut Check) {
    for (m, n, trials) in [(2usize, 10u64, 100_000u64), (10_000, 100, 10_000)] {
        let model = make_uniform(m).unwrap();
        let e = null_expectation_euclid(&model, n, trials, 3).unwrap();
        c.within(
            &format!("E U^2 uniform m={m} n={n}"),
            e.estimate,
            e.target,
            5.0 * e.stderr,
        );
    }
    let rhesus = datasets::rhesus_counts();
    let hw = hw_probabilities(&hw_mle(&rhesus).unwrap()).unwrap();
    let e = null_expectation_euclid(&hw, rhesus.n(), 20_000, 4).unwrap();
    c.within("E U^2 Hardy-Weinberg", e.estimate, e.target, 5.0 * e.stderr);
    let v = null_expectation_ks(&make_uniform(10_000).unwrap(), 10_000, 1_000, 5).unwrap();
    c.within("E V sqrt(n) m=n=1e4", v.estimate, 0.8687, 0.03);
}

fn criterion_7(c: &mut Check) {
    let (m, cm) = (10_000usize, 1e-5);
    let alt = PowerScenario::alternating(m, cm).unwrap();
    let sorted = PowerScenario::sorted(m, cm).unwrap();
    let (u, vmin) = power_scenario_stats(&alt, &Ordering::identity(m)).unwrap();
    let (u2, vmax) = power_scenario_stats(&sorted, &Ordering::identity(m)).unwrap();
    let u_target = (m as f64).sqrt() * cm;
    c.holds(
        &format!("u = {u:e} equals sqrt(m) c"),
        close(u, u_target, 1e-12) && close(u2, u_target, 1e-12),
    );
    c.holds(
        &format!("alternating v = {vmin:e} equals c"),
        close(vmin, cm, 1e-12),
    );
    c.holds(
        &format!("sorted v = {vmax:e} equals m c / 2"),
        close(vmax, m as f64 * cm / 2.0, 1e-12),
    );
    let mean = power_scenario_mean_ks(m, cm, 10_000, 6).unwrap();
    let target = power_mean_target(m, cm);
    c.within("random-ordering mean v", mean.mean, target, 0.02 * target);
}

fn permutation_invariance(c: &mut Check) {
    let mut ok = true;
    for i in 0..200u64 {
        let mut r = rng::stream(7, Domain::Dataset, i);
        let m = r.random_range(2..40usize);
        let weights: Vec<f64> = (0..m).map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let model = BinDistribution::new(weights.iter().map(|w| w / total).collect()).unwrap();
        let counts = sample_counts(&model, r.random_range(1..200), &mut r).unwrap();
        let perm = dgof::orderings::pseudorandom_ordering(m, 7, i);
        let dense = counts.as_dense().unwrap();
        let permuted_counts: Vec<u64> = perm.perm().iter().map(|&j| dense[j]).collect();
        let permuted_probs: Vec<f64> = perm.perm().iter().map(|&j| model.probs()[j]).collect();
        let pc = EmpiricalCounts::dense(permuted_counts).unwrap();
        let pm = BinDistribution::new(permuted_probs).unwrap();
        for kind in [Euclidean, Chi2, G2, FreemanTukey, L1] {
            let a = statistic(kind, &counts, &model, &Ordering::identity(m)).unwrap();
            let b = statistic(kind, &pc, &pm, &Ordering::identity(m)).unwrap();
            ok &= close(a, b, 1e-15) || (a - b).abs() <= 1e-15;
        }
        let wc = worst_case_ks(&counts, &model).unwrap();
        let l1 = l1_statistic(&counts, &model).unwrap();
        ok &= close(wc, l1 / 2.0, 1e-15) || (wc - l1 / 2.0).abs() <= 1e-15;
    }
    c.holds(
        "non-KS statistics are permutation invariant (1e-15) and worst-case KS = l1/2",
        ok,
    );
}

fn determinism(c: &mut Check) {
    let candy = fixed_spec(
        datasets::candy_counts(),
        datasets::candy_model(),
        &StatisticKind::ALL,
        20_000,
        9,
    );
    let hw = hw_spec(&StatisticKind::ALL, 3_000, 9);
    for (name, spec) in [("candy", candy), ("Hardy-Weinberg", hw)] {
        let runs: Vec<String> = [1, 4, 16]
            .iter()
            .map(|&w| {
                with_workers(w, || pvalue(&spec).unwrap())
                    .unwrap()
                    .iter()
                    .map(PValueReport::to_json)
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .collect();
        c.holds(
            &format!("{name} reports byte-identical across 1/4/16 workers"),
            runs.iter().all(|r| r == &runs[0]),
        );
    }
}

fn dense_sparse_agreement(c: &mut Check) {
    let mut ok = true;
    for i in 0..300u64 {
        let mut r = rng::stream(11, Domain::Dataset, i);
        let support = r.random_range(1..=10_000u64);
        let n = r.random_range(1..300);
        let draws: Vec<u64> = (0..n).map(|_| r.random_range(0..support)).collect();
        let sparse = EmpiricalCounts::sparse_from_draws(support, draws).unwrap();
        let dense = EmpiricalCounts::dense(sparse.to_dense().unwrap()).unwrap();
        let model = make_uniform(support as usize).unwrap();
        let sm = SparseUniformModel::new(support).unwrap();
        let ks_d = ks_statistic(&dense, &model, &Ordering::identity(support as usize)).unwrap();
        let eu_d = euclidean_statistic(&dense, &model).unwrap();
        ok &= (ks_d - sparse_ks(&sparse, &sm).unwrap()).abs() <= 1e-12;
        ok &= (eu_d - sparse_euclidean(&sparse, &sm).unwrap()).abs() <= 1e-12;
    }
    c.holds(
        "dense and sparse KS/Euclidean agree to 1e-12 for M <= 1e4",
        ok,
    );
}

fn calibration(c: &mut Check) {
    let model = datasets::candy_model();
    let datasets_count = 200u64;
    let mut low = [0u64; 2];
    for i in 0..datasets_count {
        let data = sample_counts(&model, 62, &mut rng::stream(13, Domain::Dataset, i)).unwrap();
        let r = pvalue(&fixed_spec(
            data,
            model.clone(),
            &[Euclidean, Ks],
            10_000,
            1_000 + i,
        ))
        .unwrap();
        for (slot, rep) in low.iter_mut().zip(&r) {
            if rep.p_value <= 0.1 {
                *slot += 1;
            }
        }
    }
    for (kind, l) in ["Euclidean", "KS"].iter().zip(low) {
        c.within(
            &format!("{kind} fraction of null p <= 0.1"),
            l as f64 / datasets_count as f64,
            0.1,
            0.07,
        );
    }

    let spec = |sims, seed| {
        fixed_spec(
            datasets::candy_counts(),
            model.clone(),
            &[Euclidean, G2],
            sims,
            seed,
        )
    };
    let reference = pvalue(&spec(100_000, 21)).unwrap();
    let run = pvalue(&spec(10_000, 22)).unwrap();
    for (p_star, p) in reference.iter().zip(&run) {
        let tol = 5.0 * montecarlo::stderr(p_star.p_value, 10_000);
        c.within(
            &format!("{} p against 10x reference", p.statistic),
            p.p_value,
            p_star.p_value,
            tol,
        );
    }
}

fn criterion_8(c: &mut Check) {
    permutation_invariance(c);
    determinism(c);
    dense_sparse_agreement(c);
    calibration(c);
}

type Criterion = (&'static str, fn(&mut Check));

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("Poisson test", criterion_1),
        ("candy test", criterion_2),
        ("Hardy-Weinberg test", criterion_3),
        ("RNG test", criterion_4),
        ("bridge constant", criterion_5),
        ("null expectations", criterion_6),
        ("power analysis", criterion_7),
        ("property suite", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut check = Check::new();
        run(&mut check);
        let secs = start.elapsed().as_secs_f64();
        let status = if check.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!("criterion {}: {status} {name} ({secs:.1}s)", i + 1);
        for d in &check.details {
            println!("    {d}");
        }
        if !check.failures.is_empty() {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
