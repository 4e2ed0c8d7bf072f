//! Numerical checks of the asymptotic behaviour of the KS and Euclidean
//! statistics: the Brownian-bridge constant, null expectations, the
//! equal-magnitude power scenario, and the sparse limit of the Euclidean
//! distance.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::distributions::{make_uniform, BinDistribution, SparseUniformModel};
use crate::error::{GofError, Result};
use crate::montecarlo::{map_blocks, sample_sparse_uniform, MultinomialSampler};
use crate::numeric::CompensatedSum;
use crate::orderings::pseudorandom_ordering;
use crate::rng::{self, Domain};
use crate::statistics::{euclidean_distance, ks_distance, sparse_euclidean_unchecked, Ordering};

/// Expected maximum absolute deviation of the standard Brownian bridge,
/// `sqrt(pi / 2) * ln 2`.
pub const BRIDGE_CONSTANT: f64 = 0.868_731_160_636_159_1;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error of `trials` values produced by `sample(i)`,
/// reduced deterministically.
fn estimate_mean<F>(trials: u64, sample: F) -> Result<MeanEstimate>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    if trials == 0 {
        return Err(GofError::invalid("the number of trials must be at least 1"));
    }
    let blocks = map_blocks(trials, |range| {
        let mut s = CompensatedSum::new();
        let mut s2 = CompensatedSum::new();
        for i in range {
            let x = sample(i)?;
            s.add(x);
            s2.add(x * x);
        }
        Ok((s.value(), s2.value()))
    })?;
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (a, b) in blocks {
        s.add(a);
        s2.add(b);
    }
    let t = trials as f64;
    let mean = s.value() / t;
    let var = if trials > 1 {
        ((s2.value() - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MeanEstimate {
        mean,
        stderr: (var / t).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeEstimate {
    pub m: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
}

fn max_abs_walk(steps: &[i8]) -> u64 {
    let mut pos: i64 = 0;
    let mut best: i64 = 0;
    for &s in steps {
        pos += s as i64;
        best = best.max(pos.abs());
    }
    best as u64
}

/// Mean of `max_k |D_1 + ... + D_k| / sqrt(m)` over uniformly shuffled
/// sequences of `m/2` (+1)s and `m/2` (-1)s.
pub fn verify_bridge_constant(m: u64, trials: u64, seed: u64) -> Result<BridgeEstimate> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(GofError::invalid(format!(
            "m must be even and at least 2, got {m}"
        )));
    }
    let half = (m / 2) as usize;
    let scale = (m as f64).sqrt();
    let est = estimate_mean(trials, |i| {
        let mut steps: Vec<i8> = std::iter::repeat_n(1, half)
            .chain(std::iter::repeat_n(-1, half))
            .collect();
        steps.shuffle(&mut rng::stream(seed, Domain::Theory, i));
        Ok(max_abs_walk(&steps) as f64 / scale)
    })?;
    Ok(BridgeEstimate {
        m,
        trials,
        estimate: est.mean,
        stderr: est.stderr,
    })
}

/// A Monte-Carlo estimate next to its exact or limiting target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullEstimate {
    pub n: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
}

fn check_null_inputs(n: u64) -> Result<()> {
    if n == 0 {
        return Err(GofError::invalid("n must be at least 1"));
    }
    Ok(())
}

/// Exact null expectation of the squared Euclidean distance,
/// `(1 - sum p0^2) / n`; it tends to `1/n` as the largest bin shrinks.
pub fn exact_null_euclid_squared(model: &BinDistribution, n: u64) -> f64 {
    let sum_sq: f64 = model
        .probs()
        .iter()
        .map(|p| p * p)
        .collect::<CompensatedSum>()
        .value();
    (1.0 - sum_sq) / n as f64
}

/// Simulated mean of `U^2`, `U` the Euclidean distance between the
/// proportions of `n` draws from `model` and the model itself.
pub fn null_expectation_euclid(
    model: &BinDistribution,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<NullEstimate> {
    check_null_inputs(n)?;
    let sampler = MultinomialSampler::new(model.probs());
    let m = model.len();
    let n_f = n as f64;
    let est = estimate_mean(trials, |i| {
        let mut counts = vec![0; m];
        sampler.sample_into(n, &mut rng::stream(seed, Domain::Theory, i), &mut counts);
        let props: Vec<f64> = counts.iter().map(|&c| c as f64 / n_f).collect();
        let u = euclidean_distance(&props, model.probs());
        Ok(u * u)
    })?;
    Ok(NullEstimate {
        n,
        trials,
        estimate: est.mean,
        stderr: est.stderr,
        target: exact_null_euclid_squared(model, n),
    })
}

/// Simulated mean of `V sqrt(n)`, `V` the KS statistic in natural bin
/// order. The target is the bridge constant, approached as `n` grows and
/// the largest bin shrinks.
pub fn null_expectation_ks(
    model: &BinDistribution,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<NullEstimate> {
    check_null_inputs(n)?;
    let sampler = MultinomialSampler::new(model.probs());
    let m = model.len();
    let n_f = n as f64;
    let identity = Ordering::identity(m);
    let est = estimate_mean(trials, |i| {
        let mut counts = vec![0; m];
        sampler.sample_into(n, &mut rng::stream(seed, Domain::Theory, i), &mut counts);
        let props: Vec<f64> = counts.iter().map(|&c| c as f64 / n_f).collect();
        Ok(ks_distance(&props, model.probs(), identity.perm()) * n_f.sqrt())
    })?;
    Ok(NullEstimate {
        n,
        trials,
        estimate: est.mean,
        stderr: est.stderr,
        target: BRIDGE_CONSTANT,
    })
}

/// A uniform base model and an alternative differing from it by exactly
/// `+c` or `-c` in every bin, half of each sign.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerScenario {
    c: f64,
    signs: Vec<i8>,
    base: BinDistribution,
    alternative: Vec<f64>,
}

impl PowerScenario {
    /// `signs[j]` is the sign of `p(j) - p0(j)`.
    pub fn new(c: f64, signs: Vec<i8>) -> Result<Self> {
        let m = signs.len();
        if m < 2 || !m.is_multiple_of(2) {
            return Err(GofError::invalid(format!(
                "m must be even and at least 2, got {m}"
            )));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(GofError::invalid("signs must be +1 or -1"));
        }
        let balance: i64 = signs.iter().map(|&s| s as i64).sum();
        if balance != 0 {
            return Err(GofError::invalid("half of the signs must be positive"));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(GofError::invalid(format!("c must be positive, got {c}")));
        }
        if m as f64 * c > 2.0 {
            return Err(GofError::invalid(format!(
                "m * c = {} exceeds 2",
                m as f64 * c
            )));
        }
        let q = 1.0 / m as f64;
        if c > q {
            return Err(GofError::invalid(format!(
                "c = {c} exceeds 1/m = {q}; the alternative would have negative probabilities"
            )));
        }
        let base = make_uniform(m)?;
        let alternative = signs.iter().map(|&s| q + s as f64 * c).collect();
        Ok(Self {
            c,
            signs,
            base,
            alternative,
        })
    }

    /// Signs alternating `+ - + - ...`.
    pub fn alternating(m: usize, c: f64) -> Result<Self> {
        Self::new(c, (0..m).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect())
    }

    /// All positive signs first, then all negative ones.
    pub fn sorted(m: usize, c: f64) -> Result<Self> {
        Self::new(c, (0..m).map(|j| if j < m / 2 { 1 } else { -1 }).collect())
    }

    pub fn m(&self) -> usize {
        self.signs.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn base(&self) -> &BinDistribution {
        &self.base
    }

    pub fn alternative(&self) -> &[f64] {
        &self.alternative
    }

    /// Sum of the differences `p - p0` in exact integer units of `c`.
    pub fn difference_balance(&self) -> i64 {
        self.signs.iter().map(|&s| s as i64).sum()
    }
}

/// Euclidean distance `u` and KS statistic `v` between the alternative and
/// the base model, the latter in the given bin order.
pub fn power_scenario_stats(s: &PowerScenario, ordering: &Ordering) -> Result<(f64, f64)> {
    if ordering.len() != s.m() {
        return Err(GofError::DimensionMismatch {
            data: ordering.len(),
            model: s.m(),
        });
    }
    let u = euclidean_distance(&s.alternative, s.base.probs());
    let v = ks_distance(&s.alternative, s.base.probs(), ordering.perm());
    Ok((u, v))
}

/// Limiting mean of `v` over random orderings, `sqrt(m pi / 2) ln 2 c`.
pub fn power_mean_target(m: usize, c: f64) -> f64 {
    (m as f64).sqrt() * BRIDGE_CONSTANT * c
}

/// Monte-Carlo mean of `v` over uniformly random bin orderings.
pub fn power_scenario_mean_ks(m: usize, c: f64, trials: u64, seed: u64) -> Result<MeanEstimate> {
    let s = PowerScenario::sorted(m, c)?;
    estimate_mean(trials, |i| {
        let ord = pseudorandom_ordering(m, seed, i);
        Ok(ks_distance(&s.alternative, s.base.probs(), ord.perm()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseLimitResult {
    pub n: u64,
    pub support: u64,
    pub trials: u64,
    /// Fraction of trials whose Euclidean distance deviates from the
    /// collision-free value by more than the relative threshold.
    pub fraction: f64,
    /// Exact probability that `n` uniform draws hit some bin twice.
    pub collision_probability: f64,
    /// `sqrt(1/n - 1/M)`, the value when every draw lands in its own bin.
    pub collision_free_value: f64,
    /// Relative gap between the collision-free value and `1/sqrt(n)`.
    pub limit_gap: f64,
}

/// Relative deviation counted by [`sparse_limit_check`].
pub const SPARSE_DEVIATION_THRESHOLD: f64 = 1e-3;

/// `1 - prod_{i<n} (1 - i/M)`.
pub fn collision_probability(n: u64, support: u64) -> f64 {
    if n > support {
        return 1.0;
    }
    let m = support as f64;
    let log_none: f64 = (1..n).map(|i| (-(i as f64) / m).ln_1p()).sum();
    -log_none.exp_m1()
}

/// Draws `n` uniform values over `support` bins `trials` times and counts
/// how often the sparse Euclidean distance leaves its collision-free value.
/// In the sparse regime that value is `1/sqrt(n)` up to a relative
/// `n / (2M)`, and departures happen only when two draws share a bin.
pub fn sparse_limit_check(
    n: u64,
    support: u64,
    trials: u64,
    seed: u64,
) -> Result<SparseLimitResult> {
    if n == 0 {
        return Err(GofError::invalid("n must be at least 1"));
    }
    if n > support {
        return Err(GofError::invalid(format!(
            "n = {n} exceeds the support {support}; collisions are certain"
        )));
    }
    if trials == 0 {
        return Err(GofError::invalid("the number of trials must be at least 1"));
    }
    let model = SparseUniformModel::new(support)?;
    let reference = (1.0 / n as f64 - model.bin_probability()).sqrt();
    let deviating: u64 = map_blocks(trials, |range| {
        let mut draws = Vec::with_capacity(n as usize);
        let mut entries = Vec::with_capacity(n as usize);
        let mut count = 0u64;
        for i in range {
            let mut rng = rng::stream(seed, Domain::Theory, i);
            sample_sparse_uniform(support, n, &mut rng, &mut draws, &mut entries);
            let u = sparse_euclidean_unchecked(entries.iter().copied(), n, &model);
            let rel = if reference > 0.0 {
                (u - reference).abs() / reference
            } else {
                u
            };
            if rel > SPARSE_DEVIATION_THRESHOLD {
                count += 1;
            }
        }
        Ok(count)
    })?
    .into_iter()
    .sum();
    let limit = 1.0 / (n as f64).sqrt();
    Ok(SparseLimitResult {
        n,
        support,
        trials,
        fraction: deviating as f64 / trials as f64,
        collision_probability: collision_probability(n, support),
        collision_free_value: reference,
        limit_gap: (reference - limit).abs() / limit,
    })
}

/// Uniform record emitted by the theory checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRecord {
    pub claim: String,
    pub m: Option<u64>,
    pub n: Option<u64>,
    pub trials: u64,
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub tolerance: f64,
    pub pass: bool,
}
