//! Monte-Carlo P-values.
//!
//! Each simulation draws `n` i.i.d. observations from the fitted model,
//! refits the model when it is parametric, and evaluates every requested
//! statistic on the same simulated experiment. Simulation `i` uses its own
//! random stream derived from `(seed, i)`, and hit counts are combined by
//! integer addition, so results do not depend on the number of workers.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::distributions::{
    BinDistribution, EmpiricalCounts, ParametricFamily, SparseUniformModel,
};
use crate::error::{GofError, Result};
use crate::numeric::{at_least, CompensatedSum};
use crate::rng::{self, Domain, RNG_ID};
use crate::statistics::{self, Ordering, StatisticKind};

/// Simulations handed to one worker at a time.
const BLOCK: u64 = 512;

/// The model under test.
#[derive(Debug, Clone)]
pub enum Model {
    Fixed(BinDistribution),
    /// Refit by maximum likelihood to the data and to every simulation.
    Parametric(Arc<dyn ParametricFamily>),
}

impl Model {
    pub fn num_bins(&self) -> usize {
        match self {
            Model::Fixed(d) => d.len(),
            Model::Parametric(f) => f.num_bins(),
        }
    }

    pub fn labels(&self) -> Option<Vec<String>> {
        match self {
            Model::Fixed(d) => d.labels().map(<[String]>::to_vec),
            Model::Parametric(f) => f.labels(),
        }
    }

    /// Model probabilities fitted to `counts` (the fixed distribution itself
    /// when there is nothing to fit).
    pub fn fit(&self, counts: &[u64]) -> Result<Vec<f64>> {
        match self {
            Model::Fixed(d) => Ok(d.probs().to_vec()),
            Model::Parametric(f) => f.fitted_probabilities(counts),
        }
    }
}

/// Everything that determines a test run.
#[derive(Debug, Clone)]
pub struct TestSpec {
    pub data: EmpiricalCounts,
    pub model: Model,
    pub statistics: Vec<StatisticKind>,
    pub ordering: Ordering,
    pub sims: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueReport {
    pub statistic: StatisticKind,
    pub observed: f64,
    pub p_value: f64,
    pub std_error: f64,
    pub simulations: u64,
    pub hits: u64,
    pub seed: u64,
    pub rng_id: &'static str,
}

impl PValueReport {
    pub fn new(
        statistic: StatisticKind,
        observed: f64,
        hits: u64,
        simulations: u64,
        seed: u64,
    ) -> Self {
        let p_value = hits as f64 / simulations as f64;
        Self {
            statistic,
            observed,
            p_value,
            std_error: stderr(p_value, simulations),
            simulations,
            hits,
            seed,
            rng_id: RNG_ID,
        }
    }

    /// JSON object with floats printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("report serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Wire<'a> {
            statistic: &'a str,
            observed: Box<RawValue>,
            p_value: Box<RawValue>,
            std_error: Box<RawValue>,
            simulations: u64,
            hits: u64,
            seed: u64,
            rng_id: &'a str,
        }
        let wire = Wire {
            statistic: self.statistic.name(),
            observed: raw_f64(self.observed),
            p_value: raw_f64(self.p_value),
            std_error: raw_f64(self.std_error),
            simulations: self.simulations,
            hits: self.hits,
            seed: self.seed,
            rng_id: self.rng_id,
        };
        // Round-trip through text so the 17-digit literals are what callers see.
        let text = serde_json::to_string(&wire).expect("report serializes");
        serde_json::from_str(&text).expect("report parses")
    }
}

impl fmt::Display for PValueReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<14} observed {:<12.6} P = {:.4} +/- {:.4} ({} / {})",
            self.statistic.name(),
            self.observed,
            self.p_value,
            self.std_error,
            self.hits,
            self.simulations
        )
    }
}

/// `x` with 17 significant digits, or `null` when not finite.
pub fn format_f64_17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn raw_f64(x: f64) -> Box<RawValue> {
    RawValue::from_string(format_f64_17(x)).expect("valid JSON number")
}

/// Standard error `sqrt(p (1 - p) / sims)` of a Monte-Carlo P-value.
pub fn stderr(p_hat: f64, sims: u64) -> f64 {
    (p_hat * (1.0 - p_hat) / sims as f64).max(0.0).sqrt()
}

/// Multinomial sampler prepared once per model.
///
/// Small experiments (`n` below the number of bins) use `n` categorical
/// draws by inverting the cumulative table; larger ones use the
/// conditional-binomial decomposition, one binomial draw per bin.
#[derive(Debug, Clone)]
pub struct MultinomialSampler {
    cdf: Vec<f64>,
    conditional: Vec<f64>,
}

impl MultinomialSampler {
    pub fn new(probs: &[f64]) -> Self {
        let m = probs.len();
        let mut cdf = Vec::with_capacity(m);
        let mut acc = CompensatedSum::new();
        for &p in probs {
            acc.add(p);
            cdf.push(acc.value());
        }
        let total = acc.value();
        cdf.iter_mut().for_each(|c| *c /= total);
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }

        let mut suffix = vec![0.0; m + 1];
        let mut acc = CompensatedSum::new();
        for j in (0..m).rev() {
            acc.add(probs[j]);
            suffix[j] = acc.value();
        }
        let conditional = (0..m)
            .map(|j| {
                if suffix[j + 1] == 0.0 {
                    1.0
                } else if suffix[j] == 0.0 {
                    0.0
                } else {
                    (probs[j] / suffix[j]).clamp(0.0, 1.0)
                }
            })
            .collect();
        Self { cdf, conditional }
    }

    pub fn num_bins(&self) -> usize {
        self.cdf.len()
    }

    /// Overwrites `out` with multinomial(n, probs) counts.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: u64, rng: &mut R, out: &mut [u64]) {
        out.fill(0);
        if (n as usize) < self.cdf.len() {
            for _ in 0..n {
                let u: f64 = rng.random();
                let j = self.cdf.partition_point(|&c| c <= u);
                out[j.min(out.len() - 1)] += 1;
            }
        } else {
            let mut remaining = n;
            for (j, &pc) in self.conditional.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                if pc >= 1.0 {
                    out[j] = remaining;
                    remaining = 0;
                    break;
                }
                if pc <= 0.0 {
                    continue;
                }
                let x = Binomial::new(remaining, pc)
                    .expect("conditional probability lies in [0, 1]")
                    .sample(rng);
                out[j] = x;
                remaining -= x;
            }
            debug_assert_eq!(remaining, 0);
        }
    }
}

/// `n` i.i.d. draws from `model`, tallied per bin.
pub fn sample_counts<R: Rng + ?Sized>(
    model: &BinDistribution,
    n: u64,
    rng: &mut R,
) -> Result<EmpiricalCounts> {
    if n == 0 {
        return Err(GofError::invalid("sample size must be at least 1"));
    }
    let mut out = vec![0; model.len()];
    MultinomialSampler::new(model.probs()).sample_into(n, rng, &mut out);
    EmpiricalCounts::dense(out)
}

/// Runs `body` on consecutive blocks of `0..count` (in parallel when
/// enabled) and returns the per-block results in block order, so any later
/// reduction is independent of scheduling.
pub(crate) fn map_blocks<T, F>(count: u64, body: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    let blocks = count.div_ceil(BLOCK);
    let range = move |b: u64| b * BLOCK..((b + 1) * BLOCK).min(count);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..blocks)
            .into_par_iter()
            .map(|b| body(range(b)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..blocks).map(|b| body(range(b))).collect()
    }
}

/// Element-wise sum of per-block hit vectors.
pub(crate) fn sum_over_blocks<F>(sims: u64, width: usize, body: F) -> Result<Vec<u64>>
where
    F: Fn(Range<u64>) -> Result<Vec<u64>> + Sync + Send,
{
    Ok(map_blocks(sims, body)?
        .into_iter()
        .fold(vec![0; width], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        }))
}

/// Runs `f` with at most `workers` threads; `0` leaves the default pool.
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GofError::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// A statistic slot evaluated per experiment; KS slots carry their ordering.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Column {
    pub kind: StatisticKind,
    pub ordering: usize,
}

/// Observed values and hit counts for each column.
#[derive(Debug, Clone)]
pub(crate) struct EngineOutput {
    pub observed: Vec<f64>,
    pub hits: Vec<u64>,
}

fn validate_dense(data: &EmpiricalCounts, model: &Model, sims: u64) -> Result<Vec<u64>> {
    if sims == 0 {
        return Err(GofError::invalid(
            "the number of simulations must be at least 1",
        ));
    }
    let counts = data
        .as_dense()
        .ok_or_else(|| GofError::invalid("use the sparse path for sparse counts"))?;
    if counts.len() != model.num_bins() {
        return Err(GofError::DimensionMismatch {
            data: counts.len(),
            model: model.num_bins(),
        });
    }
    if data.n() == 0 {
        return Err(GofError::invalid("the data contain no draws"));
    }
    Ok(counts.to_vec())
}

fn evaluate_columns(
    columns: &[Column],
    orderings: &[Ordering],
    props: &[f64],
    model: &[f64],
    n: f64,
    out: &mut [f64],
) {
    for (slot, col) in out.iter_mut().zip(columns) {
        *slot = statistics::evaluate(col.kind, props, model, n, orderings[col.ordering].perm());
    }
}

/// Shared engine behind [`pvalue`] and the ordering trials.
pub(crate) fn run_dense(
    data: &EmpiricalCounts,
    model: &Model,
    columns: &[Column],
    orderings: &[Ordering],
    sims: u64,
    seed: u64,
) -> Result<EngineOutput> {
    let counts = validate_dense(data, model, sims)?;
    for ord in orderings {
        if ord.len() != counts.len() {
            return Err(GofError::invalid(format!(
                "ordering covers {} bins, model has {}",
                ord.len(),
                counts.len()
            )));
        }
    }
    let m = counts.len();
    let n = data.n();
    let n_f = n as f64;

    let fitted = model.fit(&counts)?;
    // The sampling model must be a genuine distribution.
    BinDistribution::new(fitted.clone())?;
    let props: Vec<f64> = counts.iter().map(|&c| c as f64 / n_f).collect();
    let mut observed = vec![0.0; columns.len()];
    evaluate_columns(columns, orderings, &props, &fitted, n_f, &mut observed);
    if observed.iter().any(|v| v.is_nan()) {
        return Err(GofError::Numerical("observed statistic is NaN".into()));
    }

    let sampler = MultinomialSampler::new(&fitted);
    let hits = sum_over_blocks(sims, columns.len(), |range| {
        let mut hits = vec![0u64; columns.len()];
        let mut sim_counts = vec![0u64; m];
        let mut sim_props = vec![0.0; m];
        let mut values = vec![0.0; columns.len()];
        for i in range {
            let mut rng = rng::stream(seed, Domain::Simulation, i);
            sampler.sample_into(n, &mut rng, &mut sim_counts);
            for (p, &c) in sim_props.iter_mut().zip(&sim_counts) {
                *p = c as f64 / n_f;
            }
            let refit;
            let sim_model: &[f64] = match model {
                Model::Fixed(_) => &fitted,
                Model::Parametric(family) => {
                    refit = family.fitted_probabilities(&sim_counts)?;
                    &refit
                }
            };
            evaluate_columns(columns, orderings, &sim_props, sim_model, n_f, &mut values);
            for ((h, &v), &obs) in hits.iter_mut().zip(&values).zip(&observed) {
                if at_least(v, obs) {
                    *h += 1;
                }
            }
        }
        Ok(hits)
    })?;
    Ok(EngineOutput { observed, hits })
}

/// One report per requested statistic, all computed from the same
/// simulated experiments.
pub fn pvalue(spec: &TestSpec) -> Result<Vec<PValueReport>> {
    if spec.statistics.is_empty() {
        return Err(GofError::invalid("no statistics requested"));
    }
    let columns: Vec<Column> = spec
        .statistics
        .iter()
        .map(|&kind| Column { kind, ordering: 0 })
        .collect();
    let out = run_dense(
        &spec.data,
        &spec.model,
        &columns,
        std::slice::from_ref(&spec.ordering),
        spec.sims,
        spec.seed,
    )?;
    Ok(columns
        .iter()
        .zip(out.observed.iter().zip(&out.hits))
        .map(|(col, (&obs, &hits))| PValueReport::new(col.kind, obs, hits, spec.sims, spec.seed))
        .collect())
}

fn sparse_value(
    kind: StatisticKind,
    entries: &[(u64, u64)],
    n: u64,
    model: &SparseUniformModel,
) -> f64 {
    match kind {
        StatisticKind::Ks => statistics::sparse_ks_unchecked(entries.iter().copied(), n, model),
        StatisticKind::Euclidean => {
            statistics::sparse_euclidean_unchecked(entries.iter().copied(), n, model)
        }
        _ => unreachable!("filtered before simulation"),
    }
}

/// Draws `n` uniform bin indices and tallies them into sorted `(bin, count)`
/// pairs, reusing the buffers.
pub(crate) fn sample_sparse_uniform<R: Rng + ?Sized>(
    support: u64,
    n: u64,
    rng: &mut R,
    draws: &mut Vec<u64>,
    entries: &mut Vec<(u64, u64)>,
) {
    draws.clear();
    draws.extend((0..n).map(|_| rng.random_range(0..support)));
    draws.sort_unstable();
    entries.clear();
    for &d in draws.iter() {
        match entries.last_mut() {
            Some((idx, c)) if *idx == d => *c += 1,
            _ => entries.push((d, 1)),
        }
    }
}

/// P-values against a huge uniform model without materializing its bins.
/// Only the KS and Euclidean statistics have sparse implementations.
pub fn pvalue_sparse(
    data: &EmpiricalCounts,
    model: &SparseUniformModel,
    kinds: &[StatisticKind],
    sims: u64,
    seed: u64,
) -> Result<Vec<PValueReport>> {
    if let Some(bad) = kinds
        .iter()
        .find(|k| !matches!(k, StatisticKind::Ks | StatisticKind::Euclidean))
    {
        return Err(GofError::UnsupportedStatistic(bad.name().to_string()));
    }
    if kinds.is_empty() {
        return Err(GofError::invalid("no statistics requested"));
    }
    if sims == 0 {
        return Err(GofError::invalid(
            "the number of simulations must be at least 1",
        ));
    }
    let observed: Vec<f64> = kinds
        .iter()
        .map(|&k| match k {
            StatisticKind::Ks => statistics::sparse_ks(data, model),
            _ => statistics::sparse_euclidean(data, model),
        })
        .collect::<Result<_>>()?;
    let n = data.n();
    let support = model.support();

    let hits = sum_over_blocks(sims, kinds.len(), |range| {
        let mut hits = vec![0u64; kinds.len()];
        let mut draws = Vec::with_capacity(n as usize);
        let mut entries = Vec::with_capacity(n as usize);
        for i in range {
            let mut rng = rng::stream(seed, Domain::Simulation, i);
            sample_sparse_uniform(support, n, &mut rng, &mut draws, &mut entries);
            for ((h, &k), &obs) in hits.iter_mut().zip(kinds).zip(&observed) {
                if at_least(sparse_value(k, &entries, n, model), obs) {
                    *h += 1;
                }
            }
        }
        Ok(hits)
    })?;
    Ok(kinds
        .iter()
        .zip(observed.iter().zip(&hits))
        .map(|(&k, (&obs, &h))| PValueReport::new(k, obs, h, sims, seed))
        .collect())
}
