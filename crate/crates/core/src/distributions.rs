//! Discrete probability models and observed count data.

use std::fmt;

use statrs::function::gamma::ln_gamma;

use crate::error::{GofError, Result};
use crate::numeric::compensated_sum;

/// Absolute tolerance on `sum(probs) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Supports larger than this must use the sparse count representation.
pub const MAX_DENSE_BINS: usize = 1_000_000;

/// Default tail tolerance for truncating infinite supports.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(GofError::invalid("a distribution needs at least one bin"));
    }
    if let Some((j, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(GofError::invalid(format!(
            "probability of bin {j} is {p}; entries must be finite and nonnegative"
        )));
    }
    let total = compensated_sum(probs.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(GofError::invalid(format!(
            "probabilities sum to {total:.17}, not 1 within {NORMALIZATION_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// A model: one probability per bin, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct BinDistribution {
    probs: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl BinDistribution {
    /// Validates and wraps a probability vector. Inputs that do not sum to
    /// one are rejected, never renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probabilities(&probs)?;
        Ok(Self {
            probs,
            labels: None,
        })
    }

    pub fn with_labels(probs: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(GofError::invalid(format!(
                "{} labels for {} bins",
                labels.len(),
                probs.len()
            )));
        }
        let mut dist = Self::new(probs)?;
        dist.labels = Some(labels);
        Ok(dist)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Running totals in bin order, ending at 1 within the normalization
    /// tolerance.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = crate::numeric::CompensatedSum::new();
        self.probs
            .iter()
            .map(|&p| {
                acc.add(p);
                acc.value()
            })
            .collect()
    }
}

/// Uniform distribution over `m` bins.
pub fn make_uniform(m: usize) -> Result<BinDistribution> {
    if m == 0 {
        return Err(GofError::invalid("uniform model needs m >= 1"));
    }
    BinDistribution::new(vec![1.0 / m as f64; m])
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum CountsRepr {
    Dense(Vec<u64>),
    /// Sorted by bin index, counts strictly positive, indices `< support`.
    Sparse {
        support: u64,
        entries: Vec<(u64, u64)>,
    },
}

/// Observed draw counts per bin.
///
/// Bin indices are zero-based. Sparse counts cover supports too large to
/// materialize (up to 2^32 bins and beyond) and store only occupied bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalCounts {
    repr: CountsRepr,
    n: u64,
}

/// Empirical proportions `count / n`, mirroring the count representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Proportions {
    Dense(BinDistribution),
    Sparse {
        support: u64,
        entries: Vec<(u64, f64)>,
    },
}

impl EmpiricalCounts {
    pub fn dense(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(GofError::invalid("counts need at least one bin"));
        }
        if counts.len() > MAX_DENSE_BINS {
            return Err(GofError::invalid(format!(
                "{} bins exceeds the dense limit of {MAX_DENSE_BINS}; use sparse counts",
                counts.len()
            )));
        }
        let n = counts.iter().sum();
        Ok(Self {
            repr: CountsRepr::Dense(counts),
            n,
        })
    }

    /// Sparse counts from `(bin index, count)` pairs. Zero counts are
    /// dropped; duplicate indices are rejected.
    pub fn sparse<I>(support: u64, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        if support == 0 {
            return Err(GofError::invalid("support size must be at least 1"));
        }
        let mut entries: Vec<(u64, u64)> = entries.into_iter().filter(|e| e.1 > 0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GofError::invalid(format!(
                    "bin {} listed more than once",
                    w[0].0
                )));
            }
        }
        if let Some(&(idx, _)) = entries.last() {
            if idx >= support {
                return Err(GofError::invalid(format!(
                    "occupied bin index {idx} is outside the support of size {support}"
                )));
            }
        }
        let n = entries.iter().map(|e| e.1).sum();
        Ok(Self {
            repr: CountsRepr::Sparse { support, entries },
            n,
        })
    }

    /// Tallies zero-based draws over a support of `support` bins into the
    /// sparse representation.
    pub fn sparse_from_draws(support: u64, mut draws: Vec<u64>) -> Result<Self> {
        draws.sort_unstable();
        let mut entries: Vec<(u64, u64)> = Vec::new();
        for d in draws {
            match entries.last_mut() {
                Some((idx, c)) if *idx == d => *c += 1,
                _ => entries.push((d, 1)),
            }
        }
        Self::sparse(support, entries)
    }

    /// Total number of draws.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Size of the support (number of bins, occupied or not).
    pub fn support(&self) -> u64 {
        match &self.repr {
            CountsRepr::Dense(c) => c.len() as u64,
            CountsRepr::Sparse { support, .. } => *support,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, CountsRepr::Sparse { .. })
    }

    pub fn as_dense(&self) -> Option<&[u64]> {
        match &self.repr {
            CountsRepr::Dense(c) => Some(c),
            CountsRepr::Sparse { .. } => None,
        }
    }

    pub fn as_sparse(&self) -> Option<&[(u64, u64)]> {
        match &self.repr {
            CountsRepr::Dense(_) => None,
            CountsRepr::Sparse { entries, .. } => Some(entries),
        }
    }

    /// Dense copy of the counts; fails for supports beyond the dense limit.
    pub fn to_dense(&self) -> Result<Vec<u64>> {
        match &self.repr {
            CountsRepr::Dense(c) => Ok(c.clone()),
            CountsRepr::Sparse { support, entries } => {
                if *support > MAX_DENSE_BINS as u64 {
                    return Err(GofError::invalid(format!(
                        "support {support} is too large to densify"
                    )));
                }
                let mut dense = vec![0u64; *support as usize];
                for &(j, c) in entries {
                    dense[j as usize] = c;
                }
                Ok(dense)
            }
        }
    }

    pub fn proportions(&self) -> Result<Proportions> {
        if self.n == 0 {
            return Err(GofError::invalid("proportions need at least one draw"));
        }
        let n = self.n as f64;
        match &self.repr {
            CountsRepr::Dense(c) => {
                let probs = c.iter().map(|&x| x as f64 / n).collect();
                Ok(Proportions::Dense(BinDistribution::new(probs)?))
            }
            CountsRepr::Sparse { support, entries } => Ok(Proportions::Sparse {
                support: *support,
                entries: entries.iter().map(|&(j, c)| (j, c as f64 / n)).collect(),
            }),
        }
    }
}

/// `count / n` per bin.
pub fn proportions(counts: &EmpiricalCounts) -> Result<Proportions> {
    counts.proportions()
}

/// What to do with the Poisson mass beyond the truncation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Append one overflow bin holding the whole upper tail.
    #[default]
    FoldIntoOverflow,
    /// Drop the tail and rescale the retained bins.
    Renormalize,
}

/// Poisson law truncated to a finite support `0..=last_index` (plus an
/// overflow bin under [`TailPolicy::FoldIntoOverflow`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPoissonModel {
    lambda: f64,
    tail_tol: f64,
    last_index: usize,
    tail_mass: f64,
    policy: TailPolicy,
    dist: BinDistribution,
}

fn poisson_ln_pmf(lambda: f64, j: usize) -> f64 {
    if j == 0 {
        -lambda
    } else {
        j as f64 * lambda.ln() - ln_gamma(j as f64 + 1.0) - lambda
    }
}

/// Poisson model with the default overflow-bin tail policy.
pub fn poisson_model(lambda: f64, tail_tol: f64) -> Result<TruncatedPoissonModel> {
    TruncatedPoissonModel::new(lambda, tail_tol, TailPolicy::FoldIntoOverflow)
}

impl TruncatedPoissonModel {
    pub fn new(lambda: f64, tail_tol: f64, policy: TailPolicy) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(GofError::invalid(format!(
                "Poisson mean must be finite and positive, got {lambda}"
            )));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(GofError::invalid(format!(
                "tail tolerance must lie in (0, 1), got {tail_tol}"
            )));
        }
        // Far enough out that the remaining mass is below f64 resolution.
        let horizon = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as usize;
        if horizon > 50_000_000 {
            return Err(GofError::invalid(format!(
                "Poisson mean {lambda} is too large"
            )));
        }
        let pmf: Vec<f64> = (0..=horizon)
            .map(|j| poisson_ln_pmf(lambda, j).exp())
            .collect();

        // suffix[j] = P(X >= j), accumulated from the far tail inwards.
        let mut suffix = vec![0.0; pmf.len() + 1];
        let mut acc = crate::numeric::CompensatedSum::new();
        for j in (0..pmf.len()).rev() {
            acc.add(pmf[j]);
            suffix[j] = acc.value();
        }
        let last_index = (0..pmf.len())
            .find(|&j| suffix[j + 1] < tail_tol)
            .ok_or_else(|| GofError::Numerical("Poisson tail never fell below tolerance".into()))?;
        let tail_mass = suffix[last_index + 1];

        let mut probs = pmf[..=last_index].to_vec();
        let mut labels: Vec<String> = (0..=last_index).map(|j| j.to_string()).collect();
        match policy {
            TailPolicy::FoldIntoOverflow => {
                probs.push(tail_mass);
                labels.push(format!(">{last_index}"));
            }
            TailPolicy::Renormalize => {
                let kept = compensated_sum(probs.iter().copied());
                probs.iter_mut().for_each(|p| *p /= kept);
            }
        }
        let dist = BinDistribution::with_labels(probs, labels)?;
        Ok(Self {
            lambda,
            tail_tol,
            last_index,
            tail_mass,
            policy,
            dist,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tol
    }

    /// Largest retained value `J`.
    pub fn last_index(&self) -> usize {
        self.last_index
    }

    /// Untruncated mass strictly beyond `J`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn policy(&self) -> TailPolicy {
        self.policy
    }

    pub fn distribution(&self) -> &BinDistribution {
        &self.dist
    }

    pub fn into_distribution(self) -> BinDistribution {
        self.dist
    }
}

/// Uniform model over `support` bins, never materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseUniformModel {
    support: u64,
}

impl SparseUniformModel {
    pub fn new(support: u64) -> Result<Self> {
        if support == 0 {
            return Err(GofError::invalid("support size must be at least 1"));
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> u64 {
        self.support
    }

    /// Per-bin probability `1 / M`.
    pub fn bin_probability(&self) -> f64 {
        1.0 / self.support as f64
    }
}

/// A family of distributions `p0(theta)` with a maximum-likelihood fit.
pub trait ParametricFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn num_bins(&self) -> usize;

    fn labels(&self) -> Option<Vec<String>> {
        None
    }

    /// Maximum-likelihood parameters for dense `counts`.
    fn mle(&self, counts: &[u64]) -> Result<Vec<f64>> {
        let _ = counts;
        Err(GofError::UnsupportedModel(format!(
            "{} has no maximum-likelihood estimator",
            self.name()
        )))
    }

    /// Bin probabilities at `params`, unvalidated.
    fn probabilities(&self, params: &[f64]) -> Result<Vec<f64>>;

    /// `p0(mle(counts))`.
    fn fitted_probabilities(&self, counts: &[u64]) -> Result<Vec<f64>> {
        self.probabilities(&self.mle(counts)?)
    }
}

/// A family with a single member; fitting returns the fixed distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedFamily(pub BinDistribution);

impl ParametricFamily for FixedFamily {
    fn name(&self) -> String {
        format!("fixed({} bins)", self.0.len())
    }

    fn num_bins(&self) -> usize {
        self.0.len()
    }

    fn labels(&self) -> Option<Vec<String>> {
        self.0.labels().map(<[String]>::to_vec)
    }

    fn mle(&self, counts: &[u64]) -> Result<Vec<f64>> {
        if counts.len() != self.0.len() {
            return Err(GofError::DimensionMismatch {
                data: counts.len(),
                model: self.0.len(),
            });
        }
        Ok(Vec::new())
    }

    fn probabilities(&self, _params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.probs().to_vec())
    }
}

/// Index of the unordered pair `(j, k)`, `j >= k`, both zero-based, in the
/// lexicographic order `(0,0), (1,0), (1,1), (2,0), ...`.
#[inline]
pub fn pair_index(j: usize, k: usize) -> usize {
    debug_assert!(j >= k);
    j * (j + 1) / 2 + k
}

/// Inverse of [`pair_index`].
pub fn pair_of_index(index: usize) -> (usize, usize) {
    let mut j = 0;
    while pair_index(j + 1, 0) <= index {
        j += 1;
    }
    (j, index - pair_index(j, 0))
}

/// Hardy-Weinberg family over genotype pairs of `haplotypes` alleles.
///
/// Bins are the unordered pairs in lexicographic order; the pair with
/// one-based labels `(j, k)` is written `"j-k"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardyWeinberg {
    haplotypes: usize,
}

/// Number of Rhesus haplotypes in the bundled dataset.
pub const RHESUS_HAPLOTYPES: usize = 9;

impl Default for HardyWeinberg {
    fn default() -> Self {
        Self {
            haplotypes: RHESUS_HAPLOTYPES,
        }
    }
}

impl HardyWeinberg {
    pub fn new(haplotypes: usize) -> Result<Self> {
        if haplotypes == 0 {
            return Err(GofError::invalid(
                "Hardy-Weinberg needs at least one haplotype",
            ));
        }
        Ok(Self { haplotypes })
    }

    pub fn haplotypes(&self) -> usize {
        self.haplotypes
    }

    pub fn pair_labels(&self) -> Vec<String> {
        (0..self.num_bins())
            .map(|i| {
                let (j, k) = pair_of_index(i);
                format!("{}-{}", j + 1, k + 1)
            })
            .collect()
    }

    /// Haplotype copy counts `2 c_kk + sum_{j != k} c_jk`; they sum to `2n`.
    pub fn allele_counts(&self, counts: &[u64]) -> Result<Vec<u64>> {
        if counts.len() != self.num_bins() {
            return Err(GofError::DimensionMismatch {
                data: counts.len(),
                model: self.num_bins(),
            });
        }
        let mut alleles = vec![0u64; self.haplotypes];
        for j in 0..self.haplotypes {
            for k in 0..=j {
                let c = counts[pair_index(j, k)];
                alleles[j] += c;
                alleles[k] += c;
            }
        }
        Ok(alleles)
    }

    fn fill_probabilities(theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for j in 0..theta.len() {
            for k in 0..j {
                out.push(2.0 * theta[j] * theta[k]);
            }
            out.push(theta[j] * theta[j]);
        }
    }
}

impl ParametricFamily for HardyWeinberg {
    fn name(&self) -> String {
        format!("hardy-weinberg({})", self.haplotypes)
    }

    fn num_bins(&self) -> usize {
        self.haplotypes * (self.haplotypes + 1) / 2
    }

    fn labels(&self) -> Option<Vec<String>> {
        Some(self.pair_labels())
    }

    fn mle(&self, counts: &[u64]) -> Result<Vec<f64>> {
        let alleles = self.allele_counts(counts)?;
        let total: u64 = alleles.iter().sum();
        if total == 0 {
            return Err(GofError::invalid("Hardy-Weinberg fit needs n >= 1"));
        }
        let total = total as f64;
        Ok(alleles.into_iter().map(|a| a as f64 / total).collect())
    }

    fn probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.haplotypes {
            return Err(GofError::invalid(format!(
                "expected {} haplotype proportions, got {}",
                self.haplotypes,
                theta.len()
            )));
        }
        let mut out = Vec::with_capacity(self.num_bins());
        Self::fill_probabilities(theta, &mut out);
        Ok(out)
    }
}

/// A Hardy-Weinberg model at fixed haplotype proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyWeinbergModel {
    theta: Vec<f64>,
    dist: BinDistribution,
}

impl HardyWeinbergModel {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(GofError::invalid(
                "Hardy-Weinberg needs at least one haplotype",
            ));
        }
        check_probabilities(&theta)
            .map_err(|e| GofError::invalid(format!("haplotype proportions: {e}")))?;
        let family = HardyWeinberg::new(theta.len())?;
        let dist =
            BinDistribution::with_labels(family.probabilities(&theta)?, family.pair_labels())?;
        Ok(Self { theta, dist })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn distribution(&self) -> &BinDistribution {
        &self.dist
    }
}

/// Genotype-pair probabilities for the nine-haplotype model.
pub fn hw_probabilities(theta: &[f64]) -> Result<BinDistribution> {
    if theta.len() != RHESUS_HAPLOTYPES {
        return Err(GofError::invalid(format!(
            "expected {RHESUS_HAPLOTYPES} haplotype proportions, got {}",
            theta.len()
        )));
    }
    Ok(HardyWeinbergModel::new(theta.to_vec())?.dist)
}

/// Maximum-likelihood haplotype proportions from 45 genotype-pair counts.
pub fn hw_mle(counts: &EmpiricalCounts) -> Result<Vec<f64>> {
    let dense = counts
        .as_dense()
        .ok_or_else(|| GofError::invalid("Hardy-Weinberg counts must be dense"))?;
    HardyWeinberg::default().mle(dense)
}
