//! Discrepancy statistics between empirical proportions and a model.
//!
//! Dense statistics work on proportion vectors; the Monte-Carlo engine calls
//! the slice-level kernels directly, the count-level functions validate and
//! delegate. All sums run in bin-index order through a compensated
//! accumulator so that the ordering-invariant statistics agree across bin
//! permutations to within an ulp or two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{BinDistribution, EmpiricalCounts, SparseUniformModel};
use crate::error::{GofError, Result};
use crate::numeric::{xlogy_ratio, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Ks,
    Euclidean,
    Chi2,
    G2,
    FreemanTukey,
    L1,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 6] = [
        StatisticKind::Ks,
        StatisticKind::Euclidean,
        StatisticKind::Chi2,
        StatisticKind::G2,
        StatisticKind::FreemanTukey,
        StatisticKind::L1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Ks => "ks",
            StatisticKind::Euclidean => "euclidean",
            StatisticKind::Chi2 => "chi2",
            StatisticKind::G2 => "g2",
            StatisticKind::FreemanTukey => "freeman_tukey",
            StatisticKind::L1 => "l1",
        }
    }

    /// Only the Kolmogorov-Smirnov statistic depends on the bin order.
    pub fn is_ordering_dependent(self) -> bool {
        self == StatisticKind::Ks
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = GofError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ks" | "kolmogorov-smirnov" => StatisticKind::Ks,
            "euclid" | "euclidean" => StatisticKind::Euclidean,
            "chi2" | "chisq" => StatisticKind::Chi2,
            "g2" | "g" => StatisticKind::G2,
            "ft" | "freeman_tukey" | "freeman-tukey" | "hellinger" => StatisticKind::FreemanTukey,
            "l1" => StatisticKind::L1,
            other => return Err(GofError::invalid(format!("unknown statistic '{other}'"))),
        })
    }
}

/// Parses a comma-separated statistic list such as `ks,euclid,chi2`.
pub fn parse_statistic_list(s: &str) -> Result<Vec<StatisticKind>> {
    let mut kinds = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let kind: StatisticKind = part.parse()?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(GofError::invalid("no statistics requested"));
    }
    Ok(kinds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderingKind {
    Identity,
    Lexicographic,
    Pseudorandom { seed: u64, trial: u64 },
    Explicit,
}

/// A bin order for the KS statistic: `perm[i]` is the bin visited at step i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Vec<usize>,
    kind: OrderingKind,
}

impl Ordering {
    pub fn identity(m: usize) -> Self {
        Self {
            perm: (0..m).collect(),
            kind: OrderingKind::Identity,
        }
    }

    /// Lexicographic pair order. Pair bins are stored lexicographically, so
    /// this is the identity permutation under a different name.
    pub fn lexicographic(m: usize) -> Self {
        Self {
            perm: (0..m).collect(),
            kind: OrderingKind::Lexicographic,
        }
    }

    pub fn new(perm: Vec<usize>, kind: OrderingKind) -> Result<Self> {
        let m = perm.len();
        let mut seen = vec![false; m];
        for &p in &perm {
            if p >= m || std::mem::replace(&mut seen[p], true) {
                return Err(GofError::invalid("ordering is not a permutation of 0..m"));
            }
        }
        Ok(Self { perm, kind })
    }

    pub fn explicit(perm: Vec<usize>) -> Result<Self> {
        Self::new(perm, OrderingKind::Explicit)
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn kind(&self) -> OrderingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GofError::DimensionMismatch { data: a, model: b });
    }
    Ok(())
}

/// Maximum absolute cumulative difference of `emp - model`, visiting bins
/// in `perm` order.
pub fn ks_distance(emp: &[f64], model: &[f64], perm: &[usize]) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut best: f64 = 0.0;
    for &j in perm {
        acc.add(emp[j] - model[j]);
        best = best.max(acc.value().abs());
    }
    best
}

pub fn euclidean_distance(emp: &[f64], model: &[f64]) -> f64 {
    emp.iter()
        .zip(model)
        .map(|(a, b)| (a - b) * (a - b))
        .collect::<CompensatedSum>()
        .value()
        .sqrt()
}

pub fn l1_distance(emp: &[f64], model: &[f64]) -> f64 {
    emp.iter()
        .zip(model)
        .map(|(a, b)| (a - b).abs())
        .collect::<CompensatedSum>()
        .value()
}

/// Pearson chi-square, `n * sum (emp - model)^2 / model`.
pub fn chi2_from_proportions(emp: &[f64], model: &[f64], n: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for (&a, &b) in emp.iter().zip(model) {
        if b == 0.0 {
            if a > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        acc.add((a - b) * (a - b) / b);
    }
    n * acc.value()
}

/// Log-likelihood-ratio, `2n * sum emp ln(emp / model)`.
pub fn g2_from_proportions(emp: &[f64], model: &[f64], n: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for (&a, &b) in emp.iter().zip(model) {
        if b == 0.0 && a > 0.0 {
            return f64::INFINITY;
        }
        acc.add(xlogy_ratio(a, b));
    }
    // Rounding can leave a tiny negative total for a perfect fit.
    (2.0 * n * acc.value()).max(0.0)
}

/// Freeman-Tukey (Hellinger) statistic, `4n * sum (sqrt emp - sqrt model)^2`.
pub fn freeman_tukey_from_proportions(emp: &[f64], model: &[f64], n: f64) -> f64 {
    let sum = emp
        .iter()
        .zip(model)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .collect::<CompensatedSum>()
        .value();
    4.0 * n * sum
}

/// Evaluates one statistic on proportions. `perm` is used only by KS.
pub fn evaluate(kind: StatisticKind, emp: &[f64], model: &[f64], n: f64, perm: &[usize]) -> f64 {
    match kind {
        StatisticKind::Ks => ks_distance(emp, model, perm),
        StatisticKind::Euclidean => euclidean_distance(emp, model),
        StatisticKind::Chi2 => chi2_from_proportions(emp, model, n),
        StatisticKind::G2 => g2_from_proportions(emp, model, n),
        StatisticKind::FreemanTukey => freeman_tukey_from_proportions(emp, model, n),
        StatisticKind::L1 => l1_distance(emp, model),
    }
}

/// Validated dense proportions of `emp` against `model`.
fn dense_inputs(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<(Vec<f64>, f64)> {
    let counts = emp
        .as_dense()
        .ok_or_else(|| GofError::invalid("dense statistic called on sparse counts"))?;
    check_dims(counts.len(), model.len())?;
    if emp.n() == 0 {
        return Err(GofError::invalid("statistics need at least one draw"));
    }
    let n = emp.n() as f64;
    Ok((counts.iter().map(|&c| c as f64 / n).collect(), n))
}

/// Statistic `kind` between the data's proportions and `model`.
pub fn statistic(
    kind: StatisticKind,
    emp: &EmpiricalCounts,
    model: &BinDistribution,
    ord: &Ordering,
) -> Result<f64> {
    let (props, n) = dense_inputs(emp, model)?;
    if kind.is_ordering_dependent() {
        check_dims(ord.len(), model.len())?;
    }
    Ok(evaluate(kind, &props, model.probs(), n, ord.perm()))
}

pub fn ks_statistic(emp: &EmpiricalCounts, model: &BinDistribution, ord: &Ordering) -> Result<f64> {
    statistic(StatisticKind::Ks, emp, model, ord)
}

pub fn euclidean_statistic(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, _) = dense_inputs(emp, model)?;
    Ok(euclidean_distance(&props, model.probs()))
}

pub fn chi2_statistic(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, n) = dense_inputs(emp, model)?;
    Ok(chi2_from_proportions(&props, model.probs(), n))
}

pub fn g2_statistic(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, n) = dense_inputs(emp, model)?;
    Ok(g2_from_proportions(&props, model.probs(), n))
}

pub fn freeman_tukey_statistic(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, n) = dense_inputs(emp, model)?;
    Ok(freeman_tukey_from_proportions(&props, model.probs(), n))
}

pub fn l1_statistic(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, _) = dense_inputs(emp, model)?;
    Ok(l1_distance(&props, model.probs()))
}

/// The order sorting `emp - model` in descending order, which maximizes KS.
pub fn worst_case_ordering(emp: &[f64], model: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..emp.len()).collect();
    perm.sort_by(|&a, &b| (emp[b] - model[b]).total_cmp(&(emp[a] - model[a])));
    perm
}

/// KS under the data-dependent worst-case order; equals half the l1 distance.
pub fn worst_case_ks(emp: &EmpiricalCounts, model: &BinDistribution) -> Result<f64> {
    let (props, _) = dense_inputs(emp, model)?;
    let perm = worst_case_ordering(&props, model.probs());
    Ok(ks_distance(&props, model.probs(), &perm))
}

fn check_sparse(emp: &EmpiricalCounts, model: &SparseUniformModel) -> Result<()> {
    if emp.support() != model.support() {
        return Err(GofError::invalid(format!(
            "counts declared over {} bins, model over {}",
            emp.support(),
            model.support()
        )));
    }
    if emp.n() == 0 {
        return Err(GofError::invalid("statistics need at least one draw"));
    }
    Ok(())
}

fn occupied(emp: &EmpiricalCounts) -> Box<dyn Iterator<Item = (u64, u64)> + '_> {
    match (emp.as_sparse(), emp.as_dense()) {
        (Some(entries), _) => Box::new(entries.iter().copied()),
        (None, Some(dense)) => Box::new(
            dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(j, &c)| (j as u64, c)),
        ),
        (None, None) => unreachable!(),
    }
}

/// Euclidean distance to a huge uniform model, touching only occupied bins.
pub fn sparse_euclidean(emp: &EmpiricalCounts, model: &SparseUniformModel) -> Result<f64> {
    check_sparse(emp, model)?;
    Ok(sparse_euclidean_unchecked(occupied(emp), emp.n(), model))
}

pub(crate) fn sparse_euclidean_unchecked(
    entries: impl Iterator<Item = (u64, u64)>,
    n: u64,
    model: &SparseUniformModel,
) -> f64 {
    let q = model.bin_probability();
    let n = n as f64;
    let mut acc = CompensatedSum::new();
    let mut occupied = 0u64;
    for (_, c) in entries {
        let d = c as f64 / n - q;
        acc.add(d * d);
        occupied += 1;
    }
    acc.add((model.support() - occupied) as f64 * q * q);
    acc.value().sqrt()
}

/// KS against a huge uniform model in natural bin order.
///
/// Between occupied bins the deviation is linear, so the maximum sits at a
/// jump: both the value just before and just after each occupied bin are
/// checked.
pub fn sparse_ks(emp: &EmpiricalCounts, model: &SparseUniformModel) -> Result<f64> {
    check_sparse(emp, model)?;
    Ok(sparse_ks_unchecked(occupied(emp), emp.n(), model))
}

pub(crate) fn sparse_ks_unchecked(
    entries: impl Iterator<Item = (u64, u64)>,
    n: u64,
    model: &SparseUniformModel,
) -> f64 {
    let m = model.support() as f64;
    let n_f = n as f64;
    let mut cumulative = 0u64;
    let mut best: f64 = 0.0;
    for (j, c) in entries {
        let before = (cumulative as f64 / n_f - j as f64 / m).abs();
        cumulative += c;
        let after = (cumulative as f64 / n_f - (j + 1) as f64 / m).abs();
        best = best.max(before).max(after);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_uniform;
    use approx::assert_relative_eq;

    fn candy() -> EmpiricalCounts {
        EmpiricalCounts::dense(vec![15, 9, 14, 11, 13]).unwrap()
    }

    fn dist(p: &[f64]) -> BinDistribution {
        BinDistribution::new(p.to_vec()).unwrap()
    }

    fn counts(c: &[u64]) -> EmpiricalCounts {
        EmpiricalCounts::dense(c.to_vec()).unwrap()
    }

    #[test]
    fn perfect_fit_is_zero_for_every_kind() {
        let emp = counts(&[5, 5]);
        let model = make_uniform(2).unwrap();
        for kind in StatisticKind::ALL {
            let v = statistic(kind, &emp, &model, &Ordering::identity(2)).unwrap();
            assert_eq!(v, 0.0, "{kind}");
        }
    }

    #[test]
    fn two_bin_closed_forms() {
        let half = dist(&[0.5, 0.5]);
        let id = Ordering::identity(2);
        assert_eq!(ks_statistic(&counts(&[1, 0]), &half, &id).unwrap(), 0.5);
        assert_eq!(chi2_statistic(&counts(&[4, 0]), &half).unwrap(), 4.0);
        assert_relative_eq!(
            g2_statistic(&counts(&[2, 0]), &half).unwrap(),
            4.0 * 2f64.ln(),
            max_relative = 1e-15
        );

        let other = dist(&[0.0, 1.0]);
        assert_eq!(
            euclidean_statistic(&counts(&[1, 0]), &other).unwrap(),
            2f64.sqrt()
        );
        assert_eq!(l1_statistic(&counts(&[1, 0]), &other).unwrap(), 2.0);
        for n in [1u64, 3, 10] {
            let ft = freeman_tukey_statistic(&counts(&[n, 0]), &other).unwrap();
            assert_eq!(ft, 8.0 * n as f64);
        }
    }

    #[test]
    fn candy_against_uniform() {
        // Values from 50-digit evaluation of the defining formulas.
        let model = make_uniform(5).unwrap();
        let emp = candy();
        let id = Ordering::identity(5);
        assert_relative_eq!(
            ks_statistic(&emp, &model, &id).unwrap(),
            0.041_935_483_870_967_742,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            euclidean_statistic(&emp, &model).unwrap(),
            0.077_687_706_959_950_3,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            chi2_statistic(&emp, &model).unwrap(),
            1.870_967_741_935_484,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            g2_statistic(&emp, &model).unwrap(),
            1.933_170_346_146_692_8,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            freeman_tukey_statistic(&emp, &model).unwrap(),
            1.971_965_259_280_053_1,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            l1_statistic(&emp, &model).unwrap(),
            0.154_838_709_677_419_35,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            worst_case_ks(&emp, &model).unwrap(),
            0.077_419_354_838_709_68,
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_probability_bins() {
        let model = dist(&[0.0, 1.0]);
        assert_eq!(
            chi2_statistic(&counts(&[1, 3]), &model).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            g2_statistic(&counts(&[1, 3]), &model).unwrap(),
            f64::INFINITY
        );
        assert_eq!(chi2_statistic(&counts(&[0, 3]), &model).unwrap(), 0.0);
        assert_eq!(g2_statistic(&counts(&[0, 3]), &model).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let model = make_uniform(3).unwrap();
        let emp = counts(&[1, 2]);
        assert!(matches!(
            euclidean_statistic(&emp, &model),
            Err(GofError::DimensionMismatch { data: 2, model: 3 })
        ));
        assert!(ks_statistic(&counts(&[1, 2, 3]), &model, &Ordering::identity(2)).is_err());
        assert!(worst_case_ks(&emp, &model).is_err());
    }

    #[test]
    fn worst_case_alternating_signs() {
        // m/2 bins at +c and m/2 at -c
        let m = 8;
        let c = 0.01;
        let p0 = vec![1.0 / m as f64; m];
        let emp: Vec<f64> = (0..m)
            .map(|j| p0[j] + if j % 2 == 0 { c } else { -c })
            .collect();
        let perm = worst_case_ordering(&emp, &p0);
        assert_relative_eq!(
            ks_distance(&emp, &p0, &perm),
            m as f64 * c / 2.0,
            max_relative = 1e-12
        );
        let id: Vec<usize> = (0..m).collect();
        assert_relative_eq!(ks_distance(&emp, &p0, &id), c, max_relative = 1e-12);
    }

    #[test]
    fn ordering_validation() {
        assert!(Ordering::explicit(vec![0, 0]).is_err());
        assert!(Ordering::explicit(vec![0, 2]).is_err());
        assert!(Ordering::explicit(vec![1, 0]).is_ok());
    }

    #[test]
    fn statistic_names_parse() {
        let kinds = parse_statistic_list("euclid,chi2,g2,ft,ks,l1,chi2").unwrap();
        assert_eq!(kinds.len(), 6);
        for kind in StatisticKind::ALL {
            assert_eq!(kind.name().parse::<StatisticKind>().unwrap(), kind);
        }
        assert!(parse_statistic_list("bogus").is_err());
        assert!(parse_statistic_list("").is_err());
    }

    #[test]
    fn sparse_euclidean_examples() {
        let m: u64 = 1 << 32;
        let model = SparseUniformModel::new(m).unwrap();
        let n = 1000;
        let emp = EmpiricalCounts::sparse(m, (0..n).map(|j| (j * 7919, 1))).unwrap();
        let v = sparse_euclidean(&emp, &model).unwrap();
        assert_relative_eq!(v, 1.0 / (n as f64).sqrt(), max_relative = 1e-4);

        let q = 1.0 / m as f64;
        let one = EmpiricalCounts::sparse(m, [(12345, 1)]).unwrap();
        let want = ((1.0 - q) * (1.0 - q) + (m - 1) as f64 * q * q).sqrt();
        assert_relative_eq!(
            sparse_euclidean(&one, &model).unwrap(),
            want,
            max_relative = 1e-15
        );

        let empty = EmpiricalCounts::sparse(4, []).unwrap();
        assert!(sparse_euclidean(&empty, &SparseUniformModel::new(4).unwrap()).is_err());
        assert!(sparse_euclidean(&one, &SparseUniformModel::new(4).unwrap()).is_err());
    }

    #[test]
    fn sparse_ks_examples() {
        let m: u64 = 1 << 32;
        let model = SparseUniformModel::new(m).unwrap();
        let q = 1.0 / m as f64;
        let seq = EmpiricalCounts::sparse(m, (0..1000).map(|j| (j, 1))).unwrap();
        assert_relative_eq!(
            sparse_ks(&seq, &model).unwrap(),
            0.999_999_767_169_356_3,
            max_relative = 1e-15
        );

        let last = EmpiricalCounts::sparse(m, [(m - 1, 1)]).unwrap();
        assert_relative_eq!(
            sparse_ks(&last, &model).unwrap(),
            (m - 1) as f64 / m as f64,
            max_relative = 1e-15
        );
        let first = EmpiricalCounts::sparse(m, [(0, 1)]).unwrap();
        assert_relative_eq!(
            sparse_ks(&first, &model).unwrap(),
            1.0 - q,
            max_relative = 1e-15
        );
    }
}
