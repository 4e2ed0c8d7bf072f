//! Bundled example datasets and the plot experiments built on them.
//!
//! * `rhesus` - genotype-pair counts for nine Rhesus haplotypes, n = 8297,
//!   labelled `j-k` in lexicographic pair order.
//! * `candy` - colours of 62 candies in one bag.
//! * `candy-model` - the uniform colour model for `candy`.
//! * `poisson-observations` - one draw at each of 100, 101, ..., 109.

use crate::distributions::{
    poisson_model, BinDistribution, EmpiricalCounts, DEFAULT_TAIL_TOLERANCE,
};
use crate::error::{GofError, Result};
use crate::io::{align_counts, parse_counts_csv, parse_model_csv, PlotSeries};
use crate::montecarlo::{sample_counts, Model};
use crate::rng::{self, Domain};

pub const RHESUS_CSV: &str = include_str!("../data/rhesus.csv");
pub const CANDY_CSV: &str = include_str!("../data/candy.csv");
pub const CANDY_MODEL_CSV: &str = include_str!("../data/candy-model.csv");
pub const POISSON_OBSERVATIONS_CSV: &str = include_str!("../data/poisson-observations.csv");

pub const NAMES: [&str; 4] = ["rhesus", "candy", "candy-model", "poisson-observations"];

/// Raw text of a bundled file.
pub fn get(name: &str) -> Option<&'static str> {
    Some(match name.trim_end_matches(".csv") {
        "rhesus" => RHESUS_CSV,
        "candy" => CANDY_CSV,
        "candy-model" => CANDY_MODEL_CSV,
        "poisson-observations" => POISSON_OBSERVATIONS_CSV,
        _ => return None,
    })
}

/// The 45 genotype-pair counts in lexicographic order.
pub fn rhesus_counts() -> EmpiricalCounts {
    let rows = parse_counts_csv(RHESUS_CSV).expect("bundled rhesus.csv parses");
    EmpiricalCounts::dense(rows.into_iter().map(|r| r.count).collect()).expect("45 bins")
}

pub fn candy_counts() -> EmpiricalCounts {
    let rows = parse_counts_csv(CANDY_CSV).expect("bundled candy.csv parses");
    EmpiricalCounts::dense(rows.into_iter().map(|r| r.count).collect()).expect("5 bins")
}

pub fn candy_model() -> BinDistribution {
    parse_model_csv(CANDY_MODEL_CSV).expect("bundled candy-model.csv parses")
}

/// The Poisson(100) model truncated at the default tail tolerance.
pub fn poisson100() -> BinDistribution {
    poisson_model(100.0, DEFAULT_TAIL_TOLERANCE)
        .expect("valid Poisson parameters")
        .into_distribution()
}

/// The Poisson observations placed on the bins of `model`.
pub fn poisson_observations(model: &BinDistribution) -> Result<EmpiricalCounts> {
    let rows = parse_counts_csv(POISSON_OBSERVATIONS_CSV)?;
    align_counts(&rows, &Model::Fixed(model.clone()))
}

/// Names accepted by [`plot_experiment`].
pub const PLOT_EXPERIMENTS: [&str; 4] = [
    "poisson-pmf-observed",
    "poisson-pmf-simulated",
    "poisson-cmf-observed",
    "poisson-cmf-simulated",
];

/// Plot data for the Poisson experiments. The simulated variants draw ten
/// values from the model on the dataset stream of `seed`.
pub fn plot_experiment(name: &str, seed: u64) -> Result<PlotSeries> {
    let model = poisson100();
    let counts = match name {
        "poisson-pmf-observed" | "poisson-cmf-observed" => poisson_observations(&model)?,
        "poisson-pmf-simulated" | "poisson-cmf-simulated" => {
            sample_counts(&model, 10, &mut rng::stream(seed, Domain::Dataset, 0))?
        }
        other => {
            return Err(GofError::invalid(format!(
                "unknown plot experiment '{other}'"
            )))
        }
    };
    let n = counts.n() as f64;
    let observed: Vec<f64> = counts.to_dense()?.iter().map(|&c| c as f64 / n).collect();
    Ok(if name.contains("-cmf-") {
        PlotSeries::cmf(&model, &observed)
    } else {
        PlotSeries::pmf(&model, &observed)
    })
}
