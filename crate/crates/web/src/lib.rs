//! WebAssembly bindings for the browser demo. Each export returns a JSON
//! string; the same functions are callable natively for testing.

use dgof::distributions::{make_uniform, poisson_model, DEFAULT_TAIL_TOLERANCE};
use dgof::montecarlo::{format_f64_17, pvalue};
use dgof::orderings::pseudorandom_ordering;
use dgof::statistics::{euclidean_statistic, ks_statistic};
use dgof::theory::{power_mean_target, power_scenario_stats, PowerScenario};
use dgof::{EmpiricalCounts, Model, Ordering, StatisticKind, TestSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest simulation count the page may request.
pub const MAX_SIMS: u32 = 1_000_000;

fn num(x: f64) -> Value {
    serde_json::from_str(&format_f64_17(x)).expect("number literal")
}

/// P-values of `counts` against the uniform model over as many bins.
pub fn uniform_pvalues(counts: &[u32], sims: u32, seed: u32) -> Result<String, String> {
    if sims == 0 || sims > MAX_SIMS {
        return Err(format!("simulations must be between 1 and {MAX_SIMS}"));
    }
    let m = counts.len();
    let spec = TestSpec {
        data: EmpiricalCounts::dense(counts.iter().map(|&c| c as u64).collect())
            .map_err(|e| e.to_string())?,
        model: Model::Fixed(make_uniform(m).map_err(|e| e.to_string())?),
        statistics: vec![
            StatisticKind::Ks,
            StatisticKind::Euclidean,
            StatisticKind::Chi2,
            StatisticKind::G2,
            StatisticKind::FreemanTukey,
        ],
        ordering: Ordering::identity(m),
        sims: sims as u64,
        seed: seed as u64,
    };
    let reports = pvalue(&spec).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": spec.data.n(),
        "reports": reports.iter().map(|r| r.to_json_value()).collect::<Vec<_>>(),
    })
    .to_string())
}

/// The running difference between the equal-magnitude alternative and the
/// uniform model under a pseudorandom ordering of the signs.
pub fn power_walk(m: u32, c: f64, seed: u32) -> Result<String, String> {
    let m = m as usize;
    let scenario = PowerScenario::sorted(m, c).map_err(|e| e.to_string())?;
    let ordering = pseudorandom_ordering(m, seed as u64, 1);
    let (u, v) = power_scenario_stats(&scenario, &ordering).map_err(|e| e.to_string())?;
    let mut walk = Vec::with_capacity(m + 1);
    let mut pos: i64 = 0;
    walk.push(0);
    for &j in ordering.perm() {
        pos += scenario.signs()[j] as i64;
        walk.push(pos);
    }
    Ok(json!({
        "m": m,
        "c": num(c),
        "u": num(u),
        "v": num(v),
        "v_min": num(c),
        "v_max": num(m as f64 * c / 2.0),
        "v_mean_limit": num(power_mean_target(m, c)),
        "walk": walk,
    })
    .to_string())
}

/// Model and observed pmf/cmf for integer observations under Poisson(lambda),
/// with the KS and Euclidean statistics in natural bin order.
pub fn poisson_curves(lambda: f64, observations: &[u32]) -> Result<String, String> {
    if observations.is_empty() {
        return Err("enter at least one observation".into());
    }
    let model = poisson_model(lambda, DEFAULT_TAIL_TOLERANCE).map_err(|e| e.to_string())?;
    let dist = model.distribution();
    let m = dist.len();
    let last = model.last_index();
    let mut counts = vec![0u64; m];
    for &x in observations {
        counts[(x as usize).min(last + 1).min(m - 1)] += 1;
    }
    let data = EmpiricalCounts::dense(counts).map_err(|e| e.to_string())?;
    let n = data.n() as f64;
    let observed: Vec<f64> = data
        .as_dense()
        .expect("dense")
        .iter()
        .map(|&c| c as f64 / n)
        .collect();
    let ks = ks_statistic(&data, dist, &Ordering::identity(m)).map_err(|e| e.to_string())?;
    let euclid = euclidean_statistic(&data, dist).map_err(|e| e.to_string())?;
    Ok(json!({
        "lambda": num(lambda),
        "labels": dist.labels().map(<[String]>::to_vec).unwrap_or_default(),
        "model_pmf": dist.probs(),
        "model_cmf": dist.cumulative(),
        "observed_pmf": observed,
        "observed_cmf": running(&observed),
        "ks": num(ks),
        "euclidean": num(euclid),
    })
    .to_string())
}

fn running(v: &[f64]) -> Vec<f64> {
    let mut acc = dgof::numeric::CompensatedSum::new();
    v.iter()
        .map(|&x| {
            acc.add(x);
            acc.value()
        })
        .collect()
}

#[wasm_bindgen(js_name = uniformPvalues)]
pub fn uniform_pvalues_js(counts: &[u32], sims: u32, seed: u32) -> Result<String, JsValue> {
    uniform_pvalues(counts, sims, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = powerWalk)]
pub fn power_walk_js(m: u32, c: f64, seed: u32) -> Result<String, JsValue> {
    power_walk(m, c, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = poissonCurves)]
pub fn poisson_curves_js(lambda: f64, observations: &[u32]) -> Result<String, JsValue> {
    poisson_curves(lambda, observations).map_err(|e| JsValue::from_str(&e))
}
