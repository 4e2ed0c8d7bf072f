use std::fs;
use std::path::Path;

use dgof::datasets;
use dgof::io::{
    align_counts, parse_counts_csv, parse_draws_binary, parse_draws_text, ModelSpec, PlotSeries,
};
use dgof::montecarlo::{pvalue, pvalue_sparse, with_workers};
use dgof::orderings::{ordering_trials, permutation_digest, pseudorandom_ordering, TrialResult};
use dgof::rng::{self, Domain, RNG_ID};
use dgof::statistics::parse_statistic_list;
use dgof::theory::{
    self, power_mean_target, power_scenario_mean_ks, power_scenario_stats, sparse_limit_check,
    verify_bridge_constant, PowerScenario, TheoryRecord, BRIDGE_CONSTANT,
};
use dgof::{EmpiricalCounts, Ordering, PValueReport, SparseUniformModel, StatisticKind, TestSpec};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::InFile;
use crate::{
    Claim, Cli, CliError, Command, DataArgs, DatasetArgs, Format, PlotArgs, RngArgs, RunArgs,
    TestArgs, TheoryArgs, TrialsArgs,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_STATS: &str = "ks,euclid,chi2,g2,ft";

type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Test(a) => test(a),
        Command::Trials(a) => trials(a),
        Command::Theory(a) => theory_cmd(a),
        Command::RngUniform(a) => rng_uniform(a),
        Command::Plot(a) => plot(a),
        Command::Dataset(a) => dataset(a),
    }
}

/// Canonical command line, rebuilt from resolved settings so that re-running
/// it reproduces the output.
struct CommandLine(Vec<String>);

impl CommandLine {
    fn new(sub: &str) -> Self {
        Self(vec!["dgof".into(), sub.into()])
    }

    fn arg(&mut self, a: impl ToString) -> &mut Self {
        self.0.push(a.to_string());
        self
    }

    fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.0.push(format!("--{name}"));
        self.0.push(value.to_string());
        self
    }

    fn text(&self) -> String {
        self.0.join(" ")
    }
}

/// Text of a file, or of a bundled dataset named `builtin:NAME`.
pub fn read_text(spec: &str) -> Result<String> {
    match spec.strip_prefix("builtin:") {
        Some(name) => datasets::get(name).map(str::to_string).ok_or_else(|| {
            CliError::usage(format!(
                "no bundled dataset '{name}'; try `dgof dataset --list`"
            ))
        }),
        None => fs::read_to_string(spec).map_err(|error| CliError::Io {
            file: spec.to_string(),
            error,
        }),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|error| CliError::Io {
            file: p.display().to_string(),
            error,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serializes");
    s.push('\n');
    s
}

fn envelope(cmd: &CommandLine, seed: u64, sims: u64) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("dgof"));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(cmd.text()));
    m.insert("seed".into(), json!(seed));
    m.insert("rng_id".into(), json!(RNG_ID));
    m.insert("simulations".into(), json!(sims));
    m
}

fn stats_of(spec: Option<&str>) -> Result<Vec<StatisticKind>> {
    Ok(parse_statistic_list(spec.unwrap_or(DEFAULT_STATS))?)
}

fn stats_text(kinds: &[StatisticKind]) -> String {
    kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")
}

/// Resolves `--ordering`, returning the ordering and its canonical spelling.
fn parse_ordering(
    spec: Option<&str>,
    model: &ModelSpec,
    m: usize,
    seed: u64,
) -> Result<(Ordering, String)> {
    let default = if matches!(model, ModelSpec::HardyWeinberg) {
        "lexicographic"
    } else {
        "identity"
    };
    let spec = spec.unwrap_or(default).trim();
    let bad = || {
        CliError::usage(format!(
            "bad ordering '{spec}'; use identity, lexicographic, random:T or perm:I,J,..."
        ))
    };
    let ordering = match spec {
        "identity" => Ordering::identity(m),
        "lexicographic" => Ordering::lexicographic(m),
        _ => {
            if let Some(t) = spec.strip_prefix("random:") {
                pseudorandom_ordering(m, seed, t.trim().parse().map_err(|_| bad())?)
            } else if let Some(list) = spec.strip_prefix("perm:") {
                let perm = list
                    .split(',')
                    .map(|s| match s.trim().parse::<usize>() {
                        Ok(i) if i >= 1 => Ok(i - 1),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ordering::explicit(perm)?
            } else {
                return Err(bad());
            }
        }
    };
    if ordering.len() != m {
        return Err(CliError::usage(format!(
            "ordering has {} bins but the model has {m}",
            ordering.len()
        )));
    }
    Ok((ordering, spec.replace(' ', "")))
}

struct Loaded {
    spec: TestSpec,
    data_name: String,
    model_spec: ModelSpec,
    ordering_text: String,
}

fn load(data: &DataArgs, run: &RunArgs) -> Result<Loaded> {
    let data_name = data
        .data
        .clone()
        .ok_or_else(|| CliError::usage("--data is required"))?;
    let model_text = data
        .model
        .as_deref()
        .ok_or_else(|| CliError::usage("--model is required"))?;
    let model_spec: ModelSpec = model_text.parse()?;
    let model = match &model_spec {
        ModelSpec::File(path) => {
            let text = read_text(path)?;
            model_spec.build(|_| Ok(text)).in_file(path)?
        }
        other => other.build(|_| unreachable!("only file models are read"))?,
    };
    let rows = parse_counts_csv(&read_text(&data_name)?).in_file(&data_name)?;
    let counts = align_counts(&rows, &model).in_file(&data_name)?;
    let statistics = stats_of(data.stats.as_deref())?;
    let (ordering, ordering_text) = parse_ordering(
        data.ordering.as_deref(),
        &model_spec,
        model.num_bins(),
        run.seed,
    )?;
    Ok(Loaded {
        spec: TestSpec {
            data: counts,
            model,
            statistics,
            ordering,
            sims: run.sims,
            seed: run.seed,
        },
        data_name,
        model_spec,
        ordering_text,
    })
}

fn test_command_line(sub: &str, l: &Loaded) -> CommandLine {
    let mut cmd = CommandLine::new(sub);
    cmd.flag("data", &l.data_name)
        .flag("model", &l.model_spec)
        .flag("stats", stats_text(&l.spec.statistics))
        .flag("ordering", &l.ordering_text)
        .flag("sims", l.spec.sims)
        .flag("seed", l.spec.seed);
    cmd
}

fn describe(l: &Loaded) -> Vec<(&'static str, Value)> {
    vec![
        ("data", json!(l.data_name)),
        ("model", json!(l.model_spec.to_string())),
        ("n", json!(l.spec.data.n())),
        ("bins", json!(l.spec.model.num_bins())),
        (
            "ordering",
            json!({
                "spec": l.ordering_text,
                "digest": permutation_digest(l.spec.ordering.perm()),
            }),
        ),
    ]
}

fn reports_text(header: &str, reports: &[PValueReport]) -> String {
    let mut s = format!("{header}\n");
    for r in reports {
        s.push_str(&format!("{r}\n"));
    }
    s
}

fn test(a: &TestArgs) -> Result<()> {
    let l = load(&a.data, &a.run)?;
    let reports = with_workers(a.run.workers, || pvalue(&l.spec))??;
    let cmd = test_command_line("test", &l);
    let text = match a.out.format {
        Format::Json => {
            let mut env = envelope(&cmd, l.spec.seed, l.spec.sims);
            for (k, v) in describe(&l) {
                env.insert(k.into(), v);
            }
            env.insert(
                "reports".into(),
                reports.iter().map(PValueReport::to_json_value).collect(),
            );
            pretty(&Value::Object(env))
        }
        Format::Text => reports_text(
            &format!("# {}  (rng {RNG_ID}, dgof {VERSION})", cmd.text()),
            &reports,
        ),
    };
    write_out(a.out.output.as_deref(), &text)
}

fn trials(a: &TrialsArgs) -> Result<()> {
    let l = load(&a.data, &a.run)?;
    let results = with_workers(a.run.workers, || ordering_trials(&l.spec, a.trials))??;
    let mut cmd = test_command_line("trials", &l);
    cmd.flag("trials", a.trials);
    let text = match a.out.format {
        Format::Json => {
            let mut env = envelope(&cmd, l.spec.seed, l.spec.sims);
            for (k, v) in describe(&l) {
                env.insert(k.into(), v);
            }
            env.insert("trials".into(), json!(a.trials));
            let mut s = Value::Object(env).to_string();
            s.push('\n');
            for t in &results {
                s.push_str(&t.to_json_line());
                s.push('\n');
            }
            s
        }
        Format::Text => {
            let mut s = format!("# {}  (rng {RNG_ID}, dgof {VERSION})\n", cmd.text());
            for t in &results {
                s.push_str(&format!(
                    "trial {} ({:?}, {})\n",
                    t.trial,
                    t.ordering.kind(),
                    t.digest
                ));
                for r in &t.reports {
                    s.push_str(&format!("  {r}\n"));
                }
            }
            s
        }
    };
    if let Some(path) = &a.plot {
        write_out(
            Some(path),
            &plot_csv(&cmd, l.spec.seed, l.spec.sims, &trial_series(&results)),
        )?;
    }
    write_out(a.out.output.as_deref(), &text)
}

fn trial_series(results: &[TrialResult]) -> PlotSeries {
    PlotSeries::trial_pvalues(results)
}

fn plot_csv(cmd: &CommandLine, seed: u64, sims: u64, series: &PlotSeries) -> String {
    format!(
        "# {}; dgof {VERSION}; seed {seed}; simulations {sims}; rng {RNG_ID}\n{}",
        cmd.text(),
        series.to_csv()
    )
}

#[allow(clippy::too_many_arguments)]
fn record(
    claim: &str,
    m: Option<u64>,
    n: Option<u64>,
    trials: u64,
    estimate: f64,
    target: f64,
    stderr: f64,
    tolerance: f64,
) -> TheoryRecord {
    TheoryRecord {
        claim: claim.to_string(),
        m,
        n,
        trials,
        estimate,
        target,
        stderr,
        tolerance,
        pass: (estimate - target).abs() <= tolerance,
    }
}

fn theory_records(a: &TheoryArgs, cmd: &mut CommandLine) -> Result<Vec<TheoryRecord>> {
    let seed = a.seed;
    Ok(match a.claim {
        Claim::Bridge => {
            let (m, trials) = (a.m.unwrap_or(10_000), a.trials.unwrap_or(10_000));
            cmd.flag("m", m).flag("trials", trials);
            let e = verify_bridge_constant(m, trials, seed)?;
            vec![record(
                "bridge",
                Some(m),
                None,
                trials,
                e.estimate,
                BRIDGE_CONSTANT,
                e.stderr,
                0.015 * BRIDGE_CONSTANT,
            )]
        }
        Claim::NullEuclid => {
            let (m, n, trials) = (
                a.m.unwrap_or(10_000),
                a.n.unwrap_or(100),
                a.trials.unwrap_or(10_000),
            );
            cmd.flag("m", m).flag("n", n).flag("trials", trials);
            let model = dgof::distributions::make_uniform(m as usize)?;
            let e = theory::null_expectation_euclid(&model, n, trials, seed)?;
            let tol = 5.0 * e.stderr + 1e-12 * e.target;
            vec![record(
                "null-euclid",
                Some(m),
                Some(n),
                trials,
                e.estimate,
                e.target,
                e.stderr,
                tol,
            )]
        }
        Claim::NullKs => {
            let (m, n, trials) = (
                a.m.unwrap_or(10_000),
                a.n.unwrap_or(10_000),
                a.trials.unwrap_or(1_000),
            );
            cmd.flag("m", m).flag("n", n).flag("trials", trials);
            let model = dgof::distributions::make_uniform(m as usize)?;
            let e = theory::null_expectation_ks(&model, n, trials, seed)?;
            vec![record(
                "null-ks",
                Some(m),
                Some(n),
                trials,
                e.estimate,
                e.target,
                e.stderr,
                0.03,
            )]
        }
        Claim::Power => {
            let (m, c, trials) = (
                a.m.unwrap_or(10_000),
                a.c.unwrap_or(1e-5),
                a.trials.unwrap_or(10_000),
            );
            cmd.flag("m", m).flag("c", c).flag("trials", trials);
            let mu = m as usize;
            let id = Ordering::identity(mu);
            let (u, v_min) = power_scenario_stats(&PowerScenario::alternating(mu, c)?, &id)?;
            let (_, v_max) = power_scenario_stats(&PowerScenario::sorted(mu, c)?, &id)?;
            let mean = power_scenario_mean_ks(mu, c, trials, seed)?;
            let u_target = (m as f64).sqrt() * c;
            let v_max_target = m as f64 * c / 2.0;
            let mean_target = power_mean_target(mu, c);
            vec![
                record(
                    "power-u",
                    Some(m),
                    None,
                    1,
                    u,
                    u_target,
                    0.0,
                    1e-12 * u_target,
                ),
                record("power-v-min", Some(m), None, 1, v_min, c, 0.0, 1e-12 * c),
                record(
                    "power-v-max",
                    Some(m),
                    None,
                    1,
                    v_max,
                    v_max_target,
                    0.0,
                    1e-12 * v_max_target,
                ),
                record(
                    "power-v-random",
                    Some(m),
                    None,
                    trials,
                    mean.mean,
                    mean_target,
                    mean.stderr,
                    0.02 * mean_target,
                ),
            ]
        }
        Claim::SparseLimit => {
            let (n, support, trials) = (
                a.n.unwrap_or(1_000),
                a.support.unwrap_or(1 << 32),
                a.trials.unwrap_or(1_000),
            );
            cmd.flag("n", n).flag("M", support).flag("trials", trials);
            let r = sparse_limit_check(n, support, trials, seed)?;
            let p = r.collision_probability;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            vec![record(
                "sparse-limit",
                Some(support),
                Some(n),
                trials,
                r.fraction,
                p,
                se,
                5.0 * se,
            )]
        }
    })
}

fn theory_cmd(a: &TheoryArgs) -> Result<()> {
    let name = a.claim_name();
    let mut cmd = CommandLine::new("theory");
    cmd.arg(name);
    let records = with_workers(a.workers, || theory_records(a, &mut cmd))??;
    cmd.flag("seed", a.seed);
    let text = match a.out.format {
        Format::Json => {
            let trials = records.iter().map(|r| r.trials).max().unwrap_or(0);
            let mut env = envelope(&cmd, a.seed, trials);
            env.insert("claim".into(), json!(name));
            env.insert("pass".into(), json!(records.iter().all(|r| r.pass)));
            env.insert(
                "records".into(),
                serde_json::to_value(&records).expect("records serialize"),
            );
            pretty(&Value::Object(env))
        }
        Format::Text => {
            let mut s = format!("# {}  (rng {RNG_ID}, dgof {VERSION})\n", cmd.text());
            for r in &records {
                s.push_str(&format!(
                    "{:<15} estimate {:.6e}  target {:.6e}  tolerance {:.2e}  {}\n",
                    r.claim,
                    r.estimate,
                    r.target,
                    r.tolerance,
                    if r.pass { "PASS" } else { "FAIL" }
                ));
            }
            s
        }
    };
    write_out(a.out.output.as_deref(), &text)
}

impl TheoryArgs {
    fn claim_name(&self) -> &'static str {
        match self.claim {
            Claim::Bridge => "bridge",
            Claim::NullEuclid => "null-euclid",
            Claim::NullKs => "null-ks",
            Claim::Power => "power",
            Claim::SparseLimit => "sparse-limit",
        }
    }
}

/// Zero-based draws from `sequential:N` or `uniform:N`.
fn generate_draws(spec: &str, support: u64, data_seed: u64) -> Result<Vec<u64>> {
    let bad = || {
        CliError::usage(format!(
            "bad generator '{spec}'; use sequential:N or uniform:N"
        ))
    };
    let (kind, n) = spec.split_once(':').ok_or_else(bad)?;
    let n: u64 = n.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(CliError::usage("the draw stream is empty"));
    }
    match kind {
        "sequential" => {
            if n > support {
                return Err(CliError::usage(format!(
                    "sequential:{n} exceeds the support {support}"
                )));
            }
            Ok((0..n).collect())
        }
        "uniform" => {
            let mut r = rng::stream(data_seed, Domain::Dataset, 0);
            Ok((0..n).map(|_| r.random_range(0..support)).collect())
        }
        _ => Err(bad()),
    }
}

fn rng_uniform(a: &RngArgs) -> Result<()> {
    let mut cmd = CommandLine::new("rng-uniform");
    let draws = match (&a.draws, &a.generate) {
        (Some(path), None) => {
            cmd.flag("draws", path);
            if a.binary {
                cmd.arg("--binary");
                let bytes = fs::read(path).map_err(|error| CliError::Io {
                    file: path.clone(),
                    error,
                })?;
                parse_draws_binary(&bytes, a.support).in_file(path)?
            } else {
                parse_draws_text(&read_text(path)?, a.support).in_file(path)?
            }
        }
        (None, Some(spec)) => {
            cmd.flag("generate", spec);
            if spec.starts_with("uniform") {
                cmd.flag("data-seed", a.data_seed);
            }
            generate_draws(spec, a.support, a.data_seed)?
        }
        _ => return Err(CliError::usage("give exactly one of --draws or --generate")),
    };
    let kinds = parse_statistic_list(&a.stats)?;
    cmd.flag("support", a.support)
        .flag("stats", stats_text(&kinds))
        .flag("sims", a.run.sims)
        .flag("seed", a.run.seed);
    let n = draws.len();
    let data = EmpiricalCounts::sparse_from_draws(a.support, draws)?;
    let model = SparseUniformModel::new(a.support)?;
    let reports = with_workers(a.run.workers, || {
        pvalue_sparse(&data, &model, &kinds, a.run.sims, a.run.seed)
    })??;
    let text = match a.out.format {
        Format::Json => {
            let mut env = envelope(&cmd, a.run.seed, a.run.sims);
            env.insert("n".into(), json!(n));
            env.insert("support".into(), json!(a.support));
            env.insert(
                "reports".into(),
                reports.iter().map(PValueReport::to_json_value).collect(),
            );
            pretty(&Value::Object(env))
        }
        Format::Text => reports_text(
            &format!("# {}  (rng {RNG_ID}, dgof {VERSION})", cmd.text()),
            &reports,
        ),
    };
    write_out(a.out.output.as_deref(), &text)
}

fn plot(a: &PlotArgs) -> Result<()> {
    let mut cmd = CommandLine::new("plot");
    cmd.arg(&a.experiment);
    let text = if a.experiment == "trial-pvalues" {
        let l = load(&a.data, &a.run)?;
        let results = with_workers(a.run.workers, || ordering_trials(&l.spec, a.trials))??;
        let mut cmd = test_command_line("plot", &l);
        cmd.0.insert(2, a.experiment.clone());
        cmd.flag("trials", a.trials);
        plot_csv(&cmd, l.spec.seed, l.spec.sims, &trial_series(&results))
    } else if datasets::PLOT_EXPERIMENTS.contains(&a.experiment.as_str()) {
        cmd.flag("seed", a.run.seed);
        let series = datasets::plot_experiment(&a.experiment, a.run.seed)?;
        plot_csv(&cmd, a.run.seed, 0, &series)
    } else {
        return Err(CliError::usage(format!(
            "unknown experiment '{}'; expected one of {}, trial-pvalues",
            a.experiment,
            datasets::PLOT_EXPERIMENTS.join(", ")
        )));
    };
    write_out(a.output.as_deref(), &text)
}

fn dataset(a: &DatasetArgs) -> Result<()> {
    if a.list {
        return write_out(a.output.as_deref(), &(datasets::NAMES.join("\n") + "\n"));
    }
    let name = a.name.as_deref().unwrap_or_default();
    let text = datasets::get(name).ok_or_else(|| {
        CliError::usage(format!(
            "no bundled dataset '{name}'; expected one of {}",
            datasets::NAMES.join(", ")
        ))
    })?;
    write_out(a.output.as_deref(), text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn canonical_command_reparses_to_same_settings() {
        let cli = Cli::parse_from([
            "dgof",
            "test",
            "--data",
            "builtin:candy",
            "--model",
            "uniform:5",
            "--stats",
            "euclid,chi2",
            "--sims",
            "500",
            "--seed",
            "3",
        ]);
        let Command::Test(a) = &cli.command else {
            unreachable!()
        };
        let l = load(&a.data, &a.run).unwrap();
        let line = test_command_line("test", &l).text();
        let again = Cli::parse_from(line.split(' '));
        let Command::Test(b) = &again.command else {
            unreachable!()
        };
        let l2 = load(&b.data, &b.run).unwrap();
        assert_eq!(test_command_line("test", &l2).text(), line);
        assert_eq!(b.run.sims, 500);
        assert_eq!(b.data.stats.as_deref(), Some("euclidean,chi2"));
    }

    #[test]
    fn orderings_parse() {
        let uni = ModelSpec::Uniform(3);
        assert_eq!(parse_ordering(None, &uni, 3, 0).unwrap().1, "identity");
        assert_eq!(
            parse_ordering(None, &ModelSpec::HardyWeinberg, 45, 0)
                .unwrap()
                .1,
            "lexicographic"
        );
        let (o, _) = parse_ordering(Some("perm:3,1,2"), &uni, 3, 0).unwrap();
        assert_eq!(o.perm(), &[2, 0, 1]);
        assert!(parse_ordering(Some("perm:1,1,2"), &uni, 3, 0).is_err());
        assert!(parse_ordering(Some("perm:1,2"), &uni, 3, 0).is_err());
        assert!(parse_ordering(Some("sideways"), &uni, 3, 0).is_err());
        let (r, _) = parse_ordering(Some("random:4"), &uni, 3, 9).unwrap();
        assert_eq!(r, pseudorandom_ordering(3, 9, 4));
    }

    #[test]
    fn generators() {
        assert_eq!(
            generate_draws("sequential:3", 10, 0).unwrap(),
            vec![0, 1, 2]
        );
        assert!(generate_draws("sequential:11", 10, 0).is_err());
        assert!(generate_draws("uniform:0", 10, 0).is_err());
        let u = generate_draws("uniform:100", 7, 1).unwrap();
        assert!(u.iter().all(|&d| d < 7));
        assert_eq!(u, generate_draws("uniform:100", 7, 1).unwrap());
    }

    #[test]
    fn builtin_files_resolve() {
        assert!(read_text("builtin:rhesus")
            .unwrap()
            .starts_with("label,count"));
        assert!(read_text("builtin:nope").is_err());
    }
}
