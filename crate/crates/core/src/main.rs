use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fairevo::data::Group;
use fairevo::experiment::{self, stats, PartialConfig};
use fairevo::fairness::{self, objective_names, MetricsConfig};
use fairevo::indicators::{self, HvConfig, HvSampler, NormalizationBounds, Point};
use fairevo::moea::Mode;
use fairevo::reduction::{self, CorrelationMatrix};
use fairevo::{Error, Result};

#[derive(Parser)]
#[command(name = "fairevo", version, about = "Fairness-aware multiobjective evolutionary learning")]
#[command(args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file for single-output commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// famoel, moel or static-mask.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Selection threshold in (0, 1).
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    generations: Option<usize>,
    /// Dataset CSV.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Dataset schema (TOML); defaults to schema.toml next to the dataset.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Per-dataset hyperparameter preset (e.g. german, adult).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// More log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (folds x trials) and write its artifacts.
    Run(RunArgs),
    /// Quality indicators of a point set.
    Indicators(IndicatorArgs),
    /// Select representative objectives from a correlation or objective matrix.
    Reduce(ReduceArgs),
    /// The 26 objectives of a set of predictions.
    Metrics(MetricsArgs),
    /// SVG charts from experiment directories.
    Plot(PlotArgs),
    /// Friedman comparison of several experiments.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Capacity of each archive.
    #[arg(long)]
    archive: Option<usize>,
    /// Offspring per generation.
    #[arg(long)]
    offspring: Option<usize>,
    /// Comma-separated τ values; one experiment per value.
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hv_samples: Option<usize>,
    /// Objective names for static-mask mode, e.g. CE,f4,f7.
    #[arg(long, value_delimiter = ',')]
    static_mask: Option<Vec<String>>,
    #[arg(long)]
    save_genomes: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Union,
    Box,
}

#[derive(Args)]
struct IndicatorArgs {
    /// Point set CSV, one row per point.
    #[arg(long)]
    set: PathBuf,
    /// Reference front CSV; defaults to the nondominated part of the set.
    #[arg(long)]
    front: Option<PathBuf>,
    /// Keep only rows whose `split` column equals this value.
    #[arg(long)]
    split: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1.2)]
    reference: f64,
    #[arg(long, value_enum, default_value = "union")]
    sampler: SamplerArg,
}

#[derive(Args)]
struct ReduceArgs {
    /// Square correlation matrix CSV.
    #[arg(long, conflicts_with = "objectives", required_unless_present = "objectives")]
    matrix: Option<PathBuf>,
    /// Population objective matrix CSV (rows = individuals).
    #[arg(long)]
    objectives: Option<PathBuf>,
    /// Print objective names instead of indices.
    #[arg(long)]
    names: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with columns label, score (probability) and group (1 = privileged).
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Experiment or run directories; each becomes one HV line.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// `NAME=DIR` pairs; DIR holds a summary.csv.
    #[arg(long, required = true, num_args = 2..)]
    input: Vec<String>,
    /// Column of summary.csv to compare.
    #[arg(long, default_value = "test_hv")]
    indicator: String,
    /// Algorithm the others are compared with; defaults to the last input.
    #[arg(long)]
    reference: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Run(a) => cmd_run(g, a),
        Command::Indicators(a) => cmd_indicators(g, a),
        Command::Reduce(a) => cmd_reduce(g, a),
        Command::Metrics(a) => cmd_metrics(g, a),
        Command::Plot(a) => {
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("plots"));
            for p in experiment::emit_plots(&a.input, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Compare(a) => cmd_compare(g, a),
    }
}

fn cmd_run(g: &GlobalArgs, a: &RunArgs) -> Result<()> {
    let flags = PartialConfig {
        preset: g.preset.clone(),
        dataset: g.dataset.clone(),
        schema: g.schema.clone(),
        mode: g.mode,
        seed: g.seed,
        out: g.out.clone(),
        tau: g.tau,
        generations: g.generations,
        folds: a.folds,
        trials: a.trials,
        archive_capacity: a.archive,
        offspring: a.offspring,
        tau_grid: a.tau_grid.clone(),
        warmup: a.warmup,
        window: a.window,
        hv_samples: a.hv_samples,
        static_mask: a.static_mask.clone(),
        save_genomes: a.save_genomes.then_some(true),
        ..Default::default()
    };
    let cfg = experiment::parse_config(g.config.as_deref(), &flags)?;
    if a.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    for (tau, outcomes) in experiment::run_experiment(&cfg)? {
        let n = outcomes.len() as f64;
        let hv = outcomes.iter().map(|o| o.last().test.hv).sum::<f64>() / n;
        println!("tau {tau}: {} runs, mean final test HV {hv:.6}", outcomes.len());
    }
    Ok(())
}

fn input_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Numeric rows of a CSV. A first row that does not parse is a header;
/// `id`/`split` columns are dropped, and `split` can filter rows.
fn read_points(path: &Path, split: Option<&str>) -> Result<Vec<Point>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| input_err(path, e.to_string()))?;
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| input_err(path, e.to_string()))?;
    let Some(first) = records.first() else {
        return Err(input_err(path, "empty file"));
    };
    let has_header = first.iter().any(|c| c.trim().parse::<f64>().is_err());
    let header: Vec<String> = if has_header {
        first.iter().map(|c| c.trim().to_owned()).collect()
    } else {
        Vec::new()
    };
    let split_col = header.iter().position(|h| h == "split");
    let skip: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.as_str() == "id" || h.as_str() == "split")
        .map(|(i, _)| i)
        .collect();
    let mut points = Vec::new();
    for (row, rec) in records.iter().enumerate().skip(usize::from(has_header)) {
        if let (Some(want), Some(c)) = (split, split_col) {
            if &rec[c] != want {
                continue;
            }
        }
        let p = rec
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(i, c)| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| input_err(path, format!("row {}, column {}: `{c}` is not a number", row + 1, i + 1)))
            })
            .collect::<Result<Point>>()?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(input_err(path, "no data rows"));
    }
    Ok(points)
}

fn cmd_indicators(g: &GlobalArgs, a: &IndicatorArgs) -> Result<()> {
    let set = read_points(&a.set, a.split.as_deref())?;
    let front = match &a.front {
        Some(p) => read_points(p, a.split.as_deref())?,
        None => indicators::nondominated_filter(&set),
    };
    let hv = HvConfig {
        reference: a.reference,
        n_samples: a.samples,
        seed: g.seed.unwrap_or(0),
        sampler: match a.sampler {
            SamplerArg::Union => HvSampler::Union,
            SamplerArg::Box => HvSampler::Box,
        },
    };
    let v = indicators::evaluate_set(&set, &front, &hv)?;
    let bounds = NormalizationBounds::from_points(&front)?;
    log::info!("normalization bounds: {:?}", bounds);
    emit(g, &format!("hv,gd,pd,sp\n{},{},{},{}\n", v.hv, v.gd, v.pd, v.sp))
}

/// Write to `--out` if given, else stdout.
fn emit(g: &GlobalArgs, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: "stdout".into(),
                source,
            })
        }
    }
}

fn cmd_reduce(g: &GlobalArgs, a: &ReduceArgs) -> Result<()> {
    let tau = g.tau.unwrap_or(reduction::ReductionConfig::default().tau);
    let check = reduction::ReductionConfig {
        tau,
        ..Default::default()
    };
    check.validate().map_err(|e| experiment::ConfigError::InvalidValue {
        field: "tau".into(),
        reason: e.to_string(),
    })?;
    let matrix = match (&a.matrix, &a.objectives) {
        (Some(p), _) => {
            let rows = read_points(p, None)?;
            CorrelationMatrix::from_rows(&rows).map_err(|e| input_err(p, e.to_string()))?
        }
        (None, Some(p)) => {
            let rows = read_points(p, None)?;
            reduction::mncie_matrix(&rows).map_err(|e| input_err(p, e.to_string()))?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let selected = reduction::select_from_matrix(&matrix, tau);
    let names = objective_names();
    let items: Vec<String> = selected
        .iter()
        .map(|&k| {
            if a.names && matrix.size() == names.len() {
                names[k].clone()
            } else {
                k.to_string()
            }
        })
        .collect();
    emit(g, &(items.join(",") + "\n"))
}

fn cmd_metrics(g: &GlobalArgs, a: &MetricsArgs) -> Result<()> {
    let path = &a.predictions;
    let mut reader = csv::Reader::from_path(path).map_err(|e| input_err(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| input_err(path, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| input_err(path, format!("missing column `{name}`")))
    };
    let (li, si, gi) = (col("label")?, col("score")?, col("group")?);
    let (mut y, mut score, mut groups) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| input_err(path, e.to_string()))?;
        let bad = |c: &str| input_err(path, format!("row {}: bad value `{c}`", row + 1));
        y.push(match rec[li].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(other)),
        });
        score.push(rec[si].trim().parse::<f64>().map_err(|_| bad(&rec[si]))?);
        groups.push(match rec[gi].trim() {
            "0" => Group::Unprivileged,
            "1" => Group::Privileged,
            other => return Err(bad(other)),
        });
    }
    let cfg = MetricsConfig {
        alpha: a.alpha,
        dirichlet_concentration: a.concentration,
    };
    cfg.validate().map_err(|e| experiment::ConfigError::InvalidValue {
        field: "metrics".into(),
        reason: e.to_string(),
    })?;
    let e = fairness::evaluate_predictions(&y, &score, &groups, &cfg)?;
    let values: Vec<String> = e.objectives.values().iter().map(|v| v.to_string()).collect();
    emit(g, &format!("{}\n{}\n", objective_names().join(","), values.join(",")))
}

fn cmd_compare(g: &GlobalArgs, a: &CompareArgs) -> Result<()> {
    let mut samples = stats::IndicatorSamples::new();
    let mut order = Vec::new();
    for spec in &a.input {
        let (name, dir) = spec.split_once('=').ok_or_else(|| experiment::ConfigError::InvalidValue {
            field: "input".into(),
            reason: format!("`{spec}` is not NAME=DIR"),
        })?;
        order.push(name.to_owned());
        let path = Path::new(dir).join("summary.csv");
        let mut reader = csv::Reader::from_path(&path).map_err(|_| Error::MissingArtifacts(path.display().to_string()))?;
        let headers = reader.headers().map_err(|e| input_err(&path, e.to_string()))?.clone();
        let col = |n: &str| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| input_err(&path, format!("missing column `{n}`")))
        };
        let (di, ri, vi) = (col("dataset")?, col("run")?, col(&a.indicator)?);
        for rec in reader.records() {
            let rec = rec.map_err(|e| input_err(&path, e.to_string()))?;
            if &rec[ri] == "mean" {
                continue;
            }
            let v: f64 = rec[vi].parse().map_err(|_| input_err(&path, format!("bad value `{}`", &rec[vi])))?;
            samples
                .entry(rec[di].to_owned())
                .or_insert_with(BTreeMap::new)
                .entry(name.to_owned())
                .or_default()
                .push(v);
        }
    }
    let reference = a.reference.clone().unwrap_or_else(|| order.last().cloned().unwrap_or_default());
    let indicator = a.indicator.trim_start_matches("test_");
    let higher_is_better = matches!(indicator, "hv" | "pd");
    let report = stats::friedman_compare(&samples, &a.indicator, &reference, higher_is_better)?;
    for (alg, t) in &report.totals {
        eprintln!("{alg} vs {reference}: {}/{}/{} (win/tie/loss)", t.win, t.tie, t.loss);
    }
    emit(g, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
}
