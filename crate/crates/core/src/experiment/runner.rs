//! Fold x trial orchestration and on-disk artifacts.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! out/
//!   summary.csv
//!   run_f<fold>_t<trial>/
//!     run.json  generations.csv  timings.csv  mask.csv  final_objectives.csv  [genomes.bin]
//! ```
//!
//! With a τ grid each value gets its own `out/tau_<τ>/` directory and
//! `out/tau_sweep.csv` collects the final test indicators.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ExperimentConfig};
use crate::data::{self, DatasetSchema, RawTable, SplitBundle};
use crate::indicators::{self, HvConfig, IndicatorValues, Point};
use crate::model::NetworkShape;
use crate::moea::{self, EvolutionConfig, GenerationRecord, RunArtifacts};
use crate::rng::{child_seed, mix64};
use crate::{Error, Result};

/// Header of `generations.csv`.
pub const GENERATION_COLUMNS: [&str; 10] = [
    "generation", "mask_size", "hv", "gd", "pd", "sp", "test_hv", "test_gd", "test_pd", "test_sp",
];

/// Row indices and seed of one (fold, trial) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPlan {
    pub fold: u32,
    pub trial: u32,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl RunPlan {
    pub fn dir_name(&self) -> String {
        format!("run_f{}_t{}", self.fold, self.trial)
    }
}

/// Partition seed of a fold. Separate from the trial seeds so that all
/// trials of a fold share the same split.
fn fold_seed(root: u64, fold: u32) -> u64 {
    child_seed(root, fold, u32::MAX)
}

/// All runs of an experiment.
///
/// With one fold the rows are split 6:2:2 once. With `k >= 2` folds each
/// fold's holdout is the test set and the remaining rows are split 3:1 into
/// train and validation.
pub fn plan_runs(n_rows: usize, folds: usize, trials: usize, root_seed: u64) -> Result<Vec<RunPlan>> {
    let mut parts = Vec::new();
    if folds == 1 {
        parts.push(data::split(n_rows, data::DEFAULT_RATIOS, fold_seed(root_seed, 0))?);
    } else {
        for (f, fold) in data::kfold(n_rows, folds, mix64(root_seed))?.into_iter().enumerate() {
            let (train, mut validation, rest) =
                data::split_indices(&fold.train, [0.75, 0.25, 0.0], fold_seed(root_seed, f as u32))?;
            // Rounding leftovers go to validation.
            validation.extend(rest);
            validation.sort_unstable();
            parts.push((train, validation, fold.holdout));
        }
    }
    let mut plans = Vec::new();
    for (f, (train, validation, test)) in parts.into_iter().enumerate() {
        for t in 0..trials {
            plans.push(RunPlan {
                fold: f as u32,
                trial: t as u32,
                seed: child_seed(root_seed, f as u32, t as u32),
                train: train.clone(),
                validation: validation.clone(),
                test: test.clone(),
            });
        }
    }
    Ok(plans)
}

/// Indicator values of one logged generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationIndicators {
    pub generation: usize,
    pub mask_size: usize,
    pub validation: IndicatorValues,
    pub test: IndicatorValues,
}

impl GenerationIndicators {
    fn csv_row(&self) -> String {
        let v = &self.validation;
        let t = &self.test;
        format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            self.generation, self.mask_size, v.hv, v.gd, v.pd, v.sp, t.hv, t.gd, t.pd, t.sp
        )
    }
}

/// Pseudo-front of one split: nondominated set over every logged population.
pub fn pooled_front(records: &[GenerationRecord], test: bool) -> Result<Vec<Point>> {
    let sets: Vec<Vec<Point>> = records
        .iter()
        .map(|r| if test { r.test_points() } else { r.validation_points() })
        .collect();
    Ok(indicators::build_pseudo_front(&sets)?)
}

/// HV/GD/PD/SP per generation on validation and test, each against the
/// run's own pseudo-front of that split.
pub fn generation_indicators(
    records: &[GenerationRecord],
    hv: &HvConfig,
    run_seed: u64,
) -> Result<Vec<GenerationIndicators>> {
    let val_front = pooled_front(records, false)?;
    let test_front = pooled_front(records, true)?;
    records
        .par_iter()
        .map(|r| {
            let cfg = HvConfig {
                seed: mix64(run_seed ^ r.generation as u64),
                ..*hv
            };
            Ok(GenerationIndicators {
                generation: r.generation,
                mask_size: r.mask.len(),
                validation: indicators::evaluate_set(&r.validation_points(), &val_front, &cfg)?,
                test: indicators::evaluate_set(&r.test_points(), &test_front, &cfg)?,
            })
        })
        .collect()
}

pub fn write_generations_csv(path: &Path, rows: &[GenerationIndicators]) -> Result<()> {
    let mut text = GENERATION_COLUMNS.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.csv_row());
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn read_generations_csv(path: &Path) -> Result<Vec<GenerationIndicators>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let bad = |m: String| Error::Input {
        path: path.display().to_string(),
        message: m,
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != GENERATION_COLUMNS.len() {
            return Err(bad(format!("expected {} columns, got {}", GENERATION_COLUMNS.len(), rec.len())));
        }
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", GENERATION_COLUMNS[i])));
        let u = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", GENERATION_COLUMNS[i])));
        rows.push(GenerationIndicators {
            generation: u(0)?,
            mask_size: u(1)?,
            validation: IndicatorValues {
                hv: f(2)?,
                gd: f(3)?,
                pd: f(4)?,
                sp: f(5)?,
            },
            test: IndicatorValues {
                hv: f(6)?,
                gd: f(7)?,
                pd: f(8)?,
                sp: f(9)?,
            },
        });
    }
    Ok(rows)
}

/// Echo of the resolved settings of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunInfo {
    pub experiment: ExperimentConfig,
    pub evolution: EvolutionConfig,
    pub fold: u32,
    pub trial: u32,
    pub seed: u64,
    pub shape: NetworkShape,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_features: usize,
}

/// Results of one finished run kept in memory.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub fold: u32,
    pub trial: u32,
    pub seed: u64,
    pub dir: PathBuf,
    pub records: Vec<GenerationRecord>,
    pub indicators: Vec<GenerationIndicators>,
}

impl RunOutcome {
    pub fn last(&self) -> &GenerationIndicators {
        self.indicators.last().expect("at least the initial generation is logged")
    }
}

/// Load the dataset and schema named by `cfg`. Without an explicit schema,
/// `schema.toml` next to the dataset is used.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(RawTable, DatasetSchema)> {
    let dataset = cfg.dataset.as_ref().ok_or_else(|| ConfigError::InvalidValue {
        field: "dataset".into(),
        reason: "no dataset path given".into(),
    })?;
    if !dataset.is_file() {
        return Err(data::DataError::Io {
            path: dataset.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
        }
        .into());
    }
    let schema_path = match &cfg.schema {
        Some(s) => s.clone(),
        None => dataset.with_file_name("schema.toml"),
    };
    let schema = DatasetSchema::from_path(&schema_path)?;
    let raw = data::load_dataset(dataset, &schema)?;
    Ok((raw, schema))
}

/// Execute one planned run and write its directory.
pub fn execute_run(
    cfg: &ExperimentConfig,
    raw: &RawTable,
    schema: &DatasetSchema,
    plan: &RunPlan,
    tau: f64,
    out: &Path,
) -> Result<RunOutcome> {
    let splits = SplitBundle::build(raw, schema, &plan.train, &plan.validation, &plan.test, plan.seed)?;
    let shape = NetworkShape::new(splits.train.n_features(), cfg.hidden_nodes)?;
    let evo = cfg.evolution_config(plan.seed, tau)?;
    let artifacts = moea::run_evolution(&evo, &splits, &shape)?;
    let hv = HvConfig {
        reference: cfg.hv_reference,
        n_samples: cfg.hv_samples,
        seed: plan.seed,
        sampler: cfg.hv_sampler,
    };
    let indicators = generation_indicators(&artifacts.records, &hv, plan.seed)?;

    let dir = out.join(plan.dir_name());
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let info = RunInfo {
        experiment: ExperimentConfig {
            tau,
            tau_grid: None,
            ..cfg.clone()
        },
        evolution: evo,
        fold: plan.fold,
        trial: plan.trial,
        seed: plan.seed,
        shape,
        n_train: splits.train.len(),
        n_validation: splits.validation.len(),
        n_test: splits.test.len(),
        n_features: splits.train.n_features(),
    };
    write_run_dir(&dir, &info, &artifacts, &indicators, cfg.save_genomes)?;
    Ok(RunOutcome {
        fold: plan.fold,
        trial: plan.trial,
        seed: plan.seed,
        dir,
        records: artifacts.records,
        indicators,
    })
}

fn write_run_dir(
    dir: &Path,
    info: &RunInfo,
    artifacts: &RunArtifacts,
    indicators: &[GenerationIndicators],
    save_genomes: bool,
) -> Result<()> {
    let json = serde_json::to_string_pretty(info).expect("run info serializes");
    let p = dir.join("run.json");
    std::fs::write(&p, json + "\n").map_err(Error::io(&p))?;
    write_generations_csv(&dir.join("generations.csv"), indicators)?;
    let mut timings = String::from("generation,wall_seconds\n");
    for (r, s) in artifacts.records.iter().zip(&artifacts.wall_seconds) {
        let _ = writeln!(timings, "{},{s}", r.generation);
    }
    let p = dir.join("timings.csv");
    std::fs::write(&p, timings).map_err(Error::io(&p))?;
    artifacts.write_mask_csv(&dir.join("mask.csv"))?;
    artifacts.write_final_objectives(&dir.join("final_objectives.csv"))?;
    if save_genomes {
        artifacts.write_genomes(&dir.join("genomes.bin"))?;
    }
    Ok(())
}

/// Columns of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 15] = [
    "dataset", "run", "fold", "trial", "seed", "generations", "mask_size", "hv", "gd", "pd", "sp", "test_hv",
    "test_gd", "test_pd", "test_sp",
];

/// One row per run with its final-generation indicators, then a `mean` row.
pub fn summary_csv(dataset: &str, rows: &[(String, u32, u32, u64, GenerationIndicators)]) -> String {
    let mut text = SUMMARY_COLUMNS.join(",");
    text.push('\n');
    let mut sums = [0.0; 9];
    for (run, fold, trial, seed, g) in rows {
        let vals = [
            g.mask_size as f64,
            g.validation.hv,
            g.validation.gd,
            g.validation.pd,
            g.validation.sp,
            g.test.hv,
            g.test.gd,
            g.test.pd,
            g.test.sp,
        ];
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
        let _ = write!(text, "{dataset},{run},{fold},{trial},{seed},{}", g.generation);
        for v in vals {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    let n = rows.len().max(1) as f64;
    let _ = write!(text, "{dataset},mean,,,,");
    if let Some((_, _, _, _, g)) = rows.first() {
        let _ = write!(text, "{}", g.generation);
    }
    for s in sums {
        let _ = write!(text, ",{}", s / n);
    }
    text.push('\n');
    text
}

/// Rebuild `summary.csv` from the `generations.csv` of each run directory
/// under `out`.
pub fn recompute_summary(out: &Path, dataset: &str) -> Result<String> {
    let mut runs: Vec<(u32, u32, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(out).map_err(Error::io(out))? {
        let entry = entry.map_err(Error::io(out))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some((f, t)) = parse_run_dir(&name) {
            runs.push((f, t, entry.path()));
        }
    }
    runs.sort();
    let mut rows = Vec::new();
    for (fold, trial, dir) in runs {
        let info: RunInfo = read_run_info(&dir)?;
        let gens = read_generations_csv(&dir.join("generations.csv"))?;
        let last = *gens
            .last()
            .ok_or_else(|| Error::MissingArtifacts(format!("{} has no generations", dir.display())))?;
        rows.push((format!("f{fold}_t{trial}"), fold, trial, info.seed, last));
    }
    Ok(summary_csv(dataset, &rows))
}

pub fn read_run_info(dir: &Path) -> Result<RunInfo> {
    let p = dir.join("run.json");
    let text = std::fs::read_to_string(&p).map_err(|_| Error::MissingArtifacts(p.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::Input {
        path: p.display().to_string(),
        message: e.to_string(),
    })
}

/// `run_f3_t7` -> `(3, 7)`.
pub fn parse_run_dir(name: &str) -> Option<(u32, u32)> {
    let rest = name.strip_prefix("run_f")?;
    let (f, t) = rest.split_once("_t")?;
    Some((f.parse().ok()?, t.parse().ok()?))
}

/// All runs of one τ value under `out`, plus `summary.csv`.
pub fn run_single(cfg: &ExperimentConfig, tau: f64, out: &Path) -> Result<Vec<RunOutcome>> {
    let (raw, schema) = load_data(cfg)?;
    let plans = plan_runs(raw.len(), cfg.folds, cfg.trials, cfg.seed)?;
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    log::info!("{} runs into {}", plans.len(), out.display());
    let outcomes: Vec<RunOutcome> = plans
        .par_iter()
        .map(|plan| execute_run(cfg, &raw, &schema, plan, tau, out))
        .collect::<Result<_>>()?;
    let rows: Vec<_> = outcomes
        .iter()
        .map(|o| (format!("f{}_t{}", o.fold, o.trial), o.fold, o.trial, o.seed, *o.last()))
        .collect();
    let p = out.join("summary.csv");
    std::fs::write(&p, summary_csv(&cfg.dataset_name, &rows)).map_err(Error::io(&p))?;
    Ok(outcomes)
}

/// Directory of one τ value in a sweep.
pub fn tau_dir(out: &Path, tau: f64) -> PathBuf {
    out.join(format!("tau_{tau}"))
}

/// Run the experiment described by `cfg`: a single τ, or every value of
/// the τ grid followed by `tau_sweep.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<(f64, Vec<RunOutcome>)>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(Error::io(&cfg.out))?;
    let cfg_path = cfg.out.join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg).expect("config serializes") + "\n")
        .map_err(Error::io(&cfg_path))?;
    let Some(grid) = &cfg.tau_grid else {
        return Ok(vec![(cfg.tau, run_single(cfg, cfg.tau, &cfg.out)?)]);
    };
    let mut all = Vec::new();
    let mut sweep = String::from("tau,mask_size,hv,gd,pd,sp,test_hv,test_gd,test_pd,test_sp\n");
    for &tau in grid {
        let outcomes = run_single(cfg, tau, &tau_dir(&cfg.out, tau))?;
        let n = outcomes.len() as f64;
        let mean = |f: &dyn Fn(&GenerationIndicators) -> f64| outcomes.iter().map(|o| f(o.last())).sum::<f64>() / n;
        let _ = writeln!(
            sweep,
            "{tau},{},{},{},{},{},{},{},{},{}",
            mean(&|g| g.mask_size as f64),
            mean(&|g| g.validation.hv),
            mean(&|g| g.validation.gd),
            mean(&|g| g.validation.pd),
            mean(&|g| g.validation.sp),
            mean(&|g| g.test.hv),
            mean(&|g| g.test.gd),
            mean(&|g| g.test.pd),
            mean(&|g| g.test.sp),
        );
        all.push((tau, outcomes));
    }
    let p = cfg.out.join("tau_sweep.csv");
    std::fs::write(&p, sweep).map_err(Error::io(&p))?;
    Ok(all)
}
