//! Experiment configuration: built-in defaults, per-dataset presets, a TOML
//! file and command-line overrides, applied in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::{objective_index, MetricsConfig};
use crate::indicators::HvSampler;
use crate::model::TrainingConfig;
use crate::moea::{EvolutionConfig, Mode};
use crate::reduction::ReductionConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The objectives of the static representative subset: CE, f4, f7, f10,
/// f16, f17 and f25.
pub const REPRESENTATIVE_SUBSET: [usize; 7] = [0, 4, 7, 10, 16, 17, 25];

/// Learning rate, mutation strength and hidden nodes tuned per dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub learning_rate: f64,
    pub mutation_strength: f64,
    pub hidden_nodes: usize,
}

pub const PRESETS: [Preset; 12] = [
    preset("heart", 0.0001, 0.0001, 16),
    preset("titanic", 0.001, 0.0001, 8),
    preset("german", 0.0001, 0.05, 64),
    preset("student", 0.001, 0.0001, 64),
    preset("compas", 0.001, 0.05, 64),
    preset("bank", 0.001, 0.005, 64),
    preset("adult", 0.001, 0.05, 64),
    preset("drug", 0.001, 0.0001, 64),
    preset("patient", 0.0001, 0.0001, 64),
    preset("lsat", 0.001, 0.005, 64),
    preset("default", 0.001, 0.01, 64),
    preset("dutch", 0.001, 0.01, 64),
];

const fn preset(name: &'static str, learning_rate: f64, mutation_strength: f64, hidden_nodes: usize) -> Preset {
    Preset {
        name,
        learning_rate,
        mutation_strength,
        hidden_nodes,
    }
}

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    let key = name.to_ascii_lowercase();
    PRESETS.iter().find(|p| p.name == key)
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Name reported in summaries; defaults to the preset or the dataset file stem.
    pub dataset_name: String,
    pub mode: Mode,
    /// Objective names (`CE`, `f1` .. `f25`) for mode static-mask.
    pub static_mask: Vec<String>,
    pub folds: usize,
    pub trials: usize,
    pub generations: usize,
    pub tau: f64,
    /// When set, one experiment per value is run under `out/tau_<value>/`.
    pub tau_grid: Option<Vec<f64>>,
    pub warmup: usize,
    pub window: usize,
    pub archive_capacity: usize,
    pub offspring: usize,
    pub learning_rate: f64,
    pub mutation_strength: f64,
    pub hidden_nodes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub dirichlet_concentration: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Monte-Carlo samples for per-generation hypervolume.
    pub hv_samples: usize,
    pub hv_reference: f64,
    pub hv_sampler: HvSampler,
    pub save_genomes: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: None,
            dataset: None,
            schema: None,
            dataset_name: "dataset".into(),
            mode: Mode::Famoel,
            static_mask: REPRESENTATIVE_SUBSET.iter().map(|&k| objective_label(k)).collect(),
            folds: 5,
            trials: 10,
            generations: 100,
            tau: 0.22,
            tau_grid: None,
            warmup: 10,
            window: 10,
            archive_capacity: 100,
            offspring: 100,
            learning_rate: 0.001,
            mutation_strength: 0.05,
            hidden_nodes: 64,
            epochs: 1,
            batch_size: 32,
            alpha: 2.0,
            dirichlet_concentration: 1.0,
            seed: 0,
            out: PathBuf::from("out"),
            hv_samples: 10_000,
            hv_reference: 1.2,
            hv_sampler: HvSampler::Union,
            save_genomes: false,
        }
    }
}

fn objective_label(k: usize) -> String {
    if k == 0 {
        "CE".into()
    } else {
        format!("f{k}")
    }
}

/// Any subset of the settings; used for the config file and CLI overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub preset: Option<String>,
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub dataset_name: Option<String>,
    pub mode: Option<Mode>,
    pub static_mask: Option<Vec<String>>,
    pub folds: Option<usize>,
    pub trials: Option<usize>,
    pub generations: Option<usize>,
    pub tau: Option<f64>,
    pub tau_grid: Option<Vec<f64>>,
    pub warmup: Option<usize>,
    pub window: Option<usize>,
    pub archive_capacity: Option<usize>,
    pub offspring: Option<usize>,
    pub learning_rate: Option<f64>,
    pub mutation_strength: Option<f64>,
    pub hidden_nodes: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub alpha: Option<f64>,
    pub dirichlet_concentration: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub hv_samples: Option<usize>,
    pub hv_reference: Option<f64>,
    pub hv_sampler: Option<HvSampler>,
    pub save_genomes: Option<bool>,
}

impl PartialConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<PartialConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<PartialConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Overwrite `cfg` with every field set here.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        take!(
            dataset_name, mode, static_mask, folds, trials, generations, tau, warmup, window,
            archive_capacity, offspring, learning_rate, mutation_strength, hidden_nodes, epochs,
            batch_size, alpha, dirichlet_concentration, seed, out, hv_samples, hv_reference,
            hv_sampler, save_genomes
        );
        if self.preset.is_some() {
            cfg.preset = self.preset.clone();
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        if self.schema.is_some() {
            cfg.schema = self.schema.clone();
        }
        if self.tau_grid.is_some() {
            cfg.tau_grid = self.tau_grid.clone();
        }
    }
}

/// Resolve `defaults < preset < file < flags`. The preset is taken from the
/// flags if given there, otherwise from the file.
pub fn resolve(file: Option<&PartialConfig>, flags: &PartialConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let preset_name = flags
        .preset
        .clone()
        .or_else(|| file.and_then(|f| f.preset.clone()));
    if let Some(name) = &preset_name {
        let p = find_preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
        cfg.preset = Some(p.name.to_owned());
        cfg.dataset_name = p.name.to_owned();
        cfg.learning_rate = p.learning_rate;
        cfg.mutation_strength = p.mutation_strength;
        cfg.hidden_nodes = p.hidden_nodes;
    }
    if let Some(f) = file {
        f.apply(&mut cfg);
    }
    flags.apply(&mut cfg);
    cfg.preset = preset_name.map(|n| n.to_ascii_lowercase());
    let name_given = flags.dataset_name.is_some() || file.is_some_and(|f| f.dataset_name.is_some());
    if !name_given && cfg.preset.is_none() {
        if let Some(stem) = cfg.dataset.as_ref().and_then(|d| d.file_stem()) {
            cfg.dataset_name = stem.to_string_lossy().into_owned();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a config file (if any) and apply `flags` on top.
pub fn parse_config(path: Option<&Path>, flags: &PartialConfig) -> Result<ExperimentConfig, ConfigError> {
    let file = path.map(PartialConfig::from_path).transpose()?;
    resolve(file.as_ref(), flags)
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_tau(field: &str, tau: f64) -> Result<(), ConfigError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{tau} is outside (0, 1)")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_tau("tau", self.tau)?;
        if let Some(grid) = &self.tau_grid {
            if grid.is_empty() {
                return Err(invalid("tau_grid", "empty grid"));
            }
            for &t in grid {
                check_tau("tau_grid", t)?;
            }
        }
        for (field, v) in [
            ("folds", self.folds),
            ("trials", self.trials),
            ("generations", self.generations),
            ("window", self.window),
            ("offspring", self.offspring),
            ("hidden_nodes", self.hidden_nodes),
            ("batch_size", self.batch_size),
            ("hv_samples", self.hv_samples),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.archive_capacity < crate::reduction::MIN_SAMPLES {
            return Err(invalid(
                "archive_capacity",
                format!("must be at least {}", crate::reduction::MIN_SAMPLES),
            ));
        }
        if self.warmup + 1 < self.window {
            return Err(invalid("window", format!("must not exceed warmup + 1 = {}", self.warmup + 1)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(self.mutation_strength >= 0.0) {
            return Err(invalid("mutation_strength", "must be non-negative"));
        }
        if !(self.hv_reference > 1.0) {
            return Err(invalid("hv_reference", "must exceed 1"));
        }
        if !(self.alpha > 0.0) || self.alpha == 1.0 {
            return Err(invalid("alpha", "must be positive and different from 1"));
        }
        if !(self.dirichlet_concentration > 0.0) {
            return Err(invalid("dirichlet_concentration", "must be positive"));
        }
        if self.mode == Mode::StaticMask {
            self.static_mask_indices()?;
        }
        Ok(())
    }

    pub fn static_mask_indices(&self) -> Result<Vec<usize>, ConfigError> {
        if self.static_mask.is_empty() {
            return Err(invalid("static_mask", "empty objective set"));
        }
        let mut idx = self
            .static_mask
            .iter()
            .map(|n| objective_index(n).ok_or_else(|| invalid("static_mask", format!("unknown objective `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }

    /// Evolution settings for one run with its own seed.
    pub fn evolution_config(&self, seed: u64, tau: f64) -> Result<EvolutionConfig, ConfigError> {
        Ok(EvolutionConfig {
            archive_capacity: self.archive_capacity,
            offspring: self.offspring,
            generations: self.generations,
            mutation_strength: self.mutation_strength,
            training: TrainingConfig {
                learning_rate: self.learning_rate,
                epochs: self.epochs,
                batch_size: self.batch_size,
            },
            reduction: ReductionConfig {
                tau,
                warmup: self.warmup,
                window: self.window,
            },
            mode: self.mode,
            static_mask: match self.mode {
                Mode::StaticMask => Some(self.static_mask_indices()?),
                _ => None,
            },
            metrics: MetricsConfig {
                alpha: self.alpha,
                dirichlet_concentration: self.dirichlet_concentration,
            },
            seed,
        })
    }
}
