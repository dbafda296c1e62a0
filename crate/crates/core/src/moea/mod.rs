//! Two-archive evolutionary learning of neural classifiers.
//!
//! Each generation: pick the active objectives (per mode), draw parent pairs
//! across the two archives, build offspring by weight crossover and Gaussian
//! mutation, refine them with a short SGD pass, evaluate them, and run
//! survival selection on the active objectives.

pub mod archive;
pub mod operators;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SplitBundle;
use crate::fairness::{self, MetricsConfig, MetricsError, ObjectiveVector, N_OBJECTIVES};
use crate::model::{self, Genome, ModelError, NetworkShape, TrainingConfig};
use crate::reduction::{self, CorrelationHistory, ReductionConfig, ReductionError, SelectionMask};
use crate::rng::{self, SeededRng};

pub use archive::{
    epsilon_indicator_fitness, mating_selection, update_convergence_archive, update_diversity_archive, KAPPA,
};
pub use operators::{gaussian_mutation, weight_crossover};

#[derive(Debug, Error)]
pub enum MoeaError {
    #[error("both archives are empty")]
    EmptyPopulation,
    #[error("genome length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One trained network with its objective vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    /// Objectives on the validation split; drives selection.
    pub objectives: ObjectiveVector,
    /// Objectives on the test split; reporting only.
    pub test_objectives: ObjectiveVector,
}

impl Individual {
    pub fn new(id: u64, genome: Genome, objectives: ObjectiveVector, test_objectives: ObjectiveVector) -> Self {
        Individual {
            id,
            genome,
            objectives,
            test_objectives,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Online objective reduction.
    #[default]
    Famoel,
    /// All 26 objectives every generation.
    Moel,
    /// A fixed objective subset every generation.
    StaticMask,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "famoel" => Ok(Mode::Famoel),
            "moel" => Ok(Mode::Moel),
            "static-mask" => Ok(Mode::StaticMask),
            other => Err(format!("unknown mode `{other}` (famoel, moel, static-mask)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Famoel => "famoel",
            Mode::Moel => "moel",
            Mode::StaticMask => "static-mask",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Capacity of each archive; also the initial population size.
    pub archive_capacity: usize,
    /// Offspring per generation.
    pub offspring: usize,
    pub generations: usize,
    pub mutation_strength: f64,
    pub training: TrainingConfig,
    pub reduction: ReductionConfig,
    pub mode: Mode,
    pub static_mask: Option<Vec<usize>>,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            archive_capacity: 100,
            offspring: 100,
            generations: 100,
            mutation_strength: 0.05,
            training: TrainingConfig::default(),
            reduction: ReductionConfig::default(),
            mode: Mode::Famoel,
            static_mask: None,
            metrics: MetricsConfig::default(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), MoeaError> {
        let bad = |m: String| Err(MoeaError::InvalidConfig(m));
        if self.archive_capacity < reduction::MIN_SAMPLES {
            return bad(format!(
                "archive_capacity must be >= {}, got {}",
                reduction::MIN_SAMPLES,
                self.archive_capacity
            ));
        }
        if self.offspring == 0 || self.generations == 0 {
            return bad("offspring and generations must be positive".into());
        }
        if !(self.mutation_strength >= 0.0) {
            return bad(format!("mutation_strength must be >= 0, got {}", self.mutation_strength));
        }
        if !(self.training.learning_rate > 0.0) || self.training.batch_size == 0 {
            return bad("learning_rate and batch_size must be positive".into());
        }
        self.reduction.validate()?;
        if self.reduction.window == 0 || self.reduction.warmup + 1 < self.reduction.window {
            return bad(format!(
                "window ({}) must be between 1 and warmup + 1 ({})",
                self.reduction.window,
                self.reduction.warmup + 1
            ));
        }
        self.metrics.validate()?;
        if self.mode == Mode::StaticMask {
            match &self.static_mask {
                None => return bad("mode static-mask requires static_mask".into()),
                Some(m) if m.is_empty() || m.iter().any(|&k| k >= N_OBJECTIVES) => {
                    return bad(format!("static_mask must be a nonempty subset of 0..{N_OBJECTIVES}"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Objective vectors of one population member at one generation.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberRecord {
    pub id: u64,
    pub validation: ObjectiveVector,
    pub test: ObjectiveVector,
}

/// State after survival selection of one generation. Generation 0 is the
/// initial population.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub mask: SelectionMask,
    pub population: Vec<MemberRecord>,
}

impl GenerationRecord {
    pub fn validation_points(&self) -> Vec<Vec<f64>> {
        self.population.iter().map(|m| m.validation.0.to_vec()).collect()
    }

    pub fn test_points(&self) -> Vec<Vec<f64>> {
        self.population.iter().map(|m| m.test.0.to_vec()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub config: EvolutionConfig,
    pub shape: NetworkShape,
    pub records: Vec<GenerationRecord>,
    pub final_population: Vec<Individual>,
    /// Wall-clock seconds spent on each logged generation.
    pub wall_seconds: Vec<f64>,
}

/// Stream index for the per-run sequential generator (mating, variation).
const MAIN_STREAM: u64 = 0;
/// Offsets of the per-individual streams.
const INIT_STREAM: u64 = 1 << 40;
const TRAIN_STREAM: u64 = 2 << 40;

fn individual_rng(seed: u64, id: u64) -> SeededRng {
    rng::stream(seed, TRAIN_STREAM + id)
}

/// Train and evaluate a batch of `(id, genome)` pairs concurrently. Each
/// individual draws from its own stream, so the result is independent of
/// scheduling.
fn develop(
    batch: Vec<(u64, Genome)>,
    cfg: &EvolutionConfig,
    shape: &NetworkShape,
    splits: &SplitBundle,
) -> Result<Vec<Individual>, MoeaError> {
    batch
        .into_par_iter()
        .map(|(id, genome)| {
            let mut r = individual_rng(cfg.seed, id);
            let genome = model::partial_train(shape, &genome, &splits.train, &cfg.training, &mut r)?;
            let val = fairness::evaluate_individual(shape, &genome, &splits.validation, &cfg.metrics)?;
            let test = fairness::evaluate_individual(shape, &genome, &splits.test, &cfg.metrics)?;
            Ok(Individual::new(id, genome, val, test))
        })
        .collect()
}

/// Union of both archives, deduplicated by id, sorted by id.
pub fn population(convergence: &[Individual], diversity: &[Individual]) -> Vec<Individual> {
    let mut all: Vec<Individual> = convergence.iter().chain(diversity).cloned().collect();
    all.sort_by_key(|i| i.id);
    all.dedup_by_key(|i| i.id);
    all
}

fn record(generation: usize, mask: &SelectionMask, pop: &[Individual]) -> GenerationRecord {
    GenerationRecord {
        generation,
        mask: mask.clone(),
        population: pop
            .iter()
            .map(|i| MemberRecord {
                id: i.id,
                validation: i.objectives,
                test: i.test_objectives,
            })
            .collect(),
    }
}

fn static_mask(cfg: &EvolutionConfig, generation: usize) -> SelectionMask {
    SelectionMask {
        active: cfg.static_mask.iter().flatten().copied().collect(),
        generation,
    }
}

/// Run the full evolutionary loop. Deterministic for a given config.
pub fn run_evolution(
    cfg: &EvolutionConfig,
    splits: &SplitBundle,
    shape: &NetworkShape,
) -> Result<RunArtifacts, MoeaError> {
    cfg.validate()?;
    if splits.train.n_features() != shape.n_inputs {
        return Err(MoeaError::ShapeMismatch {
            expected: shape.n_inputs,
            got: splits.train.n_features(),
        });
    }
    let mut clock = Instant::now();
    let mut wall_seconds = Vec::with_capacity(cfg.generations + 1);
    let mut main_rng = rng::stream(cfg.seed, MAIN_STREAM);
    let mut next_id: u64 = 0;

    let initial: Vec<(u64, Genome)> = (0..cfg.archive_capacity)
        .map(|_| {
            let id = next_id;
            next_id += 1;
            (id, model::init_genome(shape, &mut rng::stream(cfg.seed, INIT_STREAM + id)))
        })
        .collect();
    let initial = develop(initial, cfg, shape, splits)?;

    // The static-mask baseline never sees the full objective set.
    let start = match cfg.mode {
        Mode::StaticMask => static_mask(cfg, 0),
        Mode::Famoel | Mode::Moel => SelectionMask::full(N_OBJECTIVES, 0),
    };
    let start_idx = start.indices();
    let mut convergence = update_convergence_archive(vec![], &initial, &start_idx, cfg.archive_capacity);
    let mut diversity = update_diversity_archive(vec![], &initial, &start_idx, cfg.archive_capacity);
    let mut records = vec![record(0, &start, &population(&convergence, &diversity))];
    wall_seconds.push(clock.elapsed().as_secs_f64());

    let mut history = CorrelationHistory::bounded(cfg.reduction.window);
    let mut previous_mask = start.active.clone();

    for generation in 1..=cfg.generations {
        clock = Instant::now();
        let t = generation - 1;
        let pop = population(&convergence, &diversity);
        let mut mask = match cfg.mode {
            Mode::Moel => SelectionMask::full(N_OBJECTIVES, t),
            Mode::StaticMask => static_mask(cfg, t),
            Mode::Famoel => {
                let rows: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.0.to_vec()).collect();
                history.push(reduction::mncie_matrix(&rows)?);
                reduction::select_representative(t, &history, N_OBJECTIVES, &cfg.reduction)?
            }
        };
        mask.generation = generation;
        let mask_idx = mask.indices();
        if mask.active != previous_mask {
            log::debug!("generation {generation}: mask {:?}", mask_idx);
            diversity = archive::mask_nondominated(diversity, &mask_idx);
            previous_mask = mask.active.clone();
        }

        let pairs = mating_selection(&convergence, &diversity, cfg.offspring, &mut main_rng)?;
        let mut children = Vec::with_capacity(pairs.len() * 2);
        for (p, q) in pairs {
            let (a, b) = weight_crossover(&p.genome, &q.genome, &mut main_rng)?;
            children.push(gaussian_mutation(&a, cfg.mutation_strength, &mut main_rng)?);
            children.push(gaussian_mutation(&b, cfg.mutation_strength, &mut main_rng)?);
        }
        children.truncate(cfg.offspring);
        let batch: Vec<(u64, Genome)> = children
            .into_iter()
            .map(|g| {
                let id = next_id;
                next_id += 1;
                (id, g)
            })
            .collect();
        let offspring = develop(batch, cfg, shape, splits)?;

        convergence = update_convergence_archive(convergence, &offspring, &mask_idx, cfg.archive_capacity);
        diversity = update_diversity_archive(diversity, &offspring, &mask_idx, cfg.archive_capacity);
        records.push(record(generation, &mask, &population(&convergence, &diversity)));
        wall_seconds.push(clock.elapsed().as_secs_f64());
        log::info!(
            "generation {generation}/{}: |mask| = {}, population = {}",
            cfg.generations,
            mask.len(),
            records.last().map_or(0, |r| r.population.len())
        );
    }

    Ok(RunArtifacts {
        config: cfg.clone(),
        shape: *shape,
        records,
        final_population: population(&convergence, &diversity),
        wall_seconds,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MoeaError + '_ {
    move |source| MoeaError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl RunArtifacts {
    /// `generation,CE,f1,...,f25` with one 0/1 row per logged generation.
    pub fn write_mask_csv(&self, path: &Path) -> Result<(), MoeaError> {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        let mut text = String::from("generation");
        for name in fairness::objective_names() {
            text.push(',');
            text.push_str(&name);
        }
        text.push('\n');
        for r in &self.records {
            text.push_str(&r.generation.to_string());
            for b in r.mask.to_binary_row(N_OBJECTIVES) {
                text.push(',');
                text.push_str(&b.to_string());
            }
            text.push('\n');
        }
        w.write_all(text.as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    /// Final population, one row per member: `id,split,CE,f1,...,f25` with
    /// a validation and a test row per member.
    pub fn write_final_objectives(&self, path: &Path) -> Result<(), MoeaError> {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        let mut text = String::from("id,split");
        for name in fairness::objective_names() {
            text.push(',');
            text.push_str(&name);
        }
        text.push('\n');
        for i in &self.final_population {
            for (split, obj) in [("validation", &i.objectives), ("test", &i.test_objectives)] {
                text.push_str(&format!("{},{split}", i.id));
                for v in obj.values() {
                    text.push_str(&format!(",{v:e}"));
                }
                text.push('\n');
            }
        }
        w.write_all(text.as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    /// Final genomes in id order, each length-prefixed.
    pub fn write_genomes(&self, path: &Path) -> Result<(), MoeaError> {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        w.write_all(&(self.final_population.len() as u64).to_le_bytes())
            .map_err(io_err(path))?;
        for i in &self.final_population {
            model::write_genome(&mut w, &i.genome)?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Read a file written by [`RunArtifacts::write_genomes`].
pub fn read_genomes(path: &Path) -> Result<Vec<Genome>, MoeaError> {
    let mut r = std::io::BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut buf = [0u8; 8];
    std::io::Read::read_exact(&mut r, &mut buf).map_err(io_err(path))?;
    (0..u64::from_le_bytes(buf))
        .map(|_| Ok(model::read_genome(&mut r)?))
        .collect()
}
