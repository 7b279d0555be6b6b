//! Experiment runner: single training runs, corruption sweeps over `p1`
//! with `p0` fixed, and result emission.
//!
//! A run is fully determined by the config and one seed: dataset draw,
//! corruption, labeled-subset selection, model initialization, training
//! order, and evaluation draws all derive their streams from it. A sweep
//! runs both objectives for every `(p1, seed)` cell; cells are independent
//! jobs and may execute concurrently, with the result order fixed by
//! sorting afterwards. Each run writes its training history, a checkpoint,
//! and a manifest under the output directory.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    corrupt_labels, generate_mixture, load_csv, select_labeled, CsvSchema, LabeledDataset,
    MixtureConfig,
};
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::{MVaeModel, ModelDims};
use crate::noise_model::{f_weight, per_class_flip, uniform_noise, NoiseMatrix};
use crate::objective::dataset_total;
use crate::trainer::{train, Objective, TrainConfig};

const DATA_SALT: u64 = 0xDA7A;
const CORRUPT_SALT: u64 = 0xC0BB;
const SELECT_SALT: u64 = 0x5E1E;
const INIT_SALT: u64 = 0x1417;
const TRAIN_SALT: u64 = 0x7BA1;
const EVAL_SALT: u64 = 0xEFA1;

/// Where the covariates come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Mixture {
        classes: usize,
        n_per_class: usize,
        d_x: usize,
        means: Vec<Vec<f64>>,
        std: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        feature_columns: Option<Vec<String>>,
        #[serde(default)]
        known_labels: Option<Vec<String>>,
        #[serde(default)]
        log1p: bool,
    },
}

/// Either one flip vector or a `p1` grid with `p0` held fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorruptionSpec {
    Flip { flip: Vec<f64> },
    Sweep { p0: f64, p1_grid: Vec<f64> },
}

/// Noise matrix handed to the model (not the corruption applied to data).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    /// Use the matrix implied by the corruption actually applied.
    #[default]
    Oracle,
    Uniform {
        epsilon: f64,
    },
    PerClassFlip {
        p0: f64,
        p1: f64,
    },
    Rows {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "default_latent")]
    pub d_z1: usize,
    #[serde(default = "default_latent")]
    pub d_z2: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
}

fn default_latent() -> usize {
    2
}

fn default_hidden() -> usize {
    crate::model::DEFAULT_HIDDEN
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            d_z1: default_latent(),
            d_z2: default_latent(),
            hidden: default_hidden(),
            noise: NoiseSpec::Oracle,
        }
    }
}

/// Which rows the reported accuracy covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    /// Every row, labeled or not (prediction over the whole dataset).
    #[default]
    All,
    /// Only rows outside the labeled subset.
    Heldout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub corruption: CorruptionSpec,
    pub per_class_labeled: usize,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub eval: EvalSplit,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_reader(file)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list must be nonempty".into()));
        }
        if let CorruptionSpec::Sweep { p1_grid, .. } = &self.corruption {
            if p1_grid.is_empty() {
                return Err(Error::Config("sweep p1_grid must be nonempty".into()));
            }
        }
        Ok(())
    }
}

/// One sweep cell / single run outcome. `status` is `"ok"` or the error
/// text of a failed run (whose metric fields stay empty).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub p0: f64,
    pub p1: f64,
    pub seed: u64,
    pub objective: String,
    pub alpha: Option<f64>,
    pub accuracy: Option<f64>,
    pub final_elbo: Option<f64>,
    pub epochs: usize,
    pub runtime_seconds: f64,
    pub status: String,
}

impl ResultRow {
    /// Field-wise equality ignoring the wall clock.
    pub fn same_outcome(&self, other: &ResultRow) -> bool {
        self.p0 == other.p0
            && self.p1 == other.p1
            && self.seed == other.seed
            && self.objective == other.objective
            && self.alpha == other.alpha
            && self.accuracy == other.accuracy
            && self.final_elbo == other.final_elbo
            && self.epochs == other.epochs
            && self.status == other.status
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn build_dataset(source: &DataSource, seed: u64) -> Result<LabeledDataset> {
    match source {
        DataSource::Mixture {
            classes,
            n_per_class,
            d_x,
            means,
            std,
        } => {
            let cfg = MixtureConfig {
                classes: *classes,
                n_per_class: *n_per_class,
                d_x: *d_x,
                means: means.clone(),
                std: *std,
            };
            generate_mixture(&cfg, seed)
        }
        DataSource::Csv {
            path,
            label_column,
            feature_columns,
            known_labels,
            log1p,
        } => {
            let schema = CsvSchema {
                label_column: label_column.clone(),
                feature_columns: feature_columns.clone(),
                known_labels: known_labels.clone(),
                log1p: *log1p,
            };
            load_csv(path, &schema)
        }
    }
}

fn resolve_noise(spec: &NoiseSpec, ds: &LabeledDataset) -> Result<NoiseMatrix> {
    match spec {
        NoiseSpec::Oracle => ds.meta.implied_noise.clone().ok_or_else(|| {
            Error::Config("oracle model noise requires a corrupted dataset".into())
        }),
        NoiseSpec::Uniform { epsilon } => uniform_noise(*epsilon, ds.classes),
        NoiseSpec::PerClassFlip { p0, p1 } => {
            if ds.classes != 2 {
                return Err(Error::Config(format!(
                    "per-class-flip shorthand covers 2 classes, dataset has {}",
                    ds.classes
                )));
            }
            per_class_flip(&[*p0, *p1])
        }
        NoiseSpec::Rows { rows } => {
            let m = NoiseMatrix::new(rows.clone())?;
            if m.classes() != ds.classes {
                return Err(Error::DimensionMismatch {
                    context: "model noise matrix classes",
                    expected: ds.classes,
                    got: m.classes(),
                });
            }
            Ok(m)
        }
    }
}

/// `f(ε̄)` at the true average flip probability of the corrupted dataset.
fn oracle_alpha(ds: &LabeledDataset, flip: &[f64]) -> Result<f64> {
    let avg: f64 =
        ds.y_true.iter().map(|&k| flip[k]).sum::<f64>() / ds.len().max(1) as f64;
    if !(avg > 0.0 && avg < 1.0) {
        return Err(Error::Config(format!(
            "oracle alpha undefined at average flip probability {avg}; \
             set train.alpha explicitly"
        )));
    }
    f_weight(avg, ds.classes)
}

fn accuracy(model: &MVaeModel, ds: &LabeledDataset, split: EvalSplit) -> Result<f64> {
    let labeled: std::collections::BTreeSet<usize> = ds.labeled_idx.iter().copied().collect();
    let mut correct = 0usize;
    let mut count = 0usize;
    for i in 0..ds.len() {
        if split == EvalSplit::Heldout && labeled.contains(&i) {
            continue;
        }
        count += 1;
        if model.predict_class(&ds.x[i])? == ds.y_true[i] {
            correct += 1;
        }
    }
    if count == 0 {
        return Err(Error::Config("no rows to evaluate".into()));
    }
    Ok(correct as f64 / count as f64)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    flip: &'a [f64],
    seed: u64,
    objective: String,
    alpha: Option<f64>,
    dims: [usize; 4],
    hidden: usize,
    model_noise: Vec<Vec<f64>>,
    per_class_labeled: usize,
    n_rows: usize,
    n_labeled: usize,
    eval_split: EvalSplit,
    train: &'a TrainConfig,
    derived_seeds: DerivedSeeds,
}

#[derive(Serialize)]
struct DerivedSeeds {
    data: u64,
    corruption: u64,
    selection: u64,
    init: u64,
    train: u64,
    eval: u64,
}

/// Full pipeline for one `(flip, seed, objective)` cell.
fn run_cell(
    cfg: &ExperimentConfig,
    flip: &[f64],
    seed: u64,
    objective: Objective,
) -> Result<ResultRow> {
    let t0 = Instant::now();
    let seeds = DerivedSeeds {
        data: mix_seed(seed, DATA_SALT),
        corruption: mix_seed(seed, CORRUPT_SALT),
        selection: mix_seed(seed, SELECT_SALT),
        init: mix_seed(seed, INIT_SALT),
        train: mix_seed(seed, TRAIN_SALT),
        eval: mix_seed(seed, EVAL_SALT),
    };

    let ds = build_dataset(&cfg.data, seeds.data)?;
    let ds = corrupt_labels(&ds, flip, seeds.corruption)?;
    let ds = select_labeled(&ds, cfg.per_class_labeled, seeds.selection)?;

    let dims = ModelDims::new(ds.d_x(), cfg.model.d_z1, cfg.model.d_z2, ds.classes)?;
    let noise = resolve_noise(&cfg.model.noise, &ds)?;
    let model = MVaeModel::new(dims, cfg.model.hidden, seeds.init)?.with_noise(noise)?;

    let mut train_cfg = cfg.train.clone();
    train_cfg.objective = objective;
    train_cfg.seed = seeds.train;
    let alpha = match objective {
        Objective::M1m2 => {
            let a = match cfg.train.alpha {
                Some(a) => a,
                None => oracle_alpha(&ds, flip)?,
            };
            train_cfg.alpha = Some(a);
            Some(a)
        }
        Objective::Mvae => None,
    };

    let (trained, history) = train(&model, &ds, &train_cfg)?;

    let acc = accuracy(&trained, &ds, cfg.eval)?;
    // reported objective value: full-data sum with the reporting draw count
    let final_elbo = dataset_total(
        &trained,
        &ds.x,
        &ds.y_obs,
        REPORT_N_MC,
        seeds.eval,
        train_cfg.objective_kind()?,
    )?;

    let p1 = if flip.len() > 1 { flip[1] } else { flip[0] };
    let run_dir = cfg
        .out_dir
        .join(format!("p1_{}_seed_{}_{}", p1, seed, objective));
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let history_path = run_dir.join("history.csv");
    let mut hist_file = File::create(&history_path).map_err(|e| Error::io(&history_path, e))?;
    history
        .write_csv(&mut hist_file)
        .map_err(|e| Error::io(&history_path, e))?;
    trained.save_checkpoint(&run_dir.join("checkpoint.txt"))?;
    let manifest = RunManifest {
        flip,
        seed,
        objective: objective.to_string(),
        alpha,
        dims: [dims.d_x, dims.d_z1, dims.d_z2, dims.classes],
        hidden: cfg.model.hidden,
        model_noise: trained.noise.rows(),
        per_class_labeled: cfg.per_class_labeled,
        n_rows: ds.len(),
        n_labeled: ds.n_labeled(),
        eval_split: cfg.eval,
        train: &train_cfg,
        derived_seeds: seeds,
    };
    let manifest_path = run_dir.join("manifest.json");
    let manifest_file =
        File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    serde_json::to_writer_pretty(manifest_file, &manifest)?;

    Ok(ResultRow {
        p0: flip.first().copied().unwrap_or(0.0),
        p1,
        seed,
        objective: objective.to_string(),
        alpha,
        accuracy: Some(acc),
        final_elbo: Some(final_elbo),
        epochs: train_cfg.epochs,
        runtime_seconds: t0.elapsed().as_secs_f64(),
        status: "ok".into(),
    })
}

/// Draw count used for reported (not training) objective values.
pub const REPORT_N_MC: usize = 64;

/// One training run from the config's flip vector and first seed.
pub fn run_single(cfg: &ExperimentConfig) -> Result<ResultRow> {
    cfg.validate()?;
    let flip = match &cfg.corruption {
        CorruptionSpec::Flip { flip } => flip.clone(),
        CorruptionSpec::Sweep { .. } => {
            return Err(Error::Config(
                "run_single needs a flip vector; use the sweep command for grids".into(),
            ))
        }
    };
    run_cell(cfg, &flip, cfg.seeds[0], cfg.train.objective)
}

/// Run both objectives for every `(p1, seed)` cell of the sweep grid.
/// Failed cells become error rows; the sweep continues. Rows are sorted by
/// `(p1, seed, objective)` and number exactly `2 * |grid| * |seeds|`.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let (p0, grid) = match &cfg.corruption {
        CorruptionSpec::Sweep { p0, p1_grid } => (*p0, p1_grid.clone()),
        CorruptionSpec::Flip { .. } => {
            return Err(Error::Config(
                "run_sweep needs a sweep spec with a p1 grid".into(),
            ))
        }
    };
    let mut cells = Vec::new();
    for &p1 in &grid {
        for &seed in &cfg.seeds {
            for objective in [Objective::Mvae, Objective::M1m2] {
                cells.push((p1, seed, objective));
            }
        }
    }

    let execute = |(p1, seed, objective): &(f64, u64, Objective)| -> ResultRow {
        let flip = vec![p0, *p1];
        match run_cell(cfg, &flip, *seed, *objective) {
            Ok(row) => row,
            Err(e) => ResultRow {
                p0,
                p1: *p1,
                seed: *seed,
                objective: objective.to_string(),
                alpha: None,
                accuracy: None,
                final_elbo: None,
                epochs: cfg.train.epochs,
                runtime_seconds: 0.0,
                status: e.to_string(),
            },
        }
    };

    let mut rows: Vec<ResultRow> = if jobs == 1 {
        cells.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs) // 0 means the rayon default
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(execute).collect())
    };

    rows.sort_by(|a, b| {
        a.p1.total_cmp(&b.p1)
            .then(a.seed.cmp(&b.seed))
            .then(a.objective.cmp(&b.objective))
    });
    Ok(rows)
}

/// Write rows to `path`. CSV columns are exactly the `ResultRow` fields in
/// declaration order; identical rows produce identical bytes.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)?;
            if rows.is_empty() {
                // serde-derived headers are only emitted with a record;
                // write them explicitly for the empty case
                writer.write_record([
                    "p0",
                    "p1",
                    "seed",
                    "objective",
                    "alpha",
                    "accuracy",
                    "final_elbo",
                    "epochs",
                    "runtime_seconds",
                    "status",
                ])?;
            }
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
        OutputFormat::Json => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(&mut w).map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Read rows back from a JSON results file.
pub fn read_results_json(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(file)?)
}

/// Reconstruct the exact dataset a run with this config and seed saw
/// (generation, corruption, labeled selection). Needs a flip-vector
/// corruption spec.
pub fn rebuild_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledDataset> {
    let flip = match &cfg.corruption {
        CorruptionSpec::Flip { flip } => flip.clone(),
        CorruptionSpec::Sweep { .. } => {
            return Err(Error::Config(
                "dataset reconstruction needs a flip vector, not a sweep spec".into(),
            ))
        }
    };
    let ds = build_dataset(&cfg.data, mix_seed(seed, DATA_SALT))?;
    let ds = corrupt_labels(&ds, &flip, mix_seed(seed, CORRUPT_SALT))?;
    select_labeled(&ds, cfg.per_class_labeled, mix_seed(seed, SELECT_SALT))
}

/// Prediction accuracy of a model against the dataset's true labels.
pub fn accuracy_of(model: &MVaeModel, ds: &LabeledDataset, split: EvalSplit) -> Result<f64> {
    accuracy(model, ds, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture_source(n_per_class: usize, separation: f64) -> DataSource {
        DataSource::Mixture {
            classes: 2,
            n_per_class,
            d_x: 2,
            means: vec![vec![0.0, 0.0], vec![separation, 0.0]],
            std: 1.0,
        }
    }

    fn quick_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            data: mixture_source(40, 2.5),
            corruption: CorruptionSpec::Flip {
                flip: vec![0.2, 0.2],
            },
            per_class_labeled: 10,
            model: ModelSpec {
                d_z1: 2,
                d_z2: 2,
                hidden: 8,
                noise: NoiseSpec::Oracle,
            },
            train: TrainConfig {
                epochs: 3,
                batch_size: 40,
                ..TrainConfig::default()
            },
            seeds: vec![7],
            out_dir: dir.to_path_buf(),
            eval: EvalSplit::All,
        }
    }

    #[test]
    fn run_single_produces_row_and_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config(dir.path());
        let row = run_single(&cfg).unwrap();
        assert_eq!(row.status, "ok");
        let acc = row.accuracy.unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(row.final_elbo.unwrap().is_finite());
        assert_eq!(row.objective, "mvae");
        assert_eq!(row.epochs, 3);

        let run_dir = dir.path().join("p1_0.2_seed_7_mvae");
        assert!(run_dir.join("history.csv").exists());
        assert!(run_dir.join("checkpoint.txt").exists());
        assert!(run_dir.join("manifest.json").exists());
        // checkpoint reloads into a working model
        let restored = MVaeModel::load_checkpoint(&run_dir.join("checkpoint.txt")).unwrap();
        assert_eq!(restored.dims.d_x, 2);
    }

    #[test]
    fn run_single_is_deterministic_up_to_runtime() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir_a.path());
        let row_a = run_single(&cfg).unwrap();
        cfg.out_dir = dir_b.path().to_path_buf();
        let row_b = run_single(&cfg).unwrap();
        assert!(row_a.same_outcome(&row_b));
        // bit-identical checkpoints
        let ck = |d: &Path| {
            std::fs::read(d.join("p1_0.2_seed_7_mvae").join("checkpoint.txt")).unwrap()
        };
        assert_eq!(ck(dir_a.path()), ck(dir_b.path()));
    }

    #[test]
    fn clean_fully_labeled_easy_mixture_beats_095() {
        // Means 3 sigma apart, no corruption, every row labeled. The
        // likelihood-ratio classifier with the true mixture parameters
        // bounds what is achievable on the same draw; the trained model
        // must clear 0.95 while staying below-or-near that oracle.
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.data = DataSource::Mixture {
            classes: 2,
            n_per_class: 100,
            d_x: 2,
            means: vec![vec![-3.0, 0.0], vec![3.0, 0.0]],
            std: 1.0,
        };
        cfg.corruption = CorruptionSpec::Flip {
            flip: vec![0.0, 0.0],
        };
        cfg.per_class_labeled = 100;
        // identity oracle noise cannot feed the classification term; give
        // the model a small uniform floor instead
        cfg.model.noise = NoiseSpec::Uniform { epsilon: 0.01 };
        cfg.train.epochs = 60;
        cfg.train.batch_size = 50;
        cfg.seeds = vec![1];
        let row = run_single(&cfg).unwrap();
        let acc = row.accuracy.unwrap();

        // brute-force likelihood-ratio oracle on the same draw
        let ds = build_dataset(&cfg.data, mix_seed(1, DATA_SALT)).unwrap();
        let mut oracle_correct = 0usize;
        for (x, y) in ds.x.iter().zip(ds.y_true.iter()) {
            let d0: f64 = x.iter().zip([-3.0, 0.0]).map(|(a, b)| (a - b) * (a - b)).sum();
            let d1: f64 = x.iter().zip([3.0, 0.0]).map(|(a, b)| (a - b) * (a - b)).sum();
            let pred = usize::from(d1 < d0);
            if pred == *y {
                oracle_correct += 1;
            }
        }
        let oracle_acc = oracle_correct as f64 / ds.len() as f64;
        assert!(oracle_acc > 0.95, "oracle accuracy {oracle_acc}");
        assert!(acc > 0.95, "trained accuracy {acc} (oracle {oracle_acc})");
    }

    #[test]
    fn oracle_alpha_requires_positive_average_flip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.corruption = CorruptionSpec::Flip {
            flip: vec![0.0, 0.0],
        };
        cfg.model.noise = NoiseSpec::Uniform { epsilon: 0.05 };
        cfg.train.objective = Objective::M1m2;
        assert!(matches!(run_single(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn run_level_equivalence_of_objectives() {
        // uniform-eps corruption, oracle noise and oracle alpha: the final
        // reported objectives differ by N_l * ln(eps / (C-1)).
        let eps = 0.2;
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.train.epochs = 25;
        cfg.seeds = vec![1];
        cfg.corruption = CorruptionSpec::Flip {
            flip: vec![eps, eps],
        };

        cfg.train.objective = Objective::Mvae;
        let mvae_row = run_single(&cfg).unwrap();
        cfg.train.objective = Objective::M1m2;
        let m1m2_row = run_single(&cfg).unwrap();

        assert!((m1m2_row.alpha.unwrap() - f_weight(eps, 2).unwrap()).abs() < 1e-12);
        let n_l = 20.0; // per_class_labeled = 10, two observed classes
        let expected_gap = n_l * (eps / 1.0).ln();
        let gap = mvae_row.final_elbo.unwrap() - m1m2_row.final_elbo.unwrap();
        assert!(
            (gap - expected_gap).abs() < 1e-6,
            "gap {gap} vs expected {expected_gap}"
        );
    }

    #[test]
    fn sweep_row_count_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.data = mixture_source(20, 2.5);
        cfg.corruption = CorruptionSpec::Sweep {
            p0: 0.2,
            p1_grid: vec![0.3, 0.1],
        };
        cfg.train.epochs = 1;
        cfg.seeds = vec![1, 2];
        let rows = run_sweep(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        // sorted by (p1, seed, objective)
        let keys: Vec<(f64, u64, String)> = rows
            .iter()
            .map(|r| (r.p1, r.seed, r.objective.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.status == "ok"));
        assert!(rows.iter().all(|r| r.p0 == 0.2));
    }

    #[test]
    fn sweep_records_failed_cells_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.data = mixture_source(12, 2.5);
        // per_class_labeled larger than any observed class can supply
        cfg.per_class_labeled = 500;
        cfg.corruption = CorruptionSpec::Sweep {
            p0: 0.2,
            p1_grid: vec![0.1],
        };
        cfg.train.epochs = 1;
        let rows = run_sweep(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_ne!(row.status, "ok");
            assert!(row.accuracy.is_none());
            assert!(row.final_elbo.is_none());
        }
    }

    #[test]
    fn emit_empty_rows_writes_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        emit_results(&[], &path, OutputFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "p0,p1,seed,objective,alpha,accuracy,final_elbo,epochs,runtime_seconds,status\n"
        );
    }

    fn sample_rows() -> Vec<ResultRow> {
        vec![
            ResultRow {
                p0: 0.2,
                p1: 0.1,
                seed: 1,
                objective: "mvae".into(),
                alpha: None,
                accuracy: Some(0.9),
                final_elbo: Some(-123.456),
                epochs: 10,
                runtime_seconds: 1.5,
                status: "ok".into(),
            },
            ResultRow {
                p0: 0.2,
                p1: 0.1,
                seed: 1,
                objective: "m1m2".into(),
                alpha: Some(1.2),
                accuracy: None,
                final_elbo: None,
                epochs: 10,
                runtime_seconds: 0.0,
                status: "boom".into(),
            },
        ]
    }

    #[test]
    fn json_round_trip_preserves_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.json");
        let rows = sample_rows();
        emit_results(&rows, &path, OutputFormat::Json).unwrap();
        let back = read_results_json(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn emission_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample_rows();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        emit_results(&rows, &a, OutputFormat::Csv).unwrap();
        emit_results(&rows, &b, OutputFormat::Csv).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "p0,p1,seed,objective,alpha,accuracy,final_elbo,epochs,runtime_seconds,status"
        );
    }

    #[test]
    fn config_validation_rejects_empty_specs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(dir.path());
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = quick_config(dir.path());
        cfg.corruption = CorruptionSpec::Sweep {
            p0: 0.2,
            p1_grid: vec![],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_parses_both_corruption_shapes() {
        let flip: CorruptionSpec = serde_json::from_str(r#"{"flip": [0.2, 0.4]}"#).unwrap();
        assert!(matches!(flip, CorruptionSpec::Flip { .. }));
        let sweep: CorruptionSpec =
            serde_json::from_str(r#"{"p0": 0.2, "p1_grid": [0.1, 0.3]}"#).unwrap();
        assert!(matches!(sweep, CorruptionSpec::Sweep { .. }));
        let uniform: NoiseSpec =
            serde_json::from_str(r#"{"kind": "uniform", "epsilon": 0.2}"#).unwrap();
        assert!(matches!(uniform, NoiseSpec::Uniform { .. }));
        let pcf: NoiseSpec =
            serde_json::from_str(r#"{"kind": "per-class-flip", "p0": 0.2, "p1": 0.4}"#).unwrap();
        assert!(matches!(pcf, NoiseSpec::PerClassFlip { .. }));
    }
}
