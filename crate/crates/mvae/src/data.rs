//! Datasets: synthetic Gaussian mixtures, seeded label corruption,
//! labeled-subset selection, and CSV ingestion.
//!
//! A [`LabeledDataset`] keeps three views of the labels: `y_true` (ground
//! truth, used only for evaluation), `y_obs` (what the learner sees;
//! possibly corrupted, present exactly on `labeled_idx`), and the
//! corruption metadata recording how `y_obs` was produced. Corruption
//! never touches `y_true`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_model::{per_class_flip, NoiseMatrix};

/// Provenance of the observed labels.
#[derive(Debug, Clone, Default)]
pub struct CorruptionMeta {
    /// Flip vector applied by `corrupt_labels`, if any.
    pub flip: Option<Vec<f64>>,
    /// The noise matrix implied by the flip vector.
    pub implied_noise: Option<NoiseMatrix>,
    pub corruption_seed: Option<u64>,
    pub selection_seed: Option<u64>,
    pub source_seed: Option<u64>,
}

/// Covariates plus true, observed, and selected labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    /// Held-out ground truth; evaluation only.
    pub y_true: Vec<usize>,
    /// Learner-visible labels; `Some` exactly on `labeled_idx`.
    pub y_obs: Vec<Option<usize>>,
    pub labeled_idx: Vec<usize>,
    pub classes: usize,
    pub meta: CorruptionMeta,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn d_x(&self) -> usize {
        self.x.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled_idx.len()
    }

    fn check_consistency(&self) -> Result<()> {
        let n = self.x.len();
        if self.y_true.len() != n || self.y_obs.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset label vectors",
                expected: n,
                got: self.y_true.len().min(self.y_obs.len()),
            });
        }
        for (i, y) in self.y_true.iter().enumerate() {
            if *y >= self.classes {
                return Err(Error::ClassOutOfRange {
                    index: *y,
                    classes: self.classes,
                });
            }
            let labeled = self.labeled_idx.binary_search(&i).is_ok();
            if labeled != self.y_obs[i].is_some() {
                return Err(Error::InvalidParameter {
                    name: "dataset",
                    reason: format!("y_obs presence at row {i} disagrees with labeled_idx"),
                });
            }
        }
        Ok(())
    }
}

/// Class-conditional isotropic Gaussian mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub classes: usize,
    pub n_per_class: usize,
    pub d_x: usize,
    /// Per-class mean vectors, `classes x d_x`.
    pub means: Vec<Vec<f64>>,
    /// Shared isotropic standard deviation.
    pub std: f64,
}

/// Draw a fully labeled mixture dataset; `y_obs` starts equal to `y_true`
/// on every row. Rows are ordered class by class.
pub fn generate_mixture(cfg: &MixtureConfig, seed: u64) -> Result<LabeledDataset> {
    if cfg.classes < 2 {
        return Err(Error::InvalidParameter {
            name: "classes",
            reason: format!("need at least 2 classes, got {}", cfg.classes),
        });
    }
    if !(cfg.std > 0.0) {
        return Err(Error::InvalidParameter {
            name: "std",
            reason: format!("standard deviation must be positive, got {}", cfg.std),
        });
    }
    if cfg.means.len() != cfg.classes || cfg.means.iter().any(|m| m.len() != cfg.d_x) {
        return Err(Error::DimensionMismatch {
            context: "mixture means",
            expected: cfg.classes * cfg.d_x,
            got: cfg.means.iter().map(|m| m.len()).sum(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, cfg.std).expect("positive std");
    let n = cfg.classes * cfg.n_per_class;
    let mut x = Vec::with_capacity(n);
    let mut y_true = Vec::with_capacity(n);
    for k in 0..cfg.classes {
        for _ in 0..cfg.n_per_class {
            let row: Vec<f64> = cfg.means[k]
                .iter()
                .map(|&m| m + normal.sample(&mut rng))
                .collect();
            x.push(row);
            y_true.push(k);
        }
    }
    let y_obs = y_true.iter().map(|&y| Some(y)).collect();
    let labeled_idx = (0..n).collect();
    let ds = LabeledDataset {
        x,
        y_true,
        y_obs,
        labeled_idx,
        classes: cfg.classes,
        meta: CorruptionMeta {
            source_seed: Some(seed),
            ..CorruptionMeta::default()
        },
    };
    ds.check_consistency()?;
    Ok(ds)
}

/// Per-class label corruption: a row with `y_true = k` flips with
/// probability `flip[k]` to a class chosen uniformly among the others.
/// Only `y_obs` changes; the implied noise matrix is recorded in `meta`.
pub fn corrupt_labels(ds: &LabeledDataset, flip: &[f64], seed: u64) -> Result<LabeledDataset> {
    if flip.len() != ds.classes {
        return Err(Error::DimensionMismatch {
            context: "flip vector",
            expected: ds.classes,
            got: flip.len(),
        });
    }
    let implied = per_class_flip(flip)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for i in 0..out.len() {
        let k = out.y_true[i];
        // draw for every row to keep the stream independent of labeling
        let u: f64 = rng.random_range(0.0..1.0);
        let target: usize = rng.random_range(0..ds.classes - 1);
        if out.y_obs[i].is_some() && u < flip[k] {
            let other = if target >= k { target + 1 } else { target };
            out.y_obs[i] = Some(other);
        }
    }
    out.meta.flip = Some(flip.to_vec());
    out.meta.implied_noise = Some(implied);
    out.meta.corruption_seed = Some(seed);
    out.check_consistency()?;
    Ok(out)
}

/// Keep `per_class` labeled rows per OBSERVED class (the learner cannot
/// stratify on `y_true`), erasing `y_obs` everywhere else.
pub fn select_labeled(ds: &LabeledDataset, per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, y) in ds.y_obs.iter().enumerate() {
        if let Some(k) = y {
            by_class[*k].push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for (k, rows) in by_class.iter().enumerate() {
        if rows.is_empty() {
            continue; // class never observed; nothing to stratify on
        }
        if rows.len() < per_class {
            return Err(Error::InsufficientRows {
                class: k,
                available: rows.len(),
                needed: per_class,
            });
        }
        let mut pool = rows.clone();
        pool.shuffle(&mut rng);
        selected.extend_from_slice(&pool[..per_class]);
    }
    selected.sort_unstable();
    let mut out = ds.clone();
    let keep: std::collections::BTreeSet<usize> = selected.iter().copied().collect();
    for i in 0..out.len() {
        if !keep.contains(&i) {
            out.y_obs[i] = None;
        }
    }
    out.labeled_idx = selected;
    out.meta.selection_seed = Some(seed);
    out.check_consistency()?;
    Ok(out)
}

/// Column layout of an external CSV feature matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Name of the label column.
    pub label_column: String,
    /// Feature columns in order; `None` takes every non-label column.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    /// Expected label strings (class index = position). `None` infers
    /// classes from the file, sorted.
    #[serde(default)]
    pub known_labels: Option<Vec<String>>,
    /// Apply `ln(1 + v)` to every feature (for count data).
    #[serde(default)]
    pub log1p: bool,
}

/// Load a feature matrix with a label column. The labels become `y_true`;
/// the dataset starts fully labeled and uncorrupted.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(Error::Csv)?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let label_pos = headers
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("label column {:?} not in header", schema.label_column),
        })?;
    let feature_pos: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers.iter().position(|h| h == c).ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    message: format!("feature column {c:?} not in header"),
                })
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != label_pos).collect(),
    };

    let mut raw_labels: Vec<String> = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(feature_pos.len());
        for &pos in &feature_pos {
            let cell = record.get(pos).ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("missing column {:?}", headers[pos]),
            })?;
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("non-numeric value {:?} in column {:?}", cell, headers[pos]),
            })?;
            let value = if schema.log1p {
                if value < 0.0 {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line,
                        message: format!("log1p needs nonnegative values, got {value}"),
                    });
                }
                value.ln_1p()
            } else {
                value
            };
            row.push(value);
        }
        let label = record.get(label_pos).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line,
            message: "missing label cell".into(),
        })?;
        raw_labels.push(label.trim().to_string());
        x.push(row);
    }

    let classes: Vec<String> = match &schema.known_labels {
        Some(known) => known.clone(),
        None => {
            let mut distinct: Vec<String> = raw_labels.clone();
            distinct.sort();
            distinct.dedup();
            distinct
        }
    };
    if classes.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: format!("need at least 2 classes, found {:?}", classes),
        });
    }
    let y_true: Vec<usize> = raw_labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::UnknownLabel {
                    label: l.clone(),
                    known: classes.clone(),
                })
        })
        .collect::<Result<_>>()?;

    let n = x.len();
    let ds = LabeledDataset {
        x,
        y_obs: y_true.iter().map(|&y| Some(y)).collect(),
        y_true,
        labeled_idx: (0..n).collect(),
        classes: classes.len(),
        meta: CorruptionMeta::default(),
    };
    ds.check_consistency()?;
    Ok(ds)
}

/// Write `x` and `y_true` with a header row; the inverse of [`load_csv`]
/// for uncorrupted datasets. Floats use shortest round-trip formatting.
pub fn write_csv(ds: &LabeledDataset, path: &Path, label_column: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let d = ds.d_x();
    let mut header: Vec<String> = vec![label_column.to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    writeln!(&mut w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for (row, y) in ds.x.iter().zip(ds.y_true.iter()) {
        let mut cells: Vec<String> = vec![y.to_string()];
        cells.extend(row.iter().map(|v| v.to_string()));
        writeln!(&mut w, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
