//! Label-noise confusion matrices and the uniform-noise weight `f(ε)`.
//!
//! Entry `(k, j)` of a [`NoiseMatrix`] is `p(y' = j | y = k)`: the
//! probability of observing label `j` when the true class is `k`. Rows sum
//! to one. Validation rejects malformed matrices instead of renormalizing
//! them, so configuration mistakes surface immediately. The matrix is held
//! fixed during training; it is never learned.

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `C x C` conditional probability matrix `p(y'|y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    entries: Vec<f64>,
    classes: usize,
}

impl NoiseMatrix {
    /// Validates shape, entry range, and row sums (within 1e-9).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let classes = rows.len();
        if classes < 2 {
            return Err(Error::InvalidParameter {
                name: "noise matrix",
                reason: format!("need at least 2 classes, got {classes}"),
            });
        }
        let mut entries = Vec::with_capacity(classes * classes);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(Error::DimensionMismatch {
                    context: "noise matrix row",
                    expected: classes,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::MatrixEntryOutOfRange {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSumViolation { row: r, sum });
            }
            entries.extend_from_slice(row);
        }
        Ok(NoiseMatrix { entries, classes })
    }

    /// Noise-free channel: the identity matrix.
    pub fn identity(classes: usize) -> Result<Self> {
        let rows = (0..classes)
            .map(|k| {
                let mut row = vec![0.0; classes];
                row[k] = 1.0;
                row
            })
            .collect();
        NoiseMatrix::new(rows)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn entry(&self, y_true: usize, y_obs: usize) -> f64 {
        self.entries[y_true * self.classes + y_obs]
    }

    pub fn row(&self, y_true: usize) -> &[f64] {
        &self.entries[y_true * self.classes..(y_true + 1) * self.classes]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.classes).map(|k| self.row(k).to_vec()).collect()
    }

    /// `log p(y'=y_obs | y=y_true)`.
    ///
    /// A zero entry yields `-inf`; callers that would multiply it by
    /// positive posterior mass must convert that into an
    /// impossible-observation error rather than feed it to gradients.
    pub fn log_confusion(&self, y_true: usize, y_obs: usize) -> Result<f64> {
        for index in [y_true, y_obs] {
            if index >= self.classes {
                return Err(Error::ClassOutOfRange {
                    index,
                    classes: self.classes,
                });
            }
        }
        Ok(self.entry(y_true, y_obs).ln())
    }

    /// Max absolute difference from `uniform_noise(epsilon, C)`.
    pub fn max_deviation_from_uniform(&self, epsilon: f64) -> f64 {
        let c = self.classes;
        let off = epsilon / (c - 1) as f64;
        let mut worst: f64 = 0.0;
        for k in 0..c {
            for j in 0..c {
                let expect = if k == j { 1.0 - epsilon } else { off };
                worst = worst.max((self.entry(k, j) - expect).abs());
            }
        }
        worst
    }
}

/// Uniform corruption: correct with probability `1 - ε`, otherwise the
/// observed label is drawn uniformly from the `C - 1` incorrect classes.
pub fn uniform_noise(epsilon: f64, classes: usize) -> Result<NoiseMatrix> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in [0, 1), got {epsilon}"),
        });
    }
    if classes < 2 {
        return Err(Error::InvalidParameter {
            name: "classes",
            reason: format!("need at least 2 classes, got {classes}"),
        });
    }
    let off = epsilon / (classes - 1) as f64;
    let rows = (0..classes)
        .map(|k| {
            (0..classes)
                .map(|j| if j == k { 1.0 - epsilon } else { off })
                .collect()
        })
        .collect();
    NoiseMatrix::new(rows)
}

/// Per-class flip probabilities: class `k` keeps its label with probability
/// `1 - p_k`, otherwise flips uniformly to one of the other classes.
pub fn per_class_flip(flip: &[f64]) -> Result<NoiseMatrix> {
    let classes = flip.len();
    if classes < 2 {
        return Err(Error::InvalidParameter {
            name: "flip",
            reason: format!("need at least 2 classes, got {classes}"),
        });
    }
    for (k, &p) in flip.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "flip",
                reason: format!("flip[{k}] = {p} outside [0, 1]"),
            });
        }
    }
    let rows = flip
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let off = p / (classes - 1) as f64;
            (0..classes)
                .map(|j| if j == k { 1.0 - p } else { off })
                .collect()
        })
        .collect();
    NoiseMatrix::new(rows)
}

/// Effective weight of the classification signal under uniform-`ε` noise:
/// `f(ε) = log(1 - ε) - log(ε / (C - 1))`.
///
/// Decreasing in `ε`, zero exactly at the uninformative point
/// `ε = (C - 1) / C`, unbounded as `ε` approaches 0 or 1.
pub fn f_weight(epsilon: f64, classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::InvalidParameter {
            name: "classes",
            reason: format!("need at least 2 classes, got {classes}"),
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("f(epsilon) requires 0 < epsilon < 1, got {epsilon}"),
        });
    }
    Ok((1.0 - epsilon).ln() - (epsilon / (classes - 1) as f64).ln())
}
