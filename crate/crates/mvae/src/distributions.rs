//! Diagonal-Gaussian and categorical densities, divergences, and
//! reparameterized sampling.
//!
//! The checked `f64` functions are the public surface; the `_s` kernels are
//! the same formulas generic over [`Scalar`] so they also run on the
//! gradient tape. All math is `f64`; log-variances are clamped to
//! [`LOG_VAR_MIN`], [`LOG_VAR_MAX`] before exponentiation.

use crate::autodiff::{self, Scalar};
use crate::error::{Error, Result};

pub const LOG_VAR_MIN: f64 = -30.0;
pub const LOG_VAR_MAX: f64 = 30.0;

pub(crate) const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Mean and log-variance of a diagonal-covariance Gaussian.
#[derive(Debug, Clone)]
pub struct DiagGaussian<S = f64> {
    pub mean: Vec<S>,
    pub log_var: Vec<S>,
}

impl<S> DiagGaussian<S> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

impl DiagGaussian<f64> {
    /// Validates dimensions and finiteness; clamps `log_var` into range.
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: "dimension must be at least 1".into(),
            });
        }
        if mean.len() != log_var.len() {
            return Err(Error::DimensionMismatch {
                context: "DiagGaussian mean vs log_var",
                expected: mean.len(),
                got: log_var.len(),
            });
        }
        if !mean.iter().chain(log_var.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "DiagGaussian parameters".into(),
            });
        }
        let log_var = log_var
            .into_iter()
            .map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX))
            .collect();
        Ok(DiagGaussian { mean, log_var })
    }

    /// Standard normal over `dim` coordinates.
    pub fn standard(dim: usize) -> Self {
        DiagGaussian {
            mean: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }
}

impl PartialEq for DiagGaussian<f64> {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.log_var == other.log_var
    }
}

/// Probabilities over a finite class set.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    /// Entries must be nonnegative and sum to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: "empty probability vector".into(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidCategorical {
                sum: probs.iter().sum(),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCategorical { sum });
        }
        Ok(CategoricalDist { probs })
    }

    pub fn uniform(classes: usize) -> Self {
        CategoricalDist {
            probs: vec![1.0 / classes as f64; classes],
        }
    }

    /// Point mass on one class.
    pub fn onehot(class: usize, classes: usize) -> Self {
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        CategoricalDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Log-density of `x` under a diagonal Gaussian:
/// `Σ_i [-0.5 ln(2π) - 0.5 log_var_i - 0.5 (x_i - mean_i)^2 / exp(log_var_i)]`.
pub fn gauss_log_prob(x: &[f64], g: &DiagGaussian) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            context: "gauss_log_prob input vs Gaussian",
            expected: g.dim(),
            got: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "gauss_log_prob input".into(),
        });
    }
    Ok(gauss_log_prob_s(x, g))
}

/// KL divergence from a diagonal Gaussian to the standard normal:
/// `0.5 Σ_i [mean_i^2 + exp(log_var_i) - log_var_i - 1]`.
pub fn gauss_kl_std(g: &DiagGaussian) -> Result<f64> {
    if !g.mean.iter().chain(g.log_var.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "gauss_kl_std parameters".into(),
        });
    }
    Ok(gauss_kl_std_s(g))
}

/// `KL(q || p) = Σ_k q_k (ln q_k - ln p_k)` with the `0 ln 0 := 0` convention.
///
/// A zero `p_k` under positive `q_k` makes the divergence infinite and is
/// rejected as an impossible-observation error.
pub fn categorical_kl(q: &CategoricalDist, p: &CategoricalDist) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            context: "categorical_kl q vs p",
            expected: q.len(),
            got: p.len(),
        });
    }
    let mut kl = 0.0;
    for (k, (&qk, &pk)) in q.probs.iter().zip(p.probs.iter()).enumerate() {
        if qk == 0.0 {
            continue;
        }
        if pk == 0.0 {
            return Err(Error::InfiniteKl { index: k });
        }
        kl += qk * (qk.ln() - pk.ln());
    }
    Ok(kl)
}

/// `mean + exp(0.5 log_var) ⊙ noise`, differentiable in both parameters.
pub fn reparam_sample(g: &DiagGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            context: "reparam_sample noise vs Gaussian",
            expected: g.dim(),
            got: noise.len(),
        });
    }
    Ok(reparam_sample_s(g, noise))
}

/// Stable softmax: shifts by the max logit before exponentiating.
pub fn softmax(logits: &[f64]) -> Result<CategoricalDist> {
    if logits.is_empty() {
        return Err(Error::InvalidParameter {
            name: "logits",
            reason: "empty logit vector".into(),
        });
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "softmax logits".into(),
        });
    }
    let log_probs = log_softmax_s::<f64>(logits);
    Ok(CategoricalDist {
        probs: log_probs.iter().map(|lp| lp.exp()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Scalar-generic kernels. Same formulas as above, minus the validation, so
// they can run on the gradient tape.
// ---------------------------------------------------------------------------

pub fn gauss_log_prob_s<S: Scalar>(x: &[S], g: &DiagGaussian<S>) -> S {
    debug_assert_eq!(x.len(), g.dim());
    autodiff::sum(
        x.iter()
            .zip(g.mean.iter().zip(g.log_var.iter()))
            .map(|(&xi, (&mi, &lvi))| {
                let diff = xi - mi;
                -(lvi * 0.5) - diff * diff / lvi.exp() * 0.5 - HALF_LN_TWO_PI
            }),
    )
}

pub fn gauss_kl_std_s<S: Scalar>(g: &DiagGaussian<S>) -> S {
    autodiff::sum(g.mean.iter().zip(g.log_var.iter()).map(|(&mi, &lvi)| {
        (mi * mi + lvi.exp() - lvi - 1.0) * 0.5
    }))
}

pub fn reparam_sample_s<S: Scalar>(g: &DiagGaussian<S>, noise: &[f64]) -> Vec<S> {
    debug_assert_eq!(noise.len(), g.dim());
    g.mean
        .iter()
        .zip(g.log_var.iter())
        .zip(noise.iter())
        .map(|((&mi, &lvi), &ni)| mi + (lvi * 0.5).exp() * ni)
        .collect()
}

/// Log-softmax via the shifted log-sum-exp; the shift by the max logit is a
/// constant and does not enter the gradient.
pub fn log_softmax_s<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits
        .iter()
        .map(|l| l.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let log_norm = autodiff::sum(logits.iter().map(|&l| (l - max).exp())).ln();
    logits.iter().map(|&l| l - max - log_norm).collect()
}

/// `KL(q || p)` where `q` is given as log-probabilities on the tape and `p`
/// is a fixed categorical with strictly positive entries.
pub fn categorical_kl_from_log_s<S: Scalar>(log_q: &[S], p: &[f64]) -> S {
    debug_assert_eq!(log_q.len(), p.len());
    autodiff::sum(
        log_q
            .iter()
            .zip(p.iter())
            .map(|(&lq, &pk)| lq.exp() * (lq - pk.ln())),
    )
}
