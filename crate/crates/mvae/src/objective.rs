//! The variational objective and its per-term breakdown.
//!
//! For one row `x` (optionally carrying an observed label `y'`), the bound
//! is estimated by drawing `n_mc` reparameterized samples `z1 ~ q(z1|x)`
//! and, for each draw, enumerating all classes weighted by `q(y_k|z1)`
//! (the class variable is never sampled). Per draw and class, one
//! reparameterized `z2 ~ q(z2|z1,y_k)` feeds the latent reconstruction
//! term. The per-row value decomposes as
//!
//! `total = -kl_z2 + z1_ce + recon_x - kl_y + psi`
//!
//! where `psi` is the labeled-data classification term: the class posterior
//! weighted by log confusion probabilities. The penalty-based baseline
//! objective replaces `psi` with `alpha * q(y'|z1)` and shares every random
//! draw with the bound under the same seed, which makes the two objectives
//! identical up to `N_l * log(eps/(C-1))` under uniform-`eps` noise with
//! `alpha = f(eps)`; `equivalence_residual` measures exactly that.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::distributions::{
    categorical_kl_from_log_s, gauss_kl_std_s, gauss_log_prob_s, log_softmax_s, reparam_sample_s,
    CategoricalDist,
};
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::{standard_noise, MVaeModel};
use crate::noise_model::{f_weight, uniform_noise, NoiseMatrix};

/// Which form of the classification term to use.
///
/// `Standard` weights the log confusion probability by the class posterior
/// once; this is the form consistent with the uniform-noise rewrite and is
/// the default everywhere. `Literal` applies the posterior weight twice
/// (squared weighting) and is kept behind this flag for fidelity
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    #[default]
    Standard,
    Literal,
}

/// Objective selector shared by the trainer and the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    MVae { psi_mode: PsiMode },
    M1M2 { alpha: f64 },
}

/// Per-term values of one objective evaluation.
///
/// `total = -kl_z2 + z1_ce + recon_x - kl_y + psi`; both KL terms are
/// nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboBreakdown {
    /// `E Σ_k q(y_k|z1) KL(q(z2|z1,y_k) || p(z2))`, enters negatively.
    pub kl_z2: f64,
    /// `E Σ_k q(y_k|z1) [log p(z1|z2,y_k) - log q(z1|x)]`.
    pub z1_ce: f64,
    /// `E log p(x|z1)`.
    pub recon_x: f64,
    /// `KL(q(y|z1) || p(y))`, enters negatively.
    pub kl_y: f64,
    /// Classification term (labeled rows only; zero otherwise).
    pub psi: f64,
    pub total: f64,
}

/// Accumulated per-term values, generic over the scalar type so the same
/// code produces plain numbers or tape nodes.
pub(crate) struct Terms<S> {
    pub kl_z2: S,
    pub z1_ce: S,
    pub recon_x: S,
    pub kl_y: S,
    pub psi: S,
}

impl<S: Scalar> Terms<S> {
    pub fn total(&self) -> S {
        -self.kl_z2 + self.z1_ce + self.recon_x - self.kl_y + self.psi
    }

    fn breakdown(&self) -> ElboBreakdown {
        ElboBreakdown {
            kl_z2: self.kl_z2.value(),
            z1_ce: self.z1_ce.value(),
            recon_x: self.recon_x.value(),
            kl_y: self.kl_y.value(),
            psi: self.psi.value(),
            total: self.total().value(),
        }
    }

    /// Name and value of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<(&'static str, f64)> {
        [
            ("kl_z2", self.kl_z2.value()),
            ("z1_ce", self.z1_ce.value()),
            ("recon_x", self.recon_x.value()),
            ("kl_y", self.kl_y.value()),
            ("psi", self.psi.value()),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
    }
}

/// Standard-normal draws for one row: `n_mc` outer draws for `z1`, then one
/// `z2` draw per (outer draw, class). Generation depends only on the seed
/// and shapes, so every objective flavor sees identical noise.
pub(crate) struct RowDraws {
    pub eps_z1: Vec<Vec<f64>>,
    pub eps_z2: Vec<Vec<Vec<f64>>>,
}

impl RowDraws {
    pub fn generate(seed: u64, n_mc: usize, d_z1: usize, d_z2: usize, classes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut eps_z1 = Vec::with_capacity(n_mc);
        let mut eps_z2 = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            eps_z1.push(standard_noise(d_z1, &mut rng));
            eps_z2.push(
                (0..classes)
                    .map(|_| standard_noise(d_z2, &mut rng))
                    .collect(),
            );
        }
        RowDraws { eps_z1, eps_z2 }
    }
}

/// One row of the objective, generic over the scalar type.
pub(crate) fn row_terms_s<S: Scalar>(
    ctx: S::Lift,
    m: &MVaeModel<S>,
    x: &[f64],
    y_obs: Option<usize>,
    n_mc: usize,
    seed: u64,
    kind: ObjectiveKind,
) -> Result<Terms<S>> {
    let dims = m.dims;
    if x.len() != dims.d_x {
        return Err(Error::DimensionMismatch {
            context: "objective row input",
            expected: dims.d_x,
            got: x.len(),
        });
    }
    if n_mc == 0 {
        return Err(Error::InvalidParameter {
            name: "n_mc",
            reason: "need at least one outer draw".into(),
        });
    }
    if let Some(y) = y_obs {
        if y >= dims.classes {
            return Err(Error::ClassOutOfRange {
                index: y,
                classes: dims.classes,
            });
        }
    }
    if let ObjectiveKind::M1M2 { alpha } = kind {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("penalty weight must be finite, got {alpha}"),
            });
        }
    }
    let prior = m.prior_y.probs();
    if prior.iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidParameter {
            name: "prior_y",
            reason: "KL(q(y)||p(y)) needs strictly positive prior entries".into(),
        });
    }

    let draws = RowDraws::generate(seed, n_mc, dims.d_z1, dims.d_z2, dims.classes);
    let x_s: Vec<S> = x.iter().map(|&v| S::lift(ctx, v)).collect();
    let onehots: Vec<Vec<S>> = (0..dims.classes)
        .map(|k| {
            (0..dims.classes)
                .map(|j| S::lift(ctx, if j == k { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();

    let q_z1 = m.enc_z1.forward_s(&x_s).expect_gaussian();

    let zero = S::lift(ctx, 0.0);
    let mut kl_z2_acc = zero;
    let mut z1_ce_acc = zero;
    let mut recon_acc = zero;
    let mut kl_y_acc = zero;
    let mut psi_acc = zero;

    for i in 0..n_mc {
        let z1 = reparam_sample_s(&q_z1, &draws.eps_z1[i]);
        let log_q_z1 = gauss_log_prob_s(&z1, &q_z1);
        let logits = m.enc_y.forward_s(&z1).expect_logits();
        let log_qy = log_softmax_s(&logits);
        let qy: Vec<S> = log_qy.iter().map(|lq| lq.exp()).collect();

        kl_y_acc = kl_y_acc + categorical_kl_from_log_s(&log_qy, prior);

        let p_x = m.dec_x.forward_s(&z1).expect_gaussian();
        recon_acc = recon_acc + gauss_log_prob_s(&x_s, &p_x);

        for k in 0..dims.classes {
            let z1_oh = concat_s(&z1, &onehots[k]);
            let q_z2 = m.enc_z2.forward_s(&z1_oh).expect_gaussian();
            kl_z2_acc = kl_z2_acc + qy[k] * gauss_kl_std_s(&q_z2);
            let z2 = reparam_sample_s(&q_z2, &draws.eps_z2[i][k]);
            let p_z1 = m
                .dec_z1
                .forward_s(&concat_s(&z2, &onehots[k]))
                .expect_gaussian();
            z1_ce_acc = z1_ce_acc + qy[k] * (gauss_log_prob_s(&z1, &p_z1) - log_q_z1);
        }

        if let Some(y) = y_obs {
            match kind {
                ObjectiveKind::MVae { psi_mode } => {
                    for k in 0..dims.classes {
                        let entry = m.noise.entry(k, y);
                        if entry == 0.0 {
                            // softmax posteriors are strictly positive, so a
                            // zero confusion entry always hits this path
                            return Err(Error::ImpossibleObservation {
                                y_true: k,
                                y_obs: y,
                            });
                        }
                        let weight = match psi_mode {
                            PsiMode::Standard => qy[k],
                            PsiMode::Literal => qy[k] * qy[k],
                        };
                        psi_acc = psi_acc + weight * entry.ln();
                    }
                }
                ObjectiveKind::M1M2 { alpha } => {
                    psi_acc = psi_acc + qy[y] * alpha;
                }
            }
        }
    }

    let n = n_mc as f64;
    Ok(Terms {
        kl_z2: kl_z2_acc / n,
        z1_ce: z1_ce_acc / n,
        recon_x: recon_acc / n,
        kl_y: kl_y_acc / n,
        psi: psi_acc / n,
    })
}

fn concat_s<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Per-term estimate of the bound on one row.
pub fn elbo_terms(
    m: &MVaeModel,
    x: &[f64],
    y_obs: Option<usize>,
    n_mc: usize,
    seed: u64,
    mode: PsiMode,
) -> Result<ElboBreakdown> {
    let terms = row_terms_s::<f64>(
        (),
        m,
        x,
        y_obs,
        n_mc,
        seed,
        ObjectiveKind::MVae { psi_mode: mode },
    )?;
    Ok(terms.breakdown())
}

/// The penalty-based baseline objective on one row: the same bound with the
/// classification term replaced by `alpha * E[q(y'|z1)]` on labeled rows.
pub fn m1m2_objective(
    m: &MVaeModel,
    x: &[f64],
    y_obs: Option<usize>,
    n_mc: usize,
    seed: u64,
    alpha: f64,
) -> Result<f64> {
    let terms = row_terms_s::<f64>((), m, x, y_obs, n_mc, seed, ObjectiveKind::M1M2 { alpha })?;
    Ok(terms.total().value())
}

/// Classification term: `Σ_k w_k log p(y'=y_obs | y_k)` with `w_k = q_k`
/// (standard) or `q_k^2` (literal). Zero-probability classes contribute
/// nothing; positive mass on a zero confusion entry is an error.
pub fn classification_term(
    qy: &CategoricalDist,
    y_obs: usize,
    noise: &NoiseMatrix,
    mode: PsiMode,
) -> Result<f64> {
    if qy.len() != noise.classes() {
        return Err(Error::DimensionMismatch {
            context: "classification_term posterior vs noise matrix",
            expected: noise.classes(),
            got: qy.len(),
        });
    }
    if y_obs >= noise.classes() {
        return Err(Error::ClassOutOfRange {
            index: y_obs,
            classes: noise.classes(),
        });
    }
    let mut acc = 0.0;
    for (k, &qk) in qy.probs().iter().enumerate() {
        if qk == 0.0 {
            continue;
        }
        let entry = noise.entry(k, y_obs);
        if entry == 0.0 {
            return Err(Error::ImpossibleObservation { y_true: k, y_obs });
        }
        let weight = match mode {
            PsiMode::Standard => qk,
            PsiMode::Literal => qk * qk,
        };
        acc += weight * entry.ln();
    }
    Ok(acc)
}

/// Residual of the uniform-noise rewrite of the classification term:
///
/// `Ψ(qy) - [qy_{y_obs} f(ε) + log(ε/(C-1))]`
///
/// which is identically zero for the standard-mode term.
pub fn psi_rewrite_residual(
    qy: &CategoricalDist,
    y_obs: usize,
    epsilon: f64,
    classes: usize,
) -> Result<f64> {
    let noise = uniform_noise(epsilon, classes)?;
    let psi = classification_term(qy, y_obs, &noise, PsiMode::Standard)?;
    let f = f_weight(epsilon, classes)?;
    let constant = (epsilon / (classes - 1) as f64).ln();
    Ok(psi - (qy.probs()[y_obs] * f + constant))
}

/// Batch-level check of the objective equivalence under uniform noise.
///
/// With `m.noise = uniform_noise(ε, C)` and shared random draws,
///
/// `Σ_rows elbo_total = Σ_rows m1m2(alpha = f(ε)) + N_l log(ε/(C-1))`
///
/// and this returns the absolute deviation from that identity. Row `i`
/// uses a seed derived from `(seed, i)` in both evaluations.
pub fn equivalence_residual(
    m: &MVaeModel,
    batch: &[(Vec<f64>, Option<usize>)],
    epsilon: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if m.noise.max_deviation_from_uniform(epsilon) > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "noise",
            reason: format!("model noise matrix is not uniform_noise({epsilon})"),
        });
    }
    let alpha = f_weight(epsilon, m.dims.classes)?;
    let mut elbo_sum = 0.0;
    let mut m1m2_sum = 0.0;
    let mut n_labeled = 0usize;
    for (i, (x, y_obs)) in batch.iter().enumerate() {
        let row_seed = mix_seed(seed, i as u64);
        elbo_sum += elbo_terms(m, x, *y_obs, n_mc, row_seed, PsiMode::Standard)?.total;
        m1m2_sum += m1m2_objective(m, x, *y_obs, n_mc, row_seed, alpha)?;
        if y_obs.is_some() {
            n_labeled += 1;
        }
    }
    let constant = n_labeled as f64 * (epsilon / (m.dims.classes - 1) as f64).ln();
    Ok((elbo_sum - (m1m2_sum + constant)).abs())
}

/// Full-dataset objective value: the per-row totals summed over all rows,
/// with row `i` seeded from `(seed, i)`.
pub fn dataset_total(
    m: &MVaeModel,
    xs: &[Vec<f64>],
    y_obs: &[Option<usize>],
    n_mc: usize,
    seed: u64,
    kind: ObjectiveKind,
) -> Result<f64> {
    if xs.len() != y_obs.len() {
        return Err(Error::DimensionMismatch {
            context: "dataset_total rows vs labels",
            expected: xs.len(),
            got: y_obs.len(),
        });
    }
    let mut sum = 0.0;
    for (i, (x, y)) in xs.iter().zip(y_obs.iter()).enumerate() {
        let terms = row_terms_s::<f64>((), m, x, *y, n_mc, mix_seed(seed, i as u64), kind)?;
        sum += terms.total().value();
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::model::ModelDims;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model(seed: u64) -> MVaeModel {
        MVaeModel::new(ModelDims::new(2, 2, 2, 2).unwrap(), 4, seed).unwrap()
    }

    fn uniform_model(seed: u64, eps: f64) -> MVaeModel {
        tiny_model(seed)
            .with_noise(uniform_noise(eps, 2).unwrap())
            .unwrap()
    }

    #[test]
    fn breakdown_total_is_signed_sum_of_parts() {
        let m = uniform_model(1, 0.2);
        for i in 0..10u64 {
            let x = [(i as f64).sin(), (i as f64).cos()];
            let y = if i % 3 == 0 {
                Some((i % 2) as usize)
            } else {
                None
            };
            let b = elbo_terms(&m, &x, y, 2, i, PsiMode::Standard).unwrap();
            let signed = -b.kl_z2 + b.z1_ce + b.recon_x - b.kl_y + b.psi;
            assert!((b.total - signed).abs() < 1e-10);
            assert!(b.kl_z2 >= 0.0);
            assert!(b.kl_y >= 0.0);
        }
    }

    #[test]
    fn standard_posterior_z2_gives_zero_kl() {
        let mut m = uniform_model(2, 0.2);
        let zeros = vec![0.0; m.enc_z2.param_count()];
        m.enc_z2.set_from_flat(&zeros).unwrap();
        let b = elbo_terms(&m, &[0.3, -0.4], Some(0), 3, 5, PsiMode::Standard).unwrap();
        assert!(b.kl_z2.abs() < 1e-12);
    }

    #[test]
    fn unlabeled_row_has_zero_psi() {
        let m = uniform_model(3, 0.2);
        let b = elbo_terms(&m, &[1.0, 0.5], None, 2, 9, PsiMode::Standard).unwrap();
        assert_eq!(b.psi, 0.0);
    }

    #[test]
    fn y_obs_out_of_range_is_error() {
        let m = uniform_model(3, 0.2);
        assert!(matches!(
            elbo_terms(&m, &[1.0, 0.5], Some(2), 1, 0, PsiMode::Standard),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    /// Straight-line scalar recomputation of the whole breakdown for a
    /// zero-weight model, independent of the generic evaluation path.
    #[test]
    fn zero_network_breakdown_matches_independent_recomputation() {
        let mut m = uniform_model(4, 0.3);
        let zeros = vec![0.0; m.param_count()];
        m.set_from_flat(&zeros).unwrap();
        let x = [0.7, -1.3];
        let y_obs = 1usize;
        let n_mc = 3;
        let seed = 42;
        let b = elbo_terms(&m, &x, Some(y_obs), n_mc, seed, PsiMode::Standard).unwrap();

        // With all parameters zero every network outputs mean 0 / log_var 0
        // (Gaussian heads) or zero logits, so q(z1|x) = N(0, I),
        // q(y|z1) = uniform, q(z2|.) = N(0, I), p(z1|.) = N(0, I),
        // p(x|z1) = N(0, I).
        let draws = RowDraws::generate(seed, n_mc, 2, 2, 2);
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let log_std_normal =
            |v: &[f64]| -> f64 { v.iter().map(|t| -0.5 * ln2pi - 0.5 * t * t).sum() };
        let mut kl_z2 = 0.0;
        let mut z1_ce = 0.0;
        let mut recon = 0.0;
        let mut kl_y = 0.0;
        let mut psi = 0.0;
        for i in 0..n_mc {
            let z1 = &draws.eps_z1[i]; // mean 0, std 1
            let lq = log_std_normal(z1);
            for k in 0..2 {
                kl_z2 += 0.5 * 0.0;
                z1_ce += 0.5 * (log_std_normal(z1) - lq);
                let entry: f64 = if k == y_obs { 0.7 } else { 0.3 };
                psi += 0.5 * entry.ln();
            }
            recon += log_std_normal(&x);
            kl_y += 0.0; // uniform vs uniform
        }
        let n = n_mc as f64;
        kl_z2 /= n;
        z1_ce /= n;
        recon /= n;
        kl_y /= n;
        psi /= n;
        let total = -kl_z2 + z1_ce + recon - kl_y + psi;

        assert!((b.kl_z2 - kl_z2).abs() < 1e-10);
        assert!((b.z1_ce - z1_ce).abs() < 1e-10);
        assert!((b.recon_x - recon).abs() < 1e-10);
        assert!((b.kl_y - kl_y).abs() < 1e-10);
        assert!((b.psi - psi).abs() < 1e-10);
        assert!((b.total - total).abs() < 1e-10);
    }

    #[test]
    fn classification_term_onehot_identity_is_zero() {
        let qy = CategoricalDist::onehot(0, 2);
        let noise = NoiseMatrix::identity(2).unwrap();
        for mode in [PsiMode::Standard, PsiMode::Literal] {
            assert_eq!(classification_term(&qy, 0, &noise, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn classification_term_uniform_posterior() {
        let qy = CategoricalDist::uniform(2);
        let noise = uniform_noise(0.1, 2).unwrap();
        for y_obs in 0..2 {
            let v = classification_term(&qy, y_obs, &noise, PsiMode::Standard).unwrap();
            let expected = 0.5 * 0.9f64.ln() + 0.5 * 0.1f64.ln();
            assert!((v - expected).abs() < 1e-12);
            assert!((v + 1.203_973).abs() < 1e-6);
        }
    }

    #[test]
    fn classification_term_literal_squares_weights() {
        let qy = CategoricalDist::new(vec![0.5, 0.5]).unwrap();
        let noise = uniform_noise(0.1, 2).unwrap();
        let v = classification_term(&qy, 0, &noise, PsiMode::Literal).unwrap();
        let expected = 0.25 * 0.9f64.ln() + 0.25 * 0.1f64.ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v + 0.601_986).abs() < 1e-6);
    }

    #[test]
    fn classification_term_impossible_observation() {
        // identity noise: positive mass off the observed class is impossible
        let qy = CategoricalDist::new(vec![0.9, 0.1]).unwrap();
        let noise = NoiseMatrix::identity(2).unwrap();
        assert!(matches!(
            classification_term(&qy, 0, &noise, PsiMode::Standard),
            Err(Error::ImpossibleObservation {
                y_true: 1,
                y_obs: 0
            })
        ));
        // onehot posterior on the observed class is fine
        let qy = CategoricalDist::onehot(0, 2);
        assert_eq!(
            classification_term(&qy, 0, &noise, PsiMode::Standard).unwrap(),
            0.0
        );
    }

    #[test]
    fn psi_rewrite_constant_at_symmetric_point() {
        // f(0.5) = 0 for C = 2, so the term is the constant log(0.5).
        for probs in [vec![0.3, 0.7], vec![0.9, 0.1], vec![0.5, 0.5]] {
            let qy = CategoricalDist::new(probs).unwrap();
            let residual = psi_rewrite_residual(&qy, 0, 0.5, 2).unwrap();
            assert!(residual.abs() < 1e-12);
            let noise = uniform_noise(0.5, 2).unwrap();
            let psi = classification_term(&qy, 0, &noise, PsiMode::Standard).unwrap();
            assert!((psi - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_rewrite_specific_case() {
        let qy = CategoricalDist::new(vec![0.9, 0.1]).unwrap();
        let residual = psi_rewrite_residual(&qy, 0, 0.1, 2).unwrap();
        assert!(residual.abs() < 1e-12);
    }

    #[test]
    fn psi_rewrite_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let classes = rng.random_range(2..=5usize);
            let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let qy = CategoricalDist::new(raw.iter().map(|v| v / sum).collect()).unwrap();
            let eps = rng.random_range(0.01..0.99);
            let y_obs = rng.random_range(0..classes);
            let r = psi_rewrite_residual(&qy, y_obs, eps, classes).unwrap();
            worst = worst.max(r.abs());
        }
        assert!(worst < 1e-12, "max residual {worst}");
    }

    #[test]
    fn m1m2_alpha_zero_drops_classification_term() {
        let m = uniform_model(5, 0.2);
        let x = [0.4, 0.2];
        let v = m1m2_objective(&m, &x, Some(1), 2, 13, 0.0).unwrap();
        let b = elbo_terms(&m, &x, Some(1), 2, 13, PsiMode::Standard).unwrap();
        let without_psi = -b.kl_z2 + b.z1_ce + b.recon_x - b.kl_y;
        assert!((v - without_psi).abs() < 1e-12);
    }

    #[test]
    fn m1m2_unlabeled_penalty_is_zero() {
        let m = uniform_model(6, 0.2);
        let x = [-0.3, 0.6];
        let with_alpha = m1m2_objective(&m, &x, None, 2, 3, 5.0).unwrap();
        let without = m1m2_objective(&m, &x, None, 2, 3, 0.0).unwrap();
        assert_eq!(with_alpha, without);
    }

    #[test]
    fn m1m2_saturated_posterior_penalty_equals_alpha() {
        // Rig the class head so q(y=0|z1) is 1 up to rounding; the penalty
        // contribution with alpha = 2 must then be 2.
        let mut m = uniform_model(7, 0.2);
        let mut flat = vec![0.0; m.enc_y.param_count()];
        let n = flat.len();
        // final layer bias: logits (+30, -30) regardless of input
        flat[n - 2] = 30.0;
        flat[n - 1] = -30.0;
        m.enc_y.set_from_flat(&flat).unwrap();
        let x = [0.0, 0.0];
        let with_penalty = m1m2_objective(&m, &x, Some(0), 1, 11, 2.0).unwrap();
        let without = m1m2_objective(&m, &x, Some(0), 1, 11, 0.0).unwrap();
        assert!(((with_penalty - without) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn equivalence_residual_vanishes_at_symmetric_eps() {
        let m = uniform_model(8, 0.5);
        let batch: Vec<(Vec<f64>, Option<usize>)> = (0..6)
            .map(|i| {
                let x = vec![(i as f64) * 0.3 - 1.0, (i as f64).cos()];
                let y = if i % 2 == 0 { Some(i % 2) } else { None };
                (x, y)
            })
            .collect();
        let r = equivalence_residual(&m, &batch, 0.5, 2, 21).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn equivalence_residual_random_model_and_batch() {
        let m = uniform_model(9, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch: Vec<(Vec<f64>, Option<usize>)> = (0..8)
            .map(|i| {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let y = if i < 4 {
                    Some(rng.random_range(0..2))
                } else {
                    None
                };
                (x, y)
            })
            .collect();
        let r = equivalence_residual(&m, &batch, 0.1, 2, 33).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn equivalence_residual_no_labeled_rows() {
        let m = uniform_model(10, 0.3);
        let batch: Vec<(Vec<f64>, Option<usize>)> = (0..4)
            .map(|i| (vec![i as f64, -(i as f64)], None))
            .collect();
        let r = equivalence_residual(&m, &batch, 0.3, 1, 2).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn equivalence_residual_requires_uniform_noise() {
        let m = tiny_model(11); // identity noise
        let batch = vec![(vec![0.0, 0.0], None)];
        assert!(equivalence_residual(&m, &batch, 0.2, 1, 0).is_err());
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        let m = uniform_model(12, 0.2);
        let x = [0.5, -0.9];
        let y_obs = Some(1);
        let n_mc = 2;
        let seed = 17;

        let tape = Tape::new();
        let lifted = m.lift(&tape);
        let terms = row_terms_s(
            &tape,
            &lifted,
            &x,
            y_obs,
            n_mc,
            seed,
            ObjectiveKind::MVae {
                psi_mode: PsiMode::Standard,
            },
        )
        .unwrap();
        let total = terms.total();
        let grads = total.grad();
        let params = lifted.params();

        let flat = m.flatten();
        let mut probe = m.clone();
        let h = 1e-5;
        for i in (0..flat.len()).step_by(7) {
            let mut p = flat.clone();
            p[i] = flat[i] + h;
            probe.set_from_flat(&p).unwrap();
            let up = elbo_terms(&probe, &x, y_obs, n_mc, seed, PsiMode::Standard)
                .unwrap()
                .total;
            p[i] = flat[i] - h;
            probe.set_from_flat(&p).unwrap();
            let down = elbo_terms(&probe, &x, y_obs, n_mc, seed, PsiMode::Standard)
                .unwrap()
                .total;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.wrt(params[i]);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "coord {i}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn literal_mode_differs_from_standard_on_soft_posteriors() {
        let m = uniform_model(13, 0.2);
        let x = [0.2, 0.8];
        let std = elbo_terms(&m, &x, Some(0), 1, 4, PsiMode::Standard).unwrap();
        let lit = elbo_terms(&m, &x, Some(0), 1, 4, PsiMode::Literal).unwrap();
        assert!(std.psi != lit.psi);
        // squared weights shrink the magnitude of every (negative) summand
        assert!(lit.psi > std.psi);
    }

    #[test]
    fn dataset_total_sums_rows() {
        let m = uniform_model(14, 0.25);
        let xs = vec![vec![0.1, 0.2], vec![-0.5, 0.3]];
        let ys = vec![Some(0), None];
        let kind = ObjectiveKind::MVae {
            psi_mode: PsiMode::Standard,
        };
        let total = dataset_total(&m, &xs, &ys, 1, 9, kind).unwrap();
        let by_hand: f64 = (0..2)
            .map(|i| {
                elbo_terms(
                    &m,
                    &xs[i],
                    ys[i],
                    1,
                    mix_seed(9, i as u64),
                    PsiMode::Standard,
                )
                .unwrap()
                .total
            })
            .sum();
        assert!((total - by_hand).abs() < 1e-12);
    }
}
