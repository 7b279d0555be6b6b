//! Minibatch stochastic maximization of the configured objective with
//! Adam updates.
//!
//! One trainer owns one model; a full run is reproducible bit-for-bit from
//! `(model, data, config)` on one platform. Minibatches mix labeled and
//! unlabeled rows in shuffled order; the classification term simply
//! contributes zero on unlabeled rows. Losses are batch-averaged for
//! optimizer-scale stability, while the per-epoch history reports the
//! full-dataset objective as a sum.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::mix_seed;
use crate::model::MVaeModel;
use crate::objective::{row_terms_s, ObjectiveKind, PsiMode};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const SHUFFLE_SALT: u64 = 0x5075;
const EVAL_SALT: u64 = 0xE7A1;
const EPOCH_SALT: u64 = 0x9000;

/// Objective family to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Mvae,
    M1m2,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Mvae => write!(f, "mvae"),
            Objective::M1m2 => write!(f, "m1m2"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Penalty weight; required when `objective` is `m1m2`.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Outer draws per row for the objective estimate.
    pub n_mc: usize,
    pub seed: u64,
    #[serde(default)]
    pub psi_mode: PsiMode,
    /// Save a checkpoint every this many epochs (into `checkpoint_dir`).
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Mvae,
            alpha: None,
            epochs: 60,
            batch_size: 100,
            learning_rate: 1e-3,
            n_mc: 1,
            seed: 0,
            psi_mode: PsiMode::Standard,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn objective_kind(&self) -> Result<ObjectiveKind> {
        match self.objective {
            Objective::Mvae => Ok(ObjectiveKind::MVae {
                psi_mode: self.psi_mode,
            }),
            Objective::M1m2 => {
                let alpha = self.alpha.ok_or_else(|| {
                    Error::Config("objective m1m2 requires an alpha value".into())
                })?;
                Ok(ObjectiveKind::M1M2 { alpha })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        // learning_rate 0 is allowed: it is the documented zero-step limit
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        if self.n_mc == 0 {
            return Err(Error::Config("n_mc must be at least 1".into()));
        }
        Ok(())
    }
}

/// One completed epoch: full-data objective value (sum over rows),
/// classification accuracy on the labeled rows against the observed
/// labels, and wall-clock seconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub elbo: f64,
    pub train_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    /// CSV with columns `epoch,elbo,train_acc,seconds`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "epoch,elbo,train_acc,seconds")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{},{}", e.epoch, e.elbo, e.train_acc, e.seconds)?;
        }
        Ok(())
    }
}

/// First and second moment estimates with a step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected adaptive update, in place. Gradients are of the LOSS
/// (the negated objective): parameters move against them.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "adam_step parameter/gradient/state shapes",
            expected: params.len(),
            got: grads.len().min(state.m.len()),
        });
    }
    if !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite {
            context: "adam_step gradients".into(),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// Maximize the configured objective over the dataset. Returns the trained
/// model and the per-epoch history; the input model is untouched.
pub fn train(
    model: &MVaeModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(MVaeModel, TrainHistory)> {
    train_impl(model, data, cfg, None)
}

pub(crate) fn train_impl(
    model: &MVaeModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    mut step_losses: Option<&mut Vec<f64>>,
) -> Result<(MVaeModel, TrainHistory)> {
    cfg.validate()?;
    let kind = cfg.objective_kind()?;
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    if data.d_x() != model.dims.d_x {
        return Err(Error::DimensionMismatch {
            context: "training data covariate dimension",
            expected: model.dims.d_x,
            got: data.d_x(),
        });
    }
    if data.classes != model.dims.classes {
        return Err(Error::DimensionMismatch {
            context: "training data classes",
            expected: model.dims.classes,
            got: data.classes,
        });
    }

    let mut model = model.clone();
    let mut flat = model.flatten();
    let mut state = AdamState::new(flat.len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SHUFFLE_SALT));
    let eval_seed = mix_seed(cfg.seed, EVAL_SALT);
    let n = data.len();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let t0 = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let epoch_seed = mix_seed(cfg.seed, EPOCH_SALT + epoch as u64);

        for chunk in order.chunks(cfg.batch_size) {
            let tape = Tape::new();
            let lifted = model.lift(&tape);
            let params = lifted.params();

            let mut batch_total = None;
            for &row in chunk {
                let row_seed = mix_seed(epoch_seed, row as u64);
                let terms = row_terms_s(
                    &tape,
                    &lifted,
                    &data.x[row],
                    data.y_obs[row],
                    cfg.n_mc,
                    row_seed,
                    kind,
                )?;
                if let Some((term, value)) = terms.non_finite_term() {
                    return Err(Error::NonFiniteLoss { epoch, term, value });
                }
                let total = terms.total();
                batch_total = Some(match batch_total {
                    None => total,
                    Some(acc) => acc + total,
                });
            }
            let loss = -(batch_total.expect("nonempty batch") / chunk.len() as f64);
            if !loss.value().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    term: "total",
                    value: loss.value(),
                });
            }
            if let Some(rec) = step_losses.as_deref_mut() {
                rec.push(loss.value());
            }
            let grads_sweep = loss.grad();
            let grads: Vec<f64> = params.iter().map(|p| grads_sweep.wrt(*p)).collect();
            adam_step(&mut flat, &grads, &mut state, cfg.learning_rate)?;
            model.set_from_flat(&flat)?;
        }

        if let Some(bad) = flat.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                term: "parameters",
                value: *bad,
            });
        }

        let elbo = crate::objective::dataset_total(
            &model,
            &data.x,
            &data.y_obs,
            cfg.n_mc,
            eval_seed,
            kind,
        )?;
        let mut correct = 0usize;
        let mut labeled = 0usize;
        for &i in &data.labeled_idx {
            if let Some(y) = data.y_obs[i] {
                labeled += 1;
                if model.predict_class(&data.x[i])? == y {
                    correct += 1;
                }
            }
        }
        let train_acc = if labeled == 0 {
            0.0
        } else {
            correct as f64 / labeled as f64
        };
        history.epochs.push(EpochStats {
            epoch,
            elbo,
            train_acc,
            seconds: t0.elapsed().as_secs_f64(),
        });

        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, cfg.checkpoint_dir.as_ref()) {
            if every > 0 && epoch % every == 0 {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                model.save_checkpoint(&dir.join(format!("checkpoint_epoch_{epoch:04}.txt")))?;
            }
        }
    }

    Ok((model, history))
}
