//! Semi-supervised deep generative classification with an explicit
//! label-noise channel.
//!
//! The model couples a two-level latent-variable generative process
//! (`y, z2 -> z1 -> x`) with a row-stochastic confusion matrix `p(y'|y)`
//! relating the true class `y` to the observed, possibly corrupted label
//! `y'`. Training maximizes a variational lower bound whose labeled-data
//! term weights the class posterior by the log confusion probabilities;
//! under uniform corruption this bound coincides, up to an additive
//! constant, with the classic "ELBO + weighted classification penalty"
//! objective, and that identity is checked to machine precision in the
//! test suite.
//!
//! Crate layout:
//! - [`distributions`]: diagonal-Gaussian / categorical densities and KLs
//! - [`autodiff`]: tape-based reverse-mode gradients
//! - [`networks`]: seeded MLPs with Gaussian or logit heads
//! - [`noise_model`]: confusion matrices and the uniform-noise weight `f(ε)`
//! - [`model`]: the assembled generative model, sampling and prediction
//! - [`objective`]: the variational bound, its per-term breakdown, the
//!   penalty-based baseline objective and the equivalence residuals
//! - [`trainer`]: Adam-based minibatch maximization
//! - [`data`]: synthetic mixtures, label corruption, CSV ingestion
//! - [`experiment`]: single runs, corruption sweeps, result emission

pub mod autodiff;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod model;
pub mod networks;
pub mod noise_model;
pub mod objective;
pub mod trainer;

pub use error::{Error, Result};

/// splitmix64-style mixer for deriving independent stream seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
