//! Bayesian nonparametric inference for crossed rating data.
//!
//! Ratings `Y[i][j] = theta[i] + tau[j] + eps[i][j]` are modelled with
//! Dirichlet-process mixture priors on both the subject true scores
//! `theta[i]` and the rater effect pairs (bias `tau[j]`, reliability
//! `1/sigma2[j]`). Fitting runs a truncated blocked Gibbs sampler; the
//! posterior feeds an intraclass-correlation family, density estimates, and
//! WAIC-based model comparison. Reduced one-way and ordinal-outcome variants
//! share the same machinery.
//!
//! Module map:
//! - [`data`]: datasets, hyperparameter configuration, chain state.
//! - [`dists`]: sampling and log-density kernels, digamma/trigamma.
//! - [`mixture`]: stick-breaking weights, mixture moments, the ICC family.
//! - [`dm`]: derivatives-matching gamma approximation for shape conditionals.
//! - [`sampler`]: the blocked Gibbs sampler for the two-way model.
//! - [`variants`]: one-way reduced model and ordinal-outcome model.
//! - [`post`]: centering, summaries, density grids, WAIC.
//! - [`simbench`]: synthetic scenario generators and recovery metrics.
//! - [`io`]: CSV/JSON artifact emission and re-ingestion.
//! - [`cli`]: command implementations behind the `rater-infer` binary.

pub mod cli;
pub mod data;
pub mod dists;
pub mod dm;
mod error;
pub mod io;
pub mod mixture;
pub mod post;
pub mod sampler;
pub mod simbench;
pub mod variants;

pub use error::{Error, Result};

/// Chain RNG. ChaCha streams keep parallel chains reproducible: every chain
/// uses the same 64-bit seed and a distinct stream index.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Build the RNG for one chain of a run.
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    use rand::SeedableRng;
    let mut rng = ChainRng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}
