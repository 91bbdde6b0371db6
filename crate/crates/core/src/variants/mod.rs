//! Reduced and extended sampling loops built from the core Gibbs blocks.
//!
//! [`oneway`] drops the rater decomposition: ratings are `theta[i] + eps`,
//! with a Dirichlet-process mixture over per-observation error atoms
//! `(eta, phi2)`. [`ordinal`] treats ordered categories as interval-censored
//! observations of a latent two-way score and augments the chain with the
//! latent values and free thresholds.

pub mod oneway;
pub mod ordinal;
