//! Gamma approximation of shape-parameter full conditionals.
//!
//! The reliability concentration of a rater component, and the shape
//! parameters of the gamma base measures, have log-concave but
//! non-conjugate full conditionals. Each is approximated by a gamma
//! distribution whose first and second log-density derivatives match the
//! target's at the running mean, iterated to a fixed point. The shifted
//! variant targets a likelihood with shape 1 + gamma; the plain variant
//! targets shape s directly.

use statrs::function::gamma::ln_gamma;

use crate::dists::{digamma, trigamma, GammaSR};
use crate::{Error, Result};

/// Relative tolerance on the approximating mean between iterations.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10;

/// Iterates are clamped to this range; hitting a bound is reported as
/// non-convergence.
const MEAN_LO: f64 = 1e-8;
const MEAN_HI: f64 = 1e6;

/// Sufficient statistics and prior for the shifted-shape conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmInputs {
    /// Sum of log reliabilities over cluster members.
    pub sum_log: f64,
    /// Sum of reliabilities over cluster members.
    pub sum: f64,
    /// Cluster member count.
    pub n: usize,
    /// Current component mean reliability.
    pub beta: f64,
    pub prior_shape: f64,
    pub prior_rate: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl DmInputs {
    pub fn new(sum_log: f64, sum: f64, n: usize, beta: f64, prior: GammaSR) -> Self {
        DmInputs {
            sum_log,
            sum,
            n,
            beta,
            prior_shape: prior.shape,
            prior_rate: prior.rate,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    fn check(&self) -> Result<()> {
        check_knobs(
            self.beta,
            self.prior_shape,
            self.prior_rate,
            self.tol,
            self.max_iter,
        )
    }
}

/// The fitted gamma approximation of the conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmOutputs {
    pub shape: f64,
    pub rate: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl DmOutputs {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn approx(&self) -> Result<GammaSR> {
        GammaSR::new(self.shape, self.rate)
    }
}

fn check_knobs(mean: f64, prior_shape: f64, prior_rate: f64, tol: f64, max_iter: usize) -> Result<()> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::BadParameter(format!(
            "shape update needs a positive mean parameter, got {mean}"
        )));
    }
    if !(prior_shape.is_finite() && prior_shape > 0.0 && prior_rate.is_finite() && prior_rate > 0.0)
    {
        return Err(Error::BadParameter(format!(
            "shape update prior ({prior_shape}, {prior_rate}) is not positive"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance {tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(Error::BadParameter("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Dispersion statistic of the member values around the mean parameter.
/// Nonnegative for positive values, zero when every member sits exactly at
/// the mean.
fn info_stat(sum_log: f64, sum: f64, n: usize, mean: f64) -> f64 {
    let nf = n as f64;
    sum / mean - sum_log + nf * mean.ln() - nf
}

/// Derivative-matching fixed point shared by both variants. `shift` is 1
/// for the shifted likelihood and 0 for the plain one.
fn fit(
    sum_log: f64,
    sum: f64,
    n: usize,
    mean: f64,
    prior_shape: f64,
    prior_rate: f64,
    tol: f64,
    max_iter: usize,
    shift: f64,
) -> Result<DmOutputs> {
    let t = info_stat(sum_log, sum, n, mean);
    if !t.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "shape-update statistic is not finite (sum_log={sum_log}, sum={sum}, n={n}, mean={mean})"
        )));
    }
    if n == 0 {
        return Ok(DmOutputs {
            shape: prior_shape,
            rate: prior_rate,
            iterations_used: 0,
            converged: true,
        });
    }
    let nf = n as f64;
    let mut u1 = prior_shape + 0.5 * nf;
    let mut u2 = prior_rate + t;
    let mut clamped = false;
    for iter in 1..=max_iter {
        let mut x = u1 / u2;
        if x < MEAN_LO {
            x = MEAN_LO;
            clamped = true;
        } else if x > MEAN_HI {
            x = MEAN_HI;
            clamped = true;
        }
        let z = x + shift;
        let new_u1 = prior_shape + nf * x * x * trigamma(z) - nf * x * x / z;
        let new_u2 =
            prior_rate + (new_u1 - prior_shape) / x - nf * z.ln() + nf * digamma(z) + t;
        if !(new_u1.is_finite() && new_u2.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "shape update diverged at iteration {iter} (U1={new_u1}, U2={new_u2})"
            )));
        }
        if new_u1 <= 0.0 || new_u2 <= 0.0 {
            return Ok(DmOutputs {
                shape: prior_shape,
                rate: prior_rate,
                iterations_used: iter,
                converged: false,
            });
        }
        u1 = new_u1;
        u2 = new_u2;
        if (x / (u1 / u2) - 1.0).abs() < tol {
            return Ok(DmOutputs {
                shape: u1,
                rate: u2,
                iterations_used: iter,
                converged: !clamped,
            });
        }
    }
    Ok(DmOutputs {
        shape: u1,
        rate: u2,
        iterations_used: max_iter,
        converged: false,
    })
}

/// Fit the gamma approximation of the reliability-concentration
/// conditional, where member reliabilities are gamma with shape 1 + gamma
/// and mean beta.
pub fn dm_gamma_shape_shifted(inputs: &DmInputs) -> Result<DmOutputs> {
    inputs.check()?;
    fit(
        inputs.sum_log,
        inputs.sum,
        inputs.n,
        inputs.beta,
        inputs.prior_shape,
        inputs.prior_rate,
        inputs.tol,
        inputs.max_iter,
        1.0,
    )
}

/// Fit the gamma approximation of a base-measure shape conditional, where
/// member values are gamma with shape s and mean `mean_param`.
#[allow(clippy::too_many_arguments)]
pub fn dm_gamma_shape_plain(
    sum_log_x: f64,
    sum_x: f64,
    n: usize,
    mean_param: f64,
    prior_shape: f64,
    prior_rate: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DmOutputs> {
    check_knobs(mean_param, prior_shape, prior_rate, tol, max_iter)?;
    fit(
        sum_log_x, sum_x, n, mean_param, prior_shape, prior_rate, tol, max_iter, 0.0,
    )
}

/// Unnormalized log density shared by both conditionals; the variable
/// enters the likelihood through x + shift.
fn target_logpdf(
    x: f64,
    shift: f64,
    sum_log: f64,
    sum: f64,
    n: usize,
    mean: f64,
    prior_shape: f64,
    prior_rate: f64,
) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let t = info_stat(sum_log, sum, n, mean);
    let z = x + shift;
    nf * z * z.ln() - nf * ln_gamma(z) - (t + nf) * z + (prior_shape - 1.0) * x.ln()
        - prior_rate * x
}

/// Unnormalized log density of the true reliability-concentration
/// conditional; the quadrature oracle in the tests integrates this.
pub fn true_conditional_logpdf_gamma_shape(gamma: f64, inputs: &DmInputs) -> f64 {
    target_logpdf(
        gamma,
        1.0,
        inputs.sum_log,
        inputs.sum,
        inputs.n,
        inputs.beta,
        inputs.prior_shape,
        inputs.prior_rate,
    )
}

/// First derivative of [`true_conditional_logpdf_gamma_shape`] in gamma.
pub fn true_conditional_grad_gamma_shape(gamma: f64, inputs: &DmInputs) -> f64 {
    let nf = inputs.n as f64;
    let t = info_stat(inputs.sum_log, inputs.sum, inputs.n, inputs.beta);
    let z = gamma + 1.0;
    nf * (z.ln() + 1.0) - nf * digamma(z) - (t + nf) + (inputs.prior_shape - 1.0) / gamma
        - inputs.prior_rate
}

/// Second derivative of [`true_conditional_logpdf_gamma_shape`] in gamma.
pub fn true_conditional_curvature_gamma_shape(gamma: f64, inputs: &DmInputs) -> f64 {
    let nf = inputs.n as f64;
    let z = gamma + 1.0;
    nf / z - nf * trigamma(z) - (inputs.prior_shape - 1.0) / (gamma * gamma)
}

/// Unnormalized log density of the plain shape conditional.
#[allow(clippy::too_many_arguments)]
pub fn true_conditional_logpdf_plain_shape(
    s: f64,
    sum_log_x: f64,
    sum_x: f64,
    n: usize,
    mean_param: f64,
    prior_shape: f64,
    prior_rate: f64,
) -> f64 {
    target_logpdf(
        s, 0.0, sum_log_x, sum_x, n, mean_param, prior_shape, prior_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_inputs() -> DmInputs {
        // Twelve members with mildly dispersed reliabilities around 0.15.
        let values = [
            0.13, 0.17, 0.15, 0.12, 0.19, 0.14, 0.16, 0.15, 0.11, 0.18, 0.145, 0.155,
        ];
        DmInputs {
            sum_log: values.iter().map(|v: &f64| v.ln()).sum(),
            sum: values.iter().sum(),
            n: values.len(),
            beta: 0.15,
            prior_shape: 2.0,
            prior_rate: 1.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    #[test]
    fn empty_cluster_returns_exact_prior() {
        let inputs = DmInputs {
            sum_log: 0.0,
            sum: 0.0,
            n: 0,
            beta: 0.15,
            prior_shape: 0.005,
            prior_rate: 0.005,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let out = dm_gamma_shape_shifted(&inputs).unwrap();
        assert_eq!(out.shape, 0.005);
        assert_eq!(out.rate, 0.005);
        assert_eq!(out.iterations_used, 0);
        assert!(out.converged);

        let out = dm_gamma_shape_plain(0.0, 0.0, 0, 1.0, 3.0, 7.0, DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap();
        assert_eq!(out.shape, 3.0);
        assert_eq!(out.rate, 7.0);
        assert!(out.converged);
    }

    #[test]
    fn dispersion_statistic_is_zero_only_at_the_mean() {
        assert_eq!(info_stat(0.0, 0.0, 0, 0.15), 0.0);
        let at_mean = info_stat(5.0 * 0.15f64.ln(), 0.75, 5, 0.15);
        assert!(at_mean.abs() < 1e-12, "T at the mean was {at_mean}");
        let spread = info_stat(0.05f64.ln() + 0.25f64.ln(), 0.30, 2, 0.15);
        assert!(spread > 0.1, "dispersed values must give positive T, got {spread}");
    }

    #[test]
    fn fixed_point_matches_target_derivatives_at_its_mean() {
        let inputs = sample_inputs();
        let out = dm_gamma_shape_shifted(&inputs).unwrap();
        assert!(out.converged, "sample inputs should converge, got {out:?}");
        let m = out.mean();
        // Matching conditions: the approximating gamma reproduces the
        // target's curvature and gradient at its own mean.
        let u1_implied = 1.0 - m * m * true_conditional_curvature_gamma_shape(m, &inputs);
        let u2_implied = (out.shape - 1.0) / m - true_conditional_grad_gamma_shape(m, &inputs);
        assert!(
            (u1_implied / out.shape - 1.0).abs() < 1e-6,
            "shape {} vs implied {u1_implied}",
            out.shape
        );
        assert!(
            (u2_implied / out.rate - 1.0).abs() < 1e-6,
            "rate {} vs implied {u2_implied}",
            out.rate
        );
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let inputs = sample_inputs();
        for gamma in [0.5, 2.0, 10.0] {
            let h = 1e-5 * gamma;
            let numeric = (true_conditional_logpdf_gamma_shape(gamma + h, &inputs)
                - true_conditional_logpdf_gamma_shape(gamma - h, &inputs))
                / (2.0 * h);
            let analytic = true_conditional_grad_gamma_shape(gamma, &inputs);
            assert!(
                ((numeric - analytic) / analytic.abs().max(1.0)).abs() < 1e-6,
                "gamma={gamma}: gradient {analytic} vs finite difference {numeric}"
            );
        }
    }

    #[test]
    fn analytic_curvature_matches_differenced_gradient() {
        let inputs = sample_inputs();
        for gamma in [0.5, 2.0, 10.0] {
            let h = 1e-6 * gamma;
            let numeric = (true_conditional_grad_gamma_shape(gamma + h, &inputs)
                - true_conditional_grad_gamma_shape(gamma - h, &inputs))
                / (2.0 * h);
            let analytic = true_conditional_curvature_gamma_shape(gamma, &inputs);
            assert!(
                ((numeric - analytic) / analytic.abs().max(1.0)).abs() < 1e-6,
                "gamma={gamma}: curvature {analytic} vs differenced gradient {numeric}"
            );
        }
    }

    #[test]
    fn prior_only_conditional_is_the_prior_density_up_to_a_constant() {
        let inputs = DmInputs {
            sum_log: 0.0,
            sum: 0.0,
            n: 0,
            beta: 1.0,
            prior_shape: 2.5,
            prior_rate: 1.5,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let log_prior = |g: f64| (2.5 - 1.0) * g.ln() - 1.5 * g;
        let d1 = true_conditional_logpdf_gamma_shape(0.5, &inputs) - log_prior(0.5);
        let d2 = true_conditional_logpdf_gamma_shape(3.0, &inputs) - log_prior(3.0);
        assert!((d1 - d2).abs() < 1e-12, "offsets {d1} vs {d2} should agree");
        assert_eq!(
            true_conditional_logpdf_gamma_shape(-1.0, &inputs),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn shape_estimate_is_nondecreasing_in_cluster_size() {
        // All members sit exactly at the mean, so more members mean more
        // evidence for high concentration.
        let mut last_shifted = 0.0;
        let mut last_plain = 0.0;
        for n in [0usize, 1, 2, 5, 10, 20] {
            let inputs = DmInputs {
                sum_log: n as f64 * 0.15f64.ln(),
                sum: n as f64 * 0.15,
                n,
                beta: 0.15,
                prior_shape: 2.0,
                prior_rate: 1.0,
                tol: DEFAULT_TOL,
                max_iter: 50,
            };
            let out = dm_gamma_shape_shifted(&inputs).unwrap();
            assert!(
                out.shape >= last_shifted,
                "shifted U1 fell from {last_shifted} to {} at n={n}",
                out.shape
            );
            last_shifted = out.shape;

            let out = dm_gamma_shape_plain(
                n as f64 * 2.0f64.ln(),
                n as f64 * 2.0,
                n,
                2.0,
                2.0,
                1.0,
                DEFAULT_TOL,
                50,
            )
            .unwrap();
            assert!(
                out.shape >= last_plain,
                "plain U1 fell from {last_plain} to {} at n={n}",
                out.shape
            );
            last_plain = out.shape;
        }
        assert!(last_shifted > 3.0, "twenty members should dominate the prior");
    }

    #[test]
    fn degenerate_vague_prior_reports_non_convergence() {
        // Zero-dispersion data under an essentially flat prior push the
        // mean past the iteration bound; the fit must say so rather than
        // return garbage.
        let inputs = DmInputs {
            sum_log: 0.15f64.ln(),
            sum: 0.15,
            n: 1,
            beta: 0.15,
            prior_shape: 1e-8,
            prior_rate: 1e-8,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let out = dm_gamma_shape_shifted(&inputs).unwrap();
        assert!(!out.converged);
        assert!(out.shape > 0.0 && out.shape.is_finite());
        assert!(out.rate > 0.0 && out.rate.is_finite());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut inputs = sample_inputs();
        inputs.beta = -1.0;
        assert!(matches!(
            dm_gamma_shape_shifted(&inputs),
            Err(Error::BadParameter(_))
        ));
        let mut inputs = sample_inputs();
        inputs.max_iter = 0;
        assert!(matches!(
            dm_gamma_shape_shifted(&inputs),
            Err(Error::BadParameter(_))
        ));
        let mut inputs = sample_inputs();
        inputs.sum = f64::INFINITY;
        assert!(matches!(
            dm_gamma_shape_shifted(&inputs),
            Err(Error::NumericalFailure(_))
        ));
    }
}
