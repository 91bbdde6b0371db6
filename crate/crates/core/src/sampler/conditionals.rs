//! Closed-form parameters of every conjugate full conditional.
//!
//! Each function maps sufficient statistics to the exact posterior of one
//! Gibbs block. They are pure so the test suite can compare them against
//! numerical quadrature of the corresponding density products.

use crate::dists::{GammaSR, InvGammaSR};

/// A normal full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPosterior {
    pub mean: f64,
    pub var: f64,
}

fn precision_weighted(
    prior_mean: f64,
    prior_var: f64,
    like_precision: f64,
    like_weighted_sum: f64,
) -> NormalPosterior {
    let prec = 1.0 / prior_var + like_precision;
    NormalPosterior {
        mean: (prior_mean / prior_var + like_weighted_sum) / prec,
        var: 1.0 / prec,
    }
}

/// True score given its component and the ratings it received.
/// `prec_sum` is the summed reliability of the involved raters and
/// `weighted_resid_sum` is the reliability-weighted sum of Y - tau.
pub fn theta_posterior(
    comp_mean: f64,
    comp_var: f64,
    prec_sum: f64,
    weighted_resid_sum: f64,
) -> NormalPosterior {
    precision_weighted(comp_mean, comp_var, prec_sum, weighted_resid_sum)
}

/// Component mean given its members; `member_sum` is the sum of member
/// values and `comp_var` the current component variance.
pub fn atom_mean_posterior(
    base_mean: f64,
    base_var: f64,
    comp_var: f64,
    n: usize,
    member_sum: f64,
) -> NormalPosterior {
    precision_weighted(
        base_mean,
        base_var,
        n as f64 / comp_var,
        member_sum / comp_var,
    )
}

/// Component precision given member deviations from the component mean.
/// `shape` and `mean` parameterize the gamma base draw for the precision.
pub fn atom_precision_posterior(shape: f64, mean: f64, n: usize, sum_sq_dev: f64) -> GammaSR {
    GammaSR {
        shape: shape + 0.5 * n as f64,
        rate: shape / mean + 0.5 * sum_sq_dev,
    }
}

/// Rater bias given its component and the rater's ratings; `resid_sum` is
/// the sum of Y - theta over the rater's subjects.
pub fn tau_posterior(
    comp_bias: f64,
    comp_bias_var: f64,
    inv_sigma2: f64,
    n: usize,
    resid_sum: f64,
) -> NormalPosterior {
    precision_weighted(
        comp_bias,
        comp_bias_var,
        n as f64 * inv_sigma2,
        inv_sigma2 * resid_sum,
    )
}

/// Rater reliability given its component's (gamma, beta) and the rater's
/// squared residuals about theta + tau.
pub fn reliability_posterior(gamma: f64, beta: f64, n: usize, ssr: f64) -> GammaSR {
    GammaSR {
        shape: 1.0 + gamma + 0.5 * n as f64,
        rate: (1.0 + gamma) / beta + 0.5 * ssr,
    }
}

/// Component inverse mean-reliability given member reliabilities;
/// `relia_sum` is the summed reliability of the component's raters.
pub fn inv_beta_posterior(m0: f64, m0_mean: f64, n: usize, gamma: f64, relia_sum: f64) -> GammaSR {
    GammaSR {
        shape: m0 + n as f64 * (1.0 + gamma),
        rate: m0 / m0_mean + relia_sum * (1.0 + gamma),
    }
}

/// Stick proportion given the component's count and the total count of all
/// later components. Returns Beta (alpha, beta) parameters.
pub fn stick_posterior(count: usize, tail_count: usize, alpha: f64) -> (f64, f64) {
    (1.0 + count as f64, alpha + tail_count as f64)
}

/// Concentration parameter given the interior stick proportions.
/// `sum_log_one_minus` is the sum of log(1 - V_n) over n < R.
pub fn alpha_posterior(prior: GammaSR, r: usize, sum_log_one_minus: f64) -> GammaSR {
    GammaSR {
        shape: (r - 1) as f64 + prior.shape,
        rate: prior.rate - sum_log_one_minus,
    }
}

/// Base-measure mean given all component means; `atom_sum` is their sum.
pub fn base_mean_posterior(
    prior_mean: f64,
    prior_var: f64,
    base_var: f64,
    r: usize,
    atom_sum: f64,
) -> NormalPosterior {
    precision_weighted(prior_mean, prior_var, r as f64 / base_var, atom_sum / base_var)
}

/// Base-measure variance given component-mean deviations from the base mean.
pub fn base_var_posterior(prior: InvGammaSR, r: usize, sum_sq_dev: f64) -> InvGammaSR {
    InvGammaSR {
        shape: prior.shape + 0.5 * r as f64,
        scale: prior.scale + 0.5 * sum_sq_dev,
    }
}

/// Mean parameter of a gamma base coordinate with known shape, given the
/// component values it generated; `member_sum` is their sum.
pub fn base_scale_posterior(prior: InvGammaSR, r: usize, shape: f64, member_sum: f64) -> InvGammaSR {
    InvGammaSR {
        shape: prior.shape + r as f64 * shape,
        scale: prior.scale + shape * member_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_single_rating_example() {
        // Prior N(50, 25), one rating of 60 with tau=0 and sigma2=25.
        let p = theta_posterior(50.0, 25.0, 1.0 / 25.0, 60.0 / 25.0);
        assert!((p.mean - 55.0).abs() < 1e-12, "mean {}", p.mean);
        assert!((p.var - 12.5).abs() < 1e-12, "var {}", p.var);
    }

    #[test]
    fn theta_two_equal_ratings_example() {
        // Prior N(50, 25), two ratings of 60, both sigma2=25: precision
        // 0.12, weighted sum 4.8.
        let p = theta_posterior(50.0, 25.0, 2.0 / 25.0, 120.0 / 25.0);
        assert!((p.mean - 6.8 / 0.12).abs() < 1e-12, "mean {}", p.mean);
        assert!((p.var - 25.0 / 3.0).abs() < 1e-12, "var {}", p.var);
    }

    #[test]
    fn theta_with_no_ratings_is_the_prior() {
        let p = theta_posterior(50.0, 25.0, 0.0, 0.0);
        assert_eq!(p.mean, 50.0);
        assert_eq!(p.var, 25.0);
    }

    #[test]
    fn atom_mean_single_member_example() {
        // One member theta=60, base N(50, 100), component variance 25:
        // precision 0.05, numerator 0.5 + 2.4.
        let p = atom_mean_posterior(50.0, 100.0, 25.0, 1, 60.0);
        assert!((p.mean - 58.0).abs() < 1e-12, "mean {}", p.mean);
        assert!((p.var - 20.0).abs() < 1e-12, "var {}", p.var);
    }

    #[test]
    fn atom_precision_example() {
        let g = atom_precision_posterior(2.0, 0.5, 4, 30.0);
        assert_eq!(g.shape, 4.0);
        assert_eq!(g.rate, 2.0 / 0.5 + 15.0);
    }

    #[test]
    fn tau_example() {
        // eta=0, phi2=25, two ratings with sigma2=25 and residual sum 10.
        let p = tau_posterior(0.0, 25.0, 1.0 / 25.0, 2, 10.0);
        assert!((p.mean - 10.0 / 3.0).abs() < 1e-12, "mean {}", p.mean);
        assert!((p.var - 25.0 / 3.0).abs() < 1e-12, "var {}", p.var);
    }

    #[test]
    fn reliability_example() {
        // gamma=10, beta=0.15, four ratings, SSR=60.
        let g = reliability_posterior(10.0, 0.15, 4, 60.0);
        assert_eq!(g.shape, 13.0);
        assert!((g.rate - (11.0 / 0.15 + 30.0)).abs() < 1e-12);
        assert!((g.mean() - 13.0 / (11.0 / 0.15 + 30.0)).abs() < 1e-15);
        // Doubling the residuals must lower the posterior-mean reliability.
        let worse = reliability_posterior(10.0, 0.15, 4, 120.0);
        assert!(worse.mean() < g.mean());
    }

    #[test]
    fn inv_beta_example() {
        let g = inv_beta_posterior(0.005, 1.0, 2, 10.0, 0.3);
        assert!((g.shape - 22.005).abs() < 1e-12);
        assert!((g.rate - (0.005 + 3.3)).abs() < 1e-12);
    }

    #[test]
    fn stick_and_alpha_examples() {
        // Counts [3, 2, 0] with alpha=1: first stick is Beta(4, 3).
        assert_eq!(stick_posterior(3, 2, 1.0), (4.0, 3.0));
        let prior = GammaSR { shape: 1.0, rate: 1.0 };
        let a = alpha_posterior(prior, 2, (0.5f64).ln());
        assert_eq!(a.shape, 2.0);
        assert!((a.rate - (1.0 + 2.0f64.ln())).abs() < 1e-12);
        let a = alpha_posterior(prior, 25, -2.0);
        assert_eq!(a.shape, 25.0);
        assert_eq!(a.rate, 3.0);
        assert!((a.mean() - 25.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn base_updates_examples() {
        // 25 atoms with squared deviations summing to 50.
        let prior = InvGammaSR { shape: 0.005, scale: 0.005 };
        let s0 = base_var_posterior(prior, 25, 50.0);
        assert_eq!(s0.shape, 12.505);
        assert_eq!(s0.scale, 25.005);
        // Scale-type update reduces to the prior with no contribution.
        let w0 = base_scale_posterior(prior, 0, 2.0, 0.0);
        assert_eq!(w0.shape, prior.shape);
        assert_eq!(w0.scale, prior.scale);
        // Single-atom base mean lies strictly between prior mean and atom.
        let m = base_mean_posterior(0.0, 100.0, 25.0, 1, 60.0);
        assert!(m.mean > 0.0 && m.mean < 60.0);
    }
}
