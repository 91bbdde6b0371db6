//! Stick-breaking weights, finite mixture moments, and the intraclass
//! correlation family derived from them.
//!
//! Subject-side mixtures are normals over (mean, var) atoms. Rater-side
//! mixtures carry four coordinates per atom: bias mean, bias variance, and a
//! (gamma, beta) pair describing the cluster's reliability distribution,
//! where beta is the cluster's mean reliability and gamma its concentration.

use crate::{Error, Result};

/// Turn stick proportions into mixture weights. Interior entries must lie in
/// (0, 1); the final entry must be exactly 1 so the weights close to one.
pub fn stick_break(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::BadParameter("stick proportions are empty".into()));
    }
    let last = *v.last().unwrap();
    if last != 1.0 {
        return Err(Error::BadParameter(format!(
            "final stick proportion must be 1, got {last}"
        )));
    }
    for (n, &x) in v[..v.len() - 1].iter().enumerate() {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::BadParameter(format!(
                "stick proportion {n} must lie in (0, 1), got {x}"
            )));
        }
    }
    let mut pi = Vec::with_capacity(v.len());
    let mut remaining = 1.0;
    for &x in v {
        pi.push(x * remaining);
        remaining *= 1.0 - x;
    }
    Ok(pi)
}

/// Restrict weights to the listed components and renormalize. Used for
/// cluster-conditional summaries.
pub fn restrict_weights(pi: &[f64], keep: &[usize]) -> Result<Vec<f64>> {
    if keep.is_empty() {
        return Err(Error::BadParameter("no components selected".into()));
    }
    let mut out = vec![0.0; pi.len()];
    let mut total = 0.0;
    for &k in keep {
        if k >= pi.len() {
            return Err(Error::BadParameter(format!(
                "component {k} out of range (mixture has {})",
                pi.len()
            )));
        }
        out[k] = pi[k];
        total += pi[k];
    }
    if total <= 0.0 {
        return Err(Error::BadParameter(
            "selected components carry zero weight".into(),
        ));
    }
    for w in &mut out {
        *w /= total;
    }
    Ok(out)
}

/// First two moments of the subject-score mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectMoments {
    /// Mixture mean of the true scores.
    pub mean: f64,
    /// Mixture variance of the true scores (between plus within component).
    pub var: f64,
}

/// Moments of the rater-effect mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaterMoments {
    /// Mixture mean of rater bias.
    pub bias_mean: f64,
    /// Mixture variance of rater bias.
    pub bias_var: f64,
    /// Mixture mean reliability (average of the per-cluster means).
    pub relia_mean: f64,
    /// Mixture variance of reliability.
    pub relia_var: f64,
    /// Expected residual variance: the mixture average of E[sigma^2] within
    /// each cluster, (1 + gamma) / (beta * gamma).
    pub resid_mean: f64,
}

fn check_weights(pi: &[f64], atoms: usize, what: &str) -> Result<()> {
    if pi.len() != atoms {
        return Err(Error::BadParameter(format!(
            "{what}: {} weights for {} atoms",
            pi.len(),
            atoms
        )));
    }
    let mut total = 0.0;
    for &w in pi {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::BadParameter(format!("{what}: weight {w} invalid")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadParameter(format!(
            "{what}: weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Mean and variance of a mixture of normals given weights and atoms.
/// The variance uses the centered law-of-total-variance form, which is
/// immune to the cancellation the raw second-moment form suffers.
pub fn subject_moments(pi: &[f64], means: &[f64], vars: &[f64]) -> Result<SubjectMoments> {
    check_weights(pi, means.len(), "subject mixture")?;
    if means.len() != vars.len() {
        return Err(Error::BadParameter(
            "subject mixture: means and vars disagree in length".into(),
        ));
    }
    for (&m, &v) in means.iter().zip(vars) {
        if !m.is_finite() || !(v > 0.0 && v.is_finite()) {
            return Err(Error::BadParameter(format!(
                "subject atom ({m}, {v}) invalid"
            )));
        }
    }
    let mean: f64 = pi.iter().zip(means).map(|(w, m)| w * m).sum();
    let var: f64 = pi
        .iter()
        .zip(means.iter().zip(vars))
        .map(|(w, (m, v))| w * ((m - mean) * (m - mean) + v))
        .sum();
    Ok(SubjectMoments { mean, var })
}

/// Moments of the rater-effect mixture over (bias, bias_var, gamma, beta) atoms.
pub fn rater_moments(
    pi: &[f64],
    biases: &[f64],
    bias_vars: &[f64],
    gammas: &[f64],
    betas: &[f64],
) -> Result<RaterMoments> {
    check_weights(pi, biases.len(), "rater mixture")?;
    let n = biases.len();
    if bias_vars.len() != n || gammas.len() != n || betas.len() != n {
        return Err(Error::BadParameter(
            "rater mixture: atom coordinate lengths disagree".into(),
        ));
    }
    for k in 0..n {
        if !biases[k].is_finite()
            || !(bias_vars[k] > 0.0 && bias_vars[k].is_finite())
            || !(gammas[k] > 0.0 && gammas[k].is_finite())
            || !(betas[k] > 0.0 && betas[k].is_finite())
        {
            return Err(Error::BadParameter(format!(
                "rater atom {k} invalid: ({}, {}, {}, {})",
                biases[k], bias_vars[k], gammas[k], betas[k]
            )));
        }
    }
    let bias_mean: f64 = pi.iter().zip(biases).map(|(w, b)| w * b).sum();
    let bias_var: f64 = pi
        .iter()
        .zip(biases.iter().zip(bias_vars))
        .map(|(w, (b, v))| w * ((b - bias_mean) * (b - bias_mean) + v))
        .sum();
    let relia_mean: f64 = pi.iter().zip(betas).map(|(w, b)| w * b).sum();
    // Within a cluster the reliability is gamma-distributed with mean beta
    // and variance beta^2 / gamma.
    let relia_var: f64 = pi
        .iter()
        .zip(betas.iter().zip(gammas))
        .map(|(w, (b, g))| w * ((b - relia_mean) * (b - relia_mean) + b * b / g))
        .sum();
    let resid_mean: f64 = pi
        .iter()
        .zip(gammas.iter().zip(betas))
        .map(|(w, (g, b))| w * (1.0 + g) / (b * g))
        .sum();
    Ok(RaterMoments {
        bias_mean,
        bias_var,
        relia_mean,
        relia_var,
        resid_mean,
    })
}

/// Expected residual variance of a reliability cluster: E[1/x] under the
/// shifted parameterization x ~ Gamma(1 + gamma, (1 + gamma)/beta), which is
/// (1 + gamma) / (beta * gamma).
pub fn expected_residual_variance(gamma: f64, beta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(Error::BadParameter(format!(
            "residual variance needs positive finite (gamma, beta), got ({gamma}, {beta})"
        )));
    }
    Ok((1.0 + gamma) / (beta * gamma))
}

fn check_icc_inputs(pairs: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in pairs {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::BadParameter(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    Ok(())
}

/// Correlation between two scores of one subject from two specific raters
/// with known residual variances.
pub fn icc_pairwise(omega2_g: f64, phi2_h: f64, sigma2_j: f64, sigma2_jp: f64) -> Result<f64> {
    check_icc_inputs(&[
        ("subject variance", omega2_g),
        ("bias variance", phi2_h),
        ("residual variance j", sigma2_j),
        ("residual variance j'", sigma2_jp),
    ])?;
    let d = ((omega2_g + phi2_h + sigma2_j) * (omega2_g + phi2_h + sigma2_jp)).sqrt();
    if d <= 0.0 {
        return Err(Error::BadParameter("pairwise ICC denominator is zero".into()));
    }
    Ok(omega2_g / d)
}

/// Agreement ICC for a randomly chosen rater: plugs the expected residual
/// variance into the variance decomposition. A lower bound on the expected
/// pairwise ICC over raters, by Jensen's inequality.
pub fn icc_a(omega2_g: f64, phi2_h: f64, resid_mean: f64) -> Result<f64> {
    check_icc_inputs(&[
        ("subject variance", omega2_g),
        ("bias variance", phi2_h),
        ("expected residual variance", resid_mean),
    ])?;
    let d = omega2_g + phi2_h + resid_mean;
    if d <= 0.0 {
        return Err(Error::BadParameter("agreement ICC denominator is zero".into()));
    }
    Ok(omega2_g / d)
}

/// Consistency-style ICC for the reduced one-way model, where all
/// non-subject variation lives in a single error mixture.
pub fn icc_oneway(omega2_g: f64, phi2_h: f64) -> Result<f64> {
    check_icc_inputs(&[("subject variance", omega2_g), ("error variance", phi2_h)])?;
    let d = omega2_g + phi2_h;
    if d <= 0.0 {
        return Err(Error::BadParameter("one-way ICC denominator is zero".into()));
    }
    Ok(omega2_g / d)
}

/// Single-cluster (parametric) ICC with a common residual variance.
pub fn icc_parametric(omega2: f64, phi2: f64, sigma2: f64) -> Result<f64> {
    check_icc_inputs(&[
        ("subject variance", omega2),
        ("bias variance", phi2),
        ("residual variance", sigma2),
    ])?;
    let d = omega2 + phi2 + sigma2;
    if d <= 0.0 {
        return Err(Error::BadParameter("parametric ICC denominator is zero".into()));
    }
    Ok(omega2 / d)
}
