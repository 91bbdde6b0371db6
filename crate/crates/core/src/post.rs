//! Post-processing of retained draws: centering, density grids, WAIC, and
//! posterior summaries with effective sample sizes.
//!
//! Centering fixes the additive confounding between true scores and rater
//! biases: per draw, the rater-bias mixture mean moves into the subject
//! side, so the biases average to zero while every `theta + tau` cell and
//! all variance functionals stay unchanged. Reduced-model draws center the
//! same way, since their error mixture lives in the rater-side slots.

use crate::dists::ln_gamma;
use crate::sampler::{occupied_mixture, ChainDraws};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Shifts every retained draw so the rater-bias mixture mean is zero: the
/// mean moves to the subject side (true scores, component means, base mean,
/// mixture-mean summary) and off the rater side. The shift is the occupied
/// sub-mixture's bias mean, matching the recorded summaries. Variances,
/// reliabilities and ICCs are location-free and untouched. Refuses
/// already-centered draws.
pub fn sc_center_draws(draws: &mut ChainDraws) -> Result<()> {
    if draws.centered {
        return Err(Error::Usage("draws are already centered".into()));
    }
    for t in 0..draws.theta.len() {
        let eta_h: f64 = occupied_mixture(&draws.rater_weights[t], &draws.rater_occ[t])
            .iter()
            .map(|&(k, w)| w * draws.rater_atoms[t][k].bias)
            .sum();
        for th in &mut draws.theta[t] {
            *th += eta_h;
        }
        for a in &mut draws.subject_atoms[t] {
            a.mean += eta_h;
        }
        draws.subject_base[t].mean += eta_h;
        draws.subject_summary[t].mean += eta_h;
        for ta in &mut draws.tau[t] {
            *ta -= eta_h;
        }
        for a in &mut draws.rater_atoms[t] {
            a.bias -= eta_h;
        }
        draws.rater_base[t].bias_mean -= eta_h;
        draws.rater_summary[t].bias_mean -= eta_h;
    }
    draws.centered = true;
    Ok(())
}

/// Which mixture a density grid evaluates. For reduced-model draws the
/// rater-side slots hold the error mixture, so `Tau` is the error density
/// there and `Epsilon` is meaningful only for two-way draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityTarget {
    Theta,
    Tau,
    Epsilon,
}

/// Mixture density evaluated on a fixed grid for every retained draw, with
/// the pointwise posterior mean and a 95% band.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub points: Vec<f64>,
    /// One row per retained draw.
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Evaluates a per-draw mixture density on an equally spaced grid. Like the
/// recorded summaries, each draw's density is that of its occupied
/// sub-mixture.
///
/// Subject and rater targets are plain normal mixtures. The residual target
/// integrates the zero-mean normal over each component's reliability
/// distribution, which is available in closed form: with
/// `1/sigma2 ~ Gamma(s, r)` the marginal of the residual is a scaled
/// Student t,
/// `f(x) = r^s Gamma(s + 1/2) / (Gamma(s) sqrt(2 pi) (r + x^2/2)^(s + 1/2))`.
pub fn eval_density_grid(
    draws: &ChainDraws,
    target: DensityTarget,
    range: (f64, f64),
    n_points: usize,
) -> Result<DensityGrid> {
    if draws.is_empty() {
        return Err(Error::BadParameter("no retained draws to evaluate".into()));
    }
    if n_points < 2 {
        return Err(Error::BadParameter("a grid needs at least two points".into()));
    }
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(Error::BadParameter(format!(
            "empty grid range ({}, {})",
            range.0, range.1
        )));
    }
    let step = (range.1 - range.0) / (n_points - 1) as f64;
    let points: Vec<f64> = (0..n_points).map(|p| range.0 + step * p as f64).collect();

    let mut values = Vec::with_capacity(draws.len());
    for t in 0..draws.len() {
        let row = match target {
            DensityTarget::Theta => {
                let comps: Vec<(f64, f64, f64)> =
                    occupied_mixture(&draws.subject_weights[t], &draws.subject_occ[t])
                        .iter()
                        .map(|&(k, w)| {
                            let a = &draws.subject_atoms[t][k];
                            normal_comp(w, a.mean, a.var)
                        })
                        .collect();
                normal_mixture_row(&points, &comps)
            }
            DensityTarget::Tau => {
                let comps: Vec<(f64, f64, f64)> =
                    occupied_mixture(&draws.rater_weights[t], &draws.rater_occ[t])
                        .iter()
                        .map(|&(k, w)| {
                            let a = &draws.rater_atoms[t][k];
                            normal_comp(w, a.bias, a.bias_var)
                        })
                        .collect();
                normal_mixture_row(&points, &comps)
            }
            DensityTarget::Epsilon => {
                // Per component: weight, shape s, rate r, and the constant
                // s ln r - ln Gamma(s) + ln Gamma(s + 1/2) - ln(2 pi)/2.
                let comps: Vec<(f64, f64, f64, f64)> =
                    occupied_mixture(&draws.rater_weights[t], &draws.rater_occ[t])
                        .iter()
                        .map(|&(k, w)| {
                            let a = &draws.rater_atoms[t][k];
                            let s = 1.0 + a.gamma;
                            let r = (1.0 + a.gamma) / a.beta;
                            let c =
                                s * r.ln() - ln_gamma(s) + ln_gamma(s + 0.5) - 0.5 * LN_2PI;
                            (w, s, r, c)
                        })
                        .collect();
                points
                    .iter()
                    .map(|&x| {
                        comps
                            .iter()
                            .map(|&(w, s, r, c)| {
                                w * (c - (s + 0.5) * (r + 0.5 * x * x).ln()).exp()
                            })
                            .sum()
                    })
                    .collect()
            }
        };
        values.push(row);
    }

    let draws_n = values.len();
    let mut mean = vec![0.0; n_points];
    let mut lo = vec![0.0; n_points];
    let mut hi = vec![0.0; n_points];
    let mut column = vec![0.0; draws_n];
    for p in 0..n_points {
        for (t, row) in values.iter().enumerate() {
            column[t] = row[p];
        }
        mean[p] = column.iter().sum::<f64>() / draws_n as f64;
        column.sort_by(f64::total_cmp);
        lo[p] = quantile_type7(&column, 0.025);
        hi[p] = quantile_type7(&column, 0.975);
    }
    Ok(DensityGrid { points, values, mean, lo, hi })
}

fn normal_comp(w: f64, mean: f64, var: f64) -> (f64, f64, f64) {
    // (weight / sqrt(2 pi var), mean, 1/(2 var)).
    (w * (-0.5 * (LN_2PI + var.ln())).exp(), mean, 0.5 / var)
}

fn normal_mixture_row(points: &[f64], comps: &[(f64, f64, f64)]) -> Vec<f64> {
    points
        .iter()
        .map(|&x| {
            comps
                .iter()
                .map(|&(c, m, half_prec)| c * (-half_prec * (x - m) * (x - m)).exp())
                .sum()
        })
        .collect()
}

/// Widely applicable information criterion from a draws-by-observations
/// pointwise log-likelihood matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// `lppd = sum_i ln mean_s exp(ll[s][i])`, `p_waic = sum_i var_s(ll[s][i])`
/// (sample variance; zero for a single draw), `waic = -2 (lppd - p_waic)`.
pub fn waic(loglik: &[Vec<f64>]) -> Result<Waic> {
    let s = loglik.len();
    if s == 0 {
        return Err(Error::BadParameter("WAIC needs at least one draw".into()));
    }
    let n = loglik[0].len();
    for row in loglik {
        if row.len() != n {
            return Err(Error::BadParameter(
                "ragged pointwise log-likelihood matrix".into(),
            ));
        }
        if row.iter().any(|l| !l.is_finite()) {
            return Err(Error::NumericalFailure(
                "non-finite pointwise log likelihood".into(),
            ));
        }
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for i in 0..n {
        let max = loglik.iter().map(|row| row[i]).fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = loglik.iter().map(|row| (row[i] - max).exp()).sum();
        lppd += max + (sum_exp / s as f64).ln();
        if s > 1 {
            let mean = loglik.iter().map(|row| row[i]).sum::<f64>() / s as f64;
            p_waic += loglik
                .iter()
                .map(|row| (row[i] - mean) * (row[i] - mean))
                .sum::<f64>()
                / (s - 1) as f64;
        }
    }
    Ok(Waic { waic: -2.0 * (lppd - p_waic), lppd, p_waic })
}

/// Posterior mean with a 95% quantile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// [`ParamSummary`] plus the effective sample size of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub ess: f64,
}

/// Posterior report of one fit: mixture functionals, per-entity effects,
/// WAIC, and diagnostics. `sigma_tilde_h` is the expected residual
/// variance; intervals are 95% and quantile-based throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub mu_g: ScalarSummary,
    pub omega2_g: ScalarSummary,
    pub eta_h: ScalarSummary,
    pub phi2_h: ScalarSummary,
    pub beta_h: ScalarSummary,
    pub sigma_tilde_h: ScalarSummary,
    pub icc_a: ScalarSummary,
    pub alpha1: ScalarSummary,
    pub alpha2: ScalarSummary,
    pub theta: Vec<ParamSummary>,
    pub tau: Vec<ParamSummary>,
    pub inv_sigma2: Vec<ParamSummary>,
    pub waic: Waic,
    /// Free-form run annotations (model reductions, schedule caveats).
    pub notes: Vec<String>,
    pub dm_fallbacks: u64,
    pub dm_nonconverged: u64,
    pub centered: bool,
    pub retained: usize,
}

/// 95% quantile point of presorted data by linear interpolation of order
/// statistics (the common "type 7" rule): index `(n - 1) p`, fractional
/// parts interpolated.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let idx = h.floor() as usize;
    if idx + 1 >= n {
        return sorted[n - 1];
    }
    sorted[idx] + (h - idx as f64) * (sorted[idx + 1] - sorted[idx])
}

/// Effective sample size by the initial-positive-sequence rule: sum paired
/// autocorrelations until a pair turns nonpositive. A zero-variance trace
/// counts as fully informative (ESS = n). The estimate can exceed n under
/// negative autocorrelation; it is not clamped.
pub fn ess(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return n as f64;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0: f64 = trace.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |t: usize| -> f64 {
        trace[..n - t]
            .iter()
            .zip(&trace[t..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    // tau = -1 + 2 sum_m (rho_{2m} + rho_{2m+1}) over the initial positive
    // pairs; the m = 0 pair is 1 + rho_1.
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    n as f64 / tau.max(1e-12)
}

/// Mean, 95% quantile interval, and ESS of one scalar trace.
pub fn scalar_summary(trace: &[f64]) -> ScalarSummary {
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    let mut sorted = trace.to_vec();
    sorted.sort_by(f64::total_cmp);
    ScalarSummary {
        mean,
        lo: quantile_type7(&sorted, 0.025),
        hi: quantile_type7(&sorted, 0.975),
        ess: ess(trace),
    }
}

fn param_summaries(rows: &[Vec<f64>]) -> Vec<ParamSummary> {
    let entities = rows.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(entities);
    let mut trace = vec![0.0; rows.len()];
    for e in 0..entities {
        for (t, row) in rows.iter().enumerate() {
            trace[t] = row[e];
        }
        let mean = trace.iter().sum::<f64>() / trace.len() as f64;
        let mut sorted = trace.clone();
        sorted.sort_by(f64::total_cmp);
        out.push(ParamSummary {
            mean,
            lo: quantile_type7(&sorted, 0.025),
            hi: quantile_type7(&sorted, 0.975),
        });
    }
    out
}

/// Summarizes retained draws into a [`FitReport`].
pub fn summarize(draws: &ChainDraws) -> Result<FitReport> {
    if draws.is_empty() {
        return Err(Error::BadParameter("no retained draws to summarize".into()));
    }
    let mu_g: Vec<f64> = draws.subject_summary.iter().map(|s| s.mean).collect();
    let omega2_g: Vec<f64> = draws.subject_summary.iter().map(|s| s.var).collect();
    let eta_h: Vec<f64> = draws.rater_summary.iter().map(|r| r.bias_mean).collect();
    let phi2_h: Vec<f64> = draws.rater_summary.iter().map(|r| r.bias_var).collect();
    let beta_h: Vec<f64> = draws.rater_summary.iter().map(|r| r.relia_mean).collect();
    let sigma_tilde_h: Vec<f64> = draws.rater_summary.iter().map(|r| r.resid_mean).collect();
    let icc_a: Vec<f64> = draws.rater_summary.iter().map(|r| r.icc_a).collect();
    Ok(FitReport {
        mu_g: scalar_summary(&mu_g),
        omega2_g: scalar_summary(&omega2_g),
        eta_h: scalar_summary(&eta_h),
        phi2_h: scalar_summary(&phi2_h),
        beta_h: scalar_summary(&beta_h),
        sigma_tilde_h: scalar_summary(&sigma_tilde_h),
        icc_a: scalar_summary(&icc_a),
        alpha1: scalar_summary(&draws.alpha1),
        alpha2: scalar_summary(&draws.alpha2),
        theta: param_summaries(&draws.theta),
        tau: param_summaries(&draws.tau),
        inv_sigma2: param_summaries(&draws.inv_sigma2),
        waic: waic(&draws.loglik)?,
        notes: Vec::new(),
        dm_fallbacks: draws.dm.fallbacks,
        dm_nonconverged: draws.dm.nonconverged,
        centered: draws.centered,
        retained: draws.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use crate::data::{HyperConfig, ModelKind, RatingDataset};
    use crate::dists::sample_normal;
    use crate::sampler::run_chain;

    fn toy_draws() -> ChainDraws {
        let mut obs = Vec::new();
        let scores = [
            [52.0, 48.0, 55.0, 50.0],
            [61.0, 58.0, 64.0, 60.0],
            [45.0, 41.0, 47.0, 44.0],
            [70.0, 66.0, 72.0, 69.0],
            [38.0, 35.0, 40.0, 37.0],
            [57.0, 54.0, 59.0, 56.0],
        ];
        for (i, row) in scores.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                obs.push((i, j, s));
            }
        }
        let data = RatingDataset::from_dense(6, 4, &obs, 0.0, 100.0).unwrap();
        let mut cfg = HyperConfig::default_for_scale(0.0, 100.0);
        cfg.model = ModelKind::Bnp;
        cfg.truncation = 4;
        cfg.iters = 60;
        cfg.burn_in = 20;
        cfg.thin = 2;
        run_chain(&data, &cfg, &mut chain_rng(cfg.seed, 0)).unwrap()
    }

    #[test]
    fn centering_shifts_sides_oppositely_and_keeps_functionals() {
        let before = toy_draws();
        let mut after = before.clone();
        sc_center_draws(&mut after).unwrap();
        assert!(after.centered);
        for t in 0..before.len() {
            let eta_h: f64 = before.rater_weights[t]
                .iter()
                .zip(&before.rater_atoms[t])
                .map(|(w, a)| w * a.bias)
                .sum();
            for i in 0..before.theta[t].len() {
                assert!((after.theta[t][i] - (before.theta[t][i] + eta_h)).abs() < 1e-12);
            }
            for j in 0..before.tau[t].len() {
                assert!((after.tau[t][j] - (before.tau[t][j] - eta_h)).abs() < 1e-12);
            }
            // The centered rater mixture mean is zero by construction.
            let recentered: f64 = after.rater_weights[t]
                .iter()
                .zip(&after.rater_atoms[t])
                .map(|(w, a)| w * a.bias)
                .sum();
            assert!(recentered.abs() < 1e-10);
            assert!(
                (after.subject_base[t].mean - (before.subject_base[t].mean + eta_h)).abs()
                    < 1e-12
            );
            assert!(
                (after.subject_summary[t].mean - (before.subject_summary[t].mean + eta_h)).abs()
                    < 1e-12
            );
            // Location-free functionals are untouched.
            assert_eq!(after.subject_summary[t].var, before.subject_summary[t].var);
            assert_eq!(after.rater_summary[t].bias_var, before.rater_summary[t].bias_var);
            assert_eq!(after.rater_summary[t].relia_mean, before.rater_summary[t].relia_mean);
            assert_eq!(after.rater_summary[t].resid_mean, before.rater_summary[t].resid_mean);
            assert_eq!(after.rater_summary[t].icc_a, before.rater_summary[t].icc_a);
        }
        assert!(matches!(sc_center_draws(&mut after), Err(Error::Usage(_))));
    }

    #[test]
    fn centering_with_zero_bias_mean_is_the_identity() {
        let mut draws = toy_draws();
        for t in 0..draws.len() {
            for a in &mut draws.rater_atoms[t] {
                a.bias = 0.0;
            }
        }
        let frozen = draws.theta.clone();
        sc_center_draws(&mut draws).unwrap();
        assert_eq!(draws.theta, frozen);
    }

    #[test]
    fn single_atom_grid_matches_the_normal_density() {
        let mut draws = toy_draws();
        draws.subject_atoms[0].truncate(1);
        draws.subject_weights[0] = vec![1.0];
        draws.subject_atoms[0][0].mean = 50.0;
        draws.subject_atoms[0][0].var = 50.0;
        draws.theta.truncate(1);
        draws.tau.truncate(1);
        draws.inv_sigma2.truncate(1);
        draws.subject_atoms.truncate(1);
        draws.subject_weights.truncate(1);
        draws.rater_atoms.truncate(1);
        draws.rater_weights.truncate(1);
        let g = eval_density_grid(&draws, DensityTarget::Theta, (50.0, 60.0), 2).unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 50.0).sqrt();
        assert!((g.values[0][0] - expect).abs() < 1e-9);
        assert!((g.mean[0] - expect).abs() < 1e-9);
        assert!((expect - 0.056_42).abs() < 1e-4);
    }

    #[test]
    fn symmetric_mixture_gives_a_symmetric_grid() {
        let mut draws = toy_draws();
        draws.subject_weights[0] = vec![0.5, 0.5, 0.0, 0.0];
        draws.subject_atoms[0][0].mean = 40.0;
        draws.subject_atoms[0][0].var = 9.0;
        draws.subject_atoms[0][1].mean = 60.0;
        draws.subject_atoms[0][1].var = 9.0;
        let g = eval_density_grid(&draws, DensityTarget::Theta, (20.0, 80.0), 301).unwrap();
        let row = &g.values[0];
        for p in 0..row.len() {
            let mirror = row.len() - 1 - p;
            assert!((row[p] - row[mirror]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_densities_integrate_to_one_over_a_six_sd_range() {
        // Controlled two-component mixtures per draw, so the grid resolves
        // every component; a fit this tiny can hallucinate near-degenerate
        // empty-cluster spikes that no fixed grid integrates.
        let mut draws = toy_draws();
        for t in 0..draws.len() {
            let dt = t as f64;
            draws.subject_weights[t] = vec![0.3, 0.7, 0.0, 0.0];
            draws.subject_atoms[t][0].mean = 40.0 + dt;
            draws.subject_atoms[t][0].var = 9.0 + dt;
            draws.subject_atoms[t][1].mean = 60.0 - dt;
            draws.subject_atoms[t][1].var = 16.0;
            draws.rater_weights[t] = vec![0.5, 0.5, 0.0, 0.0];
            draws.rater_atoms[t][0].bias = -2.0 + 0.1 * dt;
            draws.rater_atoms[t][0].bias_var = 4.0;
            draws.rater_atoms[t][1].bias = 2.0;
            draws.rater_atoms[t][1].bias_var = 25.0;
            draws.rater_atoms[t][0].gamma = 10.0;
            draws.rater_atoms[t][0].beta = 0.15;
            draws.rater_atoms[t][1].gamma = 5.0 + dt;
            draws.rater_atoms[t][1].beta = 0.3;
        }
        for (target, range) in [
            (DensityTarget::Theta, (-20.0, 120.0)),
            (DensityTarget::Tau, (-40.0, 40.0)),
            (DensityTarget::Epsilon, (-40.0, 40.0)),
        ] {
            let g = eval_density_grid(&draws, target, range, 4001).unwrap();
            let step = g.points[1] - g.points[0];
            for row in &g.values {
                assert!(row.iter().all(|&v| v >= 0.0));
                let integral: f64 = step
                    * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[row.len() - 1]));
                assert!(
                    (integral - 1.0).abs() < 0.01,
                    "{target:?} integrates to {integral}"
                );
            }
        }
    }

    #[test]
    fn residual_grid_matches_numerical_quadrature() {
        // One component with gamma = 10, beta = 0.15: 1/sigma2 ~ Ga(11, 73.33).
        let mut draws = toy_draws();
        draws.theta.truncate(1);
        draws.rater_weights[0] = vec![1.0, 0.0, 0.0, 0.0];
        draws.rater_atoms[0][0].gamma = 10.0;
        draws.rater_atoms[0][0].beta = 0.15;
        let g = eval_density_grid(&draws, DensityTarget::Epsilon, (0.0, 4.0), 3).unwrap();
        let s = 11.0_f64;
        let r = 11.0_f64 / 0.15;
        for (p, &x) in g.points.iter().enumerate() {
            // Trapezoid over the precision u on a fine grid.
            let n = 400_000;
            let hi = 1.0;
            let du = hi / n as f64;
            let f = |u: f64| -> f64 {
                if u <= 0.0 {
                    return 0.0;
                }
                let norm = (u / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * u * x * x).exp();
                let dens =
                    (s * r.ln() - ln_gamma(s) + (s - 1.0) * u.ln() - r * u).exp();
                norm * dens
            };
            let mut integral = 0.0;
            for k in 0..=n {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                integral += w * f(k as f64 * du);
            }
            integral *= du;
            assert!(
                (g.values[0][p] - integral).abs() < 1e-8,
                "x = {x}: closed form {} vs quadrature {integral}",
                g.values[0][p]
            );
        }
    }

    #[test]
    fn grid_rejects_bad_ranges_and_sizes() {
        let draws = toy_draws();
        assert!(eval_density_grid(&draws, DensityTarget::Theta, (1.0, 1.0), 10).is_err());
        assert!(eval_density_grid(&draws, DensityTarget::Theta, (2.0, 1.0), 10).is_err());
        assert!(eval_density_grid(&draws, DensityTarget::Theta, (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn waic_matches_the_hand_example() {
        let w = waic(&[vec![-1.0], vec![-2.0]]).unwrap();
        assert!((w.lppd - (-1.379_885_493_041_722_4)).abs() < 1e-12);
        assert!((w.p_waic - 0.5).abs() < 1e-12);
        assert!((w.waic - 3.759_770_986_083_444_7).abs() < 1e-12);
    }

    #[test]
    fn waic_of_a_single_draw_has_no_penalty() {
        let w = waic(&[vec![-1.0, -2.0, -0.5]]).unwrap();
        assert_eq!(w.p_waic, 0.0);
        assert!((w.waic - 7.0).abs() < 1e-12);
    }

    #[test]
    fn waic_identical_draws_have_zero_penalty() {
        let w = waic(&[vec![-1.5, -2.5], vec![-1.5, -2.5], vec![-1.5, -2.5]]).unwrap();
        assert_eq!(w.p_waic, 0.0);
    }

    #[test]
    fn waic_is_order_invariant_and_additive() {
        let a = vec![vec![-1.0, -2.0, -0.7], vec![-1.2, -1.8, -0.9]];
        let permuted = vec![vec![-0.7, -1.0, -2.0], vec![-0.9, -1.2, -1.8]];
        let wa = waic(&a).unwrap();
        let wp = waic(&permuted).unwrap();
        assert!((wa.waic - wp.waic).abs() < 1e-12);

        let left = vec![vec![-1.0, -2.0], vec![-1.2, -1.8]];
        let right = vec![vec![-0.7], vec![-0.9]];
        let wl = waic(&left).unwrap();
        let wr = waic(&right).unwrap();
        assert!((wa.waic - (wl.waic + wr.waic)).abs() < 1e-12);
    }

    #[test]
    fn waic_rejects_non_finite_rows() {
        let err = waic(&[vec![f64::NEG_INFINITY]]).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
    }

    #[test]
    fn quantiles_interpolate_order_statistics() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_type7(&xs, 0.025) - 3.475).abs() < 1e-12);
        assert!((quantile_type7(&xs, 0.975) - 97.525).abs() < 1e-12);
        assert!((quantile_type7(&xs, 0.5) - 50.5).abs() < 1e-12);
        assert_eq!(quantile_type7(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn ess_is_near_n_for_white_noise_and_small_for_a_random_walk() {
        let mut rng = chain_rng(99, 0);
        let white: Vec<f64> = (0..10_000)
            .map(|_| sample_normal(0.0, 1.0, &mut rng).unwrap())
            .collect();
        let e = ess(&white);
        assert!((8000.0..=12_000.0).contains(&e), "white-noise ESS {e}");

        let mut ar = vec![0.0];
        for t in 1..10_000 {
            let innov = sample_normal(0.0, 1.0, &mut rng).unwrap();
            ar.push(0.9 * ar[t - 1] + innov);
        }
        let e = ess(&ar);
        assert!(e < 2000.0, "AR(1) ESS {e}");
        assert!(e > 50.0, "AR(1) ESS {e}");

        assert_eq!(ess(&[3.0; 50]), 50.0);
    }

    #[test]
    fn summaries_cover_constants_and_respect_quantiles() {
        let mut draws = toy_draws();
        for t in 0..draws.len() {
            draws.rater_summary[t].icc_a = 0.25;
        }
        let report = summarize(&draws).unwrap();
        assert_eq!(report.icc_a.mean, 0.25);
        assert_eq!(report.icc_a.lo, 0.25);
        assert_eq!(report.icc_a.hi, 0.25);
        assert_eq!(report.theta.len(), 6);
        assert_eq!(report.tau.len(), 4);
        assert_eq!(report.inv_sigma2.len(), 4);
        assert_eq!(report.retained, draws.len());
        for p in report.theta.iter().chain(&report.tau) {
            assert!(p.lo <= p.hi);
            assert!(p.mean.is_finite());
        }
        assert!(report.waic.waic.is_finite());
    }

    #[test]
    fn summaries_are_permutation_invariant_in_the_quantile_fields() {
        let draws = toy_draws();
        let mut reversed = draws.clone();
        reversed.theta.reverse();
        reversed.tau.reverse();
        reversed.inv_sigma2.reverse();
        reversed.alpha1.reverse();
        reversed.alpha2.reverse();
        reversed.subject_summary.reverse();
        reversed.rater_summary.reverse();
        reversed.loglik.reverse();
        let a = summarize(&draws).unwrap();
        let b = summarize(&reversed).unwrap();
        // Quantiles are exactly order-free; means only up to summation order.
        assert!((a.icc_a.mean - b.icc_a.mean).abs() < 1e-12);
        assert_eq!(a.icc_a.lo, b.icc_a.lo);
        assert_eq!(a.icc_a.hi, b.icc_a.hi);
        for (x, y) in a.theta.iter().zip(&b.theta) {
            assert!((x.mean - y.mean).abs() < 1e-12);
            assert_eq!(x.lo, y.lo);
            assert_eq!(x.hi, y.hi);
        }
        assert!((a.waic.waic - b.waic.waic).abs() < 1e-9);
    }
}
