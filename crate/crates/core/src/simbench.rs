//! Synthetic rating scenarios and standardized recovery metrics.
//!
//! Three generative designs stress the fitters: U-U (unimodal true scores,
//! one rater cluster), B-U (bimodal true scores, one rater cluster), and B-B
//! (bimodal on both sides). Data follow `Y = theta + tau + eps` with the
//! second argument of every `N(a, b)` read as a variance; under an sd
//! reading every benchmark number below would change. Scores are never
//! clipped: the declared scale envelope widens to cover tail draws so moment
//! checks stay unbiased. Each subject is rated by a uniform
//! without-replacement subset of raters, independently across subjects.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::RatingDataset;
use crate::dists::{sample_categorical, sample_gamma, sample_normal};
use crate::mixture::{icc_a, rater_moments, subject_moments};
use crate::post::FitReport;
use crate::{ChainRng, Error, Result};

/// Generative scenario, named (subject shape)-(rater shape).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Unimodal true scores, one rater cluster.
    #[serde(rename = "uu")]
    Uu,
    /// Bimodal true scores, one rater cluster.
    #[serde(rename = "bu")]
    Bu,
    /// Bimodal true scores, two rater clusters.
    #[serde(rename = "bb")]
    Bb,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "uu" => Ok(Scenario::Uu),
            "bu" => Ok(Scenario::Bu),
            "bb" => Ok(Scenario::Bb),
            other => Err(Error::Usage(format!(
                "unknown scenario `{other}` (expected uu, bu, or bb)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Uu => "uu",
            Scenario::Bu => "bu",
            Scenario::Bb => "bb",
        }
    }
}

/// Size and seed of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub num_subjects: usize,
    pub num_raters: usize,
    /// Distinct raters per subject; the benchmark design uses 2 or 4.
    pub ratings_per_subject: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Benchmark-default sizes: 500 subjects, 100 raters, 4 ratings each.
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            num_subjects: 500,
            num_raters: 100,
            ratings_per_subject: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subjects == 0 || self.num_raters == 0 {
            return Err(Error::BadParameter(
                "scenario needs at least one subject and one rater".into(),
            ));
        }
        if self.ratings_per_subject == 0 || self.ratings_per_subject > self.num_raters {
            return Err(Error::BadParameter(format!(
                "ratings_per_subject {} must lie in 1..={}",
                self.ratings_per_subject, self.num_raters
            )));
        }
        // Every rater must appear in some subset or the dataset is invalid.
        if self.num_subjects * self.ratings_per_subject < self.num_raters {
            return Err(Error::BadParameter(format!(
                "{} subjects x {} ratings cannot cover {} raters",
                self.num_subjects, self.ratings_per_subject, self.num_raters
            )));
        }
        Ok(())
    }
}

/// Generative parameter values and the population functionals they imply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta_true: Vec<f64>,
    pub tau_true: Vec<f64>,
    pub inv_sigma2_true: Vec<f64>,
    pub mu_g: f64,
    pub omega2_g: f64,
    pub phi2_h: f64,
    pub beta_h: f64,
    /// Expected residual variance (sigma-tilde squared).
    pub resid_h: f64,
    pub icc_a: f64,
}

fn subject_mix(scenario: Scenario) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match scenario {
        Scenario::Uu => (vec![1.0], vec![50.0], vec![50.0]),
        Scenario::Bu | Scenario::Bb => (vec![0.5, 0.5], vec![35.0, 65.0], vec![10.0, 10.0]),
    }
}

/// (weights, biases, bias variances, gammas, betas). B-B biases sit at -10
/// and +10: bias location is absorbed by post-fit centering, and a zero-mean
/// bias mixture keeps the subject modes at 35 and 65 on the score scale.
fn rater_mix(scenario: Scenario) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    match scenario {
        Scenario::Uu | Scenario::Bu => (
            vec![1.0],
            vec![0.0],
            vec![25.0],
            vec![10.0],
            vec![0.15],
        ),
        Scenario::Bb => (
            vec![0.5, 0.5],
            vec![-10.0, 10.0],
            vec![5.0, 5.0],
            vec![10.0, 10.0],
            vec![0.1, 0.2],
        ),
    }
}

/// Population ICC of agreement implied by a scenario's exact moments.
pub fn true_icc_a(scenario: Scenario) -> Result<f64> {
    let (spi, smeans, svars) = subject_mix(scenario);
    let (rpi, rbias, rbvar, rgam, rbeta) = rater_mix(scenario);
    let sm = subject_moments(&spi, &smeans, &svars)?;
    let rm = rater_moments(&rpi, &rbias, &rbvar, &rgam, &rbeta)?;
    icc_a(sm.var, rm.bias_var, rm.resid_mean)
}

/// Redraw whole assignments until every rater is used at least once. With
/// benchmark sizes an empty rater is already a sub-percent event, so the
/// attempt cap is never a practical limit.
fn draw_subsets(spec: &ScenarioSpec, rng: &mut ChainRng) -> Result<Vec<Vec<usize>>> {
    for _ in 0..1000 {
        let mut used = vec![false; spec.num_raters];
        let mut subsets = Vec::with_capacity(spec.num_subjects);
        for _ in 0..spec.num_subjects {
            let mut s = rand::seq::index::sample(rng, spec.num_raters, spec.ratings_per_subject)
                .into_vec();
            s.sort_unstable();
            for &j in &s {
                used[j] = true;
            }
            subsets.push(s);
        }
        if used.iter().all(|&u| u) {
            return Ok(subsets);
        }
    }
    Err(Error::NumericalFailure(
        "rater coverage not achieved in 1000 assignment draws".into(),
    ))
}

/// Generate one dataset and its ground truth. The draw order (subjects,
/// raters, subsets, noise) is part of the seed contract.
pub fn generate(spec: &ScenarioSpec) -> Result<(RatingDataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChainRng::seed_from_u64(spec.seed);
    let (spi, smeans, svars) = subject_mix(spec.scenario);
    let (rpi, rbias, rbvar, rgam, rbeta) = rater_mix(spec.scenario);

    let mut theta_true = Vec::with_capacity(spec.num_subjects);
    for _ in 0..spec.num_subjects {
        let k = sample_categorical(&spi, &mut rng)?;
        theta_true.push(sample_normal(smeans[k], svars[k], &mut rng)?);
    }
    let mut tau_true = Vec::with_capacity(spec.num_raters);
    let mut inv_sigma2_true = Vec::with_capacity(spec.num_raters);
    for _ in 0..spec.num_raters {
        let k = sample_categorical(&rpi, &mut rng)?;
        tau_true.push(sample_normal(rbias[k], rbvar[k], &mut rng)?);
        // Reliability parameterization: 1/sigma^2 ~ Ga(1 + gamma, rate
        // (1 + gamma)/beta), so E[1/sigma^2] = beta and E[sigma^2] =
        // (1 + gamma)/(beta * gamma), matching the population functionals.
        inv_sigma2_true.push(sample_gamma(
            1.0 + rgam[k],
            (1.0 + rgam[k]) / rbeta[k],
            &mut rng,
        )?);
    }

    let subsets = draw_subsets(spec, &mut rng)?;
    let mut obs = Vec::with_capacity(spec.num_subjects * spec.ratings_per_subject);
    for (i, subset) in subsets.iter().enumerate() {
        for &j in subset {
            let eps = sample_normal(0.0, 1.0 / inv_sigma2_true[j], &mut rng)?;
            obs.push((i, j, theta_true[i] + tau_true[j] + eps));
        }
    }
    // Unclipped generation: widen the nominal 1..100 envelope when a tail
    // draw escapes it.
    let mut lo = 1.0f64;
    let mut hi = 100.0f64;
    for &(_, _, y) in &obs {
        lo = lo.min(y.floor());
        hi = hi.max(y.ceil());
    }
    let data = RatingDataset::from_dense(spec.num_subjects, spec.num_raters, &obs, lo, hi)?;

    let sm = subject_moments(&spi, &smeans, &svars)?;
    let rm = rater_moments(&rpi, &rbias, &rbvar, &rgam, &rbeta)?;
    let truth = GroundTruth {
        theta_true,
        tau_true,
        inv_sigma2_true,
        mu_g: sm.mean,
        omega2_g: sm.var,
        phi2_h: rm.bias_var,
        beta_h: rm.relia_mean,
        resid_h: rm.resid_mean,
        icc_a: icc_a(sm.var, rm.bias_var, rm.resid_mean)?,
    };
    Ok((data, truth))
}

/// One metric family: RMSE and MAE of posterior means against truth, both
/// divided by the family's standardizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub family: String,
    pub s_rmse: f64,
    pub s_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryMetrics {
    pub fn get(&self, family: &str) -> Option<&RecoveryRow> {
        self.rows.iter().find(|r| r.family == family)
    }
}

fn metric_row(family: &str, est: &[f64], truth: &[f64], denom: f64) -> Result<RecoveryRow> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::BadParameter(format!(
            "{family}: {} estimates against {} true values",
            est.len(),
            truth.len()
        )));
    }
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::BadParameter(format!(
            "{family}: standardizer {denom} must be positive"
        )));
    }
    let n = est.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (e, t) in est.iter().zip(truth) {
        let d = (e - t) / denom;
        sq += d * d;
        abs += d.abs();
    }
    Ok(RecoveryRow {
        family: family.to_string(),
        s_rmse: (sq / n).sqrt(),
        s_mae: abs / n,
    })
}

/// Standardized recovery table for one fitted dataset. Location families
/// (theta, tau, mu_g) standardize by `scale_center`, reliabilities by the
/// true mean reliability, variances and the ICC by their own true values.
pub fn recovery_metrics(
    report: &FitReport,
    truth: &GroundTruth,
    scale_center: f64,
) -> Result<RecoveryMetrics> {
    let theta_est: Vec<f64> = report.theta.iter().map(|p| p.mean).collect();
    let tau_est: Vec<f64> = report.tau.iter().map(|p| p.mean).collect();
    let relia_est: Vec<f64> = report.inv_sigma2.iter().map(|p| p.mean).collect();
    let rows = vec![
        metric_row("theta", &theta_est, &truth.theta_true, scale_center)?,
        metric_row("tau", &tau_est, &truth.tau_true, scale_center)?,
        metric_row("reliability", &relia_est, &truth.inv_sigma2_true, truth.beta_h)?,
        metric_row("mu_g", &[report.mu_g.mean], &[truth.mu_g], scale_center)?,
        metric_row("omega2_g", &[report.omega2_g.mean], &[truth.omega2_g], truth.omega2_g)?,
        metric_row("phi2_h", &[report.phi2_h.mean], &[truth.phi2_h], truth.phi2_h)?,
        metric_row("resid_h", &[report.sigma_tilde_h.mean], &[truth.resid_h], truth.resid_h)?,
        metric_row("icc_a", &[report.icc_a.mean], &[truth.icc_a], truth.icc_a)?,
    ];
    Ok(RecoveryMetrics { rows })
}

/// Pool per-dataset tables: squared errors average across datasets (so the
/// pooled S-RMSE is the root mean of per-dataset mean squares), absolute
/// errors average directly.
pub fn aggregate_metrics(runs: &[RecoveryMetrics]) -> Result<RecoveryMetrics> {
    let first = runs
        .first()
        .ok_or_else(|| Error::BadParameter("no metric tables to aggregate".into()))?;
    let n = runs.len() as f64;
    let mut rows = Vec::with_capacity(first.rows.len());
    for (k, proto) in first.rows.iter().enumerate() {
        let mut sq = 0.0;
        let mut abs = 0.0;
        for run in runs {
            let row = run.rows.get(k).filter(|r| r.family == proto.family).ok_or_else(|| {
                Error::BadParameter(format!(
                    "metric tables disagree on family `{}`",
                    proto.family
                ))
            })?;
            sq += row.s_rmse * row.s_rmse;
            abs += row.s_mae;
        }
        rows.push(RecoveryRow {
            family: proto.family.clone(),
            s_rmse: (sq / n).sqrt(),
            s_mae: abs / n,
        });
    }
    Ok(RecoveryMetrics { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::post::{ParamSummary, ScalarSummary, Waic};

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
    }

    fn scalar(v: f64) -> ScalarSummary {
        ScalarSummary {
            mean: v,
            lo: v,
            hi: v,
            ess: 1.0,
        }
    }

    fn report_from_truth(t: &GroundTruth) -> FitReport {
        let p = |v: f64| ParamSummary {
            mean: v,
            lo: v,
            hi: v,
        };
        FitReport {
            mu_g: scalar(t.mu_g),
            omega2_g: scalar(t.omega2_g),
            eta_h: scalar(0.0),
            phi2_h: scalar(t.phi2_h),
            beta_h: scalar(t.beta_h),
            sigma_tilde_h: scalar(t.resid_h),
            icc_a: scalar(t.icc_a),
            alpha1: scalar(1.0),
            alpha2: scalar(1.0),
            theta: t.theta_true.iter().copied().map(p).collect(),
            tau: t.tau_true.iter().copied().map(p).collect(),
            inv_sigma2: t.inv_sigma2_true.iter().copied().map(p).collect(),
            waic: Waic {
                waic: 0.0,
                lppd: 0.0,
                p_waic: 0.0,
            },
            notes: Vec::new(),
            dm_fallbacks: 0,
            dm_nonconverged: 0,
            centered: true,
            retained: 1,
        }
    }

    #[test]
    fn scenario_names_round_trip_and_reject_garbage() {
        for s in [Scenario::Uu, Scenario::Bu, Scenario::Bb] {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
        }
        assert_eq!(Scenario::parse("B-B").unwrap(), Scenario::Bb);
        assert!(matches!(Scenario::parse("ub"), Err(Error::Usage(_))));
    }

    #[test]
    fn true_icc_matches_the_population_arithmetic() {
        let uu = true_icc_a(Scenario::Uu).unwrap();
        assert!((uu - 50.0 / (50.0 + 25.0 + 11.0 / 1.5)).abs() < 1e-12);
        assert!((uu - 0.60729).abs() < 1e-5);
        let bu = true_icc_a(Scenario::Bu).unwrap();
        assert!((bu - 235.0 / (235.0 + 25.0 + 11.0 / 1.5)).abs() < 1e-12);
        assert!((bu - 0.87905).abs() < 1e-5);
        let bb = true_icc_a(Scenario::Bb).unwrap();
        assert!((bb - 235.0 / (235.0 + 105.0 + 8.25)).abs() < 1e-12);
        assert!((bb - 0.67480).abs() < 1e-5);
    }

    #[test]
    fn uu_true_scores_match_their_population_mean() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Uu, 7)).unwrap();
        // CLT band: 50 +- 3 * sqrt(50/500).
        assert!((mean(&truth.theta_true) - 50.0).abs() < 0.95);
        assert!((mean(&truth.tau_true) - 0.0).abs() < 3.0 * (25.0f64 / 100.0).sqrt());
        assert!((mean(&truth.inv_sigma2_true) - 0.15).abs() < 0.02);
    }

    #[test]
    fn bu_true_scores_have_the_mixture_variance() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Bu, 11)).unwrap();
        assert!((var(&truth.theta_true) - 235.0).abs() < 25.0);
    }

    #[test]
    fn bb_rater_side_shows_both_clusters() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Bb, 13)).unwrap();
        let neg = truth.tau_true.iter().filter(|&&t| t < 0.0).count();
        // Two bias clusters at -10 and +10 split the raters near evenly.
        assert!(neg > 30 && neg < 70, "negative-bias raters: {neg}");
        assert!((var(&truth.tau_true) - 105.0).abs() < 35.0);
        assert!((truth.phi2_h - 105.0).abs() < 1e-12);
        assert!((truth.resid_h - 8.25).abs() < 1e-12);
    }

    #[test]
    fn every_subject_gets_exactly_the_requested_raters() {
        let spec = ScenarioSpec {
            scenario: Scenario::Uu,
            num_subjects: 40,
            num_raters: 12,
            ratings_per_subject: 3,
            seed: 5,
        };
        let (data, _) = generate(&spec).unwrap();
        let mut per_subject = vec![Vec::new(); spec.num_subjects];
        for o in data.observations() {
            per_subject[o.subject].push(o.rater);
        }
        for raters in &mut per_subject {
            raters.sort_unstable();
            raters.dedup();
            assert_eq!(raters.len(), spec.ratings_per_subject);
        }
        assert_eq!(data.num_raters(), spec.num_raters);
        assert_eq!(
            data.num_observations(),
            spec.num_subjects * spec.ratings_per_subject
        );
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = ScenarioSpec::new(Scenario::Bb, 99);
        let (d1, t1) = generate(&spec).unwrap();
        let (d2, t2) = generate(&spec).unwrap();
        assert_eq!(d1.observations(), d2.observations());
        assert_eq!(t1.theta_true, t2.theta_true);
        assert_eq!(t1.inv_sigma2_true, t2.inv_sigma2_true);
        let (d3, _) = generate(&ScenarioSpec::new(Scenario::Bb, 100)).unwrap();
        assert_ne!(d1.observations()[0].score, d3.observations()[0].score);
    }

    #[test]
    fn impossible_specs_are_rejected() {
        let mut spec = ScenarioSpec::new(Scenario::Uu, 1);
        spec.ratings_per_subject = 101;
        assert!(matches!(generate(&spec), Err(Error::BadParameter(_))));
        let starved = ScenarioSpec {
            scenario: Scenario::Uu,
            num_subjects: 3,
            num_raters: 100,
            ratings_per_subject: 2,
            seed: 1,
        };
        assert!(matches!(generate(&starved), Err(Error::BadParameter(_))));
    }

    #[test]
    fn perfect_recovery_scores_zero_everywhere() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Uu, 3)).unwrap();
        let m = recovery_metrics(&report_from_truth(&truth), &truth, 50.0).unwrap();
        for row in &m.rows {
            assert_eq!(row.s_rmse, 0.0, "{}", row.family);
            assert_eq!(row.s_mae, 0.0, "{}", row.family);
        }
    }

    #[test]
    fn constant_theta_offset_standardizes_to_a_tenth() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Uu, 3)).unwrap();
        let mut report = report_from_truth(&truth);
        for p in &mut report.theta {
            p.mean += 5.0;
        }
        let m = recovery_metrics(&report, &truth, 50.0).unwrap();
        let theta = m.get("theta").unwrap();
        assert!((theta.s_mae - 0.1).abs() < 1e-12);
        assert!((theta.s_rmse - 0.1).abs() < 1e-12);
        assert_eq!(m.get("icc_a").unwrap().s_rmse, 0.0);
    }

    #[test]
    fn s_rmse_dominates_s_mae_under_noisy_estimates() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Bb, 21)).unwrap();
        let mut report = report_from_truth(&truth);
        for (k, p) in report.theta.iter_mut().enumerate() {
            p.mean += if k % 2 == 0 { 1.5 } else { -0.25 };
        }
        for (k, p) in report.tau.iter_mut().enumerate() {
            p.mean += 0.1 * (k as f64 - 50.0);
        }
        let m = recovery_metrics(&report, &truth, 50.0).unwrap();
        for row in &m.rows {
            assert!(row.s_rmse >= row.s_mae - 1e-12, "{}", row.family);
        }
    }

    #[test]
    fn mismatched_dimensions_are_reported() {
        let (_, truth) = generate(&ScenarioSpec::new(Scenario::Uu, 3)).unwrap();
        let mut report = report_from_truth(&truth);
        report.theta.pop();
        assert!(matches!(
            recovery_metrics(&report, &truth, 50.0),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn aggregation_pools_squares_and_absolutes() {
        let rows = |r: f64, a: f64| RecoveryMetrics {
            rows: vec![RecoveryRow {
                family: "theta".into(),
                s_rmse: r,
                s_mae: a,
            }],
        };
        let agg = aggregate_metrics(&[rows(0.3, 0.2), rows(0.4, 0.3)]).unwrap();
        let pooled = ((0.09 + 0.16) / 2.0f64).sqrt();
        assert!((agg.rows[0].s_rmse - pooled).abs() < 1e-12);
        assert!((agg.rows[0].s_mae - 0.25).abs() < 1e-12);
        assert!(aggregate_metrics(&[]).is_err());
    }
}
