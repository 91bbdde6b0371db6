//! Ordered categories as interval censorings of a latent two-way score.
//!
//! An observed category `k` in `1..=K` means the latent score
//! `Y* = theta[i] + tau[j] + eps` fell in `(delta[k-1], delta[k]]` for an
//! increasing threshold grid with `delta[0] = -inf` and `delta[K] = +inf`.
//! Each sweep augments the chain with truncated-normal draws of `Y*`, runs
//! the regular two-way sweep on them, and redraws the free interior
//! thresholds uniformly on the gaps the latent values leave. The two
//! boundary thresholds `delta[1]` and `delta[K-1]` stay fixed to anchor
//! location and scale; with only two categories the residual variances are
//! additionally pinned to one, since no threshold spacing identifies them.
//!
//! Latent draws leave both mixture locations free, so centered reporting
//! moves the subject and rater mixtures onto each other's means; the
//! likelihood only sees `theta + tau`, which the shift preserves.

use crate::data::{ChainState, HyperConfig, ModelKind, RatingDataset};
use crate::dists::{normal_cdf, sample_truncated_normal};
use crate::sampler::{
    init_state, occupied_mixture, record_with_loglik, sweep, ChainDraws, DmCounters, SweepPlan,
};
use crate::{ChainRng, Error, Result};
use rand::Rng;

/// Threshold and identification choices for an ordinal fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrdinalConfig {
    /// Number of ordered categories K; scores must be integers in 1..=K.
    pub categories: usize,
    /// Fixed first threshold delta\[1\].
    pub delta_lower: f64,
    /// Fixed last threshold delta\[K-1\]; unused when K = 2.
    pub delta_upper: f64,
    /// Whether the residual variances are sampled; forced off for K = 2.
    pub free_sigma: bool,
}

impl OrdinalConfig {
    /// Defaults: thresholds anchored at 0 and K-2, residual variances free
    /// whenever more than two categories identify them.
    pub fn new(categories: usize) -> Self {
        OrdinalConfig {
            categories,
            delta_lower: 0.0,
            delta_upper: categories.saturating_sub(2) as f64,
            free_sigma: categories > 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories < 2 {
            return Err(Error::BadParameter(
                "ordinal data needs at least two categories".into(),
            ));
        }
        if self.categories == 2 && self.free_sigma {
            return Err(Error::BadParameter(
                "two categories cannot identify free residual variances".into(),
            ));
        }
        if !self.delta_lower.is_finite() {
            return Err(Error::BadParameter("fixed thresholds must be finite".into()));
        }
        if self.categories > 2
            && (!self.delta_upper.is_finite() || self.delta_lower >= self.delta_upper)
        {
            return Err(Error::BadParameter(format!(
                "fixed thresholds must increase: {} vs {}",
                self.delta_lower, self.delta_upper
            )));
        }
        Ok(())
    }
}

/// Two-way chain state augmented with the latent scores and thresholds.
#[derive(Debug, Clone)]
pub struct OrdinalState {
    pub core: ChainState,
    /// One latent score per observation, in dataset order.
    pub y_star: Vec<f64>,
    /// `delta[0..=K]` with infinite ends; strictly increasing.
    pub thresholds: Vec<f64>,
    pub categories: usize,
}

/// Retained ordinal draws: the regular chain draws plus the finite
/// thresholds `delta[1..=K-1]`, one row per retained draw.
#[derive(Debug, Clone)]
pub struct OrdinalDraws {
    pub draws: ChainDraws,
    pub thresholds: Vec<Vec<f64>>,
}

/// Probability of the category bounded by `(delta_k, delta_k1]` for a
/// latent N(theta + tau, sigma2) score.
pub fn ordinal_category_prob(
    theta: f64,
    tau: f64,
    sigma2: f64,
    delta_k: f64,
    delta_k1: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) || sigma2.is_nan() {
        return Err(Error::BadParameter(format!(
            "latent variance must be positive, got {sigma2}"
        )));
    }
    if delta_k.is_nan() || delta_k1.is_nan() || delta_k >= delta_k1 {
        return Err(Error::BadParameter(format!(
            "thresholds must increase: {delta_k} vs {delta_k1}"
        )));
    }
    let m = theta + tau;
    let sd = sigma2.sqrt();
    let hi = if delta_k1.is_finite() { normal_cdf((delta_k1 - m) / sd) } else { 1.0 };
    let lo = if delta_k.is_finite() { normal_cdf((delta_k - m) / sd) } else { 0.0 };
    Ok((hi - lo).max(0.0))
}

/// All K category probabilities for one cell. The last category is the
/// complement of the running sum, so a left-to-right sum of the result is
/// exactly one whenever the complement is nonnegative.
pub fn category_probs(theta: f64, tau: f64, sigma2: f64, thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.len() < 3 {
        return Err(Error::BadParameter(
            "a threshold grid needs at least two categories".into(),
        ));
    }
    let k = thresholds.len() - 1;
    let mut probs = Vec::with_capacity(k);
    let mut partial = 0.0;
    for c in 0..k - 1 {
        let p = ordinal_category_prob(theta, tau, sigma2, thresholds[c], thresholds[c + 1])?;
        probs.push(p);
        partial += p;
    }
    // Validates the final pair even though its probability is a complement.
    ordinal_category_prob(theta, tau, sigma2, thresholds[k - 1], thresholds[k])?;
    probs.push((1.0 - partial).max(0.0));
    Ok(probs)
}

/// The fixed-plus-free threshold grid a fit starts from: equally spaced
/// between the two anchors, infinite ends.
pub fn init_thresholds(ocfg: &OrdinalConfig) -> Vec<f64> {
    let k = ocfg.categories;
    let mut t = Vec::with_capacity(k + 1);
    t.push(f64::NEG_INFINITY);
    if k == 2 {
        t.push(ocfg.delta_lower);
    } else {
        let step = (ocfg.delta_upper - ocfg.delta_lower) / (k - 2) as f64;
        for i in 1..k {
            t.push(ocfg.delta_lower + step * (i - 1) as f64);
        }
    }
    t.push(f64::INFINITY);
    t
}

/// Category of an ordinal score, checked to be an integer in 1..=K.
fn category_of(score: f64, k: usize) -> Result<usize> {
    if !score.is_finite() || score.fract() != 0.0 || score < 1.0 || score > k as f64 {
        return Err(Error::BadParameter(format!(
            "ordinal scores must be integers in 1..={k}, got {score}"
        )));
    }
    Ok(score as usize)
}

/// Deterministic latent starting values at the category midpoints; boundary
/// categories sit half a unit beyond their finite threshold.
fn init_y_star(data: &RatingDataset, thresholds: &[f64], k: usize) -> Result<Vec<f64>> {
    data.observations()
        .iter()
        .map(|o| {
            let c = category_of(o.score, k)?;
            Ok(if c == 1 {
                thresholds[1] - 0.5
            } else if c == k {
                thresholds[k - 1] + 0.5
            } else {
                0.5 * (thresholds[c - 1] + thresholds[c])
            })
        })
        .collect()
}

/// Builds the starting state: deterministic thresholds and latent scores,
/// then the regular moment-matched initialization on the latent data. With
/// pinned residual variances the reliabilities start (and stay) at one.
pub fn init_ordinal(
    data: &RatingDataset,
    cfg: &HyperConfig,
    ocfg: &OrdinalConfig,
    rng: &mut ChainRng,
) -> Result<OrdinalState> {
    let thresholds = init_thresholds(ocfg);
    let y_star = init_y_star(data, &thresholds, ocfg.categories)?;
    let mut working = data.clone();
    working.set_scores(&y_star)?;
    let mut core = init_state(&working, cfg, rng)?;
    if !ocfg.free_sigma {
        core.inv_sigma2.fill(1.0);
    }
    Ok(OrdinalState { core, y_star, thresholds, categories: ocfg.categories })
}

/// Redraws every latent score from its truncated normal full conditional on
/// the interval of its observed category.
pub fn update_latent_y(
    state: &mut OrdinalState,
    data: &RatingDataset,
    rng: &mut ChainRng,
) -> Result<()> {
    let k = state.categories;
    for (idx, o) in data.observations().iter().enumerate() {
        let c = category_of(o.score, k)?;
        let mean = state.core.theta[o.subject] + state.core.tau[o.rater];
        let var = 1.0 / state.core.inv_sigma2[o.rater];
        state.y_star[idx] = sample_truncated_normal(
            mean,
            var,
            state.thresholds[c - 1],
            state.thresholds[c],
            rng,
        )?;
    }
    Ok(())
}

/// Redraws each free threshold `delta[k]`, k in 2..=K-2, uniformly on the
/// gap between the largest latent score of category k and the smallest of
/// category k+1, clipped by the neighboring thresholds. Degenerate gaps
/// keep the current value.
pub fn update_thresholds(
    state: &mut OrdinalState,
    data: &RatingDataset,
    rng: &mut ChainRng,
) -> Result<()> {
    let k = state.categories;
    if k < 4 {
        return Ok(());
    }
    for f in 2..=k - 2 {
        let mut lo = state.thresholds[f - 1];
        let mut hi = state.thresholds[f + 1];
        for (idx, o) in data.observations().iter().enumerate() {
            let c = category_of(o.score, k)?;
            if c == f {
                lo = lo.max(state.y_star[idx]);
            } else if c == f + 1 {
                hi = hi.min(state.y_star[idx]);
            }
        }
        if lo < hi {
            // Interior rejection keeps the grid strictly increasing even if
            // the uniform draw lands on an endpoint.
            for _ in 0..64 {
                let u = lo + (hi - lo) * rng.random::<f64>();
                if u > lo && u < hi {
                    state.thresholds[f] = u;
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Pointwise log likelihood of the observed categories under the current
/// state, floored away from -inf for degenerate cells.
pub fn ordinal_loglik(state: &OrdinalState, data: &RatingDataset) -> Result<Vec<f64>> {
    let k = state.categories;
    data.observations()
        .iter()
        .map(|o| {
            let c = category_of(o.score, k)?;
            let p = ordinal_category_prob(
                state.core.theta[o.subject],
                state.core.tau[o.rater],
                1.0 / state.core.inv_sigma2[o.rater],
                state.thresholds[c - 1],
                state.thresholds[c],
            )?;
            Ok(p.max(f64::MIN_POSITIVE).ln())
        })
        .collect()
}

/// Runs one ordinal chain: latent scores, two-way sweep on them, threshold
/// updates, shared retention schedule. The configured model must be the
/// ordinal kind.
pub fn run_ordinal_chain(
    data: &RatingDataset,
    cfg: &HyperConfig,
    ocfg: &OrdinalConfig,
    rng: &mut ChainRng,
) -> Result<OrdinalDraws> {
    cfg.validate()?;
    ocfg.validate()?;
    if cfg.model != ModelKind::Ordinal {
        return Err(Error::Usage(format!(
            "ordinal driver got model {:?}",
            cfg.model
        )));
    }
    for o in data.observations() {
        category_of(o.score, ocfg.categories)?;
    }
    let mut plan = SweepPlan::for_model(cfg.model, cfg.truncation);
    plan.reliability = ocfg.free_sigma;
    let mut state = init_ordinal(data, cfg, ocfg, rng)?;
    let mut working = data.clone();
    let mut counters = DmCounters::default();
    let mut out = OrdinalDraws {
        draws: ChainDraws::with_capacity(cfg.retained_draws()),
        thresholds: Vec::with_capacity(cfg.retained_draws()),
    };
    let k = ocfg.categories;
    for t in 1..=cfg.iters {
        (|| -> Result<()> {
            update_latent_y(&mut state, data, rng)?;
            working.set_scores(&state.y_star)?;
            sweep(&mut state.core, &working, cfg, &plan, &mut counters, rng)?;
            update_thresholds(&mut state, data, rng)
        })()
        .map_err(|e| Error::NumericalFailure(format!("sweep {t}: {e}")))?;
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            let ll = ordinal_loglik(&state, data)?;
            record_with_loglik(&mut out.draws, &state.core, ll)?;
            out.thresholds.push(state.thresholds[1..k].to_vec());
        }
    }
    out.draws.dm = counters;
    Ok(out)
}

/// Centers retained ordinal draws in place: per draw, the subject side
/// shifts by the rater mixture mean minus its own and the rater side by the
/// opposite, so `theta + tau` and every likelihood term stay unchanged
/// while each side lands on the other's old mean. Both means are those of
/// the occupied sub-mixtures, matching the recorded summaries. Components,
/// bases and summaries move with their draws. Running twice is refused.
pub fn ordinal_postprocess(od: &mut OrdinalDraws) -> Result<()> {
    if od.draws.centered {
        return Err(Error::Usage("draws are already centered".into()));
    }
    let d = &mut od.draws;
    for t in 0..d.theta.len() {
        let mu_g: f64 = occupied_mixture(&d.subject_weights[t], &d.subject_occ[t])
            .iter()
            .map(|&(k, w)| w * d.subject_atoms[t][k].mean)
            .sum();
        let eta_h: f64 = occupied_mixture(&d.rater_weights[t], &d.rater_occ[t])
            .iter()
            .map(|&(k, w)| w * d.rater_atoms[t][k].bias)
            .sum();
        let shift = eta_h - mu_g;
        for th in &mut d.theta[t] {
            *th += shift;
        }
        for a in &mut d.subject_atoms[t] {
            a.mean += shift;
        }
        d.subject_base[t].mean += shift;
        d.subject_summary[t].mean += shift;
        for ta in &mut d.tau[t] {
            *ta -= shift;
        }
        for a in &mut d.rater_atoms[t] {
            a.bias -= shift;
        }
        d.rater_base[t].bias_mean -= shift;
        d.rater_summary[t].bias_mean -= shift;
    }
    d.centered = true;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;

    fn toy_data(k: usize) -> RatingDataset {
        // 6 subjects x 3 raters with categories spread over 1..=k.
        let mut obs = Vec::new();
        for i in 0..6 {
            for j in 0..3 {
                let c = 1 + (i + 2 * j) % k;
                obs.push((i, j, c as f64));
            }
        }
        RatingDataset::from_dense(6, 3, &obs, 1.0, k as f64).unwrap()
    }

    fn toy_config(k: usize) -> (HyperConfig, OrdinalConfig) {
        let ocfg = OrdinalConfig::new(k);
        let mut cfg = HyperConfig::default_for_scale(ocfg.delta_lower - 1.0, ocfg.delta_upper + 1.0);
        cfg.model = ModelKind::Ordinal;
        cfg.truncation = 3;
        cfg.iters = 30;
        cfg.burn_in = 10;
        cfg.thin = 2;
        (cfg, ocfg)
    }

    #[test]
    fn category_prob_matches_the_standard_normal_band() {
        let p = ordinal_category_prob(0.0, 0.0, 1.0, -1.0, 1.0).unwrap();
        assert!((p - 0.682_689_492_137_085_9).abs() < 1e-9);
    }

    #[test]
    fn half_open_band_below_zero_has_half_the_mass() {
        let p = ordinal_category_prob(0.0, 0.0, 1.0, f64::NEG_INFINITY, 0.0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unordered_thresholds_and_bad_variance_are_rejected() {
        assert!(ordinal_category_prob(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ordinal_category_prob(0.0, 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(ordinal_category_prob(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(ordinal_category_prob(0.0, 0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn category_probs_sum_to_one_exactly() {
        let t = [f64::NEG_INFINITY, 0.0, 0.7, 1.9, 3.0, f64::INFINITY];
        let mut rng = chain_rng(5, 0);
        for _ in 0..200 {
            let theta = 4.0 * rng.random::<f64>() - 0.5;
            let tau = rng.random::<f64>() - 0.5;
            let sigma2 = 0.2 + 2.0 * rng.random::<f64>();
            let p = category_probs(theta, tau, sigma2, &t).unwrap();
            assert_eq!(p.len(), 5);
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let sum: f64 = p.iter().sum();
            assert_eq!(sum, 1.0, "probabilities summed to {sum}");
            // The complement agrees with the direct tail probability.
            let direct = ordinal_category_prob(theta, tau, sigma2, t[4], t[5]).unwrap();
            assert!((p[4] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_grid_is_equally_spaced_between_the_anchors() {
        let ocfg = OrdinalConfig::new(5);
        let t = init_thresholds(&ocfg);
        assert_eq!(t.len(), 6);
        assert_eq!(t[0], f64::NEG_INFINITY);
        assert_eq!(&t[1..5], &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t[5], f64::INFINITY);

        let two = init_thresholds(&OrdinalConfig::new(2));
        assert_eq!(two, vec![f64::NEG_INFINITY, 0.0, f64::INFINITY]);
    }

    #[test]
    fn latent_starting_values_sit_at_category_midpoints() {
        let data = RatingDataset::from_dense(
            1,
            5,
            &[(0, 0, 1.0), (0, 1, 2.0), (0, 2, 3.0), (0, 3, 4.0), (0, 4, 5.0)],
            1.0,
            5.0,
        )
        .unwrap();
        let t = init_thresholds(&OrdinalConfig::new(5));
        let y = init_y_star(&data, &t, 5).unwrap();
        assert_eq!(y, vec![-0.5, 0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn latent_draws_stay_inside_their_category_interval() {
        let data = toy_data(4);
        let (cfg, ocfg) = toy_config(4);
        let mut rng = chain_rng(cfg.seed, 0);
        let mut s = init_ordinal(&data, &cfg, &ocfg, &mut rng).unwrap();
        for _ in 0..20 {
            update_latent_y(&mut s, &data, &mut rng).unwrap();
            for (idx, o) in data.observations().iter().enumerate() {
                let c = o.score as usize;
                let y = s.y_star[idx];
                assert!(y > s.thresholds[c - 1] && y <= s.thresholds[c]);
                // Re-deriving the category from the latent score round-trips.
                let derived = s.thresholds.iter().skip(1).position(|&d| y <= d).unwrap() + 1;
                assert_eq!(derived, c);
            }
        }
    }

    #[test]
    fn two_categories_put_second_category_latents_above_zero() {
        let data = toy_data(2);
        let (cfg, ocfg) = toy_config(2);
        let mut rng = chain_rng(cfg.seed, 0);
        let mut s = init_ordinal(&data, &cfg, &ocfg, &mut rng).unwrap();
        assert!(s.core.inv_sigma2.iter().all(|&u| u == 1.0));
        update_latent_y(&mut s, &data, &mut rng).unwrap();
        for (idx, o) in data.observations().iter().enumerate() {
            if o.score == 2.0 {
                assert!(s.y_star[idx] > 0.0);
            } else {
                assert!(s.y_star[idx] <= 0.0);
            }
        }
    }

    #[test]
    fn two_categories_refuse_free_residual_variances() {
        let mut ocfg = OrdinalConfig::new(2);
        ocfg.free_sigma = true;
        assert!(matches!(ocfg.validate(), Err(Error::BadParameter(_))));
        let data = toy_data(2);
        let (cfg, _) = toy_config(2);
        let err = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(1, 0)).unwrap_err();
        assert!(matches!(err, Error::BadParameter(_)));
    }

    #[test]
    fn threshold_update_draws_uniformly_on_the_latent_gap() {
        // K = 4 with anchors (0, 3): category-2 latents top out at 1.2 and
        // category-3 latents start at 1.5, so delta[2] ~ U(1.2, 1.5).
        let mut ocfg = OrdinalConfig::new(4);
        ocfg.delta_upper = 3.0;
        let obs = [(0, 0, 2.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 3.0)];
        let data = RatingDataset::from_dense(2, 2, &obs, 1.0, 4.0).unwrap();
        let (cfg, _) = toy_config(4);
        let mut rng = chain_rng(17, 0);
        let mut s = init_ordinal(&data, &cfg, &ocfg, &mut rng).unwrap();
        s.y_star = vec![0.9, 1.2, 1.5, 2.2];
        let mut draws = Vec::new();
        for _ in 0..4000 {
            update_thresholds(&mut s, &data, &mut rng).unwrap();
            draws.push(s.thresholds[2]);
        }
        assert!(draws.iter().all(|&d| d > 1.2 && d < 1.5));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.35).abs() < 0.01, "mean {mean}");
        assert!(draws.iter().cloned().fold(f64::INFINITY, f64::min) < 1.23);
        assert!(draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 1.47);
    }

    #[test]
    fn empty_adjacent_categories_free_the_whole_neighbor_gap() {
        // Only categories 1 and 4 observed: delta[2] ~ U(delta[1], delta[3]).
        let mut ocfg = OrdinalConfig::new(4);
        ocfg.delta_upper = 3.0;
        let obs = [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 4.0), (1, 1, 4.0)];
        let data = RatingDataset::from_dense(2, 2, &obs, 1.0, 4.0).unwrap();
        let (cfg, _) = toy_config(4);
        let mut rng = chain_rng(23, 0);
        let mut s = init_ordinal(&data, &cfg, &ocfg, &mut rng).unwrap();
        let mut draws = Vec::new();
        for _ in 0..4000 {
            update_thresholds(&mut s, &data, &mut rng).unwrap();
            draws.push(s.thresholds[2]);
        }
        assert!(draws.iter().all(|&d| d > 0.0 && d < 3.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.5).abs() < 0.05, "mean {mean}");
        assert!(draws.iter().cloned().fold(f64::INFINITY, f64::min) < 0.2);
        assert!(draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 2.8);
    }

    #[test]
    fn three_categories_have_no_free_thresholds() {
        let data = toy_data(3);
        let (cfg, ocfg) = toy_config(3);
        let mut rng = chain_rng(cfg.seed, 0);
        let mut s = init_ordinal(&data, &cfg, &ocfg, &mut rng).unwrap();
        let before = s.thresholds.clone();
        update_thresholds(&mut s, &data, &mut rng).unwrap();
        assert_eq!(s.thresholds, before);
    }

    #[test]
    fn chains_are_deterministic_and_keep_thresholds_ordered() {
        let data = toy_data(5);
        let (cfg, ocfg) = toy_config(5);
        let a = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        let b = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        assert_eq!(a.draws.theta, b.draws.theta);
        assert_eq!(a.thresholds, b.thresholds);
        assert_eq!(a.draws.len(), cfg.retained_draws());
        assert_eq!(a.thresholds.len(), cfg.retained_draws());
        for row in &a.thresholds {
            assert_eq!(row.len(), 4);
            assert_eq!(row[0], 0.0);
            assert_eq!(row[3], 3.0);
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        for ll in &a.draws.loglik {
            assert!(ll.iter().all(|l| l.is_finite() && *l <= 0.0));
        }
    }

    #[test]
    fn driver_rejects_fractional_scores_and_wrong_model() {
        let obs = [(0, 0, 1.5), (0, 1, 2.0)];
        let data = RatingDataset::from_dense(1, 2, &obs, 1.0, 3.0).unwrap();
        let (cfg, ocfg) = toy_config(3);
        let err = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(1, 0)).unwrap_err();
        assert!(matches!(err, Error::BadParameter(_)));

        let data = toy_data(3);
        let (mut cfg, ocfg) = toy_config(3);
        cfg.model = ModelKind::Bnp;
        let err = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn postprocess_moves_the_sides_onto_each_others_means() {
        let data = toy_data(5);
        let (cfg, ocfg) = toy_config(5);
        let mut od = run_ordinal_chain(&data, &cfg, &ocfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        let before = od.draws.clone();
        ordinal_postprocess(&mut od).unwrap();
        assert!(od.draws.centered);
        for t in 0..before.len() {
            let mu_g: f64 = before.subject_weights[t]
                .iter()
                .zip(&before.subject_atoms[t])
                .map(|(w, a)| w * a.mean)
                .sum();
            let eta_h: f64 = before.rater_weights[t]
                .iter()
                .zip(&before.rater_atoms[t])
                .map(|(w, a)| w * a.bias)
                .sum();
            // theta + tau is preserved cell by cell.
            for i in 0..before.theta[t].len() {
                for j in 0..before.tau[t].len() {
                    let orig = before.theta[t][i] + before.tau[t][j];
                    let cent = od.draws.theta[t][i] + od.draws.tau[t][j];
                    assert!((orig - cent).abs() < 1e-9);
                }
            }
            let new_mu_g: f64 = od.draws.subject_weights[t]
                .iter()
                .zip(&od.draws.subject_atoms[t])
                .map(|(w, a)| w * a.mean)
                .sum();
            let new_eta_h: f64 = od.draws.rater_weights[t]
                .iter()
                .zip(&od.draws.rater_atoms[t])
                .map(|(w, a)| w * a.bias)
                .sum();
            assert!((new_mu_g - eta_h).abs() < 1e-9);
            assert!((new_eta_h - mu_g).abs() < 1e-9);
            assert!(
                (od.draws.subject_base[t].mean
                    - (before.subject_base[t].mean - mu_g + eta_h))
                    .abs()
                    < 1e-12
            );
        }
        // Zero means make the transform the identity.
        let mut identity = OrdinalDraws {
            draws: before.clone(),
            thresholds: od.thresholds.clone(),
        };
        for t in 0..identity.draws.len() {
            for a in &mut identity.draws.subject_atoms[t] {
                a.mean = 0.0;
            }
            for a in &mut identity.draws.rater_atoms[t] {
                a.bias = 0.0;
            }
        }
        let frozen = identity.draws.theta.clone();
        ordinal_postprocess(&mut identity).unwrap();
        assert_eq!(identity.draws.theta, frozen);

        let err = ordinal_postprocess(&mut od).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }
}
