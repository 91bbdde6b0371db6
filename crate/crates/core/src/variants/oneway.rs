//! One-way reduced model: `Y[i][j] = theta[i] + eps[i][j]` with a
//! Dirichlet-process mixture over per-observation error components.
//!
//! The subject side reuses the main sampler's blocks on an embedded
//! [`ChainState`] whose rater-side vectors stay empty. Errors get their own
//! mixture: components carry a mean `eta` and variance `phi2` drawn from
//! `N(eta0, D0) x InvGamma(shape, rate)`, and every observation is allocated
//! individually. The component shape stays fixed at [`ERROR_SHAPE`]; `eta0`,
//! `D0` and the rate get conjugate hyper updates.
//!
//! Draws land in [`ChainDraws`] with the error mixture in the rater-side
//! slots: component `bias`/`bias_var` hold `(eta, phi2)`, the summary
//! `bias_var` holds the full error-mixture variance, and the reliability
//! slots (`gamma`, `beta`, `relia_mean`, `resid_mean`) are inert. The bias
//! density of such draws is therefore the error density.

use crate::data::{
    ChainState, ClusterCensus, HyperConfig, ModelKind, RaterAtom, RaterBase, RatingDataset,
    SubjectBase,
};
use crate::dists::{sample_beta, sample_gamma, sample_inv_gamma, sample_normal};
use crate::mixture::{stick_break, subject_moments};
use crate::sampler::conditionals::{atom_mean_posterior, base_mean_posterior, base_var_posterior, theta_posterior};
use crate::sampler::{
    draw_allocation, draw_subject_atom, mean, occupancy, occupied_mixture, update_alpha,
    update_g0_hyper, update_sticks, update_subject_alloc_and_weights, update_subject_atoms,
    variance, ChainDraws, DmCounters, RaterSummary, SubjectSummary, SweepPlan,
};
use crate::{ChainRng, Error, Result};
use rand::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Fixed shape of the error-variance component prior. The reduced model's
/// base measure gives no shape hyper scheme, so the shape stays at a value
/// with a finite prior mean while the rate carries the adaptation.
pub const ERROR_SHAPE: f64 = 2.0;

/// Error-mixture component: observation errors are N(eta, phi2) within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorAtom {
    pub eta: f64,
    pub phi2: f64,
}

/// Base measure of the error mixture: eta ~ N(mean, var) and
/// 1/phi2 ~ Gamma(shape, rate), so phi2 itself is inverse-gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBase {
    pub mean: f64,
    pub var: f64,
    pub shape: f64,
    pub rate: f64,
}

/// Chain state of the reduced model. The embedded two-way state carries the
/// subject side, `theta`, and both concentrations (`alpha2` belongs to the
/// error mixture); its rater-side vectors are empty and never touched.
#[derive(Debug, Clone)]
pub struct OneWayState {
    pub core: ChainState,
    pub error_atoms: Vec<ErrorAtom>,
    pub error_sticks: Vec<f64>,
    pub error_weights: Vec<f64>,
    /// One component per observation, in dataset order.
    pub error_alloc: Vec<usize>,
    pub error_base: ErrorBase,
}

/// Observation indices of every subject, in dataset order. Built once per
/// chain so the error allocations can be joined with the ratings.
fn subject_obs_index(data: &RatingDataset) -> Vec<Vec<usize>> {
    let mut by_subject = vec![Vec::new(); data.num_subjects()];
    for (idx, o) in data.observations().iter().enumerate() {
        by_subject[o.subject].push(idx);
    }
    by_subject
}

/// Builds the starting state by the same moment-matching recipe as the main
/// sampler: true scores at subject means, the error base matched to the
/// residual spread, components from the bases, allocations uniform, sticks
/// from their priors at the prior-mean concentrations.
pub fn init_oneway(data: &RatingDataset, cfg: &HyperConfig, rng: &mut ChainRng) -> Result<OneWayState> {
    let plan = SweepPlan::for_model(cfg.model, cfg.truncation);
    let (r1, r2) = (plan.subject_trunc, plan.rater_trunc);
    let n_sub = data.num_subjects();
    let n_obs = data.num_observations();

    let mut theta = vec![0.0; n_sub];
    for (i, t) in theta.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for o in data.ratings_of_subject(i) {
            sum += o.score;
            n += 1;
        }
        *t = sum / n as f64;
    }
    let resid: Vec<f64> = data
        .observations()
        .iter()
        .map(|o| o.score - theta[o.subject])
        .collect();
    let resid_var = variance(&resid).max(1e-3);

    let theta_var = variance(&theta);
    let subject_base = SubjectBase {
        mean: mean(&theta),
        var: theta_var + 1.0,
        prec_shape: 2.0,
        prec_mean: 1.0 / (theta_var + 1.0),
    };
    let error_base = ErrorBase {
        mean: 0.0,
        var: variance(&resid) + 1.0,
        shape: ERROR_SHAPE,
        // Prior mean of 1/phi2 is shape/rate = 1/resid_var.
        rate: ERROR_SHAPE * resid_var,
    };

    let mut subject_atoms = Vec::with_capacity(r1);
    for _ in 0..r1 {
        subject_atoms.push(draw_subject_atom(&subject_base, rng)?);
    }
    let mut error_atoms = Vec::with_capacity(r2);
    for _ in 0..r2 {
        error_atoms.push(draw_error_atom(&error_base, rng)?);
    }

    let subject_alloc: Vec<usize> = (0..n_sub)
        .map(|_| if r1 > 1 { rng.random_range(0..r1) } else { 0 })
        .collect();
    let error_alloc: Vec<usize> = (0..n_obs)
        .map(|_| if r2 > 1 { rng.random_range(0..r2) } else { 0 })
        .collect();

    let alpha1 = cfg.alpha1_prior.mean();
    let alpha2 = cfg.alpha2_prior.mean();
    let mut subject_sticks = Vec::with_capacity(r1);
    for _ in 0..r1 - 1 {
        subject_sticks.push(sample_beta(1.0, alpha1, rng)?);
    }
    subject_sticks.push(1.0);
    let mut error_sticks = Vec::with_capacity(r2);
    for _ in 0..r2 - 1 {
        error_sticks.push(sample_beta(1.0, alpha2, rng)?);
    }
    error_sticks.push(1.0);
    let subject_weights = stick_break(&subject_sticks)?;
    let error_weights = stick_break(&error_sticks)?;

    let core = ChainState {
        theta,
        subject_atoms,
        subject_sticks,
        subject_weights,
        subject_alloc,
        alpha1,
        subject_base,
        tau: Vec::new(),
        inv_sigma2: Vec::new(),
        rater_atoms: Vec::new(),
        rater_sticks: Vec::new(),
        rater_weights: Vec::new(),
        rater_alloc: Vec::new(),
        alpha2,
        rater_base: RaterBase {
            bias_mean: 0.0,
            bias_var: 1.0,
            prec_shape: 1.0,
            prec_mean: 1.0,
            gamma_shape: 1.0,
            gamma_mean: 1.0,
            inv_relia_shape: 1.0,
            inv_relia_mean: 1.0,
        },
    };
    Ok(OneWayState {
        core,
        error_atoms,
        error_sticks,
        error_weights,
        error_alloc,
        error_base,
    })
}

fn draw_error_atom(base: &ErrorBase, rng: &mut ChainRng) -> Result<ErrorAtom> {
    let eta = sample_normal(base.mean, base.var, rng)?;
    let prec = sample_gamma(base.shape, base.rate, rng)?;
    Ok(ErrorAtom { eta, phi2: 1.0 / prec })
}

/// Draws every true score from its normal full conditional; the likelihood
/// terms run over the subject's observations and their error components.
pub fn update_theta_oneway(
    state: &mut OneWayState,
    data: &RatingDataset,
    by_subject: &[Vec<usize>],
    rng: &mut ChainRng,
) -> Result<()> {
    let obs = data.observations();
    for i in 0..state.core.theta.len() {
        let atom = &state.core.subject_atoms[state.core.subject_alloc[i]];
        let mut prec_sum = 0.0;
        let mut weighted = 0.0;
        for &idx in &by_subject[i] {
            let e = &state.error_atoms[state.error_alloc[idx]];
            prec_sum += 1.0 / e.phi2;
            weighted += (obs[idx].score - e.eta) / e.phi2;
        }
        let p = theta_posterior(atom.mean, atom.var, prec_sum, weighted);
        state.core.theta[i] = sample_normal(p.mean, p.var, rng)?;
    }
    Ok(())
}

/// Redraws every error component: empty ones from the base measure,
/// occupied ones from their conjugate conditionals (mean first, then the
/// precision about the new mean).
pub fn update_error_atoms(
    state: &mut OneWayState,
    data: &RatingDataset,
    census: &ClusterCensus,
    rng: &mut ChainRng,
) -> Result<()> {
    let obs = data.observations();
    let base = state.error_base;
    for k in 0..state.error_atoms.len() {
        let members = &census.members[k];
        if members.is_empty() {
            state.error_atoms[k] = draw_error_atom(&base, rng)?;
            continue;
        }
        let eps = |idx: usize| obs[idx].score - state.core.theta[obs[idx].subject];
        let sum: f64 = members.iter().map(|&idx| eps(idx)).sum();
        let p = atom_mean_posterior(
            base.mean,
            base.var,
            state.error_atoms[k].phi2,
            members.len(),
            sum,
        );
        let new_eta = sample_normal(p.mean, p.var, rng)?;
        let ssd: f64 = members
            .iter()
            .map(|&idx| (eps(idx) - new_eta) * (eps(idx) - new_eta))
            .sum();
        let prec = sample_gamma(
            base.shape + members.len() as f64 / 2.0,
            base.rate + ssd / 2.0,
            rng,
        )?;
        state.error_atoms[k] = ErrorAtom { eta: new_eta, phi2: 1.0 / prec };
    }
    Ok(())
}

/// Reallocates observations to error components under the current weights,
/// then redraws sticks and weights from the refreshed census.
pub fn update_error_alloc_and_weights(
    state: &mut OneWayState,
    data: &RatingDataset,
    rng: &mut ChainRng,
) -> Result<ClusterCensus> {
    let r = state.error_atoms.len();
    // log pi_k - log(2 pi phi2_k)/2 and 1/(2 phi2_k), per component.
    let consts: Vec<(f64, f64, f64)> = (0..r)
        .map(|k| {
            let a = &state.error_atoms[k];
            (
                state.error_weights[k].ln() - 0.5 * (LN_2PI + a.phi2.ln()),
                0.5 / a.phi2,
                a.eta,
            )
        })
        .collect();
    let mut lw = vec![0.0; r];
    let mut scratch = Vec::with_capacity(r);
    for (idx, o) in data.observations().iter().enumerate() {
        let e = o.score - state.core.theta[o.subject];
        for (k, &(c, half_prec, m)) in consts.iter().enumerate() {
            lw[k] = c - half_prec * (e - m) * (e - m);
        }
        state.error_alloc[idx] = draw_allocation(&lw, &mut scratch, rng)?;
    }
    let census = ClusterCensus::from_allocations(&state.error_alloc, r)?;
    update_sticks(
        &mut state.error_sticks,
        &mut state.error_weights,
        &census,
        state.core.alpha2,
        rng,
    )?;
    Ok(census)
}

/// Joint update of the error base measure and the empty error components:
/// the hypers condition on occupied components only (empty ones integrate
/// out and redraw from the refreshed base afterwards, one exact Gibbs
/// block). Coordinates: normal mean, inverse-gamma variance, then the gamma
/// rate of the component precisions (the shape is fixed, so the rate's
/// gamma hyperprior stays conjugate).
pub fn update_error_hyper(
    state: &mut OneWayState,
    census: &ClusterCensus,
    cfg: &HyperConfig,
    rng: &mut ChainRng,
) -> Result<()> {
    let occupied: Vec<ErrorAtom> = state
        .error_atoms
        .iter()
        .enumerate()
        .filter(|&(k, _)| !census.members[k].is_empty())
        .map(|(_, a)| *a)
        .collect();
    let r = occupied.len();
    let eta_sum: f64 = occupied.iter().map(|a| a.eta).sum();
    let p = base_mean_posterior(
        cfg.eta0_prior_mean,
        cfg.eta0_prior_var,
        state.error_base.var,
        r,
        eta_sum,
    );
    state.error_base.mean = sample_normal(p.mean, p.var, rng)?;

    let ssd: f64 = occupied
        .iter()
        .map(|a| (a.eta - state.error_base.mean) * (a.eta - state.error_base.mean))
        .sum();
    let ig = base_var_posterior(cfg.d0_prior, r, ssd);
    state.error_base.var = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let sum_prec: f64 = occupied.iter().map(|a| 1.0 / a.phi2).sum();
    // Rate prior constants reuse the a0-mean hyper slot as a gamma
    // (shape, rate) pair.
    let (q, qq) = (cfg.a0_mean_prior.shape, cfg.a0_mean_prior.scale);
    state.error_base.rate =
        sample_gamma(q + r as f64 * state.error_base.shape, qq + sum_prec, rng)?;

    let base = state.error_base;
    for k in 0..state.error_atoms.len() {
        if census.members[k].is_empty() {
            state.error_atoms[k] = draw_error_atom(&base, rng)?;
        }
    }
    Ok(())
}

/// One full sweep of the reduced model, mirroring the main sweep's order:
/// subject side first, then the error mixture and its hypers.
pub fn sweep_oneway(
    state: &mut OneWayState,
    data: &RatingDataset,
    by_subject: &[Vec<usize>],
    cfg: &HyperConfig,
    plan: &SweepPlan,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<()> {
    update_theta_oneway(state, data, by_subject, rng)?;
    let mut census =
        ClusterCensus::from_allocations(&state.core.subject_alloc, plan.subject_trunc)?;
    update_subject_atoms(&mut state.core, &census, rng)?;
    if plan.subject_clustering {
        census = update_subject_alloc_and_weights(&mut state.core, rng)?;
        state.core.alpha1 = update_alpha(&state.core.subject_sticks, cfg.alpha1_prior, rng)?;
    }
    update_g0_hyper(&mut state.core, &census, cfg, counters, rng)?;

    let mut census = ClusterCensus::from_allocations(&state.error_alloc, plan.rater_trunc)?;
    update_error_atoms(state, data, &census, rng)?;
    if plan.rater_clustering {
        census = update_error_alloc_and_weights(state, data, rng)?;
        state.core.alpha2 = update_alpha(&state.error_sticks, cfg.alpha2_prior, rng)?;
    }
    update_error_hyper(state, &census, cfg, rng)?;
    Ok(())
}

/// Structural problems with a reduced-model state; empty when consistent.
pub fn validate_oneway(state: &OneWayState, data: &RatingDataset) -> Vec<String> {
    let mut problems = Vec::new();
    if state.core.theta.len() != data.num_subjects() {
        problems.push("theta length differs from the subject count".into());
    }
    if state.error_alloc.len() != data.num_observations() {
        problems.push("one error allocation per observation is required".into());
    }
    let r = state.error_atoms.len();
    if state.error_alloc.iter().any(|&k| k >= r) {
        problems.push("error allocation out of range".into());
    }
    if state.error_atoms.iter().any(|a| !a.eta.is_finite() || !(a.phi2 > 0.0)) {
        problems.push("error component out of domain".into());
    }
    let wsum: f64 = state.error_weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-9 {
        problems.push(format!("error weights sum to {wsum}"));
    }
    if state.error_sticks.last() != Some(&1.0) {
        problems.push("last error stick must be one".into());
    }
    problems
}

/// Per-draw summaries from the occupied sub-mixtures, like the main
/// sampler's.
fn summarize_oneway(state: &OneWayState) -> Result<(SubjectSummary, RaterSummary)> {
    let s_counts = occupancy(&state.core.subject_alloc, state.core.subject_atoms.len());
    let s_mix = occupied_mixture(&state.core.subject_weights, &s_counts);
    let s_w: Vec<f64> = s_mix.iter().map(|&(_, w)| w).collect();
    let s_means: Vec<f64> =
        s_mix.iter().map(|&(k, _)| state.core.subject_atoms[k].mean).collect();
    let s_vars: Vec<f64> = s_mix.iter().map(|&(k, _)| state.core.subject_atoms[k].var).collect();
    let sm = subject_moments(&s_w, &s_means, &s_vars)?;

    let e_counts = occupancy(&state.error_alloc, state.error_atoms.len());
    let e_mix = occupied_mixture(&state.error_weights, &e_counts);
    let eta_mean: f64 = e_mix.iter().map(|&(k, w)| w * state.error_atoms[k].eta).sum();
    // Full error-mixture variance: between-component spread plus the
    // within-component variances.
    let phi2_h: f64 = e_mix
        .iter()
        .map(|&(k, w)| {
            let a = &state.error_atoms[k];
            w * ((a.eta - eta_mean) * (a.eta - eta_mean) + a.phi2)
        })
        .sum();
    let icc = sm.var / (sm.var + phi2_h);
    Ok((
        SubjectSummary { mean: sm.mean, var: sm.var, occupied: s_mix.len() },
        RaterSummary {
            bias_mean: eta_mean,
            bias_var: phi2_h,
            relia_mean: 0.0,
            resid_mean: 0.0,
            icc_a: icc,
            occupied: e_mix.len(),
        },
    ))
}

fn record_oneway(
    draws: &mut ChainDraws,
    state: &OneWayState,
    data: &RatingDataset,
) -> Result<()> {
    debug_assert!(
        validate_oneway(state, data).is_empty(),
        "invalid retained state: {:?}",
        validate_oneway(state, data)
    );
    let (ss, rs) = summarize_oneway(state)?;
    let loglik: Vec<f64> = data
        .observations()
        .iter()
        .enumerate()
        .map(|(idx, o)| {
            let a = &state.error_atoms[state.error_alloc[idx]];
            let e = o.score - state.core.theta[o.subject] - a.eta;
            0.5 * (-a.phi2.ln() - LN_2PI - e * e / a.phi2)
        })
        .collect();
    draws.theta.push(state.core.theta.clone());
    draws.tau.push(Vec::new());
    draws.inv_sigma2.push(Vec::new());
    draws.alpha1.push(state.core.alpha1);
    draws.alpha2.push(state.core.alpha2);
    draws.subject_base.push(state.core.subject_base);
    draws.rater_base.push(RaterBase {
        bias_mean: state.error_base.mean,
        bias_var: state.error_base.var,
        prec_shape: state.error_base.shape,
        prec_mean: state.error_base.shape / state.error_base.rate,
        gamma_shape: 1.0,
        gamma_mean: 1.0,
        inv_relia_shape: 1.0,
        inv_relia_mean: 1.0,
    });
    draws.subject_weights.push(state.core.subject_weights.clone());
    draws.subject_atoms.push(state.core.subject_atoms.clone());
    draws.rater_weights.push(state.error_weights.clone());
    draws.rater_atoms.push(
        state
            .error_atoms
            .iter()
            .map(|a| RaterAtom { bias: a.eta, bias_var: a.phi2, gamma: 1.0, beta: 1.0 })
            .collect(),
    );
    draws
        .subject_occ
        .push(occupancy(&state.core.subject_alloc, state.core.subject_atoms.len()));
    draws
        .rater_occ
        .push(occupancy(&state.error_alloc, state.error_atoms.len()));
    draws.subject_summary.push(ss);
    draws.rater_summary.push(rs);
    draws.loglik.push(loglik);
    Ok(())
}

/// Runs one reduced-model chain with the shared retention schedule. The
/// configured model must be the one-way kind.
pub fn run_oneway_chain(
    data: &RatingDataset,
    cfg: &HyperConfig,
    rng: &mut ChainRng,
) -> Result<ChainDraws> {
    cfg.validate()?;
    if cfg.model != ModelKind::OneWay {
        return Err(Error::Usage(format!(
            "one-way driver got model {:?}",
            cfg.model
        )));
    }
    let plan = SweepPlan::for_model(cfg.model, cfg.truncation);
    let by_subject = subject_obs_index(data);
    let mut state = init_oneway(data, cfg, rng)?;
    let mut counters = DmCounters::default();
    let mut draws = ChainDraws::with_capacity(cfg.retained_draws());
    for t in 1..=cfg.iters {
        sweep_oneway(&mut state, data, &by_subject, cfg, &plan, &mut counters, rng)
            .map_err(|e| Error::NumericalFailure(format!("sweep {t}: {e}")))?;
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            record_oneway(&mut draws, &state, data)?;
        }
    }
    draws.dm = counters;
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;

    fn toy_data() -> RatingDataset {
        let mut obs = Vec::new();
        let scores = [
            [52.0, 48.0, 55.0],
            [61.0, 58.0, 64.0],
            [45.0, 41.0, 47.0],
            [70.0, 66.0, 72.0],
            [38.0, 35.0, 40.0],
            [57.0, 54.0, 59.0],
        ];
        for (i, row) in scores.iter().enumerate() {
            for &s in row {
                obs.push((i, obs.len() % 3, s));
            }
        }
        RatingDataset::from_dense(6, 3, &obs, 0.0, 100.0).unwrap()
    }

    fn toy_config() -> HyperConfig {
        let mut cfg = HyperConfig::default_for_scale(0.0, 100.0);
        cfg.model = ModelKind::OneWay;
        cfg.truncation = 4;
        cfg.iters = 40;
        cfg.burn_in = 20;
        cfg.thin = 2;
        cfg
    }

    #[test]
    fn init_meets_its_contract() {
        let data = toy_data();
        let cfg = toy_config();
        let mut rng = chain_rng(cfg.seed, 0);
        let s = init_oneway(&data, &cfg, &mut rng).unwrap();
        assert!((s.core.theta[0] - (52.0 + 48.0 + 55.0) / 3.0).abs() < 1e-12);
        assert_eq!(s.error_alloc.len(), data.num_observations());
        assert_eq!(s.error_atoms.len(), 4);
        assert_eq!(*s.error_sticks.last().unwrap(), 1.0);
        assert_eq!(s.error_base.shape, ERROR_SHAPE);
        assert!(s.error_base.rate > 0.0);
        assert!((s.core.alpha2 - cfg.alpha2_prior.mean()).abs() < 1e-12);
        assert!(validate_oneway(&s, &data).is_empty());
    }

    #[test]
    fn theta_tracks_the_data_when_error_variance_vanishes() {
        let data = RatingDataset::from_dense(1, 1, &[(0, 0, 60.0)], 0.0, 100.0).unwrap();
        let mut cfg = toy_config();
        cfg.truncation = 1;
        let mut rng = chain_rng(7, 0);
        let mut s = init_oneway(&data, &cfg, &mut rng).unwrap();
        s.core.subject_atoms[0].mean = 50.0;
        s.core.subject_atoms[0].var = 100.0;
        s.error_atoms[0] = ErrorAtom { eta: 2.0, phi2: 1e-12 };
        let by_subject = subject_obs_index(&data);
        update_theta_oneway(&mut s, &data, &by_subject, &mut rng).unwrap();
        // Posterior collapses onto Y - eta = 58 as the error precision blows up.
        assert!((s.core.theta[0] - 58.0).abs() < 1e-3);
    }

    #[test]
    fn summary_matches_the_variance_decomposition_by_hand() {
        let data = toy_data();
        let cfg = toy_config();
        let mut rng = chain_rng(cfg.seed, 0);
        let mut s = init_oneway(&data, &cfg, &mut rng).unwrap();
        s.core.subject_atoms.truncate(1);
        s.core.subject_weights = vec![1.0];
        s.core.subject_alloc = vec![0; 6];
        s.core.subject_atoms[0].mean = 50.0;
        s.core.subject_atoms[0].var = 30.0;
        s.error_atoms = vec![
            ErrorAtom { eta: -1.0, phi2: 4.0 },
            ErrorAtom { eta: 1.0, phi2: 9.0 },
        ];
        s.error_weights = vec![0.5, 0.5];
        s.error_alloc = vec![0; data.num_observations()];
        let (ss, rs) = summarize_oneway(&s).unwrap();
        assert!((ss.var - 30.0).abs() < 1e-12);
        assert!((rs.bias_mean - 0.0).abs() < 1e-12);
        // 0.5 (1 + 4) + 0.5 (1 + 9) = 7.5 total error variance.
        assert!((rs.bias_var - 7.5).abs() < 1e-12);
        assert!((rs.icc_a - 30.0 / 37.5).abs() < 1e-12);
    }

    #[test]
    fn empty_error_components_redraw_from_the_base() {
        let data = toy_data();
        let cfg = toy_config();
        let mut rng = chain_rng(3, 0);
        let mut s = init_oneway(&data, &cfg, &mut rng).unwrap();
        s.error_alloc = vec![0; data.num_observations()];
        let before = s.error_atoms.clone();
        let census = ClusterCensus::from_allocations(&s.error_alloc, 4).unwrap();
        update_error_atoms(&mut s, &data, &census, &mut rng).unwrap();
        for k in 1..4 {
            assert_ne!(s.error_atoms[k], before[k]);
            assert!(s.error_atoms[k].phi2 > 0.0);
        }
    }

    #[test]
    fn identical_ratings_drive_the_icc_to_one() {
        let mut obs = Vec::new();
        for i in 0..8 {
            let v = 30.0 + 5.0 * i as f64;
            for j in 0..3 {
                obs.push((i, j, v));
            }
        }
        let data = RatingDataset::from_dense(8, 3, &obs, 0.0, 100.0).unwrap();
        let mut cfg = toy_config();
        cfg.truncation = 3;
        cfg.iters = 80;
        cfg.burn_in = 40;
        let mut rng = chain_rng(cfg.seed, 0);
        let draws = run_oneway_chain(&data, &cfg, &mut rng).unwrap();
        let icc = mean(&draws.rater_summary.iter().map(|r| r.icc_a).collect::<Vec<_>>());
        assert!(icc > 0.99, "posterior mean ICC {icc}");
    }

    #[test]
    fn single_component_reduction_recovers_the_anova_icc() {
        // theta ~ N(50, 50) and eps ~ N(0, 150): ICC = 50/200 = 0.25.
        let mut rng = chain_rng(11, 9);
        let mut obs = Vec::new();
        for i in 0..500 {
            let th = sample_normal(50.0, 50.0, &mut rng).unwrap();
            for j in 0..4 {
                let y = th + sample_normal(0.0, 150.0, &mut rng).unwrap();
                obs.push((i, j, y));
            }
        }
        let data = RatingDataset::from_dense(500, 4, &obs, -50.0, 150.0).unwrap();
        let mut cfg = HyperConfig::default_for_scale(-50.0, 150.0);
        cfg.model = ModelKind::OneWay;
        cfg.truncation = 1;
        cfg.iters = 1200;
        cfg.burn_in = 400;
        cfg.thin = 4;
        let mut rng = chain_rng(cfg.seed, 0);
        let draws = run_oneway_chain(&data, &cfg, &mut rng).unwrap();
        let icc = mean(&draws.rater_summary.iter().map(|r| r.icc_a).collect::<Vec<_>>());
        assert!((icc - 0.25).abs() < 0.03, "posterior mean ICC {icc}");
    }

    #[test]
    fn chains_are_deterministic_given_seed_and_stream() {
        let data = toy_data();
        let cfg = toy_config();
        let a = run_oneway_chain(&data, &cfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        let b = run_oneway_chain(&data, &cfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        let c = run_oneway_chain(&data, &cfg, &mut chain_rng(cfg.seed, 1)).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.rater_weights, b.rater_weights);
        assert_ne!(a.theta, c.theta);
    }

    #[test]
    fn retained_draws_use_the_rater_slots_for_the_error_mixture() {
        let data = toy_data();
        let cfg = toy_config();
        let draws = run_oneway_chain(&data, &cfg, &mut chain_rng(cfg.seed, 0)).unwrap();
        assert_eq!(draws.len(), cfg.retained_draws());
        for t in 0..draws.len() {
            assert!(draws.tau[t].is_empty());
            assert!(draws.inv_sigma2[t].is_empty());
            for a in &draws.rater_atoms[t] {
                assert!(a.bias_var > 0.0);
                assert_eq!(a.gamma, 1.0);
                assert_eq!(a.beta, 1.0);
            }
            let rs = &draws.rater_summary[t];
            assert_eq!(rs.relia_mean, 0.0);
            assert_eq!(rs.resid_mean, 0.0);
            assert!(rs.icc_a > 0.0 && rs.icc_a <= 1.0);
            assert!(draws.loglik[t].iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn driver_refuses_other_model_kinds() {
        let data = toy_data();
        let mut cfg = toy_config();
        cfg.model = ModelKind::Bnp;
        let err = run_oneway_chain(&data, &cfg, &mut chain_rng(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }
}
