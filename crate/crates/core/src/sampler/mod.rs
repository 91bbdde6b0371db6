//! Blocked Gibbs sampler for the two-way rating model.
//!
//! One sweep visits the blocks in a fixed order: true scores, score-side
//! components, score-side allocations and sticks, score-side concentration
//! and base measure, then rater biases, reliabilities, rater-side
//! components, allocations, sticks, concentration and base measure. The
//! sweep plan disables the clustering blocks when a side is truncated to a
//! single component, which also removes their RNG draws, so the parametric
//! reduction can be reproduced draw for draw by an independent sampler.

pub mod conditionals;

use crate::data::{
    ChainState, ClusterCensus, HyperConfig, ModelKind, RaterAtom, RaterBase, RatingDataset,
    SubjectAtom, SubjectBase,
};
use crate::dists::{
    ln_gamma, sample_beta, sample_categorical, sample_gamma, sample_inv_gamma, sample_normal,
    GammaSR,
};
use crate::dm::{dm_gamma_shape_plain, dm_gamma_shape_shifted, DmInputs, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::mixture::{rater_moments, stick_break, subject_moments};
use crate::{ChainRng, Error, Result};
use rand::Rng;
use conditionals::{
    alpha_posterior, atom_mean_posterior, atom_precision_posterior, base_mean_posterior,
    base_scale_posterior, base_var_posterior, inv_beta_posterior, reliability_posterior,
    stick_posterior, tau_posterior, theta_posterior,
};

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Which blocks a sweep runs; clustering blocks are off when the matching
/// truncation level is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPlan {
    pub model: ModelKind,
    pub subject_trunc: usize,
    pub rater_trunc: usize,
    pub subject_clustering: bool,
    pub rater_clustering: bool,
    /// Off only for ordinal data with two categories, where the residual
    /// variances are unidentified and pinned to one.
    pub reliability: bool,
}

impl SweepPlan {
    pub fn for_model(model: ModelKind, truncation: usize) -> Self {
        let (subject_trunc, rater_trunc) = model.truncations(truncation);
        SweepPlan {
            model,
            subject_trunc,
            rater_trunc,
            subject_clustering: subject_trunc > 1,
            rater_clustering: rater_trunc > 1,
            reliability: true,
        }
    }
}

/// Tally of mean-field shape updates that did not converge or fell back to
/// a prior draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DmCounters {
    pub fallbacks: u64,
    pub nonconverged: u64,
}

/// Per-draw mixture summary on the score side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectSummary {
    pub mean: f64,
    pub var: f64,
    pub occupied: usize,
}

/// Per-draw mixture summary on the rater side, with the agreement ICC that
/// the two sides imply together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaterSummary {
    pub bias_mean: f64,
    pub bias_var: f64,
    pub relia_mean: f64,
    pub resid_mean: f64,
    pub icc_a: f64,
    pub occupied: usize,
}

/// Everything retained from one chain. Vectors are indexed by retained draw.
#[derive(Debug, Clone)]
pub struct ChainDraws {
    pub theta: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
    pub inv_sigma2: Vec<Vec<f64>>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub subject_base: Vec<SubjectBase>,
    pub rater_base: Vec<RaterBase>,
    pub subject_weights: Vec<Vec<f64>>,
    pub subject_atoms: Vec<Vec<SubjectAtom>>,
    pub rater_weights: Vec<Vec<f64>>,
    pub rater_atoms: Vec<Vec<RaterAtom>>,
    /// Per-atom member counts, one row per draw; zero marks an empty cluster.
    pub subject_occ: Vec<Vec<u32>>,
    pub rater_occ: Vec<Vec<u32>>,
    pub subject_summary: Vec<SubjectSummary>,
    pub rater_summary: Vec<RaterSummary>,
    /// Pointwise log likelihood of each observation, one row per draw.
    pub loglik: Vec<Vec<f64>>,
    pub dm: DmCounters,
    /// Set once draws have been recentered; guards double centering.
    pub centered: bool,
}

impl ChainDraws {
    pub fn with_capacity(n: usize) -> Self {
        ChainDraws {
            theta: Vec::with_capacity(n),
            tau: Vec::with_capacity(n),
            inv_sigma2: Vec::with_capacity(n),
            alpha1: Vec::with_capacity(n),
            alpha2: Vec::with_capacity(n),
            subject_base: Vec::with_capacity(n),
            rater_base: Vec::with_capacity(n),
            subject_weights: Vec::with_capacity(n),
            subject_atoms: Vec::with_capacity(n),
            rater_weights: Vec::with_capacity(n),
            rater_atoms: Vec::with_capacity(n),
            subject_occ: Vec::with_capacity(n),
            rater_occ: Vec::with_capacity(n),
            subject_summary: Vec::with_capacity(n),
            rater_summary: Vec::with_capacity(n),
            loglik: Vec::with_capacity(n),
            dm: DmCounters::default(),
            centered: false,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Concatenates chains into one pooled draw set. Chains must agree on
    /// entity dimensions and centering; warning counters add up.
    pub fn merge(chains: Vec<ChainDraws>) -> Result<ChainDraws> {
        let mut iter = chains.into_iter();
        let mut pooled = iter
            .next()
            .ok_or_else(|| Error::BadParameter("no chains to merge".into()))?;
        for c in iter {
            let same_dims = c.theta.first().map(Vec::len) == pooled.theta.first().map(Vec::len)
                && c.tau.first().map(Vec::len) == pooled.tau.first().map(Vec::len);
            if !same_dims || c.centered != pooled.centered {
                return Err(Error::BadParameter(
                    "chains disagree in entity dimensions or centering".into(),
                ));
            }
            pooled.theta.extend(c.theta);
            pooled.tau.extend(c.tau);
            pooled.inv_sigma2.extend(c.inv_sigma2);
            pooled.alpha1.extend(c.alpha1);
            pooled.alpha2.extend(c.alpha2);
            pooled.subject_base.extend(c.subject_base);
            pooled.rater_base.extend(c.rater_base);
            pooled.subject_weights.extend(c.subject_weights);
            pooled.subject_atoms.extend(c.subject_atoms);
            pooled.rater_weights.extend(c.rater_weights);
            pooled.rater_atoms.extend(c.rater_atoms);
            pooled.subject_occ.extend(c.subject_occ);
            pooled.rater_occ.extend(c.rater_occ);
            pooled.subject_summary.extend(c.subject_summary);
            pooled.rater_summary.extend(c.rater_summary);
            pooled.loglik.extend(c.loglik);
            pooled.dm.fallbacks += c.dm.fallbacks;
            pooled.dm.nonconverged += c.dm.nonconverged;
        }
        Ok(pooled)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Builds the starting state. True scores start at subject means, biases at
/// mean rater residuals, reliabilities at the pooled residual precision;
/// base measures are moment-matched to those starting values; components
/// are drawn from the bases, allocations uniformly, sticks from their
/// priors at the prior-mean concentration.
pub fn init_state(data: &RatingDataset, cfg: &HyperConfig, rng: &mut ChainRng) -> Result<ChainState> {
    let plan = SweepPlan::for_model(cfg.model, cfg.truncation);
    let (r1, r2) = (plan.subject_trunc, plan.rater_trunc);
    let (n_sub, n_rat) = (data.num_subjects(), data.num_raters());

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
    let mut tau = vec![0.0; n_rat];
    for (j, t) in tau.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for o in data.ratings_of_rater(j) {
            sum += o.score - theta[o.subject];
            n += 1;
        }
        *t = sum / n as f64;
    }
    let resid: Vec<f64> = data
        .observations()
        .iter()
        .map(|o| o.score - theta[o.subject] - tau[o.rater])
        .collect();
    let resid_var = variance(&resid).max(1e-3);
    let inv_sigma2 = vec![1.0 / resid_var; n_rat];

    let theta_var = variance(&theta);
    let tau_var = variance(&tau);
    let subject_base = SubjectBase {
        mean: mean(&theta),
        var: theta_var + 1.0,
        prec_shape: 2.0,
        prec_mean: 1.0 / (theta_var + 1.0),
    };
    let rater_base = RaterBase {
        bias_mean: 0.0,
        bias_var: tau_var + 1.0,
        prec_shape: 2.0,
        prec_mean: 1.0 / (tau_var + 1.0),
        gamma_shape: 2.0,
        gamma_mean: 2.0,
        inv_relia_shape: 2.0,
        inv_relia_mean: resid_var,
    };

    let mut subject_atoms = Vec::with_capacity(r1);
    for _ in 0..r1 {
        subject_atoms.push(draw_subject_atom(&subject_base, rng)?);
    }
    let mut rater_atoms = Vec::with_capacity(r2);
    for _ in 0..r2 {
        rater_atoms.push(draw_rater_atom(&rater_base, rng)?);
    }

    let subject_alloc: Vec<usize> = (0..n_sub)
        .map(|_| if r1 > 1 { rng.random_range(0..r1) } else { 0 })
        .collect();
    let rater_alloc: Vec<usize> = (0..n_rat)
        .map(|_| if r2 > 1 { rng.random_range(0..r2) } else { 0 })
        .collect();

    let alpha1 = cfg.alpha1_prior.mean();
    let alpha2 = cfg.alpha2_prior.mean();
    let mut subject_sticks = Vec::with_capacity(r1);
    for _ in 0..r1 - 1 {
        subject_sticks.push(sample_beta(1.0, alpha1, rng)?);
    }
    subject_sticks.push(1.0);
    let mut rater_sticks = Vec::with_capacity(r2);
    for _ in 0..r2 - 1 {
        rater_sticks.push(sample_beta(1.0, alpha2, rng)?);
    }
    rater_sticks.push(1.0);
    let subject_weights = stick_break(&subject_sticks)?;
    let rater_weights = stick_break(&rater_sticks)?;

    Ok(ChainState {
        theta,
        subject_atoms,
        subject_sticks,
        subject_weights,
        subject_alloc,
        alpha1,
        subject_base,
        tau,
        inv_sigma2,
        rater_atoms,
        rater_sticks,
        rater_weights,
        rater_alloc,
        alpha2,
        rater_base,
    })
}

pub(crate) fn draw_subject_atom(base: &SubjectBase, rng: &mut ChainRng) -> Result<SubjectAtom> {
    let mean = sample_normal(base.mean, base.var, rng)?;
    let prec = sample_gamma(base.prec_shape, base.prec_shape / base.prec_mean, rng)?;
    Ok(SubjectAtom { mean, var: 1.0 / prec })
}

fn draw_rater_atom(base: &RaterBase, rng: &mut ChainRng) -> Result<RaterAtom> {
    let bias = sample_normal(base.bias_mean, base.bias_var, rng)?;
    let prec = sample_gamma(base.prec_shape, base.prec_shape / base.prec_mean, rng)?;
    let gamma = sample_gamma(base.gamma_shape, base.gamma_shape / base.gamma_mean, rng)?;
    let inv_beta = sample_gamma(
        base.inv_relia_shape,
        base.inv_relia_shape / base.inv_relia_mean,
        rng,
    )?;
    Ok(RaterAtom {
        bias,
        bias_var: 1.0 / prec,
        gamma,
        beta: 1.0 / inv_beta,
    })
}

/// Draws every true score from its normal full conditional.
pub fn update_theta(state: &mut ChainState, data: &RatingDataset, rng: &mut ChainRng) -> Result<()> {
    for i in 0..state.theta.len() {
        let atom = &state.subject_atoms[state.subject_alloc[i]];
        let mut prec_sum = 0.0;
        let mut weighted = 0.0;
        for o in data.ratings_of_subject(i) {
            let u = state.inv_sigma2[o.rater];
            prec_sum += u;
            weighted += u * (o.score - state.tau[o.rater]);
        }
        let p = theta_posterior(atom.mean, atom.var, prec_sum, weighted);
        state.theta[i] = sample_normal(p.mean, p.var, rng)?;
    }
    Ok(())
}

/// Redraws every score-side component: empty ones from the base measure,
/// occupied ones from their conjugate conditionals (mean first, then the
/// precision about the new mean).
pub fn update_subject_atoms(
    state: &mut ChainState,
    census: &ClusterCensus,
    rng: &mut ChainRng,
) -> Result<()> {
    let base = state.subject_base;
    for n in 0..state.subject_atoms.len() {
        let members = &census.members[n];
        if members.is_empty() {
            state.subject_atoms[n] = draw_subject_atom(&base, rng)?;
            continue;
        }
        let sum: f64 = members.iter().map(|&i| state.theta[i]).sum();
        let p = atom_mean_posterior(
            base.mean,
            base.var,
            state.subject_atoms[n].var,
            members.len(),
            sum,
        );
        let new_mean = sample_normal(p.mean, p.var, rng)?;
        let ssd: f64 = members
            .iter()
            .map(|&i| (state.theta[i] - new_mean) * (state.theta[i] - new_mean))
            .sum();
        let g = atom_precision_posterior(base.prec_shape, base.prec_mean, members.len(), ssd);
        let prec = sample_gamma(g.shape, g.rate, rng)?;
        state.subject_atoms[n] = SubjectAtom { mean: new_mean, var: 1.0 / prec };
    }
    Ok(())
}

pub(crate) fn draw_allocation(
    log_weights: &[f64],
    scratch: &mut Vec<f64>,
    rng: &mut ChainRng,
) -> Result<usize> {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::NumericalFailure(
            "allocation weights are all zero".into(),
        ));
    }
    scratch.clear();
    scratch.extend(log_weights.iter().map(|lw| (lw - m).exp()));
    sample_categorical(scratch, rng)
}

/// Reallocates subjects to components under the current weights, then
/// redraws sticks and weights from the refreshed census, which is returned
/// for reuse.
pub fn update_subject_alloc_and_weights(
    state: &mut ChainState,
    rng: &mut ChainRng,
) -> Result<ClusterCensus> {
    let r = state.subject_atoms.len();
    // log pi_n - log(2 pi omega2_n)/2 and 1/(2 omega2_n), per component.
    let consts: Vec<(f64, f64, f64)> = (0..r)
        .map(|n| {
            let a = &state.subject_atoms[n];
            (
                state.subject_weights[n].ln() - 0.5 * (LN_2PI + a.var.ln()),
                0.5 / a.var,
                a.mean,
            )
        })
        .collect();
    let mut lw = vec![0.0; r];
    let mut scratch = Vec::with_capacity(r);
    for i in 0..state.theta.len() {
        let th = state.theta[i];
        for (n, &(c, half_prec, m)) in consts.iter().enumerate() {
            lw[n] = c - half_prec * (th - m) * (th - m);
        }
        state.subject_alloc[i] = draw_allocation(&lw, &mut scratch, rng)?;
    }
    let census = ClusterCensus::from_allocations(&state.subject_alloc, r)?;
    update_sticks(
        &mut state.subject_sticks,
        &mut state.subject_weights,
        &census,
        state.alpha1,
        rng,
    )?;
    Ok(census)
}

pub(crate) fn update_sticks(
    sticks: &mut [f64],
    weights: &mut Vec<f64>,
    census: &ClusterCensus,
    alpha: f64,
    rng: &mut ChainRng,
) -> Result<()> {
    let r = sticks.len();
    let mut tail = vec![0usize; r];
    for n in (0..r - 1).rev() {
        tail[n] = tail[n + 1] + census.counts[n + 1];
    }
    for n in 0..r - 1 {
        let (a, b) = stick_posterior(census.counts[n], tail[n], alpha);
        sticks[n] = sample_beta(a, b, rng)?;
    }
    sticks[r - 1] = 1.0;
    *weights = stick_break(sticks)?;
    Ok(())
}

/// Draws a concentration parameter from its gamma full conditional given
/// the interior sticks.
pub fn update_alpha(sticks: &[f64], prior: GammaSR, rng: &mut ChainRng) -> Result<f64> {
    let r = sticks.len();
    let sum_log: f64 = sticks[..r - 1].iter().map(|v| (1.0 - v).ln()).sum();
    let g = alpha_posterior(prior, r, sum_log);
    sample_gamma(g.shape, g.rate, rng)
}

/// Runs a plain mean-field shape update and draws from the fitted gamma; a
/// numerical failure falls back to a prior draw and is counted.
fn draw_shape_plain(
    sum_log: f64,
    sum: f64,
    n: usize,
    mean_param: f64,
    prior: GammaSR,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<f64> {
    match dm_gamma_shape_plain(
        sum_log,
        sum,
        n,
        mean_param,
        prior.shape,
        prior.rate,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    ) {
        Ok(out) => {
            if !out.converged {
                counters.nonconverged += 1;
            }
            sample_gamma(out.shape, out.rate, rng)
        }
        Err(Error::NumericalFailure(_)) => {
            counters.fallbacks += 1;
            sample_gamma(prior.shape, prior.rate, rng)
        }
        Err(e) => Err(e),
    }
}

/// Shifted-variant counterpart of `draw_shape_plain` for the component
/// reliability concentration.
fn draw_shape_shifted(
    inputs: &DmInputs,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<f64> {
    match dm_gamma_shape_shifted(inputs) {
        Ok(out) => {
            if !out.converged {
                counters.nonconverged += 1;
            }
            sample_gamma(out.shape, out.rate, rng)
        }
        Err(Error::NumericalFailure(_)) => {
            counters.fallbacks += 1;
            sample_gamma(inputs.prior_shape, inputs.prior_rate, rng)
        }
        Err(e) => Err(e),
    }
}

/// Joint update of the score-side base measure and the empty components it
/// alone governs. The hypers condition on the occupied components only:
/// empty ones enter no likelihood term, so they integrate out of the hyper
/// conditional and are redrawn from the refreshed base afterwards, making
/// the pair one exact Gibbs block. Hyper coordinates in order: mean,
/// variance, precision shape (mean-field step plus draw), precision mean.
pub fn update_g0_hyper(
    state: &mut ChainState,
    census: &ClusterCensus,
    cfg: &HyperConfig,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<()> {
    let occupied: Vec<&SubjectAtom> = state
        .subject_atoms
        .iter()
        .enumerate()
        .filter(|&(k, _)| !census.members[k].is_empty())
        .map(|(_, a)| a)
        .collect();
    let r = occupied.len();
    let atom_sum: f64 = occupied.iter().map(|a| a.mean).sum();
    let p = base_mean_posterior(
        cfg.mu0_prior_mean,
        cfg.mu0_prior_var,
        state.subject_base.var,
        r,
        atom_sum,
    );
    state.subject_base.mean = sample_normal(p.mean, p.var, rng)?;

    let ssd: f64 = occupied
        .iter()
        .map(|a| (a.mean - state.subject_base.mean) * (a.mean - state.subject_base.mean))
        .sum();
    let ig = base_var_posterior(cfg.s0_prior, r, ssd);
    state.subject_base.var = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let sum_prec: f64 = occupied.iter().map(|a| 1.0 / a.var).sum();
    let sum_log_prec: f64 = occupied.iter().map(|a| -a.var.ln()).sum();
    state.subject_base.prec_shape = draw_shape_plain(
        sum_log_prec,
        sum_prec,
        r,
        state.subject_base.prec_mean,
        cfg.w0_prior,
        counters,
        rng,
    )?;
    let ig = base_scale_posterior(cfg.w0_mean_prior, r, state.subject_base.prec_shape, sum_prec);
    state.subject_base.prec_mean = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let base = state.subject_base;
    for k in 0..state.subject_atoms.len() {
        if census.members[k].is_empty() {
            state.subject_atoms[k] = draw_subject_atom(&base, rng)?;
        }
    }
    Ok(())
}

/// Draws every rater bias from its normal full conditional.
pub fn update_tau(state: &mut ChainState, data: &RatingDataset, rng: &mut ChainRng) -> Result<()> {
    for j in 0..state.tau.len() {
        let atom = &state.rater_atoms[state.rater_alloc[j]];
        let mut n = 0usize;
        let mut resid_sum = 0.0;
        for o in data.ratings_of_rater(j) {
            n += 1;
            resid_sum += o.score - state.theta[o.subject];
        }
        let p = tau_posterior(atom.bias, atom.bias_var, state.inv_sigma2[j], n, resid_sum);
        state.tau[j] = sample_normal(p.mean, p.var, rng)?;
    }
    Ok(())
}

/// Draws every rater reliability from its gamma full conditional.
pub fn update_inv_sigma2(
    state: &mut ChainState,
    data: &RatingDataset,
    rng: &mut ChainRng,
) -> Result<()> {
    for j in 0..state.inv_sigma2.len() {
        let atom = &state.rater_atoms[state.rater_alloc[j]];
        let mut n = 0usize;
        let mut ssr = 0.0;
        for o in data.ratings_of_rater(j) {
            n += 1;
            let e = o.score - state.theta[o.subject] - state.tau[j];
            ssr += e * e;
        }
        let g = reliability_posterior(atom.gamma, atom.beta, n, ssr);
        state.inv_sigma2[j] = sample_gamma(g.shape, g.rate, rng)?;
    }
    Ok(())
}

/// Redraws every rater-side component. Occupied components update the bias
/// mean, the bias precision about the new mean, the inverse mean-reliability
/// under the current concentration, and finally the concentration via the
/// shifted mean-field step; empty ones come from the base measure.
pub fn update_rater_atoms(
    state: &mut ChainState,
    census: &ClusterCensus,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<()> {
    let base = state.rater_base;
    for k in 0..state.rater_atoms.len() {
        let members = &census.members[k];
        if members.is_empty() {
            state.rater_atoms[k] = draw_rater_atom(&base, rng)?;
            continue;
        }
        let n = members.len();
        let tau_sum: f64 = members.iter().map(|&j| state.tau[j]).sum();
        let p = atom_mean_posterior(
            base.bias_mean,
            base.bias_var,
            state.rater_atoms[k].bias_var,
            n,
            tau_sum,
        );
        let new_bias = sample_normal(p.mean, p.var, rng)?;
        let ssd: f64 = members
            .iter()
            .map(|&j| (state.tau[j] - new_bias) * (state.tau[j] - new_bias))
            .sum();
        let g = atom_precision_posterior(base.prec_shape, base.prec_mean, n, ssd);
        let new_bias_prec = sample_gamma(g.shape, g.rate, rng)?;

        let relia_sum: f64 = members.iter().map(|&j| state.inv_sigma2[j]).sum();
        let relia_log_sum: f64 = members.iter().map(|&j| state.inv_sigma2[j].ln()).sum();
        let old_gamma = state.rater_atoms[k].gamma;
        let g = inv_beta_posterior(
            base.inv_relia_shape,
            base.inv_relia_mean,
            n,
            old_gamma,
            relia_sum,
        );
        let new_beta = 1.0 / sample_gamma(g.shape, g.rate, rng)?;

        let inputs = DmInputs {
            sum_log: relia_log_sum,
            sum: relia_sum,
            n,
            beta: new_beta,
            prior_shape: base.gamma_shape,
            prior_rate: base.gamma_shape / base.gamma_mean,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let new_gamma = draw_shape_shifted(&inputs, counters, rng)?;
        state.rater_atoms[k] = RaterAtom {
            bias: new_bias,
            bias_var: 1.0 / new_bias_prec,
            gamma: new_gamma,
            beta: new_beta,
        };
    }
    Ok(())
}

/// Reallocates raters to components, then redraws sticks and weights. The
/// allocation weight is the bias density, multiplied by the reliability
/// density when `alloc_includes_reliability` is set.
pub fn update_rater_alloc_and_weights(
    state: &mut ChainState,
    cfg: &HyperConfig,
    rng: &mut ChainRng,
) -> Result<ClusterCensus> {
    let r = state.rater_atoms.len();
    struct CompConsts {
        bias_const: f64,
        half_prec: f64,
        bias: f64,
        relia_const: f64,
        relia_shape_m1: f64,
        relia_rate: f64,
    }
    let consts: Vec<CompConsts> = (0..r)
        .map(|k| {
            let a = &state.rater_atoms[k];
            let shape = 1.0 + a.gamma;
            let rate = shape / a.beta;
            CompConsts {
                bias_const: state.rater_weights[k].ln() - 0.5 * (LN_2PI + a.bias_var.ln()),
                half_prec: 0.5 / a.bias_var,
                bias: a.bias,
                relia_const: shape * rate.ln() - ln_gamma(shape),
                relia_shape_m1: shape - 1.0,
                relia_rate: rate,
            }
        })
        .collect();
    let mut lw = vec![0.0; r];
    let mut scratch = Vec::with_capacity(r);
    for j in 0..state.tau.len() {
        let tj = state.tau[j];
        let uj = state.inv_sigma2[j];
        let ln_uj = uj.ln();
        for (k, c) in consts.iter().enumerate() {
            let mut l = c.bias_const - c.half_prec * (tj - c.bias) * (tj - c.bias);
            if cfg.alloc_includes_reliability {
                l += c.relia_const + c.relia_shape_m1 * ln_uj - c.relia_rate * uj;
            }
            lw[k] = l;
        }
        state.rater_alloc[j] = draw_allocation(&lw, &mut scratch, rng)?;
    }
    let census = ClusterCensus::from_allocations(&state.rater_alloc, r)?;
    update_sticks(
        &mut state.rater_sticks,
        &mut state.rater_weights,
        &census,
        state.alpha2,
        rng,
    )?;
    Ok(census)
}

/// Joint update of the rater-side base measure and its empty components,
/// mirroring [`update_g0_hyper`]: hypers condition on occupied components
/// only, then empty ones redraw from the refreshed base. Hyper coordinates
/// in order: bias mean and variance, then the three gamma coordinates (bias
/// precision, reliability concentration, inverse mean-reliability), each as
/// a mean-field shape step followed by a conjugate mean update.
pub fn update_h0_hyper(
    state: &mut ChainState,
    census: &ClusterCensus,
    cfg: &HyperConfig,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<()> {
    let occupied: Vec<&RaterAtom> = state
        .rater_atoms
        .iter()
        .enumerate()
        .filter(|&(k, _)| !census.members[k].is_empty())
        .map(|(_, a)| a)
        .collect();
    let r = occupied.len();
    let bias_sum: f64 = occupied.iter().map(|a| a.bias).sum();
    let p = base_mean_posterior(
        cfg.eta0_prior_mean,
        cfg.eta0_prior_var,
        state.rater_base.bias_var,
        r,
        bias_sum,
    );
    state.rater_base.bias_mean = sample_normal(p.mean, p.var, rng)?;

    let ssd: f64 = occupied
        .iter()
        .map(|a| (a.bias - state.rater_base.bias_mean) * (a.bias - state.rater_base.bias_mean))
        .sum();
    let ig = base_var_posterior(cfg.d0_prior, r, ssd);
    state.rater_base.bias_var = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let sum_prec: f64 = occupied.iter().map(|a| 1.0 / a.bias_var).sum();
    let sum_log_prec: f64 = occupied.iter().map(|a| -a.bias_var.ln()).sum();
    state.rater_base.prec_shape = draw_shape_plain(
        sum_log_prec,
        sum_prec,
        r,
        state.rater_base.prec_mean,
        cfg.a0_prior,
        counters,
        rng,
    )?;
    let ig = base_scale_posterior(cfg.a0_mean_prior, r, state.rater_base.prec_shape, sum_prec);
    state.rater_base.prec_mean = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let sum_gamma: f64 = occupied.iter().map(|a| a.gamma).sum();
    let sum_log_gamma: f64 = occupied.iter().map(|a| a.gamma.ln()).sum();
    state.rater_base.gamma_shape = draw_shape_plain(
        sum_log_gamma,
        sum_gamma,
        r,
        state.rater_base.gamma_mean,
        cfg.b0_prior,
        counters,
        rng,
    )?;
    let ig = base_scale_posterior(cfg.b0_mean_prior, r, state.rater_base.gamma_shape, sum_gamma);
    state.rater_base.gamma_mean = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let sum_inv_beta: f64 = occupied.iter().map(|a| 1.0 / a.beta).sum();
    let sum_log_inv_beta: f64 = occupied.iter().map(|a| -a.beta.ln()).sum();
    state.rater_base.inv_relia_shape = draw_shape_plain(
        sum_log_inv_beta,
        sum_inv_beta,
        r,
        state.rater_base.inv_relia_mean,
        cfg.m0_prior,
        counters,
        rng,
    )?;
    let ig = base_scale_posterior(
        cfg.m0_mean_prior,
        r,
        state.rater_base.inv_relia_shape,
        sum_inv_beta,
    );
    state.rater_base.inv_relia_mean = sample_inv_gamma(ig.shape, ig.scale, rng)?;

    let base = state.rater_base;
    for k in 0..state.rater_atoms.len() {
        if census.members[k].is_empty() {
            state.rater_atoms[k] = draw_rater_atom(&base, rng)?;
        }
    }
    Ok(())
}

/// One full Gibbs sweep in the documented block order.
pub fn sweep(
    state: &mut ChainState,
    data: &RatingDataset,
    cfg: &HyperConfig,
    plan: &SweepPlan,
    counters: &mut DmCounters,
    rng: &mut ChainRng,
) -> Result<()> {
    update_theta(state, data, rng)?;
    let mut census = ClusterCensus::from_allocations(&state.subject_alloc, plan.subject_trunc)?;
    update_subject_atoms(state, &census, rng)?;
    if plan.subject_clustering {
        census = update_subject_alloc_and_weights(state, rng)?;
        state.alpha1 = update_alpha(&state.subject_sticks, cfg.alpha1_prior, rng)?;
    }
    update_g0_hyper(state, &census, cfg, counters, rng)?;

    update_tau(state, data, rng)?;
    if plan.reliability {
        update_inv_sigma2(state, data, rng)?;
    }
    let mut census = ClusterCensus::from_allocations(&state.rater_alloc, plan.rater_trunc)?;
    update_rater_atoms(state, &census, counters, rng)?;
    if plan.rater_clustering {
        census = update_rater_alloc_and_weights(state, cfg, rng)?;
        state.alpha2 = update_alpha(&state.rater_sticks, cfg.alpha2_prior, rng)?;
    }
    update_h0_hyper(state, &census, cfg, counters, rng)?;
    Ok(())
}

/// Pointwise log likelihood of every observation under the current state.
pub fn pointwise_loglik(state: &ChainState, data: &RatingDataset) -> Vec<f64> {
    data.observations()
        .iter()
        .map(|o| {
            let m = state.theta[o.subject] + state.tau[o.rater];
            let u = state.inv_sigma2[o.rater];
            let e = o.score - m;
            0.5 * (u.ln() - LN_2PI - u * e * e)
        })
        .collect()
}

/// Occupied part of a truncated mixture: `(component index, weight)` pairs
/// for the components with members, weights renormalized to sum to one.
/// Empty components hold fresh base-measure draws, so reported mixture
/// functionals condition on the occupied part; under vague hyperpriors the
/// truncation tail would otherwise leak prior noise with infinite moments
/// into every summary.
pub fn occupied_mixture(weights: &[f64], counts: &[u32]) -> Vec<(usize, f64)> {
    let mass: f64 = weights
        .iter()
        .zip(counts)
        .filter(|&(_, &c)| c > 0)
        .map(|(w, _)| w)
        .sum();
    weights
        .iter()
        .zip(counts)
        .enumerate()
        .filter(|&(_, (_, &c))| c > 0)
        .map(|(k, (w, _))| (k, w / mass))
        .collect()
}

/// Per-draw summaries from the occupied sub-mixtures of both sides.
fn summarize_state(state: &ChainState) -> Result<(SubjectSummary, RaterSummary)> {
    let s_counts = occupancy(&state.subject_alloc, state.subject_atoms.len());
    let s_mix = occupied_mixture(&state.subject_weights, &s_counts);
    let s_w: Vec<f64> = s_mix.iter().map(|&(_, w)| w).collect();
    let s_means: Vec<f64> = s_mix.iter().map(|&(k, _)| state.subject_atoms[k].mean).collect();
    let s_vars: Vec<f64> = s_mix.iter().map(|&(k, _)| state.subject_atoms[k].var).collect();
    let sm = subject_moments(&s_w, &s_means, &s_vars)?;

    let r_counts = occupancy(&state.rater_alloc, state.rater_atoms.len());
    let r_mix = occupied_mixture(&state.rater_weights, &r_counts);
    let r_w: Vec<f64> = r_mix.iter().map(|&(_, w)| w).collect();
    let biases: Vec<f64> = r_mix.iter().map(|&(k, _)| state.rater_atoms[k].bias).collect();
    let bias_vars: Vec<f64> =
        r_mix.iter().map(|&(k, _)| state.rater_atoms[k].bias_var).collect();
    let gammas: Vec<f64> = r_mix.iter().map(|&(k, _)| state.rater_atoms[k].gamma).collect();
    let betas: Vec<f64> = r_mix.iter().map(|&(k, _)| state.rater_atoms[k].beta).collect();
    let rm = rater_moments(&r_w, &biases, &bias_vars, &gammas, &betas)?;
    let icc = sm.var / (sm.var + rm.bias_var + rm.resid_mean);
    Ok((
        SubjectSummary { mean: sm.mean, var: sm.var, occupied: s_mix.len() },
        RaterSummary {
            bias_mean: rm.bias_mean,
            bias_var: rm.bias_var,
            relia_mean: rm.relia_mean,
            resid_mean: rm.resid_mean,
            icc_a: icc,
            occupied: r_mix.len(),
        },
    ))
}

pub(crate) fn occupancy(alloc: &[usize], clusters: usize) -> Vec<u32> {
    let mut n = vec![0u32; clusters];
    for &c in alloc {
        n[c] += 1;
    }
    n
}

fn record(draws: &mut ChainDraws, state: &ChainState, data: &RatingDataset) -> Result<()> {
    debug_assert!(
        crate::data::validate_state(state, data).is_empty(),
        "invalid retained state: {:?}",
        crate::data::validate_state(state, data)
    );
    record_with_loglik(draws, state, pointwise_loglik(state, data))
}

/// Records a retained state with a caller-supplied pointwise log likelihood,
/// for samplers whose likelihood is not the Gaussian one (ordinal data).
pub(crate) fn record_with_loglik(
    draws: &mut ChainDraws,
    state: &ChainState,
    loglik: Vec<f64>,
) -> Result<()> {
    let (ss, rs) = summarize_state(state)?;
    draws.theta.push(state.theta.clone());
    draws.tau.push(state.tau.clone());
    draws.inv_sigma2.push(state.inv_sigma2.clone());
    draws.alpha1.push(state.alpha1);
    draws.alpha2.push(state.alpha2);
    draws.subject_base.push(state.subject_base);
    draws.rater_base.push(state.rater_base);
    draws.subject_weights.push(state.subject_weights.clone());
    draws.subject_atoms.push(state.subject_atoms.clone());
    draws.rater_weights.push(state.rater_weights.clone());
    draws.rater_atoms.push(state.rater_atoms.clone());
    draws
        .subject_occ
        .push(occupancy(&state.subject_alloc, state.subject_atoms.len()));
    draws
        .rater_occ
        .push(occupancy(&state.rater_alloc, state.rater_atoms.len()));
    draws.subject_summary.push(ss);
    draws.rater_summary.push(rs);
    draws.loglik.push(loglik);
    Ok(())
}

/// Runs one chain: init, `iters` sweeps, retention after burn-in at the
/// configured thinning. Numerical failures abort with the sweep index.
pub fn run_chain(data: &RatingDataset, cfg: &HyperConfig, rng: &mut ChainRng) -> Result<ChainDraws> {
    cfg.validate()?;
    if matches!(cfg.model, ModelKind::OneWay | ModelKind::Ordinal) {
        return Err(Error::Usage(format!(
            "model {:?} has its own driver in the variants module",
            cfg.model
        )));
    }
    let plan = SweepPlan::for_model(cfg.model, cfg.truncation);
    let mut state = init_state(data, cfg, rng)?;
    let mut counters = DmCounters::default();
    let mut draws = ChainDraws::with_capacity(cfg.retained_draws());
    for t in 1..=cfg.iters {
        sweep(&mut state, data, cfg, &plan, &mut counters, rng)
            .map_err(|e| Error::NumericalFailure(format!("sweep {t}: {e}")))?;
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            record(&mut draws, &state, data)?;
        }
    }
    draws.dm = counters;
    Ok(draws)
}
