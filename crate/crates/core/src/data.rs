//! Datasets, hyperparameter configuration, and sampler state.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dists::{GammaSR, InvGammaSR};
use crate::{Error, Result};

/// One rating: dense subject and rater ids plus the observed score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub subject: usize,
    pub rater: usize,
    pub score: f64,
}

/// A crossed, generally unbalanced rating design. Ids are dense 0-based
/// indices; original labels are kept for round-tripping and error messages.
#[derive(Debug, Clone)]
pub struct RatingDataset {
    observations: Vec<Observation>,
    subject_labels: Vec<String>,
    rater_labels: Vec<String>,
    scale_min: f64,
    scale_max: f64,
    by_subject: Vec<Vec<u32>>,
    by_rater: Vec<Vec<u32>>,
}

impl RatingDataset {
    /// Build from rows of (subject label, rater label, score). Labels are
    /// dictionary-encoded in first-appearance order.
    pub fn from_labeled<S: AsRef<str>>(
        rows: &[(S, S, f64)],
        scale_min: f64,
        scale_max: f64,
    ) -> Result<Self> {
        if !(scale_min.is_finite() && scale_max.is_finite() && scale_min < scale_max) {
            return Err(Error::BadParameter(format!(
                "rating scale [{scale_min}, {scale_max}] is malformed"
            )));
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut subject_ids: HashMap<String, usize> = HashMap::new();
        let mut rater_ids: HashMap<String, usize> = HashMap::new();
        let mut subject_labels = Vec::new();
        let mut rater_labels = Vec::new();
        let mut observations = Vec::with_capacity(rows.len());
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        for (line0, (s, r, score)) in rows.iter().enumerate() {
            let line = line0 + 2; // header is line 1
            let s = s.as_ref();
            let r = r.as_ref();
            if !score.is_finite() || *score < scale_min || *score > scale_max {
                return Err(Error::OutOfScale {
                    score: *score,
                    min: scale_min,
                    max: scale_max,
                    line,
                });
            }
            let si = *subject_ids.entry(s.to_string()).or_insert_with(|| {
                subject_labels.push(s.to_string());
                subject_labels.len() - 1
            });
            let ri = *rater_ids.entry(r.to_string()).or_insert_with(|| {
                rater_labels.push(r.to_string());
                rater_labels.len() - 1
            });
            if seen.insert((si, ri), ()).is_some() {
                return Err(Error::DuplicateObservation {
                    subject: s.to_string(),
                    rater: r.to_string(),
                });
            }
            observations.push(Observation {
                subject: si,
                rater: ri,
                score: *score,
            });
        }
        Self::assemble(
            observations,
            subject_labels,
            rater_labels,
            scale_min,
            scale_max,
        )
    }

    /// Build from dense-id triplets. Every declared subject and rater index
    /// must actually occur.
    pub fn from_dense(
        num_subjects: usize,
        num_raters: usize,
        obs: &[(usize, usize, f64)],
        scale_min: f64,
        scale_max: f64,
    ) -> Result<Self> {
        if !(scale_min.is_finite() && scale_max.is_finite() && scale_min < scale_max) {
            return Err(Error::BadParameter(format!(
                "rating scale [{scale_min}, {scale_max}] is malformed"
            )));
        }
        if obs.is_empty() || num_subjects == 0 || num_raters == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut observations = Vec::with_capacity(obs.len());
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        for (line0, &(s, r, score)) in obs.iter().enumerate() {
            if s >= num_subjects || r >= num_raters {
                return Err(Error::BadParameter(format!(
                    "observation ({s}, {r}) out of range for {num_subjects} subjects x {num_raters} raters"
                )));
            }
            if !score.is_finite() || score < scale_min || score > scale_max {
                return Err(Error::OutOfScale {
                    score,
                    min: scale_min,
                    max: scale_max,
                    line: line0 + 2,
                });
            }
            if seen.insert((s, r), ()).is_some() {
                return Err(Error::DuplicateObservation {
                    subject: s.to_string(),
                    rater: r.to_string(),
                });
            }
            observations.push(Observation {
                subject: s,
                rater: r,
                score,
            });
        }
        let subject_labels = (0..num_subjects).map(|i| i.to_string()).collect();
        let rater_labels = (0..num_raters).map(|j| j.to_string()).collect();
        Self::assemble(
            observations,
            subject_labels,
            rater_labels,
            scale_min,
            scale_max,
        )
    }

    fn assemble(
        observations: Vec<Observation>,
        subject_labels: Vec<String>,
        rater_labels: Vec<String>,
        scale_min: f64,
        scale_max: f64,
    ) -> Result<Self> {
        let mut by_subject = vec![Vec::new(); subject_labels.len()];
        let mut by_rater = vec![Vec::new(); rater_labels.len()];
        for (idx, o) in observations.iter().enumerate() {
            by_subject[o.subject].push(idx as u32);
            by_rater[o.rater].push(idx as u32);
        }
        if let Some(i) = by_subject.iter().position(|v| v.is_empty()) {
            return Err(Error::BadParameter(format!(
                "subject `{}` has no ratings",
                subject_labels[i]
            )));
        }
        if let Some(j) = by_rater.iter().position(|v| v.is_empty()) {
            return Err(Error::BadParameter(format!(
                "rater `{}` has no ratings",
                rater_labels[j]
            )));
        }
        Ok(RatingDataset {
            observations,
            subject_labels,
            rater_labels,
            scale_min,
            scale_max,
            by_subject,
            by_rater,
        })
    }

    /// Read a `subject_id,rater_id,score` CSV.
    pub fn ingest_csv<P: AsRef<Path>>(path: P, scale_min: f64, scale_max: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())
            .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
        {
            let headers = reader
                .headers()
                .map_err(|e| Error::Parse(format!("reading header: {e}")))?;
            let expect = ["subject_id", "rater_id", "score"];
            let got: Vec<&str> = headers.iter().collect();
            if got != expect {
                return Err(Error::Parse(format!(
                    "expected header `subject_id,rater_id,score`, got `{}`",
                    got.join(",")
                )));
            }
        }
        let mut rows: Vec<(String, String, f64)> = Vec::new();
        for (line0, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("line {}: {e}", line0 + 2)))?;
            if record.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields, got {}",
                    line0 + 2,
                    record.len()
                )));
            }
            let score: f64 = record[2]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: score `{}` is not a number", line0 + 2, &record[2])))?;
            rows.push((record[0].to_string(), record[1].to_string(), score));
        }
        Self::from_labeled(&rows, scale_min, scale_max)
    }

    /// Write the dataset back out with its original labels.
    pub fn emit_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["subject_id", "rater_id", "score"])
            .map_err(csv_io)?;
        for o in &self.observations {
            w.write_record([
                self.subject_labels[o.subject].as_str(),
                self.rater_labels[o.rater].as_str(),
                &format_float(o.score),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `original_id,dense_id` mapping files for both entity kinds.
    pub fn emit_mappings<P: AsRef<Path>>(&self, subjects: P, raters: P) -> Result<()> {
        for (path, labels) in [
            (subjects.as_ref(), &self.subject_labels),
            (raters.as_ref(), &self.rater_labels),
        ] {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["original_id", "dense_id"]).map_err(csv_io)?;
            for (dense, label) in labels.iter().enumerate() {
                w.write_record([label.as_str(), &dense.to_string()])
                    .map_err(csv_io)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn num_subjects(&self) -> usize {
        self.subject_labels.len()
    }

    pub fn num_raters(&self) -> usize {
        self.rater_labels.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn scale(&self) -> (f64, f64) {
        (self.scale_min, self.scale_max)
    }

    pub fn subject_labels(&self) -> &[String] {
        &self.subject_labels
    }

    pub fn rater_labels(&self) -> &[String] {
        &self.rater_labels
    }

    pub fn rater_index(&self, label: &str) -> Option<usize> {
        self.rater_labels.iter().position(|l| l == label)
    }

    /// Ratings received by one subject.
    pub fn ratings_of_subject(&self, i: usize) -> impl Iterator<Item = &Observation> + '_ {
        self.by_subject[i].iter().map(|&k| &self.observations[k as usize])
    }

    /// Ratings given by one rater.
    pub fn ratings_of_rater(&self, j: usize) -> impl Iterator<Item = &Observation> + '_ {
        self.by_rater[j].iter().map(|&k| &self.observations[k as usize])
    }

    pub fn ratings_per_subject(&self, i: usize) -> usize {
        self.by_subject[i].len()
    }

    pub fn ratings_per_rater(&self, j: usize) -> usize {
        self.by_rater[j].len()
    }

    /// Replace all scores in place; used by simulation-based checks that
    /// redraw data under fixed designs. Scale bounds are not re-enforced.
    pub fn set_scores(&mut self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.observations.len() {
            return Err(Error::BadParameter(format!(
                "{} scores for {} observations",
                scores.len(),
                self.observations.len()
            )));
        }
        for (o, &s) in self.observations.iter_mut().zip(scores) {
            o.score = s;
        }
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Parse(format!("csv write: {e}"))
}

/// Shortest round-trip decimal form, so emitted files re-ingest exactly.
pub fn format_float(x: f64) -> String {
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Which likelihood/prior structure a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Mixture priors on both sides.
    Bnp,
    /// Mixture prior on subjects, single cluster on raters.
    Bsp,
    /// Single cluster on both sides.
    Bp,
    /// Reduced one-way model with a per-observation error mixture.
    OneWay,
    /// Ordinal-outcome model on a latent continuous scale.
    Ordinal,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bnp" => Ok(ModelKind::Bnp),
            "bsp" => Ok(ModelKind::Bsp),
            "bp" => Ok(ModelKind::Bp),
            "oneway" | "one-way" => Ok(ModelKind::OneWay),
            "ordinal" => Ok(ModelKind::Ordinal),
            other => Err(Error::Usage(format!(
                "unknown model `{other}` (expected bnp, bsp, bp, oneway, or ordinal)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Bnp => "bnp",
            ModelKind::Bsp => "bsp",
            ModelKind::Bp => "bp",
            ModelKind::OneWay => "oneway",
            ModelKind::Ordinal => "ordinal",
        }
    }

    /// Truncation levels (subjects, raters) given the configured level.
    pub fn truncations(&self, r: usize) -> (usize, usize) {
        match self {
            ModelKind::Bnp | ModelKind::OneWay | ModelKind::Ordinal => (r, r),
            ModelKind::Bsp => (r, 1),
            ModelKind::Bp => (1, 1),
        }
    }
}

/// Every prior constant and MCMC control knob in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub model: ModelKind,
    /// Mixture truncation level per side.
    pub truncation: usize,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Normal prior on the subject base mean.
    pub mu0_prior_mean: f64,
    pub mu0_prior_var: f64,
    /// Inverse-gamma prior on the subject base variance.
    pub s0_prior: InvGammaSR,
    /// Gamma prior on the subject precision shape.
    pub w0_prior: GammaSR,
    /// Inverse-gamma prior on the subject precision mean.
    pub w0_mean_prior: InvGammaSR,
    /// Normal prior on the rater-bias base mean.
    pub eta0_prior_mean: f64,
    pub eta0_prior_var: f64,
    /// Inverse-gamma prior on the rater-bias base variance.
    pub d0_prior: InvGammaSR,
    /// Gamma prior on the bias precision shape.
    pub a0_prior: GammaSR,
    /// Inverse-gamma prior on the bias precision mean.
    pub a0_mean_prior: InvGammaSR,
    /// Gamma prior on the reliability concentration shape.
    pub b0_prior: GammaSR,
    /// Inverse-gamma prior on the reliability concentration mean.
    pub b0_mean_prior: InvGammaSR,
    /// Gamma prior on the inverse mean-reliability shape.
    pub m0_prior: GammaSR,
    /// Inverse-gamma prior on the inverse mean-reliability mean.
    pub m0_mean_prior: InvGammaSR,
    /// Gamma priors on the two concentration parameters.
    pub alpha1_prior: GammaSR,
    pub alpha2_prior: GammaSR,
    /// Include the reliability likelihood factor in rater reallocation
    /// weights. Off by default; the bias factor alone is the classical
    /// blocked update, the full factor is the exact joint conditional.
    pub alloc_includes_reliability: bool,
}

const VAGUE_SHAPE: f64 = 0.005;

impl HyperConfig {
    /// Defaults for a continuous rating scale: vague variance and shape
    /// hyperpriors, unit-exponential concentration priors, and the base
    /// location centered on the scale midpoint.
    pub fn default_for_scale(scale_min: f64, scale_max: f64) -> Self {
        let center = 0.5 * (scale_min + scale_max);
        let vague_g = GammaSR {
            shape: VAGUE_SHAPE,
            rate: VAGUE_SHAPE,
        };
        let vague_ig = InvGammaSR {
            shape: VAGUE_SHAPE,
            scale: VAGUE_SHAPE,
        };
        let unit = GammaSR {
            shape: 1.0,
            rate: 1.0,
        };
        HyperConfig {
            model: ModelKind::Bnp,
            truncation: 25,
            iters: 50_000,
            burn_in: 10_000,
            thin: 40,
            seed: 20_260_814,
            mu0_prior_mean: center,
            mu0_prior_var: 100.0,
            s0_prior: vague_ig,
            w0_prior: vague_g,
            w0_mean_prior: vague_ig,
            eta0_prior_mean: 0.0,
            eta0_prior_var: 100.0,
            d0_prior: vague_ig,
            a0_prior: vague_g,
            a0_mean_prior: vague_ig,
            b0_prior: vague_g,
            b0_mean_prior: vague_ig,
            m0_prior: vague_g,
            m0_mean_prior: vague_ig,
            alpha1_prior: unit,
            alpha2_prior: unit,
            alloc_includes_reliability: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(Error::BadParameter("truncation must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::BadParameter("thin must be at least 1".into()));
        }
        if self.burn_in >= self.iters {
            return Err(Error::BadParameter(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iters
            )));
        }
        if !(self.mu0_prior_mean.is_finite()
            && self.mu0_prior_var > 0.0
            && self.eta0_prior_mean.is_finite()
            && self.eta0_prior_var > 0.0)
        {
            return Err(Error::BadParameter(
                "base-mean priors need finite means and positive variances".into(),
            ));
        }
        for (name, g) in [
            ("w0_prior", &self.w0_prior),
            ("a0_prior", &self.a0_prior),
            ("b0_prior", &self.b0_prior),
            ("m0_prior", &self.m0_prior),
            ("alpha1_prior", &self.alpha1_prior),
            ("alpha2_prior", &self.alpha2_prior),
        ] {
            GammaSR::new(g.shape, g.rate)
                .map_err(|e| Error::BadParameter(format!("{name}: {e}")))?;
        }
        for (name, ig) in [
            ("s0_prior", &self.s0_prior),
            ("w0_mean_prior", &self.w0_mean_prior),
            ("d0_prior", &self.d0_prior),
            ("a0_mean_prior", &self.a0_mean_prior),
            ("b0_mean_prior", &self.b0_mean_prior),
            ("m0_mean_prior", &self.m0_mean_prior),
        ] {
            InvGammaSR::new(ig.shape, ig.scale)
                .map_err(|e| Error::BadParameter(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Number of retained draws for the configured schedule.
    pub fn retained_draws(&self) -> usize {
        (self.iters - self.burn_in) / self.thin
    }
}

/// One subject-side mixture atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectAtom {
    /// Component mean of the true scores.
    pub mean: f64,
    /// Component variance of the true scores.
    pub var: f64,
}

/// One rater-side mixture atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaterAtom {
    /// Component mean of rater bias.
    pub bias: f64,
    /// Component variance of rater bias.
    pub bias_var: f64,
    /// Reliability concentration of the component.
    pub gamma: f64,
    /// Mean reliability of the component.
    pub beta: f64,
}

/// Subject-side base measure parameters: a normal over atom means and a
/// gamma (given by shape and mean) over atom precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectBase {
    pub mean: f64,
    pub var: f64,
    pub prec_shape: f64,
    pub prec_mean: f64,
}

/// Rater-side base measure parameters: a normal over bias means, a gamma
/// over bias precisions, a gamma over reliability concentrations, and a
/// gamma over inverse mean-reliabilities. Each gamma is carried as
/// (shape, mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaterBase {
    pub bias_mean: f64,
    pub bias_var: f64,
    pub prec_shape: f64,
    pub prec_mean: f64,
    pub gamma_shape: f64,
    pub gamma_mean: f64,
    pub inv_relia_shape: f64,
    pub inv_relia_mean: f64,
}

/// Full sampler state for the two-way model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub subject_atoms: Vec<SubjectAtom>,
    /// Stick proportions; the last entry is pinned at 1.
    pub subject_sticks: Vec<f64>,
    pub subject_weights: Vec<f64>,
    pub subject_alloc: Vec<usize>,
    pub alpha1: f64,
    pub subject_base: SubjectBase,
    pub tau: Vec<f64>,
    pub inv_sigma2: Vec<f64>,
    pub rater_atoms: Vec<RaterAtom>,
    pub rater_sticks: Vec<f64>,
    pub rater_weights: Vec<f64>,
    pub rater_alloc: Vec<usize>,
    pub alpha2: f64,
    pub rater_base: RaterBase,
}

/// Cluster occupancy derived from allocations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterCensus {
    pub counts: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl ClusterCensus {
    pub fn from_allocations(alloc: &[usize], clusters: usize) -> Result<Self> {
        let mut counts = vec![0usize; clusters];
        let mut members = vec![Vec::new(); clusters];
        for (i, &c) in alloc.iter().enumerate() {
            if c >= clusters {
                return Err(Error::BadParameter(format!(
                    "allocation {c} out of range for {clusters} clusters"
                )));
            }
            counts[c] += 1;
            members[c].push(i);
        }
        Ok(ClusterCensus { counts, members })
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

fn push_if(violations: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        violations.push(msg());
    }
}

/// Check every structural invariant of a sampler state against its dataset.
/// Returns human-readable violations; an empty vector means the state is
/// sound. Run between sweeps in debug builds.
pub fn validate_state(state: &ChainState, data: &RatingDataset) -> Vec<String> {
    let mut v = Vec::new();
    let i = data.num_subjects();
    let j = data.num_raters();
    let r1 = state.subject_atoms.len();
    let r2 = state.rater_atoms.len();

    push_if(&mut v, state.theta.len() == i, || {
        format!("theta has {} entries for {} subjects", state.theta.len(), i)
    });
    push_if(&mut v, state.tau.len() == j, || {
        format!("tau has {} entries for {} raters", state.tau.len(), j)
    });
    push_if(&mut v, state.inv_sigma2.len() == j, || {
        format!("inv_sigma2 has {} entries for {} raters", state.inv_sigma2.len(), j)
    });
    push_if(&mut v, state.subject_alloc.len() == i, || {
        "subject allocations disagree with subject count".into()
    });
    push_if(&mut v, state.rater_alloc.len() == j, || {
        "rater allocations disagree with rater count".into()
    });
    push_if(
        &mut v,
        state.subject_sticks.len() == r1 && state.subject_weights.len() == r1,
        || "subject stick/weight lengths disagree with atom count".into(),
    );
    push_if(
        &mut v,
        state.rater_sticks.len() == r2 && state.rater_weights.len() == r2,
        || "rater stick/weight lengths disagree with atom count".into(),
    );

    for (name, xs) in [("theta", &state.theta), ("tau", &state.tau)] {
        for (k, &x) in xs.iter().enumerate() {
            push_if(&mut v, x.is_finite(), || format!("{name}[{k}] = {x} not finite"));
        }
    }
    for (k, &x) in state.inv_sigma2.iter().enumerate() {
        push_if(&mut v, x > 0.0 && x.is_finite(), || {
            format!("inv_sigma2[{k}] = {x} not positive finite")
        });
    }
    for (n, a) in state.subject_atoms.iter().enumerate() {
        push_if(&mut v, a.mean.is_finite(), || format!("subject atom {n} mean {}", a.mean));
        push_if(&mut v, a.var > 0.0 && a.var.is_finite(), || {
            format!("subject atom {n} variance {}", a.var)
        });
    }
    for (k, a) in state.rater_atoms.iter().enumerate() {
        push_if(&mut v, a.bias.is_finite(), || format!("rater atom {k} bias {}", a.bias));
        for (field, x) in [("bias_var", a.bias_var), ("gamma", a.gamma), ("beta", a.beta)] {
            push_if(&mut v, x > 0.0 && x.is_finite(), || {
                format!("rater atom {k} {field} = {x} not positive finite")
            });
        }
    }

    for (side, sticks, weights) in [
        ("subject", &state.subject_sticks, &state.subject_weights),
        ("rater", &state.rater_sticks, &state.rater_weights),
    ] {
        if let Some((&last, interior)) = sticks.split_last() {
            push_if(&mut v, last == 1.0, || {
                format!("{side} final stick is {last}, not 1")
            });
            for (n, &x) in interior.iter().enumerate() {
                push_if(&mut v, x > 0.0 && x < 1.0, || {
                    format!("{side} stick {n} = {x} outside (0, 1)")
                });
            }
        }
        let total: f64 = weights.iter().sum();
        push_if(&mut v, (total - 1.0).abs() <= 1e-12, || {
            format!("{side} weights sum to {total}")
        });
        for (n, &w) in weights.iter().enumerate() {
            push_if(&mut v, w >= 0.0, || format!("{side} weight {n} = {w} negative"));
        }
    }

    for (side, alloc, clusters, total) in [
        ("subject", &state.subject_alloc, r1, i),
        ("rater", &state.rater_alloc, r2, j),
    ] {
        match ClusterCensus::from_allocations(alloc, clusters) {
            Ok(census) => push_if(
                &mut v,
                census.counts.iter().sum::<usize>() == total,
                || format!("{side} census does not cover every entity"),
            ),
            Err(e) => v.push(format!("{side} allocations: {e}")),
        }
    }

    push_if(&mut v, state.alpha1 > 0.0 && state.alpha1.is_finite(), || {
        format!("alpha1 = {} not positive finite", state.alpha1)
    });
    push_if(&mut v, state.alpha2 > 0.0 && state.alpha2.is_finite(), || {
        format!("alpha2 = {} not positive finite", state.alpha2)
    });

    let sb = &state.subject_base;
    push_if(&mut v, sb.mean.is_finite(), || format!("subject base mean {}", sb.mean));
    for (name, x) in [
        ("var", sb.var),
        ("prec_shape", sb.prec_shape),
        ("prec_mean", sb.prec_mean),
    ] {
        push_if(&mut v, x > 0.0 && x.is_finite(), || {
            format!("subject base {name} = {x} not positive finite")
        });
    }
    let rb = &state.rater_base;
    push_if(&mut v, rb.bias_mean.is_finite(), || {
        format!("rater base bias mean {}", rb.bias_mean)
    });
    for (name, x) in [
        ("bias_var", rb.bias_var),
        ("prec_shape", rb.prec_shape),
        ("prec_mean", rb.prec_mean),
        ("gamma_shape", rb.gamma_shape),
        ("gamma_mean", rb.gamma_mean),
        ("inv_relia_shape", rb.inv_relia_shape),
        ("inv_relia_mean", rb.inv_relia_mean),
    ] {
        push_if(&mut v, x > 0.0 && x.is_finite(), || {
            format!("rater base {name} = {x} not positive finite")
        });
    }

    v
}
