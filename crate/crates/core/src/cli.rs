//! Command-line commands: simulate, fit, compare, and icc.
//!
//! Option precedence is command line, then config file, then defaults; the
//! config file is flat `key = value` TOML. Chains run in parallel, capped by
//! the RATER_INFER_THREADS environment variable; every artifact a command
//! writes is reproducible byte for byte from its manifest.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{HyperConfig, ModelKind, RatingDataset};
use crate::io::{
    chain_file, read_rater_mix_csv, read_scalars_csv, read_trace_csv, read_truth,
    write_density_csv, write_manifest, write_metrics_csv, write_rater_mix_csv, write_report,
    write_scalars_csv, write_subject_mix_csv, write_thresholds_csv, write_trace_csv,
    write_truth, write_waic_csv, DataSummary, Manifest, ScalarTraces, WarningCounters,
};
use crate::mixture::{expected_residual_variance, icc_a, icc_pairwise};
use crate::post::{
    eval_density_grid, scalar_summary, sc_center_draws, summarize, DensityTarget, FitReport,
    ScalarSummary, Waic,
};
use crate::sampler::{run_chain, ChainDraws};
use crate::simbench::{generate, recovery_metrics, Scenario, ScenarioSpec};
use crate::variants::oneway::run_oneway_chain;
use crate::variants::ordinal::{ordinal_postprocess, run_ordinal_chain, OrdinalConfig};
use crate::{chain_rng, Error, Result};

const DENSITY_POINTS: usize = 512;

#[derive(Debug, Parser)]
#[command(
    name = "rater-infer",
    version,
    about = "Rating-data inference with Dirichlet-process mixtures over subjects and raters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic rating dataset with known ground truth.
    Simulate(SimulateArgs),
    /// Fit one model and emit traces, report, and density grids.
    Fit(FitArgs),
    /// Fit several models on one dataset and rank them by WAIC.
    Compare(CompareArgs),
    /// Recompute ICC summaries from the traces of a finished fit.
    Icc(IccArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Icc(a) => cmd_icc(&a),
    }
}

/// Flat `key = value` config file; any key a flag can set. Unknown keys are
/// rejected so typos surface instead of silently using defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    iters: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    truncation: Option<usize>,
    chains: Option<usize>,
    seed: Option<u64>,
    scale_min: Option<f64>,
    scale_max: Option<f64>,
    categories: Option<usize>,
    delta_lower: Option<f64>,
    delta_upper: Option<f64>,
    free_sigma: Option<bool>,
    alloc_includes_reliability: Option<bool>,
    scenario: Option<String>,
    subjects: Option<usize>,
    raters: Option<usize>,
    ratings: Option<usize>,
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario: uu, bu, or bb.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Subjects to generate (default 500).
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Raters to generate (default 100).
    #[arg(long)]
    pub raters: Option<usize>,
    /// Distinct raters per subject (default 4).
    #[arg(long)]
    pub ratings: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for dataset.csv, truth.json, manifest.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Flat key = value TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let file = load_config(args.config.as_ref())?;
    let scenario_name = args
        .scenario
        .clone()
        .or(file.scenario.clone())
        .ok_or_else(|| Error::Usage("simulate needs --scenario uu|bu|bb".into()))?;
    let spec = ScenarioSpec {
        scenario: Scenario::parse(&scenario_name)?,
        num_subjects: pick(args.subjects, file.subjects, 500),
        num_raters: pick(args.raters, file.raters, 100),
        ratings_per_subject: pick(args.ratings, file.ratings, 4),
        seed: pick(args.seed, file.seed, 20_260_814),
    };
    let (data, truth) = generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    data.emit_csv(args.out.join("dataset.csv"))?;
    write_truth(args.out.join("truth.json"), &truth)?;
    let mut manifest = Manifest::new("simulate");
    manifest.scenario = Some(spec);
    manifest.data = Some(data_summary(&data));
    write_manifest(args.out.join("manifest.json"), &manifest)?;
    println!(
        "simulated {} observations ({} subjects x {} ratings) into {}",
        data.num_observations(),
        spec.num_subjects,
        spec.ratings_per_subject,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input dataset CSV with a subject_id,rater_id,score header.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for traces, report, grids, and manifest.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Flat key = value TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model: bnp, bsp, bp, oneway, or ordinal.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Mixture truncation level per side (default 25).
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Parallel chains; chain k uses RNG stream k of the seed (default 1).
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Declared rating-scale bounds (defaults 0 and 100).
    #[arg(long = "scale-min")]
    pub scale_min: Option<f64>,
    #[arg(long = "scale-max")]
    pub scale_max: Option<f64>,
    /// Ground-truth JSON from simulate; adds metrics.csv to the output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Ordered category count; scores must be integers 1..=K (ordinal model).
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long = "delta-lower")]
    pub delta_lower: Option<f64>,
    #[arg(long = "delta-upper")]
    pub delta_upper: Option<f64>,
    /// Pin every residual variance at 1 instead of sampling it (ordinal).
    #[arg(long = "pin-sigma")]
    pub pin_sigma: bool,
    /// Include the reliability factor in rater reallocation weights.
    #[arg(long = "alloc-reliability")]
    pub alloc_reliability: bool,
}

/// Fully resolved run settings after flag/config/default merging.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub cfg: HyperConfig,
    pub ordinal: Option<OrdinalConfig>,
    pub n_chains: usize,
    pub scale: (f64, f64),
}

impl RunConfig {
    fn validate(&self, input: &Path, out: &Path) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Usage("--chains must be at least 1".into()));
        }
        if input == out {
            return Err(Error::Usage(
                "input and output paths must be distinct".into(),
            ));
        }
        self.cfg.validate()
    }
}

fn resolve_fit(args: &FitArgs, file: &FileConfig) -> Result<RunConfig> {
    let model = ModelKind::parse(&pick(
        args.model.clone(),
        file.model.clone(),
        "bnp".to_string(),
    ))?;
    let categories = args.categories.or(file.categories);
    let (ordinal, scale) = if model == ModelKind::Ordinal {
        let k = categories.ok_or_else(|| {
            Error::Usage("the ordinal model needs --categories".into())
        })?;
        let mut o = OrdinalConfig::new(k);
        if let Some(d) = args.delta_lower.or(file.delta_lower) {
            o.delta_lower = d;
        }
        if let Some(d) = args.delta_upper.or(file.delta_upper) {
            o.delta_upper = d;
        }
        if args.pin_sigma || file.free_sigma == Some(false) {
            o.free_sigma = false;
        }
        o.validate()?;
        (Some(o), (1.0, k as f64))
    } else {
        if categories.is_some() {
            return Err(Error::Usage(
                "--categories requires --model ordinal".into(),
            ));
        }
        (
            None,
            (
                pick(args.scale_min, file.scale_min, 0.0),
                pick(args.scale_max, file.scale_max, 100.0),
            ),
        )
    };
    let mut cfg = HyperConfig::default_for_scale(scale.0, scale.1);
    cfg.model = model;
    if let Some(o) = &ordinal {
        // Anchor the base location on the latent scale, not the categories.
        cfg.mu0_prior_mean = 0.5 * (o.delta_lower + o.delta_upper);
    }
    cfg.iters = pick(args.iters, file.iters, cfg.iters);
    cfg.burn_in = pick(args.burn_in, file.burn_in, cfg.burn_in);
    cfg.thin = pick(args.thin, file.thin, cfg.thin);
    cfg.truncation = pick(args.truncation, file.truncation, cfg.truncation);
    cfg.seed = pick(args.seed, file.seed, cfg.seed);
    cfg.alloc_includes_reliability =
        args.alloc_reliability || file.alloc_includes_reliability.unwrap_or(false);
    let run = RunConfig {
        cfg,
        ordinal,
        n_chains: pick(args.chains, file.chains, 1),
        scale,
    };
    run.validate(&args.input, &args.out)?;
    Ok(run)
}

/// Worker cap: RATER_INFER_THREADS when set, otherwise the machine's
/// available parallelism.
fn worker_cap() -> Result<usize> {
    match env::var("RATER_INFER_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::Usage(format!("RATER_INFER_THREADS=`{raw}` is not a count"))
            })?;
            if n == 0 {
                return Err(Error::Usage("RATER_INFER_THREADS must be at least 1".into()));
            }
            Ok(n)
        }
        Err(_) => Ok(thread::available_parallelism().map_or(1, usize::from)),
    }
}

struct FittedChain {
    draws: ChainDraws,
    thresholds: Option<Vec<Vec<f64>>>,
}

fn one_chain(
    data: &RatingDataset,
    run: &RunConfig,
    chain: usize,
) -> Result<FittedChain> {
    let mut rng = chain_rng(run.cfg.seed, chain as u64);
    match run.cfg.model {
        ModelKind::Ordinal => {
            let ocfg = run
                .ordinal
                .as_ref()
                .ok_or_else(|| Error::Usage("ordinal run without ordinal settings".into()))?;
            let mut od = run_ordinal_chain(data, &run.cfg, ocfg, &mut rng)?;
            ordinal_postprocess(&mut od)?;
            Ok(FittedChain {
                draws: od.draws,
                thresholds: Some(od.thresholds),
            })
        }
        ModelKind::OneWay => {
            let mut draws = run_oneway_chain(data, &run.cfg, &mut rng)?;
            sc_center_draws(&mut draws)?;
            Ok(FittedChain {
                draws,
                thresholds: None,
            })
        }
        _ => {
            let mut draws = run_chain(data, &run.cfg, &mut rng)?;
            sc_center_draws(&mut draws)?;
            Ok(FittedChain {
                draws,
                thresholds: None,
            })
        }
    }
}

/// Runs the configured chains in parallel batches of at most `worker_cap`.
fn run_chains(data: &RatingDataset, run: &RunConfig) -> Result<Vec<FittedChain>> {
    let cap = worker_cap()?;
    let mut fitted: Vec<Option<Result<FittedChain>>> =
        (0..run.n_chains).map(|_| None).collect();
    let ids: Vec<usize> = (0..run.n_chains).collect();
    for batch in ids.chunks(cap.max(1)) {
        let mut results = thread::scope(|s| -> Vec<Result<FittedChain>> {
            let handles: Vec<_> = batch
                .iter()
                .map(|&c| s.spawn(move || one_chain(data, run, c)))
                .collect();
            handles
                .into_iter()
                .zip(batch)
                .map(|(h, &c)| {
                    h.join().unwrap_or_else(|_| {
                        Err(Error::NumericalFailure(format!("chain {c} panicked")))
                    })
                })
                .collect()
        });
        for (&c, r) in batch.iter().zip(results.drain(..)) {
            fitted[c] = Some(r.map_err(|e| match e {
                Error::NumericalFailure(msg) => {
                    Error::NumericalFailure(format!("chain {c}: {msg}"))
                }
                other => other,
            }));
        }
    }
    fitted
        .into_iter()
        .map(|r| r.expect("every chain was scheduled"))
        .collect()
}

fn data_summary(data: &RatingDataset) -> DataSummary {
    let (scale_min, scale_max) = data.scale();
    DataSummary {
        num_subjects: data.num_subjects(),
        num_raters: data.num_raters(),
        num_observations: data.num_observations(),
        scale_min,
        scale_max,
    }
}

fn model_notes(run: &RunConfig) -> Vec<String> {
    match run.cfg.model {
        ModelKind::Bp => vec![
            "single-cluster reduction on both sides (truncation 1/1): parametric normal model"
                .into(),
        ],
        ModelKind::Bsp => {
            vec!["single-cluster reduction on the rater side (truncation 1)".into()]
        }
        ModelKind::OneWay => vec![
            "one-way reduction: rater effects folded into one error mixture; the rater-side \
             density grid is the error density"
                .into(),
        ],
        ModelKind::Ordinal => {
            let o = run.ordinal.as_ref().expect("resolved ordinal settings");
            vec![format!(
                "ordinal model with {} categories; latent thresholds anchored at {} and {}",
                o.categories, o.delta_lower, o.delta_upper
            )]
        }
        ModelKind::Bnp => Vec::new(),
    }
}

/// Density-grid ranges: the declared scale for true scores, a symmetric
/// half-scale window for biases and residuals; the latent anchor window with
/// one anchor-gap of padding for ordinal fits.
fn grid_ranges(run: &RunConfig) -> ((f64, f64), (f64, f64)) {
    if let Some(o) = &run.ordinal {
        let pad = (o.delta_upper - o.delta_lower).max(1.0) + 1.0;
        let theta = (o.delta_lower - pad, o.delta_upper + pad);
        (theta, (-pad, pad))
    } else {
        let half = 0.5 * (run.scale.1 - run.scale.0);
        (run.scale, (-half, half))
    }
}

/// Fits into `dir` and writes the full artifact set; shared by fit and
/// compare.
fn fit_into(
    dir: &Path,
    data: &RatingDataset,
    run: &RunConfig,
    truth: Option<&PathBuf>,
) -> Result<FitReport> {
    fs::create_dir_all(dir)?;
    let chains = run_chains(data, run)?;
    let mut pooled = Vec::with_capacity(chains.len());
    for (c, fc) in chains.into_iter().enumerate() {
        let d = &fc.draws;
        write_scalars_csv(chain_file(dir, "scalars", c), d)?;
        write_trace_csv(
            chain_file(dir, "theta", c),
            data.subject_labels(),
            &d.theta,
        )?;
        if run.cfg.model != ModelKind::OneWay {
            write_trace_csv(chain_file(dir, "tau", c), data.rater_labels(), &d.tau)?;
            write_trace_csv(
                chain_file(dir, "reliability", c),
                data.rater_labels(),
                &d.inv_sigma2,
            )?;
        }
        write_subject_mix_csv(chain_file(dir, "subject_mix", c), d)?;
        write_rater_mix_csv(chain_file(dir, "rater_mix", c), d)?;
        if let Some(thresholds) = &fc.thresholds {
            write_thresholds_csv(chain_file(dir, "thresholds", c), thresholds)?;
        }
        pooled.push(fc.draws);
    }
    let merged = ChainDraws::merge(pooled)?;

    let mut report = summarize(&merged)?;
    report.notes = model_notes(run);
    write_report(dir.join("report.json"), &report)?;

    let (theta_range, sym_range) = grid_ranges(run);
    let theta_grid = eval_density_grid(&merged, DensityTarget::Theta, theta_range, DENSITY_POINTS)?;
    write_density_csv(dir.join("theta_density.csv"), &theta_grid)?;
    let tau_grid = eval_density_grid(&merged, DensityTarget::Tau, sym_range, DENSITY_POINTS)?;
    write_density_csv(dir.join("tau_density.csv"), &tau_grid)?;
    if run.cfg.model != ModelKind::OneWay {
        let eps_grid =
            eval_density_grid(&merged, DensityTarget::Epsilon, sym_range, DENSITY_POINTS)?;
        write_density_csv(dir.join("epsilon_density.csv"), &eps_grid)?;
    }

    data.emit_mappings(dir.join("subjects_map.csv"), dir.join("raters_map.csv"))?;

    if let Some(truth_path) = truth {
        let truth = read_truth(truth_path)?;
        let center = 0.5 * (run.scale.0 + run.scale.1);
        let metrics = recovery_metrics(&report, &truth, center)?;
        write_metrics_csv(dir.join("metrics.csv"), &metrics)?;
    }

    let mut manifest = Manifest::new("fit");
    manifest.cfg = Some(run.cfg.clone());
    manifest.ordinal = run.ordinal;
    manifest.n_chains = Some(run.n_chains);
    manifest.data = Some(data_summary(data));
    manifest.warnings = Some(WarningCounters {
        dm_fallbacks: merged.dm.fallbacks,
        dm_nonconverged: merged.dm.nonconverged,
    });
    manifest.notes = report.notes.clone();
    write_manifest(dir.join("manifest.json"), &manifest)?;
    Ok(report)
}

fn ingest_for(run: &RunConfig, input: &Path) -> Result<RatingDataset> {
    RatingDataset::ingest_csv(input, run.scale.0, run.scale.1)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let file = load_config(args.config.as_ref())?;
    let run = resolve_fit(args, &file)?;
    let data = ingest_for(&run, &args.input)?;
    let report = fit_into(&args.out, &data, &run, args.truth.as_ref())?;
    println!(
        "fitted {} ({} retained draws, {} chains); icc_a mean {:.4} [{:.4}, {:.4}]; wrote {}",
        run.cfg.model.name(),
        report.retained,
        run.n_chains,
        report.icc_a.mean,
        report.icc_a.lo,
        report.icc_a.hi,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Comma-separated model list to fit with a shared seed.
    #[arg(long, default_value = "bp,bsp,bnp")]
    pub models: String,
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let file = load_config(args.fit.config.as_ref())?;
    if args.fit.model.is_some() {
        return Err(Error::Usage(
            "compare takes --models, not --model".into(),
        ));
    }
    let models: Vec<ModelKind> = args
        .models
        .split(',')
        .map(|s| ModelKind::parse(s.trim()))
        .collect::<Result<_>>()?;
    if models.is_empty() {
        return Err(Error::Usage("--models lists no models".into()));
    }
    if models
        .iter()
        .any(|m| matches!(m, ModelKind::OneWay | ModelKind::Ordinal))
    {
        return Err(Error::Usage(
            "compare ranks the Gaussian two-way models: bp, bsp, bnp".into(),
        ));
    }
    let base = resolve_fit(&args.fit, &file)?;
    let data = ingest_for(&base, &args.fit.input)?;
    fs::create_dir_all(&args.fit.out)?;
    let mut table: Vec<(String, Waic)> = Vec::with_capacity(models.len());
    for model in &models {
        let mut run = base.clone();
        run.cfg.model = *model;
        let dir = args.fit.out.join(model.name());
        let report = fit_into(&dir, &data, &run, args.fit.truth.as_ref())?;
        println!(
            "{}: waic {:.2} (lppd {:.2}, p_waic {:.2})",
            model.name(),
            report.waic.waic,
            report.waic.lppd,
            report.waic.p_waic
        );
        table.push((model.name().to_string(), report.waic));
    }
    write_waic_csv(args.fit.out.join("waic.csv"), &table)?;
    let mut manifest = Manifest::new("compare");
    manifest.cfg = Some(base.cfg.clone());
    manifest.n_chains = Some(base.n_chains);
    manifest.data = Some(data_summary(&data));
    manifest.notes = vec![format!(
        "models: {}",
        models.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
    )];
    write_manifest(args.fit.out.join("manifest.json"), &manifest)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct IccArgs {
    /// Directory written by a finished fit.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Output JSON path (default <run>/icc.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two rater ids `j,jp` for a pairwise ICC (Prop-1 style).
    #[arg(long)]
    pub pair: Option<String>,
    /// Rater cluster index for a cluster-conditional ICC.
    #[arg(long)]
    pub cluster: Option<usize>,
}

#[derive(Debug, Serialize)]
struct PairwiseIccOut {
    rater_j: String,
    rater_jp: String,
    summary: ScalarSummary,
}

#[derive(Debug, Serialize)]
struct ClusterIccOut {
    cluster: usize,
    draws_used: usize,
    summary: ScalarSummary,
}

#[derive(Debug, Serialize)]
struct IccOutput {
    icc_a: ScalarSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairwise: Option<PairwiseIccOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster: Option<ClusterIccOut>,
}

/// Pools `<stem>_chain0.csv, _chain1.csv, ...`; chain 0 must exist.
fn pooled_scalars(dir: &Path) -> Result<ScalarTraces> {
    let mut traces = read_scalars_csv(chain_file(dir, "scalars", 0))?;
    let mut c = 1;
    while chain_file(dir, "scalars", c).exists() {
        traces.extend(read_scalars_csv(chain_file(dir, "scalars", c))?);
        c += 1;
    }
    Ok(traces)
}

fn pooled_traces(dir: &Path, stem: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (labels, mut rows) = read_trace_csv(chain_file(dir, stem, 0))?;
    let mut c = 1;
    while chain_file(dir, stem, c).exists() {
        let (more_labels, more) = read_trace_csv(chain_file(dir, stem, c))?;
        if more_labels != labels {
            return Err(Error::Parse(format!(
                "{stem} chains disagree on entity labels"
            )));
        }
        rows.extend(more);
        c += 1;
    }
    Ok((labels, rows))
}

fn pooled_rater_mix(dir: &Path) -> Result<Vec<Vec<crate::io::RaterMixRow>>> {
    let mut mix = read_rater_mix_csv(chain_file(dir, "rater_mix", 0))?;
    let mut c = 1;
    while chain_file(dir, "rater_mix", c).exists() {
        mix.extend(read_rater_mix_csv(chain_file(dir, "rater_mix", c))?);
        c += 1;
    }
    Ok(mix)
}

fn cmd_icc(args: &IccArgs) -> Result<()> {
    let traces = pooled_scalars(&args.run)?;
    // Recompute the agreement ICC at every retained draw from the emitted
    // moments; bitwise equal to the summary embedded in report.json.
    let mut icc_trace = Vec::with_capacity(traces.len());
    for t in 0..traces.len() {
        icc_trace.push(icc_a(
            traces.omega2_g[t],
            traces.phi2_h[t],
            traces.sigma_tilde_h[t],
        )?);
    }
    let mut out = IccOutput {
        icc_a: scalar_summary(&icc_trace),
        pairwise: None,
        cluster: None,
    };

    if let Some(pair) = &args.pair {
        let (j_label, jp_label) = pair.split_once(',').ok_or_else(|| {
            Error::Usage("--pair takes two rater ids separated by a comma".into())
        })?;
        let (labels, rows) = pooled_traces(&args.run, "reliability")?;
        if rows.len() != traces.len() {
            return Err(Error::Parse(
                "reliability traces disagree with scalar traces in length".into(),
            ));
        }
        let col = |label: &str| -> Result<usize> {
            labels.iter().position(|l| l == label.trim()).ok_or_else(|| {
                Error::Usage(format!("unknown rater id `{}`", label.trim()))
            })
        };
        let (j, jp) = (col(j_label)?, col(jp_label)?);
        let mut pair_trace = Vec::with_capacity(rows.len());
        for (t, row) in rows.iter().enumerate() {
            pair_trace.push(icc_pairwise(
                traces.omega2_g[t],
                traces.phi2_h[t],
                1.0 / row[j],
                1.0 / row[jp],
            )?);
        }
        out.pairwise = Some(PairwiseIccOut {
            rater_j: j_label.trim().to_string(),
            rater_jp: jp_label.trim().to_string(),
            summary: scalar_summary(&pair_trace),
        });
    }

    if let Some(k) = args.cluster {
        let mix = pooled_rater_mix(&args.run)?;
        if mix.len() != traces.len() {
            return Err(Error::Parse(
                "rater mixture snapshots disagree with scalar traces in length".into(),
            ));
        }
        let atoms = mix.first().map_or(0, Vec::len);
        if k >= atoms {
            return Err(Error::Usage(format!(
                "cluster {k} out of range for {atoms} rater atoms"
            )));
        }
        // Conditional on both raters sharing cluster k: the bias spread and
        // residual variance come from that atom alone.
        let mut cluster_trace = Vec::new();
        for (t, draw) in mix.iter().enumerate() {
            let atom = &draw[k];
            if atom.occupancy == 0 {
                continue;
            }
            let resid = expected_residual_variance(atom.gamma, atom.beta)?;
            cluster_trace.push(icc_a(traces.omega2_g[t], atom.bias_var, resid)?);
        }
        if cluster_trace.is_empty() {
            return Err(Error::Usage(format!(
                "rater cluster {k} is never occupied in the retained draws"
            )));
        }
        out.cluster = Some(ClusterIccOut {
            cluster: k,
            draws_used: cluster_trace.len(),
            summary: scalar_summary(&cluster_trace),
        });
    }

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| args.run.join("icc.json"));
    let mut text = serde_json::to_string_pretty(&out)
        .map_err(|e| Error::Parse(format!("serializing icc output: {e}")))?;
    text.push('\n');
    fs::write(&out_path, text)?;
    println!(
        "icc_a mean {:.4} [{:.4}, {:.4}] over {} draws; wrote {}",
        out.icc_a.mean,
        out.icc_a.lo,
        out.icc_a.hi,
        icc_trace.len(),
        out_path.display()
    );
    Ok(())
}
