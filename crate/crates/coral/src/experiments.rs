//! Scripted studies: counterexample reproductions and empirical rate sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coral_core::classes::{alpha_schedule, RegularizerKind, RegularizerSpec};
use coral_core::data::{
    derive_seed, rng_from_seed, sample_initial_summary, sample_offline_summary, DatasetSummary, InitialSummary,
};
use coral_core::instances::{self, Instance};
use coral_core::model::Policy;
use coral_core::objectives::{
    alm_penalty, policy_from_weights, pop_alm, pop_lagrangian, pop_pro, EmpiricalKind, FenchelPair,
};
use coral_core::oracles::suboptimality;
use coral_core::solvers::{inner_optimum, select_outer, FiniteProblem, SaddleSolution, SolveInputs};
use coral_core::{Error, Result};

use crate::error::{CliError, CliResult};

/// Learners the rate harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ProMab,
    AlmMab,
    ProCb,
    AlmCb,
    CoralMb,
    CoralMf,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ProMab => "pro_mab",
            Algorithm::AlmMab => "alm_mab",
            Algorithm::ProCb => "pro_cb",
            Algorithm::AlmCb => "alm_cb",
            Algorithm::CoralMb => "coral_mb",
            Algorithm::CoralMf => "coral_mf",
        }
    }

    pub fn is_regularized(self) -> bool {
        matches!(self, Algorithm::ProMab | Algorithm::ProCb)
    }

    pub fn is_coral(self) -> bool {
        matches!(self, Algorithm::CoralMb | Algorithm::CoralMf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    ShiftedSquare,
    PlainSquare,
}

impl From<Regularizer> for RegularizerKind {
    fn from(r: Regularizer) -> Self {
        match r {
            Regularizer::ShiftedSquare => RegularizerKind::ShiftedSquare,
            Regularizer::PlainSquare => RegularizerKind::PlainSquare,
        }
    }
}

/// Hyperparameters of a learner; unset values fall back to the instance
/// defaults and then to the regularization schedule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmParams {
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub regularizer: Option<Regularizer>,
    #[serde(default)]
    pub b_w: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn default_b_w() -> f64 {
    2.0
}

/// Named instance builders. Builders that depend on the sample size take it
/// from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Prop1 {
        #[serde(default = "default_b_w")]
        b_w: f64,
    },
    Prop3Large {
        alpha: f64,
    },
    Prop3Small,
    Figure1 {
        gamma: f64,
    },
    RandomMdp {
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        seed: u64,
    },
    RandomMab {
        n_arms: usize,
        seed: u64,
    },
    RandomCb {
        n_states: usize,
        n_actions: usize,
        seed: u64,
    },
    RateMab,
    RateCb,
    CoralMdp,
}

impl InstanceSpec {
    pub fn label(&self) -> &'static str {
        match self {
            InstanceSpec::Prop1 { .. } => "prop1",
            InstanceSpec::Prop3Large { .. } => "prop3_large",
            InstanceSpec::Prop3Small => "prop3_small",
            InstanceSpec::Figure1 { .. } => "figure1",
            InstanceSpec::RandomMdp { .. } => "random_mdp",
            InstanceSpec::RandomMab { .. } => "random_mab",
            InstanceSpec::RandomCb { .. } => "random_cb",
            InstanceSpec::RateMab => "rate_mab",
            InstanceSpec::RateCb => "rate_cb",
            InstanceSpec::CoralMdp => "coral_mdp",
        }
    }

    /// Builds the instance for sample size `n`.
    pub fn build(&self, n: usize) -> Result<Instance> {
        match *self {
            InstanceSpec::Prop1 { b_w } => instances::prop1(n, b_w),
            InstanceSpec::Prop3Large { alpha } => instances::prop3_large(alpha),
            InstanceSpec::Prop3Small => instances::prop3_small(n, prop3_small_alpha(n)),
            InstanceSpec::Figure1 { gamma } => instances::figure1(gamma),
            InstanceSpec::RandomMdp {
                n_states,
                n_actions,
                gamma,
                seed,
            } => instances::random_mdp(n_states, n_actions, gamma, seed),
            InstanceSpec::RandomMab { n_arms, seed } => instances::random_mab(n_arms, seed),
            InstanceSpec::RandomCb {
                n_states,
                n_actions,
                seed,
            } => instances::random_cb(n_states, n_actions, seed),
            InstanceSpec::RateMab => instances::rate_mab(n),
            InstanceSpec::RateCb => instances::rate_cb(n),
            InstanceSpec::CoralMdp => instances::coral_mdp(),
        }
    }
}

/// `alpha = n^{-1/2}` for the small-alpha construction.
pub fn prop3_small_alpha(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Resolves the empirical objective for one run.
pub fn empirical_kind(alg: Algorithm, params: &AlgorithmParams, inst: &Instance, n: usize) -> Result<EmpiricalKind> {
    Ok(match alg {
        Algorithm::AlmMab => EmpiricalKind::AlmMab,
        Algorithm::AlmCb => EmpiricalKind::AlmCb,
        Algorithm::CoralMb => EmpiricalKind::CoralMb,
        Algorithm::CoralMf => EmpiricalKind::CoralMf,
        Algorithm::ProMab | Algorithm::ProCb => {
            let spec = match (params.regularizer, inst.regularizer) {
                (Some(k), _) => RegularizerSpec::new(k.into(), params.b_w.unwrap_or(inst.classes.w.bounds().upper))?,
                (None, Some(s)) => s,
                (None, None) => RegularizerSpec::new(
                    RegularizerKind::ShiftedSquare,
                    params.b_w.unwrap_or(inst.classes.w.bounds().upper),
                )?,
            };
            let alpha = match params.alpha.or(inst.alpha) {
                Some(a) => a,
                None => {
                    let b_v = inst.classes.v.bounds().upper.abs().max(inst.classes.v.bounds().lower.abs());
                    let delta = params.delta.unwrap_or(1.0 / n as f64);
                    alpha_schedule(
                        spec.b_w,
                        b_v,
                        spec.b_f(),
                        spec.m_f(),
                        inst.classes.w.len(),
                        inst.classes.v.len(),
                        delta,
                        n,
                    )?
                }
            };
            if !(alpha >= 0.0) {
                return Err(Error::InvalidArgument(format!("alpha {alpha} must be nonnegative")));
            }
            if alg == Algorithm::ProMab {
                EmpiricalKind::ProMab { alpha, spec }
            } else {
                EmpiricalKind::ProCb { alpha, spec }
            }
        }
    })
}

pub fn kind_alpha(kind: &EmpiricalKind) -> f64 {
    match kind {
        EmpiricalKind::ProMab { alpha, .. } | EmpiricalKind::ProCb { alpha, .. } => *alpha,
        _ => 0.0,
    }
}

/// Data of one trial: offline, initial and model summaries as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub data: DatasetSummary,
    pub initial: Option<InitialSummary>,
    pub model_data: Option<DatasetSummary>,
}

/// Draws `D` and, for the MDP learners, `D0` and `Dm` of the same size.
pub fn draw_trial_data(inst: &Instance, alg: Algorithm, n: usize, seed: u64) -> Result<TrialData> {
    let mut rng = rng_from_seed(seed);
    let data = sample_offline_summary(&inst.model, &inst.mu, n, &mut rng)?;
    let (initial, model_data) = if alg.is_coral() {
        let d0 = sample_initial_summary(&inst.model, n, &mut rng)?;
        let dm = if alg == Algorithm::CoralMb {
            Some(sample_offline_summary(&inst.model, &inst.mu, n, &mut rng)?)
        } else {
            None
        };
        (Some(d0), dm)
    } else {
        (None, None)
    };
    Ok(TrialData {
        data,
        initial,
        model_data,
    })
}

/// Exact finite-class solve; outer members are processed in parallel.
pub fn solve_finite_parallel(inputs: SolveInputs<'_>, inst: &Instance) -> Result<SaddleSolution> {
    let prob = FiniteProblem::new(inputs, &inst.classes)?;
    let dims = prob.dims();
    let inner: Vec<_> = (0..dims.w)
        .into_par_iter()
        .map(|w| inner_optimum(dims, w, &mut |c| prob.eval(c)))
        .collect::<Result<_>>()?;
    let out = select_outer(&inner)?;
    prob.finish(out)
}

/// Solves one trial's data with the given objective.
pub fn solve_trial(inst: &Instance, kind: EmpiricalKind, td: &TrialData, parallel: bool) -> Result<SaddleSolution> {
    let inputs = SolveInputs {
        kind,
        data: &td.data,
        initial: td.initial.as_ref(),
        model_data: td.model_data.as_ref(),
        mu: &inst.mu,
        gamma: inst.model.discount(),
        fen: FenchelPair::for_discount(inst.model.discount()),
    };
    if parallel {
        solve_finite_parallel(inputs, inst)
    } else {
        coral_core::solvers::solve_empirical_finite(inputs, &inst.classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub subopt: f64,
    pub objective: f64,
    pub alpha: f64,
    pub w_index: Option<usize>,
}

/// Samples data, solves, and scores the induced policy.
pub fn run_trial(inst: &Instance, alg: Algorithm, params: &AlgorithmParams, n: usize, seed: u64) -> Result<TrialOutcome> {
    let kind = empirical_kind(alg, params, inst, n)?;
    let td = draw_trial_data(inst, alg, n, seed)?;
    let sol = solve_trial(inst, kind, &td, false)?;
    Ok(TrialOutcome {
        subopt: suboptimality(&inst.model, &sol.policy)?,
        objective: sol.objective_value,
        alpha: kind_alpha(&kind),
        w_index: sol.indices.map(|c| c.w),
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub algorithm: String,
    pub instance: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub subopt: f64,
    pub objective: f64,
    pub alpha: f64,
    pub runtime_ms: u64,
}

/// Statistics of one `(algorithm, N)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean: f64,
}

/// Per-algorithm sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub algorithm: String,
    pub per_n: Vec<CellStats>,
    /// Least-squares slope of `log2 median` against `log2 N`.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Same fit on the means.
    pub mean_slope: Option<f64>,
    pub mean_slope_stderr: Option<f64>,
    /// Number of adjacent-N increases of the median.
    pub inversions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub instance: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub rows: Vec<Row>,
    pub summary: Vec<GroupSummary>,
    pub checks: Vec<Check>,
    pub wall_clock_ms: u64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn group(&self, algorithm: &str) -> Option<&GroupSummary> {
        self.summary.iter().find(|g| g.algorithm == algorithm)
    }
}

/// Medians below this are treated as exact zeros and left out of slope fits.
pub const SLOPE_FLOOR: f64 = 1e-9;

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn cell_stats(n: usize, values: &[f64]) -> CellStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    CellStats {
        n,
        trials: v.len(),
        median: quantile(&v, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        mean: if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 },
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, stderr(b))`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((b, se))
}

/// Log-log slope over points whose value is at least [`SLOPE_FLOOR`].
pub fn loglog_slope(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(_, v)| *v >= SLOPE_FLOOR)
        .map(|&(n, v)| ((n as f64).log2(), v.log2()))
        .unzip();
    ols_slope(&x, &y)
}

pub fn summarize_group(algorithm: &str, rows: &[Row]) -> GroupSummary {
    let mut ns: Vec<usize> = rows.iter().filter(|r| r.algorithm == algorithm).map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let per_n: Vec<CellStats> = ns
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.n == n)
                .map(|r| r.subopt)
                .collect();
            cell_stats(n, &v)
        })
        .collect();
    let med: Vec<(usize, f64)> = per_n.iter().map(|c| (c.n, c.median)).collect();
    let mean: Vec<(usize, f64)> = per_n.iter().map(|c| (c.n, c.mean)).collect();
    let fit = loglog_slope(&med);
    let mfit = loglog_slope(&mean);
    let inversions = per_n.windows(2).filter(|p| p[1].median > p[0].median).count();
    GroupSummary {
        algorithm: algorithm.to_string(),
        per_n,
        slope: fit.map(|f| f.0),
        slope_stderr: fit.map(|f| f.1),
        mean_slope: mfit.map(|f| f.0),
        mean_slope_stderr: mfit.map(|f| f.1),
        inversions,
    }
}

fn summarize(rows: &[Row]) -> Vec<GroupSummary> {
    let mut algs: Vec<&str> = Vec::new();
    for r in rows {
        if !algs.contains(&r.algorithm.as_str()) {
            algs.push(&r.algorithm);
        }
    }
    algs.iter().map(|a| summarize_group(a, rows)).collect()
}

/// Options shared by every sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub master_seed: u64,
    /// Record wall-clock per trial; off keeps reruns byte-identical.
    pub timing: bool,
}

fn elapsed_ms(start: Instant, timing: bool) -> u64 {
    if timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

/// Seed of trial `trial` at sample size `n`; shared across algorithms so
/// that learners are compared on the same datasets.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    derive_seed(master, n as u64, trial as u64)
}

/// Runs `trials` trials of `alg` at every `n` in `grid`.
pub fn sweep(
    experiment: &str,
    spec: &InstanceSpec,
    alg: Algorithm,
    params: &AlgorithmParams,
    grid: &[usize],
    trials: usize,
    opts: SweepOptions,
) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(grid.len() * trials);
    for &n in grid {
        let inst = spec.build(n)?;
        let cell: Vec<Row> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let start = Instant::now();
                let seed = trial_seed(opts.master_seed, n, t);
                let out = run_trial(&inst, alg, params, n, seed)?;
                Ok(Row {
                    experiment: experiment.to_string(),
                    algorithm: alg.as_str().to_string(),
                    instance: spec.label().to_string(),
                    n,
                    trial: t,
                    seed,
                    subopt: out.subopt,
                    objective: out.objective,
                    alpha: out.alpha,
                    runtime_ms: elapsed_ms(start, opts.timing),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(cell);
    }
    Ok(rows)
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn finish(
    name: &str,
    instance: &str,
    config: serde_json::Value,
    opts: SweepOptions,
    rows: Vec<Row>,
    checks: Vec<Check>,
    start: Instant,
) -> ExperimentReport {
    let summary = summarize(&rows);
    ExperimentReport {
        name: name.to_string(),
        instance: instance.to_string(),
        config,
        master_seed: opts.master_seed,
        rows,
        summary,
        checks,
        wall_clock_ms: elapsed_ms(start, opts.timing),
    }
}

/// Suboptimality of always pulling the rarely observed arm.
pub const PROP1_GAP: f64 = 1.0 / 6.0;

/// Dataset with `n - 1` pulls of arm 0 and one rewarded pull of arm 1.
pub fn prop1_conditioned(n: usize) -> DatasetSummary {
    let mut d = DatasetSummary::empty(1, 2);
    d.n = n as u64;
    d.counts = vec![n as u64 - 1, 1];
    d.reward_sums = vec![0.5 * (n - 1) as f64, 1.0];
    d.next_counts = vec![n as u64 - 1, 1];
    d
}

/// Unregularized learner on the two-arm counterexample: exact conditioned
/// check plus a Monte-Carlo failure rate; optionally the penalized learner's
/// median at `alm_n`.
pub fn run_prop1(n: usize, trials: usize, alm_n: Option<usize>, opts: SweepOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let spec = InstanceSpec::Prop1 { b_w: default_b_w() };
    let inst = spec.build(n)?;
    let params = AlgorithmParams {
        alpha: Some(0.0),
        ..AlgorithmParams::default()
    };
    let kind = empirical_kind(Algorithm::ProMab, &params, &inst, n)?;
    let td = TrialData {
        data: prop1_conditioned(n),
        initial: None,
        model_data: None,
    };
    let sol = solve_trial(&inst, kind, &td, false)?;
    let sub = suboptimality(&inst.model, &sol.policy)?;
    let picked = sol.indices.map(|c| c.w);
    let mut checks = vec![
        check("conditioned_picks_w2", picked == Some(1), format!("selected member {picked:?}")),
        check(
            "conditioned_subopt_is_one_sixth",
            (sub - PROP1_GAP).abs() < 1e-12,
            format!("suboptimality {sub}"),
        ),
    ];
    let mut rows = sweep("prop1", &spec, Algorithm::ProMab, &params, &[n], trials, opts)?;
    let failures = rows.iter().filter(|r| (r.subopt - PROP1_GAP).abs() < 1e-9).count();
    let frac = failures as f64 / trials.max(1) as f64;
    checks.push(check(
        "failure_fraction_above_0.001",
        frac > 1e-3,
        format!("{failures} of {trials} trials failed ({frac})"),
    ));
    if let Some(m) = alm_n {
        let alm = sweep("prop1", &spec, Algorithm::AlmMab, &AlgorithmParams::default(), &[m], trials, opts)?;
        let med = summarize_group(Algorithm::AlmMab.as_str(), &alm).per_n[0].median;
        checks.push(check("alm_median_below_0.05", med < 0.05, format!("median {med} at N = {m}")));
        rows.extend(alm);
    }
    let config = serde_json::json!({"experiment": "prop1", "n": n, "trials": trials, "alm_n": alm_n});
    Ok(finish("prop1", "prop1", config, opts, rows, checks, start))
}

/// Unregularized learner restricted to population-feasible weights.
pub fn run_prop2_feasible(
    spec: &InstanceSpec,
    grid: &[usize],
    trials: usize,
    opts: SweepOptions,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for &n in grid {
        let mut inst = spec.build(n)?;
        let (model, mu) = (inst.model.clone(), inst.mu.clone());
        inst.classes.w = inst
            .classes
            .w
            .filter("W", |w| alm_penalty(&model, &mu, w).map(|p| p.sqrt() <= 1e-9).unwrap_or(false))?;
        let alg = if inst.model.n_states() == 1 { Algorithm::ProMab } else { Algorithm::ProCb };
        let params = AlgorithmParams {
            alpha: Some(0.0),
            ..AlgorithmParams::default()
        };
        let cell: Vec<Row> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let t0 = Instant::now();
                let seed = trial_seed(opts.master_seed, n, t);
                let out = run_trial(&inst, alg, &params, n, seed)?;
                Ok(Row {
                    experiment: "prop2_feasible".into(),
                    algorithm: alg.as_str().into(),
                    instance: spec.label().into(),
                    n,
                    trial: t,
                    seed,
                    subopt: out.subopt,
                    objective: out.objective,
                    alpha: 0.0,
                    runtime_ms: elapsed_ms(t0, opts.timing),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(cell);
    }
    let config = serde_json::json!({"experiment": "prop2_feasible", "instance": spec, "n_grid": grid, "trials": trials});
    Ok(finish("prop2_feasible", spec.label(), config, opts, rows, Vec::new(), start))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LargeAlpha,
    SmallAlpha,
}

/// Regularized learner on the two constructions where it fails; the
/// small-alpha sweep also runs the penalized learner on the same data.
pub fn run_prop3(
    regime: Regime,
    alpha: f64,
    grid: &[usize],
    trials: usize,
    opts: SweepOptions,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let params = AlgorithmParams::default();
    match regime {
        Regime::LargeAlpha => {
            let spec = InstanceSpec::Prop3Large { alpha };
            let rows = sweep("prop3_large", &spec, Algorithm::ProCb, &params, grid, trials, opts)?;
            let bar = 0.5 * alpha.min(1.0);
            let hits = rows.iter().filter(|r| r.subopt >= bar).count();
            let frac = hits as f64 / rows.len().max(1) as f64;
            let checks = vec![check(
                "constant_fraction_suboptimal",
                frac >= 0.5,
                format!("{hits} of {} trials have suboptimality >= {bar}", rows.len()),
            )];
            let config = serde_json::json!({"experiment": "prop3", "regime": regime, "alpha": alpha, "n_grid": grid, "trials": trials});
            Ok(finish("prop3_large", "prop3_large", config, opts, rows, checks, start))
        }
        Regime::SmallAlpha => {
            let spec = InstanceSpec::Prop3Small;
            let mut rows = sweep("prop3_small", &spec, Algorithm::ProCb, &params, grid, trials, opts)?;
            rows.extend(sweep("prop3_small", &spec, Algorithm::AlmCb, &params, grid, trials, opts)?);
            let config = serde_json::json!({"experiment": "prop3", "regime": regime, "n_grid": grid, "trials": trials});
            Ok(finish("prop3_small", "prop3_small", config, opts, rows, Vec::new(), start))
        }
    }
}

/// Population objectives of the two weights of the four-state example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Values {
    pub lagrangian: [f64; 2],
    pub regularized: [f64; 2],
    pub penalized: [f64; 2],
    pub subopt: [f64; 2],
}

pub fn figure1_values(gamma: f64, alpha: f64) -> Result<Figure1Values> {
    let inst = instances::figure1(gamma)?;
    let spec = RegularizerSpec::new(RegularizerKind::PlainSquare, inst.classes.w.bounds().upper)?;
    let (m, mu) = (&inst.model, &inst.mu);
    let minv = |f: &dyn Fn(&[f64]) -> Result<f64>| -> Result<f64> {
        let mut best = f64::INFINITY;
        for v in inst.classes.v.members() {
            best = best.min(f(v)?);
        }
        Ok(best)
    };
    let mut out = Figure1Values {
        lagrangian: [0.0; 2],
        regularized: [0.0; 2],
        penalized: [0.0; 2],
        subopt: [0.0; 2],
    };
    for i in 0..2 {
        let w = inst.classes.w.get(i);
        out.lagrangian[i] = minv(&|v| pop_lagrangian(m, mu, w, v))?;
        out.regularized[i] = minv(&|v| pop_pro(m, mu, w, v, alpha, &spec))?;
        out.penalized[i] = minv(&|v| pop_alm(m, mu, w, v))?;
        let pi: Policy = policy_from_weights(w, mu)?;
        out.subopt[i] = suboptimality(m, &pi)?;
    }
    Ok(out)
}

/// Exact population comparison on the four-state example.
pub fn run_figure1(gamma: f64, alpha: f64, opts: SweepOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let f = figure1_values(gamma, alpha)?;
    let mut rows = Vec::new();
    for (alg, vals) in [("lagrangian", f.lagrangian), ("pro_plain_square", f.regularized), ("alm", f.penalized)] {
        for (i, &val) in vals.iter().enumerate() {
            rows.push(Row {
                experiment: "figure1".into(),
                algorithm: alg.into(),
                instance: "figure1".into(),
                n: 0,
                trial: i,
                seed: opts.master_seed,
                subopt: f.subopt[i],
                objective: val,
                alpha: if alg == "pro_plain_square" { alpha } else { 0.0 },
                runtime_ms: 0,
            });
        }
    }
    let checks = vec![
        check(
            "unregularized_tie",
            (f.lagrangian[0] - f.lagrangian[1]).abs() <= 1e-12,
            format!("{} vs {}", f.lagrangian[0], f.lagrangian[1]),
        ),
        check(
            "regularized_selects_w2",
            f.regularized[1] > f.regularized[0],
            format!("{} vs {}", f.regularized[0], f.regularized[1]),
        ),
        check(
            "penalized_selects_w1",
            f.penalized[0] > f.penalized[1],
            format!("{} vs {}", f.penalized[0], f.penalized[1]),
        ),
    ];
    let config = serde_json::json!({"experiment": "figure1", "gamma": gamma, "alpha": alpha});
    let mut rep = finish("figure1", "figure1", config, opts, rows, checks, start);
    rep.summary.clear();
    Ok(rep)
}

/// Rate sweep of one learner on one instance family.
pub fn run_rate(
    alg: Algorithm,
    params: &AlgorithmParams,
    spec: &InstanceSpec,
    grid: &[usize],
    trials: usize,
    opts: SweepOptions,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let rows = sweep("rate", spec, alg, params, grid, trials, opts)?;
    let config = serde_json::json!({
        "experiment": "rate",
        "algorithm": alg,
        "params": params,
        "instance": spec,
        "n_grid": grid,
        "trials": trials,
    });
    Ok(finish("rate", spec.label(), config, opts, rows, Vec::new(), start))
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn write_rows_csv(rows: &[Row], path: &Path) -> CliResult<()> {
    let display = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(&display, e))?;
    if rows.is_empty() {
        w.write_record([
            "experiment",
            "algorithm",
            "instance",
            "N",
            "trial",
            "seed",
            "subopt",
            "objective",
            "alpha",
            "runtime_ms",
        ])
        .map_err(|e| CliError::data(&display, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| CliError::data(&display, e))?;
    }
    w.flush().map_err(|e| CliError::data(&display, e))
}

pub fn read_rows_csv(path: &Path) -> CliResult<Vec<Row>> {
    let display = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(&display, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::data(format!("{display}:{}", i + 2), e)))
        .collect()
}

/// Writes `<name>.csv` with the rows and `<name>.json` with the rest.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> CliResult<ReportFiles> {
    let display = dir.display().to_string();
    fs::create_dir_all(dir).map_err(|e| CliError::data(&display, e))?;
    let csv = dir.join(format!("{}.csv", report.name));
    let json = dir.join(format!("{}.json", report.name));
    write_rows_csv(&report.rows, &csv)?;
    let body = serde_json::json!({
        "name": report.name,
        "instance": report.instance,
        "config": report.config,
        "master_seed": report.master_seed,
        "summary": report.summary,
        "checks": report.checks,
        "wall_clock_ms": report.wall_clock_ms,
    });
    let text = serde_json::to_string_pretty(&body).map_err(|e| CliError::data(&display, e))?;
    fs::write(&json, text + "\n").map_err(|e| CliError::data(json.display().to_string(), e))?;
    Ok(ReportFiles { csv, json })
}

/// Reads back a report written by [`emit_report`].
pub fn load_report(files: &ReportFiles) -> CliResult<ExperimentReport> {
    #[derive(Deserialize)]
    struct Body {
        name: String,
        instance: String,
        config: serde_json::Value,
        master_seed: u64,
        summary: Vec<GroupSummary>,
        checks: Vec<Check>,
        wall_clock_ms: u64,
    }
    let display = files.json.display().to_string();
    let text = fs::read_to_string(&files.json).map_err(|e| CliError::data(&display, e))?;
    let b: Body = serde_json::from_str(&text).map_err(|e| CliError::data(&display, e))?;
    Ok(ExperimentReport {
        name: b.name,
        instance: b.instance,
        config: b.config,
        master_seed: b.master_seed,
        rows: read_rows_csv(&files.csv)?,
        summary: b.summary,
        checks: b.checks,
        wall_clock_ms: b.wall_clock_ms,
    })
}
