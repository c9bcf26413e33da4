//! Batch execution of (algorithm, seed) jobs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::plot::emit_plots;
use crate::env::{Environment, Observation, Scenario};
use crate::error::{Error, Result};
use crate::matching::hungarian_max;
use crate::metrics::{
    aggregate_samples, convergence_index, cumulative_collisions, cumulative_regret, write_trace_rows,
    AggregateCurve, CurveSamples, RegretMode, Retention, RunTrace, CSV_HEADER,
};
use crate::policies::{build_policy, Algorithm, PolicyContext, PolicyFeedback, PolicyParams};

/// Per-step pseudo-regret below this counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Best achievable expected sum reward, with communication sub-bands zeroed.
pub fn u_star(scenario: &Scenario) -> Result<f64> {
    Ok(hungarian_max(scenario.effective_means().rows())?.utility)
}

/// Runs one algorithm for the full horizon of `scenario` with the given seed.
pub fn run_single(scenario: &Scenario, algorithm: Algorithm, params: &PolicyParams, seed: u64) -> Result<RunTrace> {
    let mut scenario = scenario.clone();
    scenario.seed = seed;
    let players = scenario.players;
    let mut trace = RunTrace::new(
        scenario.digest(),
        algorithm,
        seed,
        players,
        u_star(&scenario)?,
        scenario.comm_bands.clone(),
    );
    let mut env = Environment::new(scenario)?;
    let means = env.scenario().means.clone();
    let mut policies: Vec<_> = (0..players)
        .map(|player| {
            build_policy(
                algorithm,
                &PolicyContext {
                    arms: env.scenario().arms,
                    horizon: env.horizon(),
                    seed,
                    player,
                    params: params.clone(),
                },
            )
        })
        .collect();

    trace.reserve(env.horizon() as usize);
    let mut choices = vec![0usize; players];
    let mut obs: Vec<Observation> = Vec::with_capacity(players);
    let mut collided = vec![false; players];
    let mut mu = vec![0.0; players];
    let mut rewards = vec![0.0; players];
    let mut committed: Vec<Option<usize>> = vec![None; players];
    let mut commit_step = None;

    for t in 0..env.horizon() {
        for (c, p) in choices.iter_mut().zip(policies.iter_mut()) {
            *c = p.select(t);
        }
        env.step_into(&choices, &mut obs)?;
        for (n, (p, o)) in policies.iter_mut().zip(&obs).enumerate() {
            p.observe(&PolicyFeedback {
                arm: o.arm,
                reward: o.reward,
                collided: o.collided,
                t,
            })?;
            collided[n] = o.collided;
            mu[n] = means.get(n, o.arm);
            rewards[n] = o.reward;
        }
        trace.push(&choices, &collided, &mu, &rewards)?;

        let mut all = true;
        let mut changed = false;
        for (n, p) in policies.iter().enumerate() {
            let arm = p.snapshot().committed_arm;
            all &= arm.is_some();
            changed |= arm != committed[n];
            committed[n] = arm;
        }
        if !all {
            commit_step = None;
        } else if changed || commit_step.is_none() {
            commit_step = Some(t + 1);
        }
    }
    trace.commit_step = commit_step;
    trace.final_commitments = committed;
    Ok(trace)
}

/// One (algorithm, seed) job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Job {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub seed: u64,
}

/// Expansion of a config into jobs; seed `i` is shared by all algorithms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPlan {
    pub jobs: Vec<Job>,
}

impl RunPlan {
    pub fn new(config: &ExperimentConfig) -> Self {
        let jobs = config
            .algorithms
            .iter()
            .flat_map(|&algorithm| {
                (0..config.n_runs).map(move |i| Job {
                    run_id: format!("{}-{i:03}", algorithm.as_str()),
                    algorithm,
                    seed: config.seed(i),
                })
            })
            .collect();
        Self { jobs }
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: u64,
    pub final_regret_pseudo: f64,
    pub final_regret_realized: f64,
    pub final_collisions: u64,
    /// Step after which per-step pseudo-regret stays below [`CONVERGENCE_TOL`] (the horizon if never).
    pub convergence_index: u64,
    /// Same index converted to seconds of radar time.
    pub convergence_seconds: f64,
    pub commit_step: Option<u64>,
    /// Collisions from `commit_step` to the horizon.
    pub collisions_after_commit: Option<u64>,
}

impl RunSummary {
    pub fn from_trace(run_id: &str, trace: &RunTrace, pri_seconds: f64) -> Self {
        let pseudo = cumulative_regret(trace, RegretMode::Pseudo);
        let realized = cumulative_regret(trace, RegretMode::Realized);
        let coll = cumulative_collisions(trace);
        let total = coll.last().copied().unwrap_or(0);
        let conv = convergence_index(trace, CONVERGENCE_TOL);
        Self {
            run_id: run_id.to_string(),
            algorithm: trace.algorithm,
            seed: trace.seed,
            horizon: trace.len(),
            final_regret_pseudo: pseudo.last().copied().unwrap_or(0.0),
            final_regret_realized: realized.last().copied().unwrap_or(0.0),
            final_collisions: total,
            convergence_index: conv,
            convergence_seconds: conv as f64 * pri_seconds,
            commit_step: trace.commit_step,
            collisions_after_commit: trace
                .commit_step
                .map(|s| total - if s == 0 { 0 } else { coll[s as usize - 1] }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summaries: Vec<RunSummary>,
    /// One curve per algorithm, in config order.
    pub curves: Vec<AggregateCurve>,
    pub files: Vec<PathBuf>,
}

struct JobResult {
    summary: RunSummary,
    samples: CurveSamples,
    csv_rows: Vec<u8>,
}

fn execute(job: &Job, config: &ExperimentConfig, want_csv: bool) -> Result<JobResult> {
    let trace = run_single(&config.scenario, job.algorithm, &config.params, job.seed)?;
    let mut csv_rows = Vec::new();
    if want_csv {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut csv_rows);
        let retention = Retention {
            stride: config.decimation,
            ..Retention::default()
        };
        write_trace_rows(&mut w, &job.run_id, &trace, retention)?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
    }
    Ok(JobResult {
        summary: RunSummary::from_trace(&job.run_id, &trace, config.pri_seconds),
        samples: CurveSamples::from_trace(&trace, config.decimation)?,
        csv_rows,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn summaries_csv(summaries: &[RunSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        w.serialize(s)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

fn aggregate_csv(curves: &[AggregateCurve]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "t",
        "n_runs",
        "mean_regret",
        "stderr_regret",
        "mean_regret_realized",
        "mean_collisions",
        "stderr_collisions",
    ])?;
    for c in curves {
        for i in 0..c.t.len() {
            w.write_record([
                c.algorithm.as_str().to_string(),
                c.t[i].to_string(),
                c.n_runs.to_string(),
                format!("{:.6}", c.mean_regret[i]),
                format!("{:.6}", c.stderr_regret[i]),
                format!("{:.6}", c.mean_regret_realized[i]),
                format!("{:.6}", c.mean_collisions[i]),
                format!("{:.6}", c.stderr_collisions[i]),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Runs every job of the plan, aggregates per algorithm and writes outputs
/// (`traces.csv`, `summary.csv`, `aggregate.csv`, optional SVG plots) when
/// `out_dir` is set. Output is deterministic for a given config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let plan = RunPlan::new(config);
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let want_csv = config.out_dir.is_some();
    let results = plan
        .jobs
        .par_iter()
        .map(|job| execute(job, config, want_csv))
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::new();
    for &alg in &config.algorithms {
        let samples: Vec<CurveSamples> = results
            .iter()
            .filter(|r| r.summary.algorithm == alg)
            .map(|r| r.samples.clone())
            .collect();
        curves.push(aggregate_samples(&samples)?);
    }
    let summaries: Vec<RunSummary> = results.iter().map(|r| r.summary.clone()).collect();

    let mut files = Vec::new();
    if let Some(dir) = &config.out_dir {
        let path = dir.join("traces.csv");
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{}", CSV_HEADER.join(",")).map_err(|e| Error::io(&path, e))?;
        for r in &results {
            f.write_all(&r.csv_rows).map_err(|e| Error::io(&path, e))?;
        }
        files.push(path);

        let path = dir.join("summary.csv");
        write_file(&path, &summaries_csv(&summaries)?)?;
        files.push(path);

        let path = dir.join("aggregate.csv");
        write_file(&path, &aggregate_csv(&curves)?)?;
        files.push(path);

        if config.plots {
            files.extend(emit_plots(&curves, dir, &config.name)?);
        }
    }
    Ok(ExperimentOutput {
        summaries,
        curves,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(horizon: u64) -> ExperimentConfig {
        let text = format!(
            r#"{{"players": 2, "arms": 4, "means": [[0.0, 0.9, 0.6, 0.3]], "comm_bands": [1],
                "variance": 0.01, "horizon": {horizon}, "n_runs": 3, "decimation": 10,
                "policy": {{"explore_len": 200}}}}"#
        );
        ExperimentConfig::from_json_str(&text).unwrap()
    }

    #[test]
    fn plan_shares_seeds_across_algorithms() {
        let plan = RunPlan::new(&small_config(100));
        assert_eq!(plan.jobs.len(), 12);
        let seeds = |a: Algorithm| -> Vec<u64> {
            plan.jobs.iter().filter(|j| j.algorithm == a).map(|j| j.seed).collect()
        };
        assert_eq!(seeds(Algorithm::Ucb1), vec![0, 1, 2]);
        assert_eq!(seeds(Algorithm::Sic), seeds(Algorithm::Ucb1));
    }

    #[test]
    fn horizon_zero_gives_empty_curves() {
        let out = run_experiment(&small_config(0)).unwrap();
        assert_eq!(out.summaries.len(), 12);
        assert!(out.curves.iter().all(|c| c.t.is_empty()));
        assert!(out.summaries.iter().all(|s| s.final_regret_pseudo == 0.0));
    }

    #[test]
    fn every_algorithm_runs_and_regret_is_bounded() {
        let cfg = small_config(3000);
        let out = run_experiment(&cfg).unwrap();
        let us = u_star(&cfg.scenario).unwrap();
        assert!((us - 1.5).abs() < 1e-12);
        for s in &out.summaries {
            assert_eq!(s.horizon, 3000);
            assert!(s.final_regret_pseudo >= 0.0);
            assert!(s.final_regret_pseudo <= us * 3000.0 + 1e-9);
        }
    }
}
