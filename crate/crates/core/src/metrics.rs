//! Weak regret and collision statistics computed from run traces.
//!
//! Everything here is analyst-side: traces carry the true means, which the
//! players never see.

use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::policies::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretMode {
    /// Uses the true mean of every chosen non-collided action.
    Pseudo,
    /// Uses the rewards actually drawn.
    Realized,
}

/// One step of one run, all players.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub choices: Vec<usize>,
    pub collided: Vec<bool>,
    /// `mu[n][arm]` when the pull went through, else 0.
    pub expected_rewards: Vec<f64>,
    pub realized_rewards: Vec<f64>,
}

/// Full per-step record of one run, stored as flat player-major-per-step arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub digest: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub players: usize,
    pub u_star: f64,
    pub comm_bands: BTreeSet<usize>,
    choices: Vec<u32>,
    collided: Vec<bool>,
    expected: Vec<f64>,
    realized: Vec<f64>,
    /// First step from which every player stayed committed to the same arm.
    pub commit_step: Option<u64>,
    /// Committed arm of each player at the end of the run.
    pub final_commitments: Vec<Option<usize>>,
}

impl RunTrace {
    pub fn new(
        digest: impl Into<String>,
        algorithm: Algorithm,
        seed: u64,
        players: usize,
        u_star: f64,
        comm_bands: BTreeSet<usize>,
    ) -> Self {
        Self {
            digest: digest.into(),
            algorithm,
            seed,
            players,
            u_star,
            comm_bands,
            choices: Vec::new(),
            collided: Vec::new(),
            expected: Vec::new(),
            realized: Vec::new(),
            commit_step: None,
            final_commitments: vec![None; players],
        }
    }

    pub fn reserve(&mut self, steps: usize) {
        let n = steps * self.players;
        self.choices.reserve(n);
        self.collided.reserve(n);
        self.expected.reserve(n);
        self.realized.reserve(n);
    }

    /// Appends one step. Rewards of collided pulls are forced to 0.
    pub fn push(&mut self, choices: &[usize], collided: &[bool], means: &[f64], realized: &[f64]) -> Result<()> {
        let p = self.players;
        if choices.len() != p || collided.len() != p || means.len() != p || realized.len() != p {
            return Err(Error::Usage(format!("step record must have {p} entries per field")));
        }
        for n in 0..p {
            self.choices.push(choices[n] as u32);
            self.collided.push(collided[n]);
            self.expected.push(if collided[n] { 0.0 } else { means[n] });
            self.realized.push(if collided[n] { 0.0 } else { realized[n] });
        }
        Ok(())
    }

    pub fn push_record(&mut self, rec: &StepRecord) -> Result<()> {
        if rec.t != self.len() {
            return Err(Error::Usage(format!("expected step {}, got {}", self.len(), rec.t)));
        }
        self.push(&rec.choices, &rec.collided, &rec.expected_rewards, &rec.realized_rewards)
    }

    /// Number of recorded steps.
    pub fn len(&self) -> u64 {
        if self.players == 0 {
            0
        } else {
            (self.choices.len() / self.players) as u64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn record(&self, t: u64) -> Option<StepRecord> {
        if t >= self.len() {
            return None;
        }
        let r = t as usize * self.players..(t as usize + 1) * self.players;
        Some(StepRecord {
            t,
            choices: self.choices[r.clone()].iter().map(|&a| a as usize).collect(),
            collided: self.collided[r.clone()].to_vec(),
            expected_rewards: self.expected[r.clone()].to_vec(),
            realized_rewards: self.realized[r].to_vec(),
        })
    }

    pub fn records(&self) -> impl Iterator<Item = StepRecord> + '_ {
        (0..self.len()).filter_map(|t| self.record(t))
    }

    fn step_sum(values: &[f64], players: usize) -> impl Iterator<Item = f64> + '_ {
        values.chunks_exact(players.max(1)).map(|c| c.iter().sum())
    }

    /// `U* - sum_n expected reward` at every step. Never negative.
    pub fn per_step_regret(&self) -> Vec<f64> {
        Self::step_sum(&self.expected, self.players)
            .map(|s| (self.u_star - s).max(0.0))
            .collect()
    }

    fn step_counts(&self, comm_only: bool) -> impl Iterator<Item = u64> + '_ {
        let p = self.players.max(1);
        self.collided
            .chunks_exact(p)
            .zip(self.choices.chunks_exact(p))
            .map(move |(col, ch)| {
                col.iter()
                    .zip(ch)
                    .filter(|(&c, &a)| c && (!comm_only || self.comm_bands.contains(&(a as usize))))
                    .count() as u64
            })
    }
}

fn running_sum<I: Iterator<Item = f64>>(it: I) -> Vec<f64> {
    let mut acc = 0.0;
    it.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

/// `R_t = t U* - sum_{s <= t} sum_n reward_n(s)`; entry `i` is `R_{i+1}`.
pub fn cumulative_regret(trace: &RunTrace, mode: RegretMode) -> Vec<f64> {
    match mode {
        // per-step increments are clipped at 0 so the curve is monotone even with rounding
        RegretMode::Pseudo => running_sum(trace.per_step_regret().into_iter()),
        RegretMode::Realized => running_sum(
            RunTrace::step_sum(&trace.realized, trace.players).map(|s| trace.u_star - s),
        ),
    }
}

/// Running count of collided (player, step) pairs.
pub fn cumulative_collisions(trace: &RunTrace) -> Vec<u64> {
    let mut acc = 0;
    trace
        .step_counts(false)
        .map(|c| {
            acc += c;
            acc
        })
        .collect()
}

/// Running count of pulls that landed on a communication sub-band.
pub fn cumulative_comm_collisions(trace: &RunTrace) -> Vec<u64> {
    let mut acc = 0;
    trace
        .step_counts(true)
        .map(|c| {
            acc += c;
            acc
        })
        .collect()
}

/// Smallest `t` such that the per-step pseudo-regret is below `tol` at every
/// step `s >= t`. Equals the trace length if the last step is above `tol`.
pub fn convergence_index(trace: &RunTrace, tol: f64) -> u64 {
    let regret = trace.per_step_regret();
    regret
        .iter()
        .rposition(|&r| r >= tol)
        .map_or(0, |i| i as u64 + 1)
}

/// Curves of one run sampled at `t = d, 2d, ...` (cumulative values after `t` steps).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSamples {
    pub digest: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub t: Vec<u64>,
    pub regret_pseudo: Vec<f64>,
    pub regret_realized: Vec<f64>,
    pub collisions: Vec<f64>,
}

impl CurveSamples {
    pub fn from_trace(trace: &RunTrace, decimation: u64) -> Result<Self> {
        if decimation == 0 {
            return Err(Error::Usage("decimation must be positive".into()));
        }
        let pseudo = cumulative_regret(trace, RegretMode::Pseudo);
        let realized = cumulative_regret(trace, RegretMode::Realized);
        let coll = cumulative_collisions(trace);
        let t: Vec<u64> = (1..=trace.len() / decimation).map(|k| k * decimation).collect();
        let at = |v: &[f64], t: u64| v[t as usize - 1];
        Ok(Self {
            digest: trace.digest.clone(),
            algorithm: trace.algorithm,
            seed: trace.seed,
            regret_pseudo: t.iter().map(|&s| at(&pseudo, s)).collect(),
            regret_realized: t.iter().map(|&s| at(&realized, s)).collect(),
            collisions: t.iter().map(|&s| coll[s as usize - 1] as f64).collect(),
            t,
        })
    }
}

/// Pointwise mean and standard error over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub digest: String,
    pub algorithm: Algorithm,
    pub n_runs: usize,
    pub t: Vec<u64>,
    pub mean_regret: Vec<f64>,
    pub stderr_regret: Vec<f64>,
    pub mean_regret_realized: Vec<f64>,
    pub mean_collisions: Vec<f64>,
    pub stderr_collisions: Vec<f64>,
}

fn mean_stderr(columns: &[&[f64]], i: usize) -> (f64, f64) {
    let n = columns.len() as f64;
    let mean = columns.iter().map(|c| c[i]).sum::<f64>() / n;
    if columns.len() < 2 {
        return (mean, 0.0);
    }
    let var = columns.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates already-decimated runs. All samples must share digest, algorithm and grid.
pub fn aggregate_samples(samples: &[CurveSamples]) -> Result<AggregateCurve> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Usage("cannot aggregate zero runs".into()))?;
    for s in samples {
        if s.digest != first.digest {
            return Err(Error::Usage(format!(
                "traces from different scenarios ({} vs {})",
                first.digest, s.digest
            )));
        }
        if s.algorithm != first.algorithm {
            return Err(Error::Usage(format!(
                "traces from different algorithms ({} vs {})",
                first.algorithm, s.algorithm
            )));
        }
        if s.t != first.t {
            return Err(Error::Usage("traces have different lengths".into()));
        }
    }
    let pseudo: Vec<&[f64]> = samples.iter().map(|s| s.regret_pseudo.as_slice()).collect();
    let realized: Vec<&[f64]> = samples.iter().map(|s| s.regret_realized.as_slice()).collect();
    let coll: Vec<&[f64]> = samples.iter().map(|s| s.collisions.as_slice()).collect();
    let len = first.t.len();
    let (mean_regret, stderr_regret) = (0..len).map(|i| mean_stderr(&pseudo, i)).unzip();
    let (mean_collisions, stderr_collisions) = (0..len).map(|i| mean_stderr(&coll, i)).unzip();
    Ok(AggregateCurve {
        digest: first.digest.clone(),
        algorithm: first.algorithm,
        n_runs: samples.len(),
        t: first.t.clone(),
        mean_regret,
        stderr_regret,
        mean_regret_realized: (0..len).map(|i| mean_stderr(&realized, i).0).collect(),
        mean_collisions,
        stderr_collisions,
    })
}

pub fn aggregate(traces: &[RunTrace], decimation: u64) -> Result<AggregateCurve> {
    let samples = traces
        .iter()
        .map(|t| CurveSamples::from_trace(t, decimation))
        .collect::<Result<Vec<_>>>()?;
    aggregate_samples(&samples)
}

/// Steps kept in CSV output: every step before `dense_prefix`, then every `stride`-th.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retention {
    pub dense_prefix: u64,
    pub stride: u64,
}

impl Default for Retention {
    fn default() -> Self {
        Self {
            dense_prefix: 2000,
            stride: 100,
        }
    }
}

impl Retention {
    /// `t` is the 1-based step count.
    pub fn keeps(&self, t: u64) -> bool {
        t < self.dense_prefix || t.is_multiple_of(self.stride)
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "run_id",
    "algorithm",
    "seed",
    "t",
    "cum_regret_pseudo",
    "cum_regret_realized",
    "cum_collisions",
    "cum_comm_collisions",
];

/// Writes the retained rows of one trace (no header).
pub fn write_trace_rows<W: Write>(
    out: &mut csv::Writer<W>,
    run_id: &str,
    trace: &RunTrace,
    retention: Retention,
) -> Result<()> {
    let pseudo = cumulative_regret(trace, RegretMode::Pseudo);
    let realized = cumulative_regret(trace, RegretMode::Realized);
    let coll = cumulative_collisions(trace);
    let comm = cumulative_comm_collisions(trace);
    let alg = trace.algorithm.as_str();
    let seed = trace.seed.to_string();
    for i in 0..trace.len() as usize {
        let t = i as u64 + 1;
        if !retention.keeps(t) {
            continue;
        }
        out.write_record([
            run_id,
            alg,
            &seed,
            &t.to_string(),
            &format!("{:.6}", pseudo[i]),
            &format!("{:.6}", realized[i]),
            &coll[i].to_string(),
            &comm[i].to_string(),
        ])?;
    }
    Ok(())
}

/// Whole CSV document for a set of traces, header included.
pub fn write_traces_csv<W: Write>(writer: W, traces: &[(String, &RunTrace)], retention: Retention) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for (id, trace) in traces {
        write_trace_rows(&mut out, id, trace, retention)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
