//! Multiple UCB1: every player runs an independent single-player UCB1.

use rand::seq::SliceRandom;

use super::{Algorithm, FeedbackGuard, Policy, PolicyContext, PolicyFeedback, PolicySnapshot, TieBreak};
use crate::error::Result;

/// `mean + sqrt(2 ln t / pulls)`.
pub fn ucb_index(mean: f64, pulls: u64, t: u64) -> f64 {
    mean + (2.0 * (t as f64).ln() / pulls as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Ucb1 {
    pull_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    t: u64,
    /// Order in which never-pulled arms are tried.
    sweep_order: Vec<usize>,
    guard: FeedbackGuard,
}

impl Ucb1 {
    pub fn new(ctx: &PolicyContext) -> Self {
        let mut sweep_order: Vec<usize> = (0..ctx.arms).collect();
        if ctx.params.ucb_tie_break == TieBreak::Random {
            sweep_order.shuffle(&mut ctx.rng());
        }
        Self {
            pull_counts: vec![0; ctx.arms],
            reward_sums: vec![0.0; ctx.arms],
            t: 0,
            sweep_order,
            guard: FeedbackGuard::default(),
        }
    }

    pub fn pull_counts(&self) -> &[u64] {
        &self.pull_counts
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    fn choose(&self) -> usize {
        if let Some(&arm) = self.sweep_order.iter().find(|&&a| self.pull_counts[a] == 0) {
            return arm;
        }
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for a in 0..self.pull_counts.len() {
            let mean = self.reward_sums[a] / self.pull_counts[a] as f64;
            let idx = ucb_index(mean, self.pull_counts[a], self.t);
            // strict comparison keeps the lowest index on ties
            if idx > best_index {
                best_index = idx;
                best = a;
            }
        }
        best
    }
}

impl Policy for Ucb1 {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ucb1
    }

    fn select(&mut self, _t: u64) -> usize {
        let arm = self.choose();
        self.guard.selected(arm)
    }

    fn observe(&mut self, feedback: &PolicyFeedback) -> Result<()> {
        self.guard.accept(feedback)?;
        self.pull_counts[feedback.arm] += 1;
        self.reward_sums[feedback.arm] += feedback.reward;
        self.t += 1;
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            phase: "ucb",
            phase_key: (0, 0, 0),
            committed_arm: None,
            internal_rank: None,
            is_leader: None,
            players_estimate: None,
        }
    }
}
