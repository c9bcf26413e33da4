//! Musical Chairs: explore uniformly, rank arms, then grab a seat among the
//! estimated top-P arms and keep it once a pull goes through without a collision.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    Algorithm, ArmStats, FeedbackGuard, Policy, PolicyContext, PolicyFeedback, PolicySnapshot,
};
use crate::error::Result;

/// Player count implied by the collision rate of uniform random play.
///
/// With `P` players pulling uniformly over `S` arms, a pull avoids collision
/// with probability `(1 - 1/S)^(P-1)`; inverting the empirical rate gives
/// `round(ln((L - c) / L) / ln(1 - 1/S)) + 1`, clamped to `[1, S]`.
pub fn mc_estimate_players(collisions: u64, explore_len: u64, arms: usize) -> usize {
    if collisions >= explore_len || arms < 2 {
        return arms.max(1);
    }
    let free = (explore_len - collisions) as f64 / explore_len as f64;
    let est = (free.ln() / (1.0 - 1.0 / arms as f64).ln()).round() + 1.0;
    (est.max(1.0) as usize).min(arms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McPhase {
    Explore,
    MusicalChairs,
    Fixed,
}

#[derive(Debug, Clone)]
pub struct MusicalChairs {
    arms: usize,
    explore_length: u64,
    stats: ArmStats,
    phase: McPhase,
    p_estimate: usize,
    best_set: Vec<usize>,
    fixed_arm: Option<usize>,
    t: u64,
    rng: ChaCha8Rng,
    guard: FeedbackGuard,
}

impl MusicalChairs {
    pub fn new(ctx: &PolicyContext) -> Self {
        let mut p = Self {
            arms: ctx.arms,
            explore_length: ctx.params.explore_len(ctx.arms, ctx.horizon),
            stats: ArmStats::new(ctx.arms),
            phase: McPhase::Explore,
            p_estimate: 0,
            best_set: Vec::new(),
            fixed_arm: None,
            t: 0,
            rng: ctx.rng(),
            guard: FeedbackGuard::default(),
        };
        if p.explore_length == 0 {
            p.finish_exploration();
        }
        p
    }

    pub fn phase(&self) -> McPhase {
        self.phase
    }

    pub fn fixed_arm(&self) -> Option<usize> {
        self.fixed_arm
    }

    pub fn best_set(&self) -> &[usize] {
        &self.best_set
    }

    pub fn p_estimate(&self) -> usize {
        self.p_estimate
    }

    pub fn observed_means(&self) -> Vec<f64> {
        self.stats.means()
    }

    fn finish_exploration(&mut self) {
        self.p_estimate = self.stats.estimate_players();
        self.best_set = self.stats.ranking().into_iter().take(self.p_estimate).collect();
        self.phase = McPhase::MusicalChairs;
    }
}

impl Policy for MusicalChairs {
    fn algorithm(&self) -> Algorithm {
        Algorithm::MusicalChairs
    }

    fn select(&mut self, _t: u64) -> usize {
        let arm = match self.phase {
            McPhase::Explore => self.rng.random_range(0..self.arms),
            McPhase::MusicalChairs => self.best_set[self.rng.random_range(0..self.best_set.len())],
            McPhase::Fixed => self.fixed_arm.expect("fixed phase has an arm"),
        };
        self.guard.selected(arm)
    }

    fn observe(&mut self, feedback: &PolicyFeedback) -> Result<()> {
        self.guard.accept(feedback)?;
        self.t += 1;
        match self.phase {
            McPhase::Explore => {
                self.stats.record(feedback);
                if self.t >= self.explore_length {
                    self.finish_exploration();
                }
            }
            McPhase::MusicalChairs => {
                if !feedback.collided {
                    self.fixed_arm = Some(feedback.arm);
                    self.phase = McPhase::Fixed;
                }
            }
            McPhase::Fixed => {}
        }
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        let (phase, key) = match self.phase {
            McPhase::Explore => ("explore", 0),
            McPhase::MusicalChairs => ("musical_chairs", 1),
            McPhase::Fixed => ("fixed", 2),
        };
        PolicySnapshot {
            phase,
            phase_key: (key, 0, 0),
            committed_arm: self.fixed_arm,
            internal_rank: None,
            is_leader: None,
            players_estimate: (self.phase != McPhase::Explore).then_some(self.p_estimate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::PolicyParams;

    #[test]
    fn estimator_examples() {
        assert_eq!(mc_estimate_players(0, 1000, 6), 1);
        // (L - c) / L = (5/6)^3 inverts to P = 4
        let len = 6u64.pow(3) * 10;
        let free = 5u64.pow(3) * 10;
        assert_eq!(mc_estimate_players(len - free, len, 6), 4);
        assert_eq!(mc_estimate_players(1000, 1000, 6), 6);
    }

    fn ctx(explore: u64) -> PolicyContext {
        PolicyContext {
            arms: 4,
            horizon: 1000,
            seed: 3,
            player: 0,
            params: PolicyParams {
                explore_len: Some(explore),
                ..PolicyParams::default()
            },
        }
    }

    fn feed(p: &mut MusicalChairs, arm: usize, reward: f64, collided: bool) {
        p.observe(&PolicyFeedback {
            arm,
            reward,
            collided,
            t: 0,
        })
        .unwrap();
    }

    #[test]
    fn phases_advance_and_fix_on_clean_pull() {
        let mut p = MusicalChairs::new(&ctx(40));
        let means = [0.1, 0.9, 0.5, 0.2];
        for t in 0..40 {
            let a = p.select(t);
            feed(&mut p, a, means[a], false);
        }
        assert_eq!(p.phase(), McPhase::MusicalChairs);
        // no collisions seen: alone
        assert_eq!(p.p_estimate(), 1);
        assert_eq!(p.best_set(), &[1]);

        let a = p.select(40);
        assert_eq!(a, 1);
        feed(&mut p, a, 0.0, true);
        assert_eq!(p.phase(), McPhase::MusicalChairs);
        let a = p.select(41);
        feed(&mut p, a, 0.9, false);
        assert_eq!(p.phase(), McPhase::Fixed);
        for t in 42..60 {
            assert_eq!(p.select(t), 1);
            feed(&mut p, 1, 0.0, true);
        }
        assert_eq!(p.fixed_arm(), Some(1));
    }

    #[test]
    fn collision_keeps_searching_within_best_set() {
        let mut p = MusicalChairs::new(&ctx(0));
        assert_eq!(p.phase(), McPhase::MusicalChairs);
        for t in 0..50 {
            let a = p.select(t);
            assert!(p.best_set().contains(&a));
            feed(&mut p, a, 0.0, true);
        }
        assert_eq!(p.phase(), McPhase::MusicalChairs);
    }
}
