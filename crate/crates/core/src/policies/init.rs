//! Initialization shared by SIC and M-Etc-Elim.
//!
//! Three fixed-length stages, identical for every player:
//!
//! 1. `explore_len` steps of uniform play: arm means and a player-count estimate.
//! 2. `mc_len` steps of musical chairs over the estimated top arms; the
//!    seat a player keeps is its external rank and communication arm.
//! 3. A roll call of `S * S` steps. In window `w` the player seated on arm
//!    `w` (if any) probes every arm in turn while everyone else stays seated.
//!    A seated player that gets hit during window `w` learns arm `w` is taken.
//!    Afterwards every player knows the full set of seats, hence the exact
//!    player count and its internal rank (position of its seat in that set).
//!    Probes into an occupied communication band hit nobody, so the external
//!    occupant never shows up as a player.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ArmStats, PolicyContext, PolicyFeedback};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InitStage {
    Explore,
    MusicalChairs,
    RollCall,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct InitOutcome {
    pub players: usize,
    /// 0-based internal rank.
    pub rank: usize,
    /// Seats of all players ordered by rank.
    pub comm_arms: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct InitProtocol {
    arms: usize,
    explore_len: u64,
    mc_len: u64,
    stats: ArmStats,
    p_estimate: usize,
    best_set: Vec<usize>,
    seat: Option<usize>,
    last_try: Option<usize>,
    occupied: Vec<bool>,
    t: u64,
    rng: ChaCha8Rng,
    outcome: Option<InitOutcome>,
}

impl InitProtocol {
    pub fn new(ctx: &PolicyContext) -> Self {
        Self {
            arms: ctx.arms,
            explore_len: ctx.params.explore_len(ctx.arms, ctx.horizon),
            mc_len: ctx.params.mc_len(ctx.arms, ctx.horizon),
            stats: ArmStats::new(ctx.arms),
            p_estimate: 0,
            best_set: Vec::new(),
            seat: None,
            last_try: None,
            occupied: vec![false; ctx.arms],
            t: 0,
            rng: ctx.rng(),
            outcome: None,
        }
    }

    pub fn len(&self) -> u64 {
        self.explore_len + self.mc_len + (self.arms * self.arms) as u64
    }

    pub fn stage(&self) -> InitStage {
        if self.t < self.explore_len {
            InitStage::Explore
        } else if self.t < self.explore_len + self.mc_len {
            InitStage::MusicalChairs
        } else if self.t < self.len() {
            InitStage::RollCall
        } else {
            InitStage::Done
        }
    }

    pub fn outcome(&self) -> Option<&InitOutcome> {
        self.outcome.as_ref()
    }

    pub fn seat(&self) -> Option<usize> {
        self.seat
    }

    pub fn p_estimate(&self) -> Option<usize> {
        (self.t >= self.explore_len).then_some(self.p_estimate)
    }

    fn prepare_musical_chairs(&mut self) {
        if self.best_set.is_empty() {
            self.p_estimate = self.stats.estimate_players();
            self.best_set = self.stats.ranking().into_iter().take(self.p_estimate).collect();
        }
    }

    fn roll_call_position(&self) -> (usize, usize) {
        let k = (self.t - self.explore_len - self.mc_len) as usize;
        (k / self.arms, k % self.arms)
    }

    pub fn select(&mut self) -> usize {
        match self.stage() {
            InitStage::Explore => self.rng.random_range(0..self.arms),
            InitStage::MusicalChairs => {
                self.prepare_musical_chairs();
                if let Some(seat) = self.seat {
                    return seat;
                }
                let arm = self.best_set[self.rng.random_range(0..self.best_set.len())];
                self.last_try = Some(arm);
                arm
            }
            InitStage::RollCall => {
                let seat = self.settle();
                let (window, probe) = self.roll_call_position();
                if window == seat {
                    probe
                } else {
                    seat
                }
            }
            InitStage::Done => self.seat.unwrap_or(0),
        }
    }

    /// Seat used from the roll call on; falls back to the last attempt if musical chairs never succeeded.
    fn settle(&mut self) -> usize {
        self.prepare_musical_chairs();
        if self.seat.is_none() {
            self.seat = Some(self.last_try.unwrap_or(self.best_set[0]));
        }
        let seat = self.seat.unwrap();
        self.occupied[seat] = true;
        seat
    }

    pub fn observe(&mut self, fb: &PolicyFeedback) {
        match self.stage() {
            InitStage::Explore => self.stats.record(fb),
            InitStage::MusicalChairs => {
                if self.seat.is_none() && !fb.collided {
                    self.seat = Some(fb.arm);
                }
            }
            InitStage::RollCall => {
                let seat = self.settle();
                let (window, probe) = self.roll_call_position();
                if window != seat && probe == seat && fb.collided {
                    self.occupied[window] = true;
                }
            }
            InitStage::Done => {}
        }
        self.t += 1;
        if self.t == self.len() && self.outcome.is_none() {
            let seat = self.settle();
            let comm_arms: Vec<usize> = (0..self.arms).filter(|&a| self.occupied[a]).collect();
            let rank = comm_arms.iter().position(|&a| a == seat).unwrap_or(0);
            self.outcome = Some(InitOutcome {
                players: comm_arms.len(),
                rank,
                comm_arms,
            });
        }
    }
}
