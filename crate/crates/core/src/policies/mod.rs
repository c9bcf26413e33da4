//! Decentralized arm-selection policies.
//!
//! Each player owns one [`Policy`]. A policy only ever sees its own
//! feedback (arm, reward, collision flag), its construction parameters and a
//! private random stream; it never learns the number of players up front.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::stream_rng;
use crate::error::{Error, Result};

pub mod bits;
pub mod etc_elim;
mod init;
pub mod musical_chairs;
pub mod sic;
pub mod ucb;

pub use bits::{decode_bits, encode_bits, quantize, sic_decode_bits, sic_send_bit};
pub use etc_elim::{etc_elim_update_candidates, MEtcElim};
pub use musical_chairs::{mc_estimate_players, MusicalChairs};
pub use sic::Sic;
pub use ucb::{ucb_index, Ucb1};

/// What one player observes after a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyFeedback {
    pub arm: usize,
    pub reward: f64,
    pub collided: bool,
    pub t: u64,
}

/// Introspection for analyst-side checks; never fed back into decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySnapshot {
    pub phase: &'static str,
    /// Totally ordered phase position; must never decrease.
    pub phase_key: (u32, u64, u32),
    /// Arm the player is locked onto, if it has committed to one.
    pub committed_arm: Option<usize>,
    pub internal_rank: Option<usize>,
    pub is_leader: Option<bool>,
    pub players_estimate: Option<usize>,
}

pub trait Policy: Send {
    fn algorithm(&self) -> Algorithm;

    /// Arm to pull at step `t` (`t` = number of feedbacks received so far).
    fn select(&mut self, t: u64) -> usize;

    /// Feedback for the arm returned by the preceding [`Policy::select`].
    fn observe(&mut self, feedback: &PolicyFeedback) -> Result<()>;

    fn snapshot(&self) -> PolicySnapshot;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ucb1,
    MusicalChairs,
    Sic,
    MEtcElim,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Ucb1,
        Algorithm::MusicalChairs,
        Algorithm::Sic,
        Algorithm::MEtcElim,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ucb1 => "ucb1",
            Algorithm::MusicalChairs => "musical_chairs",
            Algorithm::Sic => "sic",
            Algorithm::MEtcElim => "m_etc_elim",
        }
    }

    /// Label used in plots.
    pub fn display_name(&self) -> &'static str {
        match self {
            Algorithm::Ucb1 => "Multiple UCB1",
            Algorithm::MusicalChairs => "Musical Chairs",
            Algorithm::Sic => "SIC",
            Algorithm::MEtcElim => "M-Etc-Elim",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "algorithms",
                    format!("unknown algorithm `{s}` (expected ucb1, musical_chairs, sic, m_etc_elim)"),
                )
            })
    }
}

/// How UCB1 orders arms whose indices tie (including the initial sweep of unpulled arms).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Lowest,
    /// Sweep unpulled arms in a private random order.
    Random,
}

/// Tunable policy constants; `None` means the horizon-derived default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Uniform exploration length before ranking (Musical Chairs, SIC and M-Etc-Elim init).
    pub explore_len: Option<u64>,
    /// Fixed musical-chairs length inside the SIC / M-Etc-Elim initialization.
    pub mc_len: Option<u64>,
    /// M-Etc-Elim followers send means with `epoch + quant_extra_bits` bits.
    pub quant_extra_bits: u32,
    /// Multiplier on the M-Etc-Elim confidence radius.
    pub confidence_scale: f64,
    pub ucb_tie_break: TieBreak,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            explore_len: None,
            mc_len: None,
            quant_extra_bits: 4,
            confidence_scale: 1.0,
            ucb_tie_break: TieBreak::Lowest,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_scale > 0.0 && self.confidence_scale.is_finite()) {
            return Err(Error::config("policy.confidence_scale", "must be positive"));
        }
        if self.quant_extra_bits == 0 || self.quant_extra_bits > 24 {
            return Err(Error::config("policy.quant_extra_bits", "must be in 1..=24"));
        }
        Ok(())
    }

    /// `ceil(max(3000, 16 S ln(10 S T)))` unless overridden.
    pub fn explore_len(&self, arms: usize, horizon: u64) -> u64 {
        self.explore_len.unwrap_or_else(|| {
            let s = arms as f64;
            let scaled = 16.0 * s * (10.0 * s * horizon as f64).ln();
            scaled.max(3000.0).ceil() as u64
        })
    }

    /// `ceil(2 S ln(S T))`, at least `2 S`, unless overridden.
    ///
    /// A searching player fixes with probability at least `1/S` per step, so
    /// this length leaves it unfixed with probability about `(S T)^-2`.
    pub fn mc_len(&self, arms: usize, horizon: u64) -> u64 {
        self.mc_len.unwrap_or_else(|| {
            let s = arms as f64;
            let len = (2.0 * s * (s * horizon as f64).max(1.0).ln()).ceil() as u64;
            len.max(2 * arms as u64)
        })
    }
}

/// Everything a policy may know when it is created.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    pub arms: usize,
    pub horizon: u64,
    pub seed: u64,
    /// Index used only to select this player's private random stream.
    pub player: usize,
    pub params: PolicyParams,
}

impl PolicyContext {
    pub(crate) fn rng(&self) -> ChaCha8Rng {
        stream_rng(self.seed, self.player as u64 + 1)
    }
}

pub fn build_policy(algorithm: Algorithm, ctx: &PolicyContext) -> Box<dyn Policy> {
    match algorithm {
        Algorithm::Ucb1 => Box::new(Ucb1::new(ctx)),
        Algorithm::MusicalChairs => Box::new(MusicalChairs::new(ctx)),
        Algorithm::Sic => Box::new(Sic::new(ctx)),
        Algorithm::MEtcElim => Box::new(MEtcElim::new(ctx)),
    }
}

/// Per-arm pull counts and reward sums. Collided pulls count with reward 0.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArmStats {
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
    pub collisions: Vec<u64>,
}

impl ArmStats {
    pub fn new(arms: usize) -> Self {
        Self {
            counts: vec![0; arms],
            sums: vec![0.0; arms],
            collisions: vec![0; arms],
        }
    }

    pub fn record(&mut self, fb: &PolicyFeedback) {
        self.counts[fb.arm] += 1;
        self.sums[fb.arm] += fb.reward;
        self.collisions[fb.arm] += u64::from(fb.collided);
    }

    pub fn mean(&self, arm: usize) -> f64 {
        match self.counts[arm] {
            0 => 0.0,
            n => self.sums[arm] / n as f64,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|a| self.mean(a)).collect()
    }

    /// Arms ordered by descending mean, ties toward the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let means = self.means();
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
        order
    }

    /// Collision-based player-count estimate, ignoring arms on which every
    /// pull collided (those are blocked by an external occupant).
    pub fn estimate_players(&self) -> usize {
        let arms = self.counts.len();
        let (mut pulls, mut hits) = (0, 0);
        for a in 0..arms {
            let blocked = self.counts[a] > 0 && self.collisions[a] == self.counts[a];
            if !blocked {
                pulls += self.counts[a];
                hits += self.collisions[a];
            }
        }
        mc_estimate_players(hits, pulls, arms)
    }
}

/// Enforces select/observe alternation.
#[derive(Debug, Clone, Default)]
pub(crate) struct FeedbackGuard {
    pending: Option<usize>,
    pub received: u64,
}

impl FeedbackGuard {
    pub fn selected(&mut self, arm: usize) -> usize {
        self.pending = Some(arm);
        arm
    }

    pub fn accept(&mut self, fb: &PolicyFeedback) -> Result<()> {
        match self.pending.take() {
            Some(arm) if arm == fb.arm => {
                self.received += 1;
                Ok(())
            }
            Some(arm) => {
                self.pending = Some(arm);
                Err(Error::Usage(format!(
                    "feedback for arm {} but arm {} was selected",
                    fb.arm + 1,
                    arm + 1
                )))
            }
            None => Err(Error::Usage("feedback received without a preceding select".into())),
        }
    }
}
