//! Slotted multi-player bandit environment with collision feedback.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::channel::MeanRewardMatrix;
use crate::error::{Error, Result};

/// ChaCha stream reserved for environment noise; player `n` uses `n + 1`.
pub(crate) const ENV_STREAM: u64 = 0;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One experiment setting. Arm indices are 0-based in memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub players: usize,
    pub arms: usize,
    pub means: MeanRewardMatrix,
    /// Sub-bands statically occupied by the communications system.
    pub comm_bands: BTreeSet<usize>,
    /// Reward noise standard deviation.
    pub sigma: f64,
    pub horizon: u64,
    /// SINR collision threshold. Recorded only; collisions are detected exactly.
    pub eta_sinr: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.players == 0 {
            return Err(Error::config("players", "must be positive"));
        }
        if self.arms <= self.players {
            return Err(Error::config(
                "arms",
                format!(
                    "need more sub-bands than players (arms = {}, players = {})",
                    self.arms, self.players
                ),
            ));
        }
        if self.means.players() != self.players || self.means.arms() != self.arms {
            return Err(Error::config(
                "means",
                format!(
                    "matrix is {}x{}, expected {}x{}",
                    self.means.players(),
                    self.means.arms(),
                    self.players,
                    self.arms
                ),
            ));
        }
        if let Some(&bad) = self.comm_bands.iter().find(|&&b| b >= self.arms) {
            return Err(Error::config(
                "comm_bands",
                format!("sub-band {} out of range 1..={}", bad + 1, self.arms),
            ));
        }
        if self.arms - self.comm_bands.len() < self.players {
            return Err(Error::config(
                "comm_bands",
                "fewer free sub-bands than players",
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("variance", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn is_comm_band(&self, arm: usize) -> bool {
        self.comm_bands.contains(&arm)
    }

    /// Means with the communication sub-bands zeroed; benchmark matchings use these.
    pub fn effective_means(&self) -> MeanRewardMatrix {
        self.means.with_zeroed_columns(self.comm_bands.iter().copied())
    }

    /// Short hex hash of everything except the seed.
    pub fn digest(&self) -> String {
        let mut unseeded = self.clone();
        unseeded.seed = 0;
        let json = serde_json::to_vec(&unseeded).expect("scenario serializes");
        let hash = Sha256::digest(&json);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Arm chosen by each player in one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointAction {
    pub choices: Vec<usize>,
}

impl JointAction {
    pub fn new(choices: Vec<usize>) -> Self {
        Self { choices }
    }
}

/// Feedback returned to one player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub arm: usize,
    pub reward: f64,
    /// Set for radar-radar collisions and for hits on a communication band.
    pub collided: bool,
}

/// Running environment. Single owner, stepped sequentially.
#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Scenario,
    rng: ChaCha8Rng,
    t: u64,
    occupancy: Vec<u32>,
    noise: Vec<f64>,
    collisions: u64,
    comm_collisions: u64,
}

impl Environment {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            rng: stream_rng(scenario.seed, ENV_STREAM),
            occupancy: vec![0; scenario.arms],
            noise: vec![0.0; scenario.players],
            scenario,
            t: 0,
            collisions: 0,
            comm_collisions: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn horizon(&self) -> u64 {
        self.scenario.horizon
    }

    pub fn is_comm_band(&self, arm: usize) -> bool {
        self.scenario.is_comm_band(arm)
    }

    /// Total collided observations emitted so far, and how many of those were comm-band hits.
    pub fn collision_tally(&self) -> (u64, u64) {
        (self.collisions, self.comm_collisions)
    }

    pub fn step(&mut self, actions: &JointAction) -> Result<Vec<Observation>> {
        let mut out = Vec::with_capacity(self.scenario.players);
        self.step_into(&actions.choices, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`Environment::step`]; `out` is cleared first.
    pub fn step_into(&mut self, choices: &[usize], out: &mut Vec<Observation>) -> Result<()> {
        if self.t >= self.scenario.horizon {
            return Err(Error::State(format!(
                "horizon of {} steps already reached",
                self.scenario.horizon
            )));
        }
        if choices.len() != self.scenario.players {
            return Err(Error::Usage(format!(
                "joint action has {} entries, expected {}",
                choices.len(),
                self.scenario.players
            )));
        }
        if let Some(bad) = choices.iter().find(|&&a| a >= self.scenario.arms) {
            return Err(Error::Usage(format!("arm {} out of range", bad + 1)));
        }

        // Exactly one draw per player every step, whatever the collisions.
        for z in self.noise.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        self.occupancy.iter_mut().for_each(|c| *c = 0);
        for &a in choices {
            self.occupancy[a] += 1;
        }

        out.clear();
        for (n, &arm) in choices.iter().enumerate() {
            let radar_hit = self.occupancy[arm] > 1;
            let comm_hit = self.scenario.is_comm_band(arm);
            let collided = radar_hit || comm_hit;
            let reward = if collided {
                0.0
            } else {
                noisy_reward(self.scenario.means.get(n, arm), self.scenario.sigma * self.noise[n])
            };
            if collided {
                self.collisions += 1;
                if comm_hit {
                    self.comm_collisions += 1;
                }
            }
            out.push(Observation {
                arm,
                reward,
                collided,
            });
        }
        self.t += 1;
        Ok(())
    }
}

/// `mean + noise` with the noise clipped symmetrically so the result stays in
/// `[0, 1]` and its expectation stays exactly `mean`.
pub fn noisy_reward(mean: f64, noise: f64) -> f64 {
    let half_width = mean.min(1.0 - mean).max(0.0);
    (mean + noise.clamp(-half_width, half_width)).clamp(0.0, 1.0)
}
