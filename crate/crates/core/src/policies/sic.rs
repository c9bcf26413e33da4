//! SIC: orthogonalize, then alternate collision-free exploration epochs with
//! all-to-all implicit communication of quantized arm means.
//!
//! Epoch `m` (starting at 1):
//! * exploration: `S * 2^m` steps; the player of internal rank `r` pulls arm
//!   `(j + r) mod S` at step `j`, so each arm gets `2^m` pulls per player
//!   and nobody collides;
//! * communication: for every ordered pair (sender, receiver) of distinct
//!   ranks, the sender transmits each arm mean truncated to `m + 1` bits.
//!   Everyone not in the pair waits on its own communication arm.
//!
//! No arm is ever eliminated, so the epochs repeat until the horizon.

use super::bits::{encode_bits, quantize, sic_decode_bits, sic_send_bit};
use super::init::{InitOutcome, InitProtocol, InitStage};
use super::{Algorithm, ArmStats, FeedbackGuard, Policy, PolicyContext, PolicyFeedback, PolicySnapshot};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicPhase {
    Init,
    Explore(u32),
    Communicate(u32),
}

/// Who does what at one communication step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CommSlot {
    sender: usize,
    receiver: usize,
    arm: usize,
    bit: u32,
}

#[derive(Debug, Clone)]
pub struct Sic {
    arms: usize,
    init: InitProtocol,
    ranks: Option<InitOutcome>,
    phase: SicPhase,
    phase_step: u64,
    stats: ArmStats,
    /// Last decoded means, `[sender rank][arm]`.
    quantized_stats: Vec<Vec<f64>>,
    rx_bits: Vec<bool>,
    guard: FeedbackGuard,
}

impl Sic {
    pub fn new(ctx: &PolicyContext) -> Self {
        Self {
            arms: ctx.arms,
            init: InitProtocol::new(ctx),
            ranks: None,
            phase: SicPhase::Init,
            phase_step: 0,
            stats: ArmStats::new(ctx.arms),
            quantized_stats: Vec::new(),
            rx_bits: Vec::new(),
            guard: FeedbackGuard::default(),
        }
    }

    pub fn phase(&self) -> SicPhase {
        self.phase
    }

    /// Seat from the initialization (external rank), once settled.
    pub fn external_rank(&self) -> Option<usize> {
        self.init.seat()
    }

    pub fn internal_rank(&self) -> Option<usize> {
        self.ranks.as_ref().map(|r| r.rank)
    }

    pub fn players(&self) -> Option<usize> {
        self.ranks.as_ref().map(|r| r.players)
    }

    /// Means received from other players during the last communication phase.
    pub fn quantized_stats(&self) -> &[Vec<f64>] {
        &self.quantized_stats
    }

    pub fn own_means(&self) -> Vec<f64> {
        self.stats.means()
    }

    fn explore_len(&self, m: u32) -> u64 {
        (self.arms as u64) << m
    }

    fn comm_len(&self, m: u32) -> u64 {
        let p = self.ranks.as_ref().map_or(0, |r| r.players) as u64;
        p * p.saturating_sub(1) * self.arms as u64 * (m as u64 + 1)
    }

    fn phase_len(&self) -> u64 {
        match self.phase {
            SicPhase::Init => self.init.len(),
            SicPhase::Explore(m) => self.explore_len(m),
            SicPhase::Communicate(m) => self.comm_len(m),
        }
    }

    fn comm_slot(&self, m: u32) -> CommSlot {
        let p = self.ranks.as_ref().unwrap().players;
        let bits = m as u64 + 1;
        let block = self.arms as u64 * bits;
        let pair = (self.phase_step / block) as usize;
        let within = self.phase_step % block;
        let sender = pair / (p - 1);
        let other = pair % (p - 1);
        let receiver = if other >= sender { other + 1 } else { other };
        CommSlot {
            sender,
            receiver,
            arm: (within / bits) as usize,
            bit: (within % bits) as u32,
        }
    }

    /// Moves to the next phase whenever the current one is exhausted (zero-length phases are skipped).
    fn advance(&mut self) {
        while self.phase_step >= self.phase_len() {
            self.phase_step = 0;
            self.phase = match self.phase {
                SicPhase::Init => {
                    let ranks = self.init.outcome().cloned().expect("init finished");
                    self.quantized_stats = vec![vec![0.0; self.arms]; ranks.players];
                    self.ranks = Some(ranks);
                    SicPhase::Explore(1)
                }
                SicPhase::Explore(m) => SicPhase::Communicate(m),
                SicPhase::Communicate(m) => SicPhase::Explore(m + 1),
            };
        }
    }
}

impl Policy for Sic {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Sic
    }

    fn select(&mut self, _t: u64) -> usize {
        let arm = match self.phase {
            SicPhase::Init => self.init.select(),
            SicPhase::Explore(_) => {
                let rank = self.ranks.as_ref().unwrap().rank as u64;
                ((self.phase_step + rank) % self.arms as u64) as usize
            }
            SicPhase::Communicate(m) => {
                let ranks = self.ranks.as_ref().unwrap();
                let slot = self.comm_slot(m);
                let own = ranks.comm_arms[ranks.rank];
                if slot.sender == ranks.rank {
                    let code = quantize(self.stats.mean(slot.arm), m + 1);
                    let bit = encode_bits(code, m + 1)[slot.bit as usize];
                    sic_send_bit(bit, own, ranks.comm_arms[slot.receiver]).unwrap_or(own)
                } else {
                    own
                }
            }
        };
        self.guard.selected(arm)
    }

    fn observe(&mut self, feedback: &PolicyFeedback) -> Result<()> {
        self.guard.accept(feedback)?;
        match self.phase {
            SicPhase::Init => self.init.observe(feedback),
            SicPhase::Explore(_) => self.stats.record(feedback),
            SicPhase::Communicate(m) => {
                let slot = self.comm_slot(m);
                if slot.receiver == self.ranks.as_ref().unwrap().rank {
                    self.rx_bits.push(feedback.collided);
                    if slot.bit == m {
                        self.quantized_stats[slot.sender][slot.arm] = sic_decode_bits(&self.rx_bits);
                        self.rx_bits.clear();
                    }
                }
            }
        }
        self.phase_step += 1;
        self.advance();
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        let (phase, key) = match self.phase {
            SicPhase::Init => {
                let sub = match self.init.stage() {
                    InitStage::Explore => 0,
                    InitStage::MusicalChairs => 1,
                    InitStage::RollCall | InitStage::Done => 2,
                };
                ("init", (0, 0, sub))
            }
            SicPhase::Explore(m) => ("explore", (1, m as u64, 0)),
            SicPhase::Communicate(m) => ("communicate", (1, m as u64, 1)),
        };
        PolicySnapshot {
            phase,
            phase_key: key,
            committed_arm: None,
            internal_rank: self.internal_rank(),
            is_leader: None,
            players_estimate: self.players().or(self.init.p_estimate()),
        }
    }
}
