//! M-Etc-Elim: explore-then-commit with matching elimination, coordinated by
//! a leader over implicit communication.
//!
//! After the shared initialization, rank 0 is the leader. Epoch `m`
//! (starting at 0) runs:
//!
//! * **explore** – every matching of the current schedule is played for
//!   `2^m` consecutive steps (epoch 0 uses the `S` cyclic shifts, which cover
//!   every player/arm edge);
//! * **communicate** –
//!   1. upload: each follower sends its `S` arm means, truncated to
//!      `m + quant_extra_bits` bits, to the leader;
//!   2. the leader drops every candidate matching whose estimated utility
//!      trails the best candidate by more than `2 P r_m`, with
//!      `r_m = c sqrt(ln(2 P S T) / (2 (2^(m+1) - 1))) + 2^-(bits)`;
//!   3. header: the leader sends each follower a commit flag and the length
//!      of the next arm list;
//!   4. body: the leader sends each follower its arm in every listed
//!      matching, `ceil(log2 S)` bits per arm.
//!
//! A single surviving candidate is exploited for the rest of the game. If
//! several survive and the next epoch would run past the horizon, the players
//! cycle through the survivors instead.

use super::bits::{decode_bits, dequantize, encode_bits, quantize, sic_send_bit, width_for};
use super::init::{InitOutcome, InitProtocol, InitStage};
use super::{Algorithm, ArmStats, FeedbackGuard, Policy, PolicyContext, PolicyFeedback, PolicySnapshot};
use crate::error::Result;
use crate::matching::{all_matchings, Matching};

/// Keeps the candidates whose estimated utility is within `2 P radius` of
/// the best candidate. Never returns an empty set for non-empty input.
pub fn etc_elim_update_candidates(
    candidates: &[Matching],
    edge_estimates: &[Vec<f64>],
    confidence_radius: f64,
) -> Vec<Matching> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let players = edge_estimates.len() as f64;
    let utilities: Vec<f64> = candidates.iter().map(|m| m.utility(edge_estimates)).collect();
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - 2.0 * players * confidence_radius;
    candidates
        .iter()
        .zip(&utilities)
        .filter(|(_, &u)| u >= threshold)
        .map(|(m, _)| m.clone())
        .collect()
}

/// Smallest list of candidates (in candidate order) that contains every candidate edge.
fn covering_schedule(candidates: &[Matching], players: usize, arms: usize) -> Vec<Matching> {
    let mut needed = vec![vec![false; arms]; players];
    for m in candidates {
        for (p, &a) in m.assignment().iter().enumerate() {
            needed[p][a] = true;
        }
    }
    let mut schedule: Vec<Matching> = Vec::new();
    for p in 0..players {
        for a in 0..arms {
            if !needed[p][a] || schedule.iter().any(|m| m.contains_edge(p, a)) {
                continue;
            }
            if let Some(m) = candidates.iter().find(|m| m.contains_edge(p, a)) {
                schedule.push(m.clone());
            }
        }
    }
    schedule
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Leader,
    Follower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtcPhase {
    Init,
    Explore(u32),
    Communicate(u32),
    Exploit,
}

/// Stage inside a communication phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommPart {
    Upload { follower: usize, arm: usize, bit: u32 },
    Header { follower: usize, bit: u32 },
    Body { follower: usize, entry: usize, bit: u32 },
}

/// Leader's decision after elimination.
#[derive(Debug, Clone, PartialEq)]
struct Decision {
    exploit: bool,
    list: Vec<Matching>,
}

#[derive(Debug, Clone)]
pub struct MEtcElim {
    arms: usize,
    horizon: u64,
    quant_extra_bits: u32,
    confidence_scale: f64,
    init: InitProtocol,
    ranks: Option<InitOutcome>,
    phase: EtcPhase,
    phase_step: u64,
    /// Global step counter (feedbacks received).
    t: u64,
    stats: ArmStats,
    /// This player's arm in each matching of the current list.
    own_schedule: Vec<usize>,
    // leader only
    candidates: Vec<Matching>,
    estimates: Vec<Vec<f64>>,
    decision: Option<Decision>,
    // follower receive state
    rx_bits: Vec<bool>,
    rx_exploit: bool,
    rx_len: usize,
    rx_schedule: Vec<usize>,
    guard: FeedbackGuard,
}

impl MEtcElim {
    pub fn new(ctx: &PolicyContext) -> Self {
        Self {
            arms: ctx.arms,
            horizon: ctx.horizon,
            quant_extra_bits: ctx.params.quant_extra_bits,
            confidence_scale: ctx.params.confidence_scale,
            init: InitProtocol::new(ctx),
            ranks: None,
            phase: EtcPhase::Init,
            phase_step: 0,
            t: 0,
            stats: ArmStats::new(ctx.arms),
            own_schedule: Vec::new(),
            candidates: Vec::new(),
            estimates: Vec::new(),
            decision: None,
            rx_bits: Vec::new(),
            rx_exploit: false,
            rx_len: 0,
            rx_schedule: Vec::new(),
            guard: FeedbackGuard::default(),
        }
    }

    pub fn phase(&self) -> EtcPhase {
        self.phase
    }

    pub fn role(&self) -> Option<Role> {
        self.ranks
            .as_ref()
            .map(|r| if r.rank == 0 { Role::Leader } else { Role::Follower })
    }

    pub fn internal_rank(&self) -> Option<usize> {
        self.ranks.as_ref().map(|r| r.rank)
    }

    pub fn players(&self) -> Option<usize> {
        self.ranks.as_ref().map(|r| r.players)
    }

    /// Surviving matchings (leader only; empty for followers), indexed by rank.
    pub fn candidate_matchings(&self) -> &[Matching] {
        &self.candidates
    }

    /// Arm played for the rest of the game, once committed to a unique matching.
    pub fn assigned_arm(&self) -> Option<usize> {
        (self.phase == EtcPhase::Exploit && self.own_schedule.len() == 1).then(|| self.own_schedule[0])
    }

    pub fn own_means(&self) -> Vec<f64> {
        self.stats.means()
    }

    fn players_known(&self) -> usize {
        self.ranks.as_ref().map_or(0, |r| r.players)
    }

    fn quant_bits(&self, m: u32) -> u32 {
        m + self.quant_extra_bits
    }

    fn len_bits(&self) -> u32 {
        width_for(self.players_known() * self.arms)
    }

    fn arm_bits(&self) -> u32 {
        width_for(self.arms)
    }

    fn max_list(&self) -> usize {
        1 << self.len_bits()
    }

    /// `c sqrt(ln(2 P S T) / (2 n_m)) + 2^-bits` with `n_m = 2^(m+1) - 1` pulls per edge.
    pub fn confidence_radius(&self, m: u32) -> f64 {
        let p = self.players_known().max(1) as f64;
        let log_term = (2.0 * p * self.arms as f64 * self.horizon.max(1) as f64).ln();
        let pulls = ((1u64 << (m + 1)) - 1) as f64;
        self.confidence_scale * (log_term / (2.0 * pulls)).sqrt()
            + dequantize(1, self.quant_bits(m))
    }

    fn upload_len(&self, m: u32) -> u64 {
        (self.players_known() as u64).saturating_sub(1) * self.arms as u64 * self.quant_bits(m) as u64
    }

    fn header_len(&self) -> u64 {
        (self.players_known() as u64).saturating_sub(1) * (1 + self.len_bits() as u64)
    }

    fn body_len(&self, list_len: usize) -> u64 {
        (self.players_known() as u64).saturating_sub(1) * list_len as u64 * self.arm_bits() as u64
    }

    fn list_len(&self) -> usize {
        match &self.decision {
            Some(d) => d.list.len(),
            None => self.rx_len,
        }
    }

    fn explore_len(&self, m: u32) -> u64 {
        (self.own_schedule.len() as u64) << m
    }

    fn comm_len(&self, m: u32) -> u64 {
        let upload = self.upload_len(m);
        // body length is only known once the header has gone through
        if self.phase_step < upload + self.header_len() {
            u64::MAX
        } else {
            upload + self.header_len() + self.body_len(self.list_len())
        }
    }

    fn phase_len(&self) -> u64 {
        match self.phase {
            EtcPhase::Init => self.init.len(),
            EtcPhase::Explore(m) => self.explore_len(m),
            EtcPhase::Communicate(m) => self.comm_len(m),
            EtcPhase::Exploit => u64::MAX,
        }
    }

    fn comm_part(&self, m: u32) -> CommPart {
        let mut k = self.phase_step;
        let qb = self.quant_bits(m) as u64;
        let upload = self.upload_len(m);
        if k < upload {
            let per = self.arms as u64 * qb;
            return CommPart::Upload {
                follower: 1 + (k / per) as usize,
                arm: ((k % per) / qb) as usize,
                bit: (k % qb) as u32,
            };
        }
        k -= upload;
        let hb = 1 + self.len_bits() as u64;
        if k < self.header_len() {
            return CommPart::Header {
                follower: 1 + (k / hb) as usize,
                bit: (k % hb) as u32,
            };
        }
        k -= self.header_len();
        let ab = self.arm_bits() as u64;
        let per = self.list_len() as u64 * ab;
        CommPart::Body {
            follower: 1 + (k / per) as usize,
            entry: ((k % per) / ab) as usize,
            bit: (k % ab) as u32,
        }
    }

    /// Bit the leader sends to a follower in the header: commit flag, then `len - 1`.
    fn header_bit(&self, bit: u32) -> bool {
        let d = self.decision.as_ref().expect("leader decided");
        if bit == 0 {
            d.exploit
        } else {
            let bits = encode_bits((d.list.len() - 1) as u64, self.len_bits());
            bits[(bit - 1) as usize]
        }
    }

    fn leader_decide(&mut self, m: u32) {
        let ranks = self.ranks.as_ref().unwrap();
        let (players, arms) = (ranks.players, self.arms);
        self.estimates[0] = self.stats.means();
        let radius = self.confidence_radius(m);
        self.candidates = etc_elim_update_candidates(&self.candidates, &self.estimates, radius);

        let decision = if self.candidates.len() == 1 {
            Decision {
                exploit: true,
                list: self.candidates.clone(),
            }
        } else {
            let next = covering_schedule(&self.candidates, players, arms);
            let now = self.t + 1;
            let remaining_comm = self.header_len() + self.body_len(next.len());
            let next_epoch = ((next.len() as u64) << (m + 1))
                + self.upload_len(m + 1)
                + self.header_len()
                + self.body_len(next.len());
            if next.len() > self.max_list() || now + remaining_comm + next_epoch > self.horizon {
                Decision {
                    exploit: true,
                    list: self.candidates.iter().take(self.max_list()).cloned().collect(),
                }
            } else {
                Decision {
                    exploit: false,
                    list: next,
                }
            }
        };
        self.decision = Some(decision);
    }

    fn start_init_outcome(&mut self) {
        let ranks = self.init.outcome().cloned().expect("init finished");
        let (players, arms) = (ranks.players, self.arms);
        self.own_schedule = (0..arms).map(|j| (j + ranks.rank) % arms).collect();
        if ranks.rank == 0 {
            self.candidates = all_matchings(players, arms);
            self.estimates = vec![vec![0.0; arms]; players];
        }
        self.ranks = Some(ranks);
    }

    fn finish_comm(&mut self) -> EtcPhase {
        let m = match self.phase {
            EtcPhase::Communicate(m) => m,
            _ => unreachable!(),
        };
        let rank = self.ranks.as_ref().unwrap().rank;
        let exploit = if let Some(d) = self.decision.take() {
            self.own_schedule = d.list.iter().map(|mt| mt.arm(rank)).collect();
            d.exploit
        } else {
            self.own_schedule = std::mem::take(&mut self.rx_schedule);
            self.rx_exploit
        };
        self.rx_len = 0;
        if exploit {
            EtcPhase::Exploit
        } else {
            EtcPhase::Explore(m + 1)
        }
    }

    fn advance(&mut self) {
        while self.phase_step >= self.phase_len() {
            self.phase_step = 0;
            self.phase = match self.phase {
                EtcPhase::Init => {
                    self.start_init_outcome();
                    EtcPhase::Explore(0)
                }
                EtcPhase::Explore(m) => {
                    if self.players_known() == 1 {
                        // alone: decide without any communication
                        self.leader_decide(m);
                    }
                    EtcPhase::Communicate(m)
                }
                EtcPhase::Communicate(_) => self.finish_comm(),
                EtcPhase::Exploit => EtcPhase::Exploit,
            };
        }
    }
}

impl Policy for MEtcElim {
    fn algorithm(&self) -> Algorithm {
        Algorithm::MEtcElim
    }

    fn select(&mut self, _t: u64) -> usize {
        let arm = match self.phase {
            EtcPhase::Init => self.init.select(),
            EtcPhase::Explore(m) => self.own_schedule[(self.phase_step >> m) as usize],
            EtcPhase::Exploit => {
                self.own_schedule[(self.phase_step % self.own_schedule.len() as u64) as usize]
            }
            EtcPhase::Communicate(m) => {
                let ranks = self.ranks.as_ref().unwrap();
                let rank = ranks.rank;
                let own = ranks.comm_arms[rank];
                let leader_arm = ranks.comm_arms[0];
                match self.comm_part(m) {
                    CommPart::Upload { follower, arm, bit } if follower == rank => {
                        let qb = self.quant_bits(m);
                        let code = quantize(self.stats.mean(arm), qb);
                        let b = encode_bits(code, qb)[bit as usize];
                        sic_send_bit(b, own, leader_arm).unwrap_or(own)
                    }
                    CommPart::Header { follower, bit } if rank == 0 => {
                        sic_send_bit(self.header_bit(bit), own, ranks.comm_arms[follower]).unwrap_or(own)
                    }
                    CommPart::Body { follower, entry, bit } if rank == 0 => {
                        let d = self.decision.as_ref().unwrap();
                        let target = d.list[entry].arm(follower) as u64;
                        let b = encode_bits(target, self.arm_bits())[bit as usize];
                        sic_send_bit(b, own, ranks.comm_arms[follower]).unwrap_or(own)
                    }
                    _ => own,
                }
            }
        };
        self.guard.selected(arm)
    }

    fn observe(&mut self, feedback: &PolicyFeedback) -> Result<()> {
        self.guard.accept(feedback)?;
        match self.phase {
            EtcPhase::Init => self.init.observe(feedback),
            EtcPhase::Explore(_) => self.stats.record(feedback),
            EtcPhase::Exploit => {}
            EtcPhase::Communicate(m) => {
                let rank = self.ranks.as_ref().unwrap().rank;
                match self.comm_part(m) {
                    CommPart::Upload { follower, arm, bit } if rank == 0 => {
                        self.rx_bits.push(feedback.collided);
                        let qb = self.quant_bits(m);
                        if bit + 1 == qb {
                            self.estimates[follower][arm] = dequantize(decode_bits(&self.rx_bits), qb);
                            self.rx_bits.clear();
                        }
                        if self.phase_step + 1 == self.upload_len(m) {
                            self.leader_decide(m);
                        }
                    }
                    CommPart::Header { follower, bit } if follower == rank => {
                        if bit == 0 {
                            self.rx_exploit = feedback.collided;
                        } else {
                            self.rx_bits.push(feedback.collided);
                            if bit == self.len_bits() {
                                self.rx_len = decode_bits(&self.rx_bits) as usize + 1;
                                self.rx_bits.clear();
                            }
                        }
                    }
                    CommPart::Body { follower, bit, .. } if follower == rank => {
                        self.rx_bits.push(feedback.collided);
                        if bit + 1 == self.arm_bits() {
                            let arm = decode_bits(&self.rx_bits) as usize;
                            self.rx_schedule.push(arm.min(self.arms - 1));
                            self.rx_bits.clear();
                        }
                    }
                    CommPart::Header { .. } if rank != 0 && self.rx_len == 0 => {
                        // other followers' headers carry the same length; nothing to learn here
                    }
                    _ => {}
                }
            }
        }
        self.t += 1;
        self.phase_step += 1;
        self.advance();
        Ok(())
    }

    fn snapshot(&self) -> PolicySnapshot {
        let (phase, key) = match self.phase {
            EtcPhase::Init => {
                let sub = match self.init.stage() {
                    InitStage::Explore => 0,
                    InitStage::MusicalChairs => 1,
                    InitStage::RollCall | InitStage::Done => 2,
                };
                ("init", (0, 0, sub))
            }
            EtcPhase::Explore(m) => ("explore", (1, m as u64, 0)),
            EtcPhase::Communicate(m) => ("communicate", (1, m as u64, 1)),
            EtcPhase::Exploit => ("exploit", (2, 0, 0)),
        };
        PolicySnapshot {
            phase,
            phase_key: key,
            committed_arm: self.assigned_arm(),
            internal_rank: self.internal_rank(),
            is_leader: self.role().map(|r| r == Role::Leader),
            players_estimate: self.players().or(self.init.p_estimate()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heterogeneous() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.9, 0.3, 0.3, 0.3, 0.3],
            vec![0.0, 0.3, 0.8, 0.3, 0.3, 0.3],
            vec![0.0, 0.3, 0.3, 0.7, 0.3, 0.3],
            vec![0.0, 0.3, 0.3, 0.3, 0.6, 0.3],
        ]
    }

    #[test]
    fn elimination_examples() {
        let all = all_matchings(4, 6);
        let w = heterogeneous();
        let kept = etc_elim_update_candidates(&all, &w, 0.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].assignment(), &[1, 2, 3, 4]);

        assert_eq!(etc_elim_update_candidates(&all, &w, 1e6).len(), all.len());

        // runner-up (player 4 on arm 6) trails by 0.3: survives 2*4*0.04 = 0.32, not 0.28
        let kept = etc_elim_update_candidates(&all, &w, 0.04);
        let assignments: Vec<&[usize]> = kept.iter().map(|m| m.assignment()).collect();
        assert_eq!(assignments, vec![&[1, 2, 3, 4][..], &[1, 2, 3, 5][..]]);
        let kept = etc_elim_update_candidates(&all, &w, 0.035);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].assignment(), &[1, 2, 3, 4]);
    }

    #[test]
    fn elimination_never_empties() {
        let one = vec![Matching::new(vec![0, 1], 3).unwrap()];
        let w = vec![vec![0.0; 3]; 2];
        assert_eq!(etc_elim_update_candidates(&one, &w, 0.0), one);
    }

    #[test]
    fn covering_schedule_hits_every_candidate_edge() {
        let all = all_matchings(3, 4);
        let sched = covering_schedule(&all, 3, 4);
        for p in 0..3 {
            for a in 0..4 {
                assert!(sched.iter().any(|m| m.contains_edge(p, a)));
            }
        }
        let two = vec![
            Matching::new(vec![1, 2], 4).unwrap(),
            Matching::new(vec![3, 2], 4).unwrap(),
        ];
        assert_eq!(covering_schedule(&two, 2, 4), two);
    }
}
