//! Player-to-arm matchings: utility, maximum-weight assignment, and an
//! exhaustive oracle.
//!
//! Weights are `P x S` with `P <= S`. A matching assigns each player a
//! distinct arm; its utility is the sum of the assigned weights.

use std::fmt;

use serde::Serialize;

use crate::channel::MeanRewardMatrix;
use crate::error::{Error, Result};

/// Largest arm count accepted by [`enumerate_optimal`].
pub const ENUMERATION_MAX_ARMS: usize = 10;

/// Equality tolerance used when comparing utilities.
pub const UTILITY_TOL: f64 = 1e-9;

/// Injective assignment of players to arms (entry `n` is player `n`'s arm, 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn new(assignment: Vec<usize>, arms: usize) -> Result<Self> {
        let mut seen = vec![false; arms];
        for &a in &assignment {
            if a >= arms {
                return Err(Error::Domain(format!("arm {} out of range (S = {arms})", a + 1)));
            }
            if std::mem::replace(&mut seen[a], true) {
                return Err(Error::Domain(format!("arm {} assigned twice", a + 1)));
            }
        }
        Ok(Self(assignment))
    }

    pub(crate) fn from_vec_unchecked(assignment: Vec<usize>) -> Self {
        Self(assignment)
    }

    pub fn players(&self) -> usize {
        self.0.len()
    }

    pub fn arm(&self, player: usize) -> usize {
        self.0[player]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.0
    }

    pub fn contains_edge(&self, player: usize, arm: usize) -> bool {
        self.0.get(player) == Some(&arm)
    }

    /// Sum of `weights[n][arm(n)]`.
    pub fn utility(&self, weights: &[Vec<f64>]) -> f64 {
        self.0.iter().enumerate().map(|(n, &a)| weights[n][a]).sum()
    }
}

impl fmt::Display for Matching {
    /// 1-based `player->arm` pairs, e.g. `1->2, 2->3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, a) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}->{}", n + 1, a + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub matching: Matching,
    pub utility: f64,
    pub is_optimal: bool,
}

pub fn matching_utility(m: &Matching, means: &MeanRewardMatrix) -> Result<f64> {
    if m.players() != means.players() {
        return Err(Error::Domain(format!(
            "matching covers {} players, means have {}",
            m.players(),
            means.players()
        )));
    }
    Matching::new(m.0.clone(), means.arms())?;
    Ok(m.utility(means.rows()))
}

fn check_weights(weights: &[Vec<f64>]) -> Result<(usize, usize)> {
    let players = weights.len();
    let arms = weights.first().map(Vec::len).unwrap_or(0);
    if players == 0 || arms == 0 {
        return Err(Error::Domain("empty weight matrix".into()));
    }
    if weights.iter().any(|r| r.len() != arms) {
        return Err(Error::Domain("weight matrix rows differ in length".into()));
    }
    if players > arms {
        return Err(Error::Domain(format!(
            "more players ({players}) than arms ({arms})"
        )));
    }
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::Domain("weights must be finite".into()));
    }
    Ok((players, arms))
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials, O(n^3)). Returns `row -> column`.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based internals; column 0 is a virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Best utility for `players` over the still-free arms.
fn best_utility(weights: &[Vec<f64>], players: &[usize], free_arms: &[usize]) -> f64 {
    if players.is_empty() {
        return 0.0;
    }
    // Pad with zero-weight dummy players to make the problem square.
    let n = free_arms.len();
    let mut cost = vec![vec![0.0; n]; n];
    for (i, &p) in players.iter().enumerate() {
        for (j, &a) in free_arms.iter().enumerate() {
            cost[i][j] = -weights[p][a];
        }
    }
    let assignment = min_cost_assignment(&cost);
    players
        .iter()
        .enumerate()
        .map(|(i, &p)| weights[p][free_arms[assignment[i]]])
        .sum()
}

/// Maximum-utility matching via the Hungarian algorithm.
///
/// Among optimal matchings (within [`UTILITY_TOL`]) the lexicographically
/// smallest assignment is returned.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Result<UtilityReport> {
    let (players, arms) = check_weights(weights)?;
    let all_players: Vec<usize> = (0..players).collect();
    let all_arms: Vec<usize> = (0..arms).collect();
    let optimum = best_utility(weights, &all_players, &all_arms);

    // Fix players one at a time to the smallest arm that keeps the optimum reachable.
    let mut assignment = Vec::with_capacity(players);
    let mut free = all_arms;
    let mut fixed_sum = 0.0;
    for p in 0..players {
        let rest: Vec<usize> = (p + 1..players).collect();
        let mut chosen = None;
        let mut fallback = (f64::NEG_INFINITY, 0);
        for (idx, &arm) in free.iter().enumerate() {
            let mut remaining = free.clone();
            remaining.remove(idx);
            let total = fixed_sum + weights[p][arm] + best_utility(weights, &rest, &remaining);
            if total >= optimum - UTILITY_TOL {
                chosen = Some(idx);
                break;
            }
            if total > fallback.0 {
                fallback = (total, idx);
            }
        }
        let idx = chosen.unwrap_or(fallback.1);
        let arm = free.remove(idx);
        fixed_sum += weights[p][arm];
        assignment.push(arm);
    }
    let matching = Matching::from_vec_unchecked(assignment);
    let utility = matching.utility(weights);
    Ok(UtilityReport {
        matching,
        utility,
        is_optimal: true,
    })
}

/// Every injective assignment of `players` players to `arms` arms, in lexicographic order.
pub fn all_matchings(players: usize, arms: usize) -> Vec<Matching> {
    fn rec(p: usize, players: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Matching>) {
        if p == players {
            out.push(Matching(cur.clone()));
            return;
        }
        for a in 0..used.len() {
            if !used[a] {
                used[a] = true;
                cur.push(a);
                rec(p + 1, players, used, cur, out);
                cur.pop();
                used[a] = false;
            }
        }
    }
    let mut out = Vec::new();
    if players <= arms {
        rec(0, players, &mut vec![false; arms], &mut Vec::new(), &mut out);
    }
    out
}

/// All matchings with utility `>= U* - tol`, found by exhaustive enumeration.
///
/// Only meant for small instances: `S` is capped at [`ENUMERATION_MAX_ARMS`].
pub fn enumerate_optimal(weights: &[Vec<f64>], tol: f64) -> Result<Vec<Matching>> {
    let (players, arms) = check_weights(weights)?;
    if arms > ENUMERATION_MAX_ARMS {
        return Err(Error::Usage(format!(
            "exhaustive enumeration is limited to {ENUMERATION_MAX_ARMS} arms (got {arms}); use hungarian_max"
        )));
    }
    let all = all_matchings(players, arms);
    let best = all
        .iter()
        .map(|m| m.utility(weights))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(all
        .into_iter()
        .filter(|m| m.utility(weights) >= best - tol)
        .collect())
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
    fn utility_examples() {
        let means = MeanRewardMatrix::new(heterogeneous()).unwrap();
        let best = Matching::new(vec![1, 2, 3, 4], 6).unwrap();
        assert!((matching_utility(&best, &means).unwrap() - 3.0).abs() < 1e-12);
        let diag = Matching::new(vec![0, 1, 2, 3], 6).unwrap();
        assert!((matching_utility(&diag, &means).unwrap() - 0.9).abs() < 1e-12);
        let zeros = MeanRewardMatrix::new(vec![vec![0.0; 6]; 4]).unwrap();
        assert_eq!(matching_utility(&best, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn invalid_matchings_rejected() {
        assert!(Matching::new(vec![1, 1], 3).is_err());
        assert!(Matching::new(vec![0, 3], 3).is_err());
        let means = MeanRewardMatrix::new(heterogeneous()).unwrap();
        let short = Matching::new(vec![0, 1], 6).unwrap();
        assert!(matching_utility(&short, &means).is_err());
    }

    #[test]
    fn hungarian_examples() {
        let r = hungarian_max(&heterogeneous()).unwrap();
        assert_eq!(r.matching.assignment(), &[1, 2, 3, 4]);
        assert!((r.utility - 3.0).abs() < 1e-9);

        let row = vec![0.0, 0.9, 0.8, 0.7, 0.6, 0.3];
        let r = hungarian_max(&vec![row; 4]).unwrap();
        assert!((r.utility - 3.0).abs() < 1e-9);
        assert_eq!(r.matching.assignment(), &[1, 2, 3, 4]);

        let r = hungarian_max(&[vec![0.4]]).unwrap();
        assert_eq!(r.matching.assignment(), &[0]);
        assert_eq!(r.utility, 0.4);
    }

    #[test]
    fn hungarian_rejects_more_players_than_arms() {
        assert!(matches!(
            hungarian_max(&[vec![0.1], vec![0.2]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn enumeration_examples() {
        let opt = enumerate_optimal(&heterogeneous(), 1e-9).unwrap();
        assert_eq!(opt, vec![Matching(vec![1, 2, 3, 4])]);

        let row = vec![0.0, 0.9, 0.8, 0.7, 0.6, 0.3];
        let opt = enumerate_optimal(&vec![row; 4], 1e-9).unwrap();
        assert_eq!(opt.len(), 24);
        assert!(opt
            .iter()
            .all(|m| m.assignment().iter().all(|a| (1..=4).contains(a))));

        let all = enumerate_optimal(&heterogeneous(), f64::INFINITY).unwrap();
        assert_eq!(all.len(), 360);
    }

    #[test]
    fn enumeration_size_guard() {
        let w = vec![vec![0.5; 11]; 2];
        assert!(matches!(enumerate_optimal(&w, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn second_best_heterogeneous_gap() {
        let w = heterogeneous();
        let mut utils: Vec<f64> = all_matchings(4, 6).iter().map(|m| m.utility(&w)).collect();
        utils.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((utils[0] - 3.0).abs() < 1e-12);
        assert!(utils[0] - utils[1] >= 0.1);
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(Matching(vec![1, 2]).to_string(), "1->2, 2->3");
    }
}
