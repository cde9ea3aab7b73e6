//! Multi-index bookkeeping for the triangularly truncated hierarchy.
//!
//! Indices are ordered lexicographically on the concatenation `(n⃗, m⃗)`.
//! For a single pseudomode this reproduces the stacking
//! `(0,0), (0,1), (0,2), (1,0), (1,1), (2,0)` used for the explicit block
//! matrices of the generator.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default cap on the number of hierarchy members.
pub const DEFAULT_MAX_STATES: u64 = 20_000_000;

/// `(n⃗, m⃗)` stored as one vector of length `2M`: `n⃗` first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn zero(modes: usize) -> Self {
        Self(vec![0; 2 * modes])
    }

    pub fn new(n: &[u32], m: &[u32]) -> Result<Self> {
        if n.len() != m.len() || n.is_empty() {
            return Err(Error::Dimension(format!(
                "multi-index halves have lengths {} and {}",
                n.len(),
                m.len()
            )));
        }
        Ok(Self(n.iter().chain(m).copied().collect()))
    }

    pub fn modes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn n(&self) -> &[u32] {
        &self.0[..self.modes()]
    }

    pub fn m(&self) -> &[u32] {
        &self.0[self.modes()..]
    }

    pub fn depth(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
}

/// Which half of the multi-index a move acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    N,
    M,
}

#[derive(Clone, Debug)]
pub struct HierarchySpace {
    modes: usize,
    k_max: usize,
    indices: Vec<MultiIndex>,
    ranks: HashMap<MultiIndex, usize>,
}

/// Number of multi-indices of `2M` non-negative entries with depth at most
/// `k_max`, i.e. the binomial `(2M + k_max)! / ((2M)! k_max!)`.
pub fn count(modes: usize, k_max: usize) -> Result<u64> {
    if modes == 0 {
        return Err(Error::InvalidArgument("hierarchy needs at least one mode".into()));
    }
    let top = 2 * modes as u128;
    let mut acc: u128 = 1;
    // C(top + i, i) = C(top + i - 1, i - 1) * (top + i) / i, exact at every step.
    for i in 1..=k_max as u128 {
        acc = acc
            .checked_mul(top + i)
            .ok_or_else(|| Error::Size(format!("hierarchy count for M = {modes}, k_max = {k_max}")))?
            / i;
        if acc > u64::MAX as u128 {
            return Err(Error::Size(format!(
                "hierarchy count for M = {modes}, k_max = {k_max} exceeds 64 bits"
            )));
        }
    }
    Ok(acc as u64)
}

impl HierarchySpace {
    pub fn enumerate(modes: usize, k_max: usize) -> Result<Self> {
        Self::enumerate_with_budget(modes, k_max, DEFAULT_MAX_STATES)
    }

    pub fn enumerate_with_budget(modes: usize, k_max: usize, max_states: u64) -> Result<Self> {
        let total = count(modes, k_max)?;
        if total > max_states {
            return Err(Error::Budget(format!(
                "{total} hierarchy members for M = {modes}, k_max = {k_max} (limit {max_states})"
            )));
        }
        let mut indices = Vec::with_capacity(total as usize);
        let mut current = vec![0u32; 2 * modes];
        fill(&mut current, 0, k_max as u32, &mut indices);
        debug_assert_eq!(indices.len() as u64, total);
        let ranks = indices
            .iter()
            .enumerate()
            .map(|(r, idx)| (idx.clone(), r))
            .collect();
        Ok(Self {
            modes,
            k_max,
            indices,
            ranks,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn unrank(&self, rank: usize) -> Option<&MultiIndex> {
        self.indices.get(rank)
    }

    pub fn rank(&self, idx: &MultiIndex) -> Option<usize> {
        self.ranks.get(idx).copied()
    }

    /// Rank of `idx ± e_slot` on the given side, or `None` when the move
    /// leaves ℕ^{2M} or the truncation.
    pub fn neighbor(&self, idx: &MultiIndex, slot: usize, side: Side, delta: i32) -> Option<usize> {
        if slot >= self.modes {
            return None;
        }
        let pos = match side {
            Side::N => slot,
            Side::M => self.modes + slot,
        };
        let shifted = idx.0[pos] as i64 + delta as i64;
        if shifted < 0 {
            return None;
        }
        let mut next = idx.clone();
        next.0[pos] = shifted as u32;
        if next.depth() as usize > self.k_max {
            return None;
        }
        self.rank(&next)
    }
}

fn fill(current: &mut Vec<u32>, pos: usize, budget: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in 0..=budget {
        current[pos] = v;
        fill(current, pos + 1, budget - v, out);
    }
    current[pos] = 0;
}
