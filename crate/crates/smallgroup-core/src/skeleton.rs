//! Finite-depth skeleton of the subgroup: truncated membership relative to a
//! witness level and index set, witness arithmetic, and tail-event measures.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coords::{coord_inverse, coord_multiply, CoordError, CoordinateWord};
use crate::levels::{LevelError, LevelSets, TowerContext};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("level sets for level {level} at witness level {n} are not available")]
    LevelSetsMissing { level: usize, n: usize },
    #[error("index {index} lies outside a word of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("input {0} is not witnessed by its level and index set")]
    NotWitnessed(usize),
    #[error("combined witness fails at level {0}")]
    WitnessViolation(usize),
    #[error(transparent)]
    Coord(#[from] CoordError),
}

fn lookup(levels: &[LevelSets], i: usize, n: usize, k: u32) -> Result<bool, SkeletonError> {
    let sets = levels.get(i).ok_or(SkeletonError::LevelSetsMissing { level: i, n })?;
    sets.b_contains(n, k).map_err(|e| match e {
        LevelError::LevelSetsMissing { .. } => SkeletonError::LevelSetsMissing { level: i, n },
    })
}

/// First index `i ∈ U` with `word_i ∉ B_i^n`.
pub fn first_violation(
    levels: &[LevelSets],
    word: &[u32],
    n: usize,
    u: &BTreeSet<usize>,
) -> Result<Option<usize>, SkeletonError> {
    for &i in u {
        let k = *word.get(i).ok_or(SkeletonError::IndexOutOfRange { index: i, len: word.len() })?;
        if !lookup(levels, i, n, k)? {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Whether `word_i ∈ B_i^n` for every `i ∈ U`.
pub fn membership_truncated(
    levels: &[LevelSets],
    word: &[u32],
    n: usize,
    u: &BTreeSet<usize>,
) -> Result<bool, SkeletonError> {
    Ok(first_violation(levels, word, n, u)?.is_none())
}

/// A coordinate word with a witness level and index set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessedElement {
    pub word: CoordinateWord,
    pub level: usize,
    pub indices: BTreeSet<usize>,
    /// Indices removed from the combined index set by the threshold.
    #[serde(default)]
    pub dropped: BTreeSet<usize>,
}

impl WitnessedElement {
    pub fn new(word: CoordinateWord, level: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        WitnessedElement { word, level, indices: indices.into_iter().collect(), dropped: BTreeSet::new() }
    }

    /// The identity word witnessed at level 0 on every index.
    pub fn identity(len: usize) -> Self {
        Self::new(vec![1; len], 0, 0..len)
    }

    pub fn is_witnessed(&self, levels: &[LevelSets]) -> Result<bool, SkeletonError> {
        membership_truncated(levels, &self.word, self.level, &self.indices)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineKind {
    Product,
    Inverse,
}

/// Product (`level = max + 1`, indices `U1 ∩ U2`) or inverse (`level = n + 1`,
/// indices `U`) of witnessed elements. Indices below `threshold` are moved to `dropped`.
pub fn witness_combine(
    ctx: &TowerContext,
    kind: CombineKind,
    a: &WitnessedElement,
    b: Option<&WitnessedElement>,
    threshold: usize,
) -> Result<WitnessedElement, SkeletonError> {
    if !a.is_witnessed(&ctx.levels)? {
        return Err(SkeletonError::NotWitnessed(0));
    }
    let (word, level, indices) = match kind {
        CombineKind::Product => {
            let b = b.expect("product needs two operands");
            if !b.is_witnessed(&ctx.levels)? {
                return Err(SkeletonError::NotWitnessed(1));
            }
            let word = coord_multiply(&ctx.tower, &ctx.fibers, &a.word, &b.word)?;
            let indices: BTreeSet<usize> = a.indices.intersection(&b.indices).copied().collect();
            (word, a.level.max(b.level) + 1, indices)
        }
        CombineKind::Inverse => {
            (coord_inverse(&ctx.tower, &ctx.fibers, &a.word)?, a.level + 1, a.indices.clone())
        }
    };
    let (dropped, indices): (BTreeSet<usize>, BTreeSet<usize>) = indices.into_iter().partition(|&i| i < threshold);
    if let Some(i) = first_violation(&ctx.levels, &word, level, &indices)? {
        return Err(SkeletonError::WitnessViolation(i));
    }
    Ok(WitnessedElement { word, level, indices, dropped })
}

/// Exact `ν(⋃_{i0 ≤ k ≤ N} {s : s_k ∈ B_k^n})` and the bound `Σ_{k = max(i0, n)}^N 1/k²`.
/// The bound is `None` when the sum would include `k = 0`.
pub fn tail_event_measure(
    ctx: &TowerContext,
    n: usize,
    i0: usize,
    depth: usize,
) -> Result<(BigRational, Option<BigRational>), SkeletonError> {
    let mut miss = BigRational::one();
    for k in i0..=depth {
        let sets = ctx.levels.get(k).ok_or(SkeletonError::LevelSetsMissing { level: k, n })?;
        let b = sets.b_len(n).map_err(|_| SkeletonError::LevelSetsMissing { level: k, n })?;
        let m = ctx.tower.m(k);
        miss *= BigRational::new(BigInt::from(m - b), BigInt::from(m));
    }
    let measure = if i0 > depth { BigRational::zero() } else { BigRational::one() - miss };
    let start = i0.max(n);
    let bound = if start == 0 && start <= depth {
        None
    } else {
        Some((start..=depth).fold(BigRational::zero(), |acc, k| {
            acc + BigRational::new(BigInt::one(), BigInt::from(k * k))
        }))
    };
    Ok((measure, bound))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            _ => Err(format!("unknown parity {s:?}")),
        }
    }
}

/// A finite stand-in for an ultrafilter: the union of every other block
/// `[n_b, n_{b+1})` of a breakpoint sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UltrafilterSurrogate {
    pub parity: Parity,
    pub breakpoints: Vec<usize>,
}

impl UltrafilterSurrogate {
    pub fn new(parity: Parity, breakpoints: Vec<usize>) -> Self {
        assert!(breakpoints.first() == Some(&0) && breakpoints.windows(2).all(|w| w[0] < w[1]));
        UltrafilterSurrogate { parity, breakpoints }
    }

    /// Whether block `b` is selected.
    pub fn selects_block(&self, b: usize) -> bool {
        (b % 2 == 0) == (self.parity == Parity::Even)
    }

    /// The selected indices below `min(n_T, len)`.
    pub fn indices(&self, len: usize) -> BTreeSet<usize> {
        self.breakpoints
            .windows(2)
            .enumerate()
            .filter(|(b, _)| self.selects_block(*b))
            .flat_map(|(_, w)| w[0]..w[1].min(len))
            .collect()
    }
}
