//! Dense open cylinder sets in a finite product of alphabets, the
//! breakpoint/reference-word construction, and the block-parity demonstration.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::coords::CoordinateWord;
use crate::levels::TowerContext;
use crate::skeleton::{first_violation, Parity, SkeletonError, UltrafilterSurrogate, WitnessedElement};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("alphabet sizes must be positive")]
    EmptyAlphabet,
    #[error("space has {0} words at full depth, above the supported limit")]
    SpaceTooLarge(u128),
    #[error("cylinder {cylinder} does not fit the space at position {position}")]
    AlphabetMismatch { cylinder: usize, position: usize },
    #[error("set {0} is not dense at its resolution")]
    NotDense(usize),
    #[error("the space ends before stage {0} can be completed")]
    SpaceTooShallow(usize),
    #[error("coordinate space {space:?} does not match the tower's fiber sizes {tower:?}")]
    SpaceMismatch { space: Vec<u32>, tower: Vec<usize> },
    #[error("demonstration element fails check ({0})")]
    DemoFailed(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// Upper limit on the number of full-depth words of a space.
pub const MAX_WORDS: usize = 1 << 24;

/// `∏_j {1..M_j}` truncated to `M_0, ..., M_N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProductSpace {
    branching: Vec<u32>,
    /// `prefix_count[L] = ∏_{j<L} M_j`.
    #[serde(skip)]
    prefix_count: Vec<usize>,
}

impl ProductSpace {
    pub fn new(branching: Vec<u32>) -> Result<Self, GameError> {
        if branching.iter().any(|&m| m == 0) {
            return Err(GameError::EmptyAlphabet);
        }
        let mut prefix_count = vec![1usize];
        let mut total: u128 = 1;
        for &m in &branching {
            total *= m as u128;
            if total > MAX_WORDS as u128 {
                return Err(GameError::SpaceTooLarge(total));
            }
            prefix_count.push(total as usize);
        }
        Ok(ProductSpace { branching, prefix_count })
    }

    pub fn branching(&self) -> &[u32] {
        &self.branching
    }

    /// Number of coordinates.
    pub fn len(&self) -> usize {
        self.branching.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branching.is_empty()
    }

    /// Number of words of length `l`.
    pub fn count(&self, l: usize) -> usize {
        self.prefix_count[l]
    }

    /// Number of extensions of a length-`from` word to length `to`.
    pub fn block(&self, from: usize, to: usize) -> usize {
        self.prefix_count[to] / self.prefix_count[from]
    }

    /// Lexicographic rank of a word among words of its length.
    pub fn index(&self, word: &[u32]) -> usize {
        word.iter().zip(&self.branching).fold(0, |acc, (&s, &m)| acc * m as usize + (s - 1) as usize)
    }

    /// The word of length `l` with rank `idx`.
    pub fn word(&self, l: usize, mut idx: usize) -> Vec<u32> {
        let mut w = vec![0; l];
        for j in (0..l).rev() {
            let m = self.branching[j] as usize;
            w[j] = (idx % m) as u32 + 1;
            idx /= m;
        }
        w
    }

    fn fits(&self, word: &[u32]) -> Option<usize> {
        if word.len() > self.len() {
            return Some(self.len());
        }
        word.iter().zip(&self.branching).position(|(&s, &m)| s == 0 || s > m)
    }
}

/// A finite union of cylinders, stored as the set of cells at its resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseOpenSet {
    resolution: usize,
    cells: FixedBitSet,
}

impl DenseOpenSet {
    /// Pads every cylinder to the longest listed length.
    pub fn from_cylinders(space: &ProductSpace, cylinders: &[Vec<u32>]) -> Result<Self, GameError> {
        for (c, cyl) in cylinders.iter().enumerate() {
            if let Some(position) = space.fits(cyl) {
                return Err(GameError::AlphabetMismatch { cylinder: c, position });
            }
        }
        let resolution = cylinders.iter().map(Vec::len).max().unwrap_or(0);
        let mut cells = FixedBitSet::with_capacity(space.count(resolution));
        for cyl in cylinders {
            let b = space.block(cyl.len(), resolution);
            let start = space.index(cyl) * b;
            cells.insert_range(start..start + b);
        }
        Ok(DenseOpenSet { resolution, cells })
    }

    /// Cells of length `resolution` satisfying `pred`.
    pub fn from_predicate(space: &ProductSpace, resolution: usize, pred: impl Fn(&[u32]) -> bool) -> Self {
        let n = space.count(resolution);
        let mut cells = FixedBitSet::with_capacity(n);
        for idx in 0..n {
            if pred(&space.word(resolution, idx)) {
                cells.insert(idx);
            }
        }
        DenseOpenSet { resolution, cells }
    }

    /// The whole space.
    pub fn full() -> Self {
        let mut cells = FixedBitSet::with_capacity(1);
        cells.insert(0);
        DenseOpenSet { resolution: 0, cells }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Maximal listed cylinders, in lexicographic order.
    pub fn cylinders(&self, space: &ProductSpace) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        self.collect(space, Vec::new(), &mut out);
        out
    }

    fn collect(&self, space: &ProductSpace, prefix: Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if self.contains_cylinder(space, &prefix) {
            out.push(prefix);
            return;
        }
        if prefix.len() == self.resolution {
            return;
        }
        let b = space.block(prefix.len(), self.resolution);
        let start = space.index(&prefix) * b;
        if self.cells.count_ones(start..start + b) == 0 {
            return;
        }
        for s in 1..=space.branching[prefix.len()] {
            let mut next = prefix.clone();
            next.push(s);
            self.collect(space, next, out);
        }
    }

    /// Whether every extension of `cyl` lies in the set.
    pub fn contains_cylinder(&self, space: &ProductSpace, cyl: &[u32]) -> bool {
        if cyl.len() >= self.resolution {
            self.cells.contains(space.index(&cyl[..self.resolution]))
        } else {
            let b = space.block(cyl.len(), self.resolution);
            let start = space.index(cyl) * b;
            self.cells.count_ones(start..start + b) == b
        }
    }

    /// Whether the set is dense: every cell one level above the resolution meets it.
    pub fn is_dense(&self, space: &ProductSpace) -> bool {
        if self.resolution == 0 {
            return self.cells.contains(0);
        }
        let b = space.branching[self.resolution - 1] as usize;
        (0..space.count(self.resolution - 1)).all(|p| self.cells.count_ones(p * b..(p + 1) * b) > 0)
    }

    /// The same set at a finer resolution.
    pub fn refine(&self, space: &ProductSpace, resolution: usize) -> Self {
        assert!(resolution >= self.resolution);
        let b = space.block(self.resolution, resolution);
        let mut cells = FixedBitSet::with_capacity(space.count(resolution));
        for c in self.cells.ones() {
            cells.insert_range(c * b..(c + 1) * b);
        }
        DenseOpenSet { resolution, cells }
    }

    pub fn intersect(&self, space: &ProductSpace, other: &Self) -> Self {
        let r = self.resolution.max(other.resolution);
        let mut a = self.refine(space, r);
        a.cells.intersect_with(&other.refine(space, r).cells);
        a
    }
}

/// Checks that every cylinder fits the space and that the union is dense.
pub fn validate_dense_open(space: &ProductSpace, cylinders: &[Vec<u32>]) -> Result<bool, GameError> {
    Ok(DenseOpenSet::from_cylinders(space, cylinders)?.is_dense(space))
}

/// Breakpoints `0 = n_0 < ... < n_T` and a reference word of length `n_T`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameSolution {
    pub breakpoints: Vec<usize>,
    pub reference: CoordinateWord,
}

impl GameSolution {
    pub fn stages(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn block(&self, stage: usize) -> &[u32] {
        &self.reference[self.breakpoints[stage - 1]..self.breakpoints[stage]]
    }
}

/// `V_k = U_1 ∩ ... ∩ U_k`.
pub fn decreasing_intersections(space: &ProductSpace, sets: &[DenseOpenSet]) -> Vec<DenseOpenSet> {
    let mut out: Vec<DenseOpenSet> = Vec::with_capacity(sets.len());
    for s in sets {
        let v = match out.last() {
            Some(prev) => prev.intersect(space, s),
            None => s.clone(),
        };
        out.push(v);
    }
    out
}

/// Shortest, then lexicographically least, `e` with `q ⌢ e ⊆ v`.
fn shortest_extension(space: &ProductSpace, v: &DenseOpenSet, q: &[u32]) -> Option<Vec<u32>> {
    let l = q.len();
    let max_t = v.resolution.saturating_sub(l).min(space.len() - l);
    let base = space.index(q);
    for t in 0..=max_t {
        let count = space.block(l, l + t);
        for e in 0..count {
            let mut cand = q.to_vec();
            let tail = space.word(l + t, base * count + e);
            cand.extend_from_slice(&tail[l..]);
            if v.contains_cylinder(space, &cand) {
                return Some(tail[l..].to_vec());
            }
        }
    }
    None
}

/// Constructs breakpoints and a reference word so that every prefix of length
/// `n_{k-1}` followed by the `k`-th block of the reference lies in `U_1 ∩ ... ∩ U_k`.
pub fn solve_game(space: &ProductSpace, sets: &[DenseOpenSet]) -> Result<GameSolution, GameError> {
    for (k, s) in sets.iter().enumerate() {
        if s.resolution > space.len() {
            return Err(GameError::AlphabetMismatch { cylinder: k, position: space.len() });
        }
        if !s.is_dense(space) {
            return Err(GameError::NotDense(k + 1));
        }
    }
    let vs = decreasing_intersections(space, sets);
    let mut breakpoints = vec![0usize];
    let mut reference: Vec<u32> = Vec::new();
    for (k, v) in vs.iter().enumerate() {
        let stage = k + 1;
        let n = reference.len();
        let mut segment: Vec<u32> = Vec::new();
        for p in 0..space.count(n) {
            let mut q = space.word(n, p);
            q.extend_from_slice(&segment);
            let e = shortest_extension(space, v, &q).ok_or(GameError::SpaceTooShallow(stage))?;
            segment.extend(e);
        }
        if segment.is_empty() {
            if n >= space.len() {
                return Err(GameError::SpaceTooShallow(stage));
            }
            segment.push(1);
        }
        reference.extend(segment);
        breakpoints.push(reference.len());
    }
    let solution = GameSolution { breakpoints, reference };
    let check = verify_stages(space, &solution, sets);
    if let Some(bad) = check.iter().find(|s| !s.passed) {
        return Err(GameError::SpaceTooShallow(bad.stage));
    }
    Ok(solution)
}

/// Containment of all stage cylinders in one set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageCheck {
    pub stage: usize,
    /// 1-based index of the set checked.
    pub set: usize,
    pub passed: bool,
    /// Prefix of length `n_{stage-1}` whose extension by the block escapes the set.
    pub witness: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleCheck {
    pub drawn: usize,
    pub failures: usize,
    pub first_failure: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameReport {
    pub stages: Vec<StageCheck>,
    pub samples: SampleCheck,
}

impl GameReport {
    pub fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.passed) && self.samples.failures == 0
    }
}

fn verify_stages(space: &ProductSpace, sol: &GameSolution, sets: &[DenseOpenSet]) -> Vec<StageCheck> {
    let mut out = Vec::new();
    for stage in 1..=sol.stages().min(sets.len()) {
        let n = sol.breakpoints[stage - 1];
        let block = sol.block(stage);
        for (k, set) in sets.iter().enumerate().take(stage) {
            let witness = (0..space.count(n)).map(|p| space.word(n, p)).find(|p| {
                let mut c = p.clone();
                c.extend_from_slice(block);
                !set.contains_cylinder(space, &c)
            });
            out.push(StageCheck { stage, set: k + 1, passed: witness.is_none(), witness });
        }
    }
    out
}

/// Checks every stage exhaustively against every set up to it, and draws `samples`
/// random full-length words that agree with the reference on a random block.
pub fn verify_game<R: Rng>(
    space: &ProductSpace,
    sol: &GameSolution,
    sets: &[DenseOpenSet],
    samples: usize,
    rng: &mut R,
) -> GameReport {
    let stages = verify_stages(space, sol, sets);
    let mut failures = 0;
    let mut first_failure = None;
    let t = sol.stages().min(sets.len());
    if t > 0 {
        for _ in 0..samples {
            let stage = rng.gen_range(1..=t);
            let mut w: Vec<u32> = space.branching.iter().map(|&m| rng.gen_range(1..=m)).collect();
            let (a, b) = (sol.breakpoints[stage - 1], sol.breakpoints[stage]);
            w[a..b].copy_from_slice(sol.block(stage));
            if !sets[..stage].iter().all(|s| s.contains_cylinder(space, &w)) {
                failures += 1;
                first_failure.get_or_insert(w);
            }
        }
    }
    GameReport { stages, samples: SampleCheck { drawn: if t > 0 { samples } else { 0 }, failures, first_failure } }
}

/// Appends a copy of the last set, so that under either parity some stage whose
/// block lies outside the surrogate index set targets the full intersection.
pub fn pad_for_demo(sets: &[DenseOpenSet]) -> Vec<DenseOpenSet> {
    let mut out = sets.to_vec();
    if let Some(last) = sets.last() {
        out.push(last.clone());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DemoOutcome {
    pub element: WitnessedElement,
    pub surrogate: UltrafilterSurrogate,
    /// Stages whose block lies outside the surrogate index set.
    pub free_stages: Vec<usize>,
    /// Membership of the element in each supplied set.
    pub in_sets: Vec<bool>,
}

/// The word `s` with `s_i = 1` on the surrogate index set and `s_i = r_i` elsewhere
/// below `n_T` (and `1` from `n_T` on), checked at witness level 0 and against
/// every set whose block is outside the surrogate index set.
pub fn demo_nonmeager(
    ctx: &TowerContext,
    space: &ProductSpace,
    sol: &GameSolution,
    sets: &[DenseOpenSet],
    parity: Parity,
) -> Result<DemoOutcome, GameError> {
    let ms = ctx.ms();
    if space.branching.len() != ms.len() || space.branching.iter().zip(ms).any(|(&a, &b)| a as usize != b) {
        return Err(GameError::SpaceMismatch { space: space.branching.clone(), tower: ms.to_vec() });
    }
    let len = space.len();
    let surrogate = UltrafilterSurrogate::new(parity, sol.breakpoints.clone());
    let u: BTreeSet<usize> = surrogate.indices(len);
    let word: Vec<u32> = (0..len)
        .map(|i| if u.contains(&i) || i >= sol.reference.len() { 1 } else { sol.reference[i] })
        .collect();
    if let Some(i) = first_violation(&ctx.levels, &word, 0, &u)? {
        return Err(GameError::DemoFailed(format!("level-0 membership at index {i}")));
    }
    let free_stages: Vec<usize> = (1..=sol.stages()).filter(|&k| !surrogate.selects_block(k - 1)).collect();
    for &k in &free_stages {
        if let Some(j) = (0..k.min(sets.len())).find(|&j| !sets[j].contains_cylinder(space, &word)) {
            return Err(GameError::DemoFailed(format!("stage {k} set {}", j + 1)));
        }
    }
    let in_sets = sets.iter().map(|s| s.contains_cylinder(space, &word)).collect();
    Ok(DemoOutcome { element: WitnessedElement::new(word, 0, u), surrogate, free_stages, in_sets })
}

/// A random space together with a random family of dense open sets on it.
pub fn random_family<R: Rng>(
    rng: &mut R,
    max_len: usize,
    max_branching: u32,
    max_sets: usize,
) -> (ProductSpace, Vec<DenseOpenSet>) {
    let t = rng.gen_range(1..=max_sets);
    let len = rng.gen_range(t.max(2)..=max_len.max(t.max(2)));
    let mut branching: Vec<u32> = (0..len).map(|_| rng.gen_range(1..=max_branching)).collect();
    let usable = |b: &[u32]| b.iter().filter(|&&m| m >= 2).count();
    for j in (0..len).rev() {
        if usable(&branching) >= t && branching[len - 1] >= 2 {
            break;
        }
        if branching[j] < 2 {
            branching[j] = rng.gen_range(2..=max_branching.max(2));
        }
    }
    let space = ProductSpace::new(branching).expect("bounded space");
    let sets = random_sets(rng, &space, t);
    (space, sets)
}

/// `t` random dense open sets that the solver can always complete, provided the
/// space has at least `t` coordinates with two or more symbols, the last among them.
///
/// Set `k` is `{s : s_j ∈ S_j for some usable j ≥ a_k}`, where the random symbol
/// sets `S_j ∋ c_j ≥ 2` are shared by all sets and `a_k` is at most the `k`-th
/// usable coordinate. Stage `k` of the solver then ends by that coordinate.
pub fn random_sets<R: Rng>(rng: &mut R, space: &ProductSpace, t: usize) -> Vec<DenseOpenSet> {
    let branching = space.branching();
    let len = branching.len();
    let usable: Vec<usize> = (0..len).filter(|&j| branching[j] >= 2).collect();
    assert!(usable.len() >= t && usable.last() == Some(&(len - 1)), "space too small for {t} sets");
    let allowed: Vec<Vec<bool>> = branching
        .iter()
        .map(|&m| {
            let planted = if m >= 2 { rng.gen_range(2..=m) } else { 0 };
            (0..=m).map(|s| m >= 2 && s >= 2 && (s == planted || rng.gen_bool(0.3))).collect()
        })
        .collect();
    (0..t)
        .map(|k| {
            let start = rng.gen_range(0..=usable[k]);
            DenseOpenSet::from_predicate(space, len, |w| {
                w.iter().enumerate().skip(start).any(|(j, &s)| allowed[j][s as usize])
            })
        })
        .collect()
}
