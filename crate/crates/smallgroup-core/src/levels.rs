//! The cover and closure operators on subsets of `G_i`, the level sets
//! `A_i^j` and `B_i^j`, the a-priori growth bound and tower thinning.

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::group::{enumerate_fibers, CyclicGenerator, Elem, FiberEnumeration, FiniteGroup, Tower, TowerError, TowerGenerator};

/// Default cap on generated group orders.
pub const DEFAULT_MAX_ORDER: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LevelError {
    #[error("level sets at level {level} were built only to j = {built}, {requested} requested")]
    LevelSetsMissing { level: usize, built: usize, requested: usize },
}

/// `HH ∪ (HH)^{-1}`.
pub fn op_f(group: &FiniteGroup, h: &FixedBitSet) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(group.order());
    let elems: Vec<Elem> = h.ones().map(|x| x as Elem).collect();
    for &x in &elems {
        for &y in &elems {
            let p = group.op(x, y);
            out.insert(p as usize);
            out.insert(group.inverse(p) as usize);
        }
    }
    out
}

/// Union of the partition classes of level `i` that meet `h`.
pub fn op_g(fibers: &FiberEnumeration, i: usize, h: &FixedBitSet) -> FixedBitSet {
    let mut classes = FixedBitSet::with_capacity(fibers.m(i) + 1);
    for x in h.ones() {
        classes.insert(fibers.psi(i, x as Elem) as usize);
    }
    classes_to_elements(fibers, i, &classes)
}

fn classes_to_elements(fibers: &FiberEnumeration, i: usize, classes: &FixedBitSet) -> FixedBitSet {
    let psi = fibers.psi_table(i);
    let mut out = FixedBitSet::with_capacity(psi.len());
    for (x, &k) in psi.iter().enumerate() {
        if classes.contains(k as usize) {
            out.insert(x);
        }
    }
    out
}

/// Classes hit by `F(A)`, stopping early once all classes are hit or more than
/// `budget` classes are hit.
fn classes_of_f(
    group: &FiniteGroup,
    fibers: &FiberEnumeration,
    i: usize,
    a: &FixedBitSet,
    budget: Option<usize>,
) -> (FixedBitSet, bool) {
    let m = fibers.m(i);
    let psi = fibers.psi_table(i);
    if group.is_cyclic_law() {
        return cyclic_classes_of_f(group.order(), psi, m, a, budget);
    }
    let mut classes = FixedBitSet::with_capacity(m + 1);
    let mut count = 0usize;
    let elems: Vec<Elem> = a.ones().map(|x| x as Elem).collect();
    let mut mark = |k: u32, classes: &mut FixedBitSet| {
        if !classes.put(k as usize) {
            count += 1;
        }
        count
    };
    for &x in &elems {
        for &y in &elems {
            let p = group.op(x, y);
            mark(psi[p as usize], &mut classes);
            let c = mark(psi[group.inverse(p) as usize], &mut classes);
            if c == m {
                return (classes, true);
            }
            if budget.is_some_and(|b| c > b) {
                return (classes, false);
            }
        }
    }
    (classes, true)
}

/// Maximal runs `(start, len)` of consecutive members, without wrap-around.
fn runs(a: &FixedBitSet) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for x in a.ones() {
        match out.last_mut() {
            Some((s, l)) if *s + *l == x => *l += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// `F(A)` in `Z/n` through sums of runs: `[a, a+l) + [b, b+k) = [a+b, a+b+l+k-1)`.
fn cyclic_classes_of_f(
    n: usize,
    psi: &[u32],
    m: usize,
    a: &FixedBitSet,
    budget: Option<usize>,
) -> (FixedBitSet, bool) {
    let rs = runs(a);
    let mut diff = vec![0i64; n + 1];
    let mut cover = |start: usize, len: usize| {
        if len >= n {
            diff[0] += 1;
            diff[n] -= 1;
            return;
        }
        let end = start + len;
        if end <= n {
            diff[start] += 1;
            diff[end] -= 1;
        } else {
            diff[start] += 1;
            diff[n] -= 1;
            diff[0] += 1;
            diff[end - n] -= 1;
        }
    };
    for &(s1, l1) in &rs {
        for &(s2, l2) in &rs {
            let start = (s1 + s2) % n;
            let len = l1 + l2 - 1;
            cover(start, len);
            let last = (start + len.min(n) - 1) % n;
            cover((n - last) % n, len);
        }
    }
    let mut classes = FixedBitSet::with_capacity(m + 1);
    let mut count = 0usize;
    let mut depth = 0i64;
    for (x, d) in diff.iter().take(n).enumerate() {
        depth += d;
        if depth > 0 && !classes.put(psi[x] as usize) {
            count += 1;
            if budget.is_some_and(|b| count > b) {
                return (classes, false);
            }
        }
    }
    (classes, true)
}

/// The sets `A_i^j` and `B_i^j` for `j ≤ J_max`.
#[derive(Clone, Debug)]
pub struct LevelSets {
    level: usize,
    j_max: usize,
    order: usize,
    m: usize,
    a: Vec<FixedBitSet>,
    /// Bit `k` set iff `k ∈ B_i^j` (bit 0 unused).
    b: Vec<FixedBitSet>,
}

/// Builds `A_i^0 = G({e})` and `A_i^{j+1} = G(F(A_i^j))` for `j < i`.
pub fn build_level_sets(tower: &Tower, fibers: &FiberEnumeration, i: usize, j_max: usize) -> LevelSets {
    build_budgeted(tower, fibers, i, j_max, None).expect("unbudgeted build cannot abort")
}

/// As [`build_level_sets`], aborting with `None` once some `|B_i^j|` exceeds `budget`.
pub fn build_budgeted(
    tower: &Tower,
    fibers: &FiberEnumeration,
    i: usize,
    j_max: usize,
    budget: Option<usize>,
) -> Option<LevelSets> {
    let group = tower.group(i);
    let m = fibers.m(i);
    let stored = j_max.min(i);
    let mut b = Vec::with_capacity(stored + 1);
    let mut first = FixedBitSet::with_capacity(m + 1);
    first.insert(fibers.psi(i, group.identity()) as usize);
    b.push(first);
    let mut a = vec![classes_to_elements(fibers, i, &b[0])];
    if budget.is_some_and(|t| 1 > t) {
        return None;
    }
    for j in 0..stored {
        let (classes, complete) = if b[j].count_ones(..) == m {
            (b[j].clone(), true)
        } else {
            classes_of_f(group, fibers, i, &a[j], budget)
        };
        if !complete {
            return None;
        }
        a.push(classes_to_elements(fibers, i, &classes));
        b.push(classes);
    }
    Some(LevelSets { level: i, j_max, order: group.order(), m, a, b })
}

impl LevelSets {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn check(&self, j: usize) -> Result<(), LevelError> {
        if j <= self.level && j > self.j_max {
            Err(LevelError::LevelSetsMissing { level: self.level, built: self.j_max, requested: j })
        } else {
            Ok(())
        }
    }

    /// `A_i^j`; the whole group for `j > i`.
    pub fn a(&self, j: usize) -> Result<FixedBitSet, LevelError> {
        self.check(j)?;
        Ok(match self.a.get(j) {
            Some(s) => s.clone(),
            None => {
                let mut s = FixedBitSet::with_capacity(self.order);
                s.insert_range(..);
                s
            }
        })
    }

    /// `B_i^j` as a sorted list of 1-based class indices.
    pub fn b(&self, j: usize) -> Result<Vec<u32>, LevelError> {
        self.check(j)?;
        Ok(match self.b.get(j) {
            Some(s) => s.ones().map(|k| k as u32).collect(),
            None => (1..=self.m as u32).collect(),
        })
    }

    pub fn b_contains(&self, j: usize, k: u32) -> Result<bool, LevelError> {
        self.check(j)?;
        Ok(match self.b.get(j) {
            Some(s) => s.contains(k as usize),
            None => k >= 1 && k as usize <= self.m,
        })
    }

    pub fn b_len(&self, j: usize) -> Result<usize, LevelError> {
        self.check(j)?;
        Ok(self.b.get(j).map_or(self.m, |s| s.count_ones(..)))
    }

    pub fn a_len(&self, j: usize) -> Result<usize, LevelError> {
        self.check(j)?;
        Ok(self.a.get(j).map_or(self.order, |s| s.count_ones(..)))
    }
}

/// A tower with its fiber enumeration and the level sets of every level, each built to `J_max = i`.
#[derive(Clone, Debug)]
pub struct TowerContext {
    pub tower: Tower,
    pub fibers: FiberEnumeration,
    pub levels: Vec<LevelSets>,
}

impl TowerContext {
    pub fn new(tower: Tower) -> Self {
        let fibers = enumerate_fibers(&tower);
        let levels = (0..=tower.depth())
            .into_par_iter()
            .map(|i| build_level_sets(&tower, &fibers, i, i))
            .collect();
        TowerContext { tower, fibers, levels }
    }

    pub fn depth(&self) -> usize {
        self.tower.depth()
    }

    /// Fiber sizes `m_0, ..., m_N`.
    pub fn ms(&self) -> &[usize] {
        self.tower.ms()
    }
}

/// Outcome of one closure relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationCheck {
    pub relation: &'static str,
    pub j: usize,
    pub passed: bool,
    /// Offending elements (for products) or class indices (for `B` relations).
    pub witness: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    pub level: usize,
    pub checks: Vec<RelationCheck>,
}

impl ClosureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RelationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const RELATIONS: [&str; 6] = ["Aszorz", "Ainv", "Amon", "Bszorz", "Binv", "Bmon"];

/// Exhaustively checks the six closure relations for every `j < J_max`.
pub fn verify_level_closure(tower: &Tower, fibers: &FiberEnumeration, sets: &LevelSets) -> ClosureReport {
    let i = sets.level;
    let group = tower.group(i);
    let psi = fibers.psi_table(i);
    let mut checks = Vec::new();
    for j in 0..sets.j_max {
        let a = sets.a(j).expect("j < j_max");
        let next = sets.a(j + 1).expect("j + 1 <= j_max");
        let b_next = |k: u32| sets.b_contains(j + 1, k).expect("j + 1 <= j_max");
        let next_full = next.count_ones(..) == group.order();
        let elems: Vec<Elem> = a.ones().map(|x| x as Elem).collect();

        // Products: elements of A^j times A^j, then the class form over B^j.
        let prod_witness = if next_full {
            None
        } else {
            elems.par_iter().find_map_first(|&x| {
                elems
                    .iter()
                    .find(|&&y| !next.contains(group.op(x, y) as usize))
                    .map(|&y| vec![x as u64, y as u64, group.op(x, y) as u64])
            })
        };
        checks.push(RelationCheck { relation: "Aszorz", j, passed: prod_witness.is_none(), witness: prod_witness });

        let inv_witness = elems
            .iter()
            .find(|&&x| !next.contains(group.inverse(x) as usize))
            .map(|&x| vec![x as u64, group.inverse(x) as u64]);
        checks.push(RelationCheck { relation: "Ainv", j, passed: inv_witness.is_none(), witness: inv_witness });

        let mon_witness = elems.iter().find(|&&x| !next.contains(x as usize)).map(|&x| vec![x as u64]);
        checks.push(RelationCheck { relation: "Amon", j, passed: mon_witness.is_none(), witness: mon_witness });

        let bj = sets.b(j).expect("j < j_max");
        let members: Vec<Elem> = bj.iter().flat_map(|&k| fibers.class(i, k)).collect();
        let bprod_witness = if next_full {
            None
        } else {
            members.par_iter().find_map_first(|&x| {
                members.iter().find(|&&y| !b_next(psi[group.op(x, y) as usize])).map(|&y| {
                    vec![psi[x as usize] as u64, psi[y as usize] as u64, psi[group.op(x, y) as usize] as u64]
                })
            })
        };
        checks.push(RelationCheck {
            relation: "Bszorz",
            j,
            passed: bprod_witness.is_none(),
            witness: bprod_witness,
        });

        let binv_witness = members
            .iter()
            .find(|&&x| !b_next(psi[group.inverse(x) as usize]))
            .map(|&x| vec![psi[x as usize] as u64, psi[group.inverse(x) as usize] as u64]);
        checks.push(RelationCheck { relation: "Binv", j, passed: binv_witness.is_none(), witness: binv_witness });

        let bmon_witness = bj.iter().find(|&&k| !b_next(k)).map(|&k| vec![k as u64]);
        checks.push(RelationCheck { relation: "Bmon", j, passed: bmon_witness.is_none(), witness: bmon_witness });
    }
    ClosureReport { level: i, checks }
}

/// `bound(c, 0) = c`, `bound(c, j + 1) = 2 bound(c, j)^2 c`.
pub fn apriori_bound(c: &BigUint, j: usize) -> BigUint {
    let mut d = c.clone();
    for _ in 0..j {
        d = BigUint::from(2u32) * &d * &d * c;
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinMode {
    Apriori,
    Exact,
}

impl std::str::FromStr for ThinMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apriori" => Ok(ThinMode::Apriori),
            "exact" => Ok(ThinMode::Exact),
            _ => Err(format!("unknown thinning mode {s:?}")),
        }
    }
}

/// Per-level record of a thinning run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThinLevel {
    pub level: usize,
    pub index: usize,
    #[serde(serialize_with = "crate::decimal")]
    pub order: BigUint,
    #[serde(serialize_with = "crate::decimal")]
    pub m: BigUint,
    /// `bound(|G_{i-1}|, i)`.
    #[serde(serialize_with = "crate::decimal")]
    pub bound: BigUint,
    /// `bound · i²`.
    #[serde(serialize_with = "crate::decimal")]
    pub required_ratio: BigUint,
    /// `|B_i^i|`.
    #[serde(serialize_with = "crate::decimal")]
    pub b_size: BigUint,
    /// Whether `|B_i^i| i² ≤ m_i`.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThinningReport {
    pub generator: String,
    pub mode: ThinMode,
    pub indices: Vec<usize>,
    pub levels: Vec<ThinLevel>,
}

impl ThinningReport {
    pub fn all_hold(&self) -> bool {
        self.levels.iter().all(|l| l.holds)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ThinError {
    #[error("generator {generator} cannot supply level {level} below order cap {cap}")]
    GeneratorExhausted { generator: String, level: usize, cap: BigUint },
    #[error(transparent)]
    Tower(#[from] TowerError),
}

/// Selects a subsequence `n_0 = 0 < n_1 < ... < n_I` of a generator so that
/// `|B_i^i| i² ≤ m_i` at every level.
pub fn thin_tower(
    gen: &dyn TowerGenerator,
    depth: usize,
    mode: ThinMode,
    max_order: &BigUint,
) -> Result<(Tower, ThinningReport), ThinError> {
    let exhausted = |level| ThinError::GeneratorExhausted {
        generator: gen.label(),
        level,
        cap: max_order.clone(),
    };
    let mut indices = vec![0usize];
    for i in 1..=depth {
        let prev = *indices.last().unwrap();
        let prev_order = gen.order(prev).ok_or_else(|| exhausted(i))?;
        let sq = BigUint::from(i * i);
        let required = apriori_bound(&prev_order, i) * &sq;
        let mut chosen = None;
        let mut k = prev + 1;
        loop {
            let Some(order) = gen.order(k) else { break };
            if &order > max_order {
                break;
            }
            match mode {
                ThinMode::Apriori => {
                    if &order >= &(&required * &prev_order) {
                        chosen = Some(k);
                        break;
                    }
                }
                ThinMode::Exact => {
                    let m = (&order / &prev_order).to_usize().expect("below cap");
                    let t = m / (i * i);
                    if t > 0 {
                        let mut cand = indices.clone();
                        cand.push(k);
                        let tower = Tower::from_generator(gen, &cand)?;
                        let fibers = enumerate_fibers(&tower);
                        if build_budgeted(&tower, &fibers, i, i, Some(t)).is_some() {
                            chosen = Some(k);
                            break;
                        }
                    }
                }
            }
            k += 1;
        }
        indices.push(chosen.ok_or_else(|| exhausted(i))?);
    }
    let tower = Tower::from_generator(gen, &indices)?;
    let report = thinning_report(gen, &tower, &indices, mode);
    Ok((tower, report))
}

/// `|B_i^j|` for `j ≤ j_max` at a level `Z/(p m) -> Z/p` of a cyclic tower
/// with reduction bonds.
///
/// The classes are the blocks `[(k-1)p, kp)`, so every `A_i^j` is the block
/// interval `[-a p, (b+1) p)` and `F(A_i^j)` is the interval `[-r, r]` with
/// `r = max(2ap, 2(b+1)p - 2)`.
pub fn cyclic_b_sizes(p: &BigUint, m: &BigUint, j_max: usize) -> Vec<BigUint> {
    let one = BigUint::from(1u32);
    let two = BigUint::from(2u32);
    let (mut a, mut b) = (BigUint::from(0u32), BigUint::from(0u32));
    let mut sizes = vec![one.clone()];
    for _ in 0..j_max {
        let last = sizes.last().unwrap();
        if last == m {
            sizes.push(m.clone());
            continue;
        }
        let r = (&two * &a * p).max(&two * (&b + &one) * p - &two);
        b = &r / p;
        a = (&r + p - &one) / p;
        let count = &a + &b + &one;
        sizes.push(if &count >= m { m.clone() } else { count });
    }
    sizes
}

/// A-priori thinning of `Z/base^k` without enumerating groups, using
/// [`cyclic_b_sizes`] for `|B_i^i|`.
pub fn thin_apriori_cyclic(gen: &CyclicGenerator, depth: usize) -> ThinningReport {
    let base = BigUint::from(gen.base);
    let mut indices = vec![0usize];
    let mut levels = Vec::with_capacity(depth);
    for i in 1..=depth {
        let prev = *indices.last().unwrap();
        let prev_order = base.pow(prev as u32);
        let sq = BigUint::from(i * i);
        let bound = apriori_bound(&prev_order, i);
        let required_ratio = &bound * &sq;
        let target = &required_ratio * &prev_order;
        let estimate = ((target.bits() as f64 - 1.0) / (gen.base as f64).log2()).floor() as usize;
        let mut k = (prev + 1).max(estimate.saturating_sub(1));
        let mut order = base.pow(k as u32);
        while order < target {
            order *= &base;
            k += 1;
        }
        let m = &order / &prev_order;
        let b_size = cyclic_b_sizes(&prev_order, &m, i).pop().unwrap();
        levels.push(ThinLevel {
            level: i,
            index: k,
            holds: &b_size * &sq <= m,
            order,
            m,
            bound,
            required_ratio,
            b_size,
        });
        indices.push(k);
    }
    ThinningReport { generator: gen.label(), mode: ThinMode::Apriori, indices, levels }
}

/// Evaluates `|B_i^i| i² ≤ m_i` on every level of a tower.
pub fn thinning_report(gen: &dyn TowerGenerator, tower: &Tower, indices: &[usize], mode: ThinMode) -> ThinningReport {
    let fibers = enumerate_fibers(tower);
    let levels = (1..=tower.depth())
        .into_par_iter()
        .map(|i| {
            let prev = BigUint::from(tower.order(i - 1));
            let bound = apriori_bound(&prev, i);
            let sets = build_level_sets(tower, &fibers, i, i);
            let b_size = BigUint::from(sets.b_len(i).expect("built to i"));
            let m = BigUint::from(tower.m(i));
            ThinLevel {
                level: i,
                index: indices[i],
                order: BigUint::from(tower.order(i)),
                holds: &b_size * BigUint::from(i * i) <= m,
                m,
                required_ratio: &bound * BigUint::from(i * i),
                bound,
                b_size,
            }
        })
        .collect();
    ThinningReport { generator: gen.label(), mode, indices: indices.to_vec(), levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ProductGenerator, TowerSpec};
    use proptest::prelude::*;

    fn tower(spec: &str) -> (Tower, FiberEnumeration) {
        let t = TowerSpec::parse_short(spec).unwrap().build().unwrap();
        let f = enumerate_fibers(&t);
        (t, f)
    }

    fn set(n: usize, xs: &[usize]) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(n);
        for &x in xs {
            s.insert(x);
        }
        s
    }

    fn ones(s: &FixedBitSet) -> Vec<usize> {
        s.ones().collect()
    }

    #[test]
    fn op_f_examples() {
        let z2 = FiniteGroup::cyclic(2);
        assert_eq!(ones(&op_f(&z2, &set(2, &[0]))), vec![0]);
        let z4 = FiniteGroup::cyclic(4);
        assert_eq!(ones(&op_f(&z4, &set(4, &[0, 1]))), vec![0, 1, 2, 3]);
        assert_eq!(ones(&op_f(&z4, &set(4, &[0, 2]))), vec![0, 2]);
    }

    #[test]
    fn op_g_examples() {
        let (_, f) = tower("cyclic:2:0,1,2");
        assert_eq!(ones(&op_g(&f, 2, &set(4, &[0]))), vec![0, 1]);
        assert_eq!(ones(&op_g(&f, 2, &set(4, &[3]))), vec![2, 3]);
        assert!(ones(&op_g(&f, 2, &set(4, &[]))).is_empty());
    }

    #[test]
    fn level_sets_of_z2() {
        let (t, f) = tower("cyclic:2:0,1");
        let s = build_level_sets(&t, &f, 1, 1);
        assert_eq!(ones(&s.a(0).unwrap()), vec![0]);
        assert_eq!(ones(&s.a(1).unwrap()), vec![0]);
        assert_eq!(s.b(0).unwrap(), vec![1]);
        assert_eq!(s.b(1).unwrap(), vec![1]);
    }

    #[test]
    fn level_sets_of_z4() {
        let (t, f) = tower("cyclic:2:0,1,2");
        let s = build_level_sets(&t, &f, 2, 3);
        assert_eq!(ones(&s.a(0).unwrap()), vec![0, 1]);
        assert_eq!(ones(&s.a(1).unwrap()), vec![0, 1, 2, 3]);
        assert_eq!(ones(&s.a(2).unwrap()), vec![0, 1, 2, 3]);
        assert_eq!(s.b(0).unwrap(), vec![1]);
        assert_eq!(s.b(1).unwrap(), vec![1, 2]);
        assert_eq!(s.b(2).unwrap(), vec![1, 2]);
        assert_eq!(s.b(3).unwrap(), vec![1, 2]);
        assert_eq!(s.a_len(3).unwrap(), 4);
    }

    #[test]
    fn missing_levels_reported() {
        let (t, f) = tower("cyclic:2:0,1,2,3");
        let s = build_level_sets(&t, &f, 3, 1);
        assert_eq!(
            s.b(2),
            Err(LevelError::LevelSetsMissing { level: 3, built: 1, requested: 2 })
        );
        assert_eq!(s.b(4).unwrap().len(), 2);
    }

    #[test]
    fn z4_closure_passes() {
        let (t, f) = tower("cyclic:2:0,1,2");
        let s = build_level_sets(&t, &f, 2, 2);
        let r = verify_level_closure(&t, &f, &s);
        assert!(r.all_passed());
        assert_eq!(r.checks.len(), 12);
    }

    #[test]
    fn trivial_level_vacuous() {
        let (t, f) = tower("cyclic:2:0,1");
        let s = build_level_sets(&t, &f, 0, 0);
        assert!(verify_level_closure(&t, &f, &s).checks.is_empty());
    }

    #[test]
    fn z8_closure_passes() {
        let (t, f) = tower("cyclic:2:0,1,2,3");
        for i in 0..=3 {
            let s = build_level_sets(&t, &f, i, 3);
            assert!(verify_level_closure(&t, &f, &s).all_passed(), "level {i}");
        }
    }

    #[test]
    fn corrupted_sets_fail_with_witness() {
        let (t, f) = tower("cyclic:2:0,1,2,3");
        let mut s = build_level_sets(&t, &f, 3, 3);
        s.a[1] = s.a[0].clone();
        s.b[1] = s.b[0].clone();
        let r = verify_level_closure(&t, &f, &s);
        let failed: Vec<_> = r.failures().map(|c| (c.relation, c.j)).collect();
        assert_eq!(failed, vec![("Aszorz", 0), ("Ainv", 0), ("Bszorz", 0), ("Binv", 0)]);
        assert_eq!(r.checks[0].witness, Some(vec![1, 3, 4]));
        assert!(r.failures().all(|c| c.witness.is_some()));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(apriori_bound(&BigUint::from(1u32), 1), BigUint::from(2u32));
        assert_eq!(apriori_bound(&BigUint::from(2u32), 2), BigUint::from(1024u32));
        assert_eq!(apriori_bound(&BigUint::from(7u32), 0), BigUint::from(7u32));
    }

    #[test]
    fn apriori_cyclic_two() {
        let cap = BigUint::from(DEFAULT_MAX_ORDER);
        let g = CyclicGenerator { base: 2 };
        let (_, r) = thin_tower(&g, 1, ThinMode::Apriori, &cap).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
        let (t, r) = thin_tower(&g, 2, ThinMode::Apriori, &cap).unwrap();
        assert_eq!(r.indices, vec![0, 1, 13]);
        assert_eq!(t.order(2), 8192);
        assert!(r.all_hold());
        assert_eq!(r.levels[1].required_ratio, BigUint::from(4096u32));
    }

    #[test]
    fn apriori_depth_three_exhausts() {
        let cap = BigUint::from(DEFAULT_MAX_ORDER);
        let g = CyclicGenerator { base: 2 };
        let err = thin_tower(&g, 3, ThinMode::Apriori, &cap).unwrap_err();
        assert!(matches!(err, ThinError::GeneratorExhausted { level: 3, .. }));
    }

    #[test]
    fn exact_mode_frozen_values() {
        let cap = BigUint::from(DEFAULT_MAX_ORDER);
        let (_, r) = thin_tower(&CyclicGenerator { base: 2 }, 3, ThinMode::Exact, &cap).unwrap();
        assert_eq!(r.indices, vec![0, 1, 6, 14]);
        assert!(r.all_hold());
        let (t, r) = thin_tower(&ProductGenerator::cyclic(2), 4, ThinMode::Exact, &cap).unwrap();
        assert_eq!(t.ms(), &[1, 2, 4, 16, 16]);
        assert!(r.all_hold());
    }

    #[test]
    fn exact_cyclic_depth_four() {
        let (_, r) = thin_tower(&CyclicGenerator { base: 2 }, 4, ThinMode::Exact, &BigUint::from(1u64 << 24)).unwrap();
        assert!(r.all_hold());
        assert_eq!(r.indices, vec![0, 1, 6, 14, 24]);
        assert_eq!(r.levels[3].b_size, BigUint::from(41u32));
        let err = thin_tower(&CyclicGenerator { base: 2 }, 4, ThinMode::Exact, &BigUint::from(DEFAULT_MAX_ORDER));
        assert!(matches!(err, Err(ThinError::GeneratorExhausted { level: 4, .. })));
    }

    #[test]
    fn exact_never_later_than_apriori() {
        let cap = BigUint::from(DEFAULT_MAX_ORDER);
        for gen in [&CyclicGenerator { base: 2 } as &dyn TowerGenerator, &CyclicGenerator { base: 3 }, &ProductGenerator::cyclic(2)] {
            let (_, a) = thin_tower(gen, 2, ThinMode::Apriori, &cap).unwrap();
            let (_, e) = thin_tower(gen, 2, ThinMode::Exact, &cap).unwrap();
            for (x, y) in e.indices.iter().zip(&a.indices) {
                assert!(x <= y, "{}: {:?} vs {:?}", gen.label(), e.indices, a.indices);
            }
        }
    }

    // Independent reference: repeated closure without class structure,
    // computing G(F(A)) by brute force over every class.
    fn reference_level_sets(t: &Tower, f: &FiberEnumeration, i: usize) -> Vec<Vec<u32>> {
        let g = t.group(i);
        let n = g.order() as Elem;
        let m = f.m(i) as u32;
        let mut a: Vec<Elem> = f.class(i, 1);
        let mut out = Vec::new();
        for _ in 0..=i {
            let b: Vec<u32> =
                (1..=m).filter(|&k| f.class(i, k).iter().all(|x| a.contains(x))).collect();
            out.push(b);
            let mut fa = Vec::new();
            for &x in &a {
                for &y in &a {
                    fa.push(g.op(x, y));
                    fa.push(g.inverse(g.op(x, y)));
                }
            }
            a = (0..n).filter(|&z| fa.iter().any(|&w| f.psi(i, w) == f.psi(i, z))).collect();
        }
        out
    }

    #[test]
    fn matches_reference_on_small_towers() {
        for spec in ["cyclic:2:0,1,2,3", "cyclic:3:0,1,2", "product:2:3", "cyclic:2:0,2,3,5"] {
            let (t, f) = tower(spec);
            for i in 0..=t.depth() {
                let s = build_level_sets(&t, &f, i, i);
                let want = reference_level_sets(&t, &f, i);
                for j in 0..=i {
                    assert_eq!(s.b(j).unwrap(), want[j], "{spec} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn run_sums_agree_with_pairs() {
        let g = FiniteGroup::cyclic(12);
        let psi: Vec<u32> = (0..12).map(|x| x + 1).collect();
        for mask in 0u32..(1 << 12) {
            let mut a = FixedBitSet::with_capacity(12);
            for x in 0..12 {
                a.set(x, mask >> x & 1 == 1);
            }
            let (fast, _) = cyclic_classes_of_f(12, &psi, 12, &a, None);
            let slow: Vec<usize> = op_f(&g, &a).ones().map(|x| x + 1).collect();
            assert_eq!(fast.ones().collect::<Vec<_>>(), slow, "mask {mask:b}");
        }
    }

    #[test]
    fn cyclic_sizes_match_enumeration() {
        for (base, exps) in [(2u32, vec![0, 1, 3, 6, 9]), (3, vec![0, 1, 2, 4, 6]), (6, vec![0, 1, 2, 3]), (5, vec![0, 2, 3, 5])] {
            let gen = CyclicGenerator { base };
            let t = Tower::from_generator(&gen, &exps).unwrap();
            let f = enumerate_fibers(&t);
            for i in 1..=t.depth() {
                let sets = build_level_sets(&t, &f, i, i);
                let want: Vec<BigUint> = (0..=i).map(|j| BigUint::from(sets.b_len(j).unwrap())).collect();
                let p = BigUint::from(t.order(i - 1));
                let m = BigUint::from(t.m(i));
                assert_eq!(cyclic_b_sizes(&p, &m, i), want, "base {base} exps {exps:?} level {i}");
            }
        }
    }

    #[test]
    fn apriori_cyclic_matches_enumerated_run() {
        let cap = BigUint::from(DEFAULT_MAX_ORDER);
        for base in [2u32, 3] {
            let gen = CyclicGenerator { base };
            let (_, r) = thin_tower(&gen, 2, ThinMode::Apriori, &cap).unwrap();
            assert_eq!(thin_apriori_cyclic(&gen, 2), r);
        }
    }

    #[test]
    fn apriori_cyclic_depth_four() {
        let r = thin_apriori_cyclic(&CyclicGenerator { base: 2 }, 4);
        assert!(r.all_hold());
        let sizes: Vec<u32> = r.levels.iter().map(|l| l.b_size.to_u32().unwrap()).collect();
        assert_eq!(sizes, vec![1, 7, 20, 41]);
        assert_eq!(r.indices, vec![0, 1, 13, 219, 7027]);
        for l in &r.levels {
            assert!(l.m >= l.required_ratio);
        }
    }

    proptest! {
        #[test]
        fn cyclic_sizes_random_towers(base in 2u32..6, steps in proptest::collection::vec(1usize..4, 1..4)) {
            let mut exps = vec![0usize];
            for s in steps {
                exps.push(exps.last().unwrap() + s);
            }
            let gen = CyclicGenerator { base };
            prop_assume!(gen.order(*exps.last().unwrap()).unwrap() <= BigUint::from(4096u32));
            let t = Tower::from_generator(&gen, &exps).unwrap();
            let f = enumerate_fibers(&t);
            for i in 1..=t.depth() {
                let sets = build_level_sets(&t, &f, i, i);
                let got = cyclic_b_sizes(&BigUint::from(t.order(i - 1)), &BigUint::from(t.m(i)), i);
                for (j, g) in got.iter().enumerate() {
                    prop_assert_eq!(g, &BigUint::from(sets.b_len(j).unwrap()));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn growth_bound_holds(bits in proptest::collection::vec(any::<bool>(), 16), depth in 1usize..=4) {
            let (t, f) = tower("cyclic:2:0,1,2,3,4");
            let i = depth;
            let n = t.order(i);
            let h: FixedBitSet = {
                let mut s = FixedBitSet::with_capacity(n);
                for (x, &b) in bits.iter().take(n).enumerate() {
                    s.set(x, b);
                }
                s
            };
            let hn = h.count_ones(..);
            let fh = op_f(t.group(i), &h);
            prop_assert!(fh.count_ones(..) <= 2 * hn * hn);
            let gfh = op_g(&f, i, &fh);
            prop_assert!(gfh.count_ones(..) <= 2 * hn * hn * t.order(i - 1));
            prop_assert!(h.is_subset(&op_g(&f, i, &h)));
        }

        #[test]
        fn bound_monotone(c in 1u32..6, d in 0u32..4, j in 0usize..3, k in 0usize..2) {
            let c1 = BigUint::from(c);
            let c2 = BigUint::from(c + d);
            prop_assert!(apriori_bound(&c1, j) <= apriori_bound(&c2, j + k));
        }

        #[test]
        fn identity_in_every_level(p in 2u32..4, e in 1usize..4) {
            let exps: Vec<String> = (0..=e).map(|x| x.to_string()).collect();
            let (t, f) = tower(&format!("cyclic:{p}:{}", exps.join(",")));
            for i in 0..=t.depth() {
                let s = build_level_sets(&t, &f, i, i + 1);
                for j in 0..=i + 1 {
                    prop_assert!(s.a(j).unwrap().contains(t.group(i).identity() as usize));
                    prop_assert!(s.b_contains(j, 1).unwrap());
                }
            }
        }
    }
}
