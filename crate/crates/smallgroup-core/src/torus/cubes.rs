//! Finite families of closed dyadic cubes in `[0,1]^d` and exact box containment.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{show_point, ChartAtlas};

/// Closed cubes `∏ [k_a 2^{-n}, (k_a + 1) 2^{-n}]` at one resolution `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicCubeSet {
    dim: usize,
    resolution: u32,
    cubes: BTreeSet<Vec<u64>>,
}

fn pow2(n: u32) -> BigRational {
    BigRational::from_integer(BigInt::one() << n)
}

impl DyadicCubeSet {
    pub fn new(dim: usize, resolution: u32) -> Self {
        DyadicCubeSet { dim, resolution, cubes: BTreeSet::new() }
    }

    /// The single cube `[0,1]^d`.
    pub fn full(dim: usize) -> Self {
        let mut s = Self::new(dim, 0);
        s.cubes.insert(vec![0; dim]);
        s
    }

    pub fn from_cubes(dim: usize, resolution: u32, cubes: impl IntoIterator<Item = Vec<u64>>) -> Self {
        let cubes: BTreeSet<Vec<u64>> = cubes.into_iter().collect();
        let side = 1u64 << resolution;
        assert!(cubes.iter().all(|c| c.len() == dim && c.iter().all(|&k| k < side)));
        DyadicCubeSet { dim, resolution, cubes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.cubes.iter()
    }

    pub fn contains(&self, cube: &[u64]) -> bool {
        self.cubes.contains(cube)
    }

    /// Whether some cube of the family contains the point.
    pub fn contains_point(&self, y: &[BigRational]) -> bool {
        cells_meeting_point(y, self.resolution).iter().any(|c| self.cubes.contains(c))
    }

    /// Lebesgue measure of the union.
    pub fn volume(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.cubes.len())) / pow2(self.resolution * self.dim as u32)
    }

    /// The same union written at a finer resolution.
    pub fn refine(&self, resolution: u32) -> Self {
        assert!(resolution >= self.resolution);
        let shift = resolution - self.resolution;
        let mut out = Self::new(self.dim, resolution);
        for c in &self.cubes {
            let mut idx = vec![0u64; self.dim];
            loop {
                out.cubes.insert(c.iter().zip(&idx).map(|(&k, &o)| (k << shift) + o).collect());
                let mut a = 0;
                loop {
                    if a == self.dim {
                        break;
                    }
                    idx[a] += 1;
                    if idx[a] < 1 << shift {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
                if a == self.dim {
                    break;
                }
            }
        }
        out
    }

    /// The ancestor of `cube` at a coarser resolution.
    pub fn ancestor(cube: &[u64], from: u32, to: u32) -> Vec<u64> {
        cube.iter().map(|&k| k >> (from - to)).collect()
    }

    /// A cube whose union is not inside `coarser`'s union, when `coarser` is at a
    /// resolution no finer than this one.
    pub fn first_outside(&self, coarser: &DyadicCubeSet) -> Option<Vec<u64>> {
        assert!(coarser.resolution <= self.resolution);
        self.cubes
            .iter()
            .find(|c| !coarser.contains(&Self::ancestor(c, self.resolution, coarser.resolution)))
            .cloned()
    }

    /// The closed cube as intervals.
    pub fn bounds(&self, cube: &[u64]) -> Vec<(BigRational, BigRational)> {
        let h = pow2(self.resolution);
        cube.iter()
            .map(|&k| (BigRational::from_integer(k.into()) / &h, BigRational::from_integer((k + 1).into()) / &h))
            .collect()
    }

    /// Maximal runs along the last axis, as `(first cube, run length)`.
    pub fn runs(&self) -> Vec<(Vec<u64>, u64)> {
        let mut out: Vec<(Vec<u64>, u64)> = Vec::new();
        for c in &self.cubes {
            if let Some((start, len)) = out.last_mut() {
                let d = self.dim - 1;
                if start[..d] == c[..d] && start[d] + *len == c[d] {
                    *len += 1;
                    continue;
                }
            }
            out.push((c.clone(), 1));
        }
        out
    }
}

fn floor_u64(x: &BigRational) -> i64 {
    x.floor().to_integer().to_i64().expect("cell index fits")
}

fn ceil_u64(x: &BigRational) -> i64 {
    x.ceil().to_integer().to_i64().expect("cell index fits")
}

/// Indices of the cells of `𝔠^k` that contain `y` in `[0,1]`.
fn axis_cells_at(y: &BigRational, k: u32) -> Vec<u64> {
    let n = 1i64 << k;
    let z = y * pow2(k);
    let f = floor_u64(&z);
    let raw = if z.is_integer() { vec![f - 1, f] } else { vec![f] };
    raw.into_iter().filter(|&c| (0..n).contains(&c)).map(|c| c as u64).collect()
}

fn product<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |x| {
                    let mut v = p.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Cubes of `𝔠^k` containing `y ∈ [0,1]^d`.
pub fn cells_meeting_point(y: &[BigRational], k: u32) -> Vec<Vec<u64>> {
    let axes: Vec<Vec<u64>> = y.iter().map(|ya| axis_cells_at(ya, k)).collect();
    product(&axes)
}

/// The minimal cover: every cube of `𝔠^k` meeting one of the points.
pub fn cover<'a>(dim: usize, points: impl IntoIterator<Item = &'a Vec<BigRational>>, k: u32) -> DyadicCubeSet {
    let mut out = DyadicCubeSet::new(dim, k);
    for p in points {
        out.cubes.extend(cells_meeting_point(p, k));
    }
    out
}

/// The parts of the arc `[lo, hi] mod 1` inside the chart arc `[c, c + w] mod 1`,
/// in chart coordinates.
pub fn intervals_in_chart(
    lo: &BigRational,
    hi: &BigRational,
    c: &BigRational,
    w: &BigRational,
) -> Vec<(BigRational, BigRational)> {
    if hi - lo >= BigRational::one() {
        return vec![(BigRational::zero(), BigRational::one())];
    }
    let a = lo - c;
    let b = hi - c;
    let start = floor_u64(&-&b) - 1;
    let end = floor_u64(&(w - &a)) + 1;
    let mut out = Vec::new();
    for n in start..=end {
        let n = BigRational::from_integer(n.into());
        let l = std::cmp::max(&a + &n, BigRational::zero());
        let r = std::cmp::min(&b + &n, w.clone());
        if l <= r {
            out.push((l / w, r / w));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// A cell of the box not covered by `set`, or `None` when the closed box lies in
/// the union. Axes of positive length must be covered by every cell they cross;
/// degenerate axes need one of the cells through the point.
fn box_uncovered(bx: &[(BigRational, BigRational)], set: &DyadicCubeSet) -> Option<Vec<u64>> {
    let k = set.resolution;
    let n = 1i64 << k;
    let scale = pow2(k);
    let mut forall: Vec<Vec<u64>> = Vec::with_capacity(bx.len());
    let mut exists: Vec<Vec<u64>> = Vec::with_capacity(bx.len());
    for (l, r) in bx {
        if l < r {
            let from = floor_u64(&(l * &scale)).max(0);
            let to = (ceil_u64(&(r * &scale)) - 1).min(n - 1);
            forall.push((from as u64..=to as u64).collect());
            exists.push(vec![]);
        } else {
            forall.push(vec![]);
            exists.push(axis_cells_at(l, k));
        }
    }
    let free: Vec<usize> = (0..bx.len()).filter(|&a| !forall[a].is_empty()).collect();
    let fixed: Vec<usize> = (0..bx.len()).filter(|&a| forall[a].is_empty()).collect();
    let free_axes: Vec<Vec<u64>> = free.iter().map(|&a| forall[a].clone()).collect();
    let fixed_axes: Vec<Vec<u64>> = fixed.iter().map(|&a| exists[a].clone()).collect();
    let options = product(&fixed_axes);
    for f in product(&free_axes) {
        let mut cell = vec![0u64; bx.len()];
        for (&a, &v) in free.iter().zip(&f) {
            cell[a] = v;
        }
        let hit = options.iter().any(|o| {
            for (&a, &v) in fixed.iter().zip(o) {
                cell[a] = v;
            }
            set.contains(&cell)
        });
        if !hit {
            if let Some(o) = options.first() {
                for (&a, &v) in fixed.iter().zip(o) {
                    cell[a] = v;
                }
            }
            return Some(cell);
        }
    }
    None
}

/// The first piece of a torus box, seen in chart `t`, that escapes `set`.
pub fn box_escape(
    atlas: &ChartAtlas,
    t: usize,
    lower: &[BigRational],
    width: &[BigRational],
    set: &DyadicCubeSet,
) -> Option<Vec<(BigRational, BigRational)>> {
    let ch = atlas.chart(t);
    let axes: Vec<Vec<(BigRational, BigRational)>> = (0..atlas.dim())
        .map(|a| intervals_in_chart(&lower[a], &(&lower[a] + &width[a]), &ch.corner[a], &ch.size[a]))
        .collect();
    if axes.iter().any(|v| v.is_empty()) {
        return None;
    }
    product(&axes).into_iter().find(|piece| box_uncovered(piece, set).is_some())
}

fn describe(kind: &str, charts: &[usize], piece: &[(BigRational, BigRational)]) -> String {
    let lo: Vec<BigRational> = piece.iter().map(|p| p.0.clone()).collect();
    let hi: Vec<BigRational> = piece.iter().map(|p| p.1.clone()).collect();
    format!("{kind} charts {charts:?} box {} to {}", show_point(&lo), show_point(&hi))
}

/// Torus boxes `φ_r^{-1}(run)` for each active chart and each run of `src`.
fn chart_boxes(atlas: &ChartAtlas, r: usize, src: &DyadicCubeSet) -> Vec<(Vec<BigRational>, Vec<BigRational>)> {
    let ch = atlas.chart(r);
    let h = pow2(src.resolution()).recip();
    let d = atlas.dim();
    src.runs()
        .into_iter()
        .map(|(start, len)| {
            let lower = (0..d)
                .map(|a| &ch.corner[a] + &ch.size[a] * BigRational::from_integer(start[a].into()) * &h)
                .collect();
            let width = (0..d)
                .map(|a| {
                    let l = if a + 1 == d { len } else { 1 };
                    &ch.size[a] * BigRational::from_integer(l.into()) * &h
                })
                .collect();
            (lower, width)
        })
        .collect()
}

/// Checks `φ_r^{-1}(∪src) · φ_s^{-1}(∪src) ∩ Q_t ⊆ φ_t^{-1}(∪dst)` for all active `r, s, t`.
pub(crate) fn product_escape(
    atlas: &ChartAtlas,
    active: RangeInclusive<usize>,
    src: &DyadicCubeSet,
    dst: &DyadicCubeSet,
) -> Option<String> {
    let boxes: Vec<_> = active.clone().map(|r| chart_boxes(atlas, r, src)).collect();
    let first = *active.start();
    for r in active.clone() {
        for s in active.clone() {
            let mut sums: BTreeSet<(Vec<BigRational>, Vec<BigRational>)> = BTreeSet::new();
            for (l1, w1) in &boxes[r - first] {
                for (l2, w2) in &boxes[s - first] {
                    let lower = l1.iter().zip(l2).map(|(x, y)| super::frac(&(x + y))).collect();
                    let width = w1.iter().zip(w2).map(|(x, y)| x + y).collect();
                    sums.insert((lower, width));
                }
            }
            for (lower, width) in &sums {
                for t in active.clone() {
                    if let Some(piece) = box_escape(atlas, t, lower, width, dst) {
                        return Some(describe("product", &[r, s, t], &piece));
                    }
                }
            }
        }
    }
    None
}

/// Checks `(φ_r^{-1}(∪src))^{-1} ∩ Q_t ⊆ φ_t^{-1}(∪dst)` for all active `r, t`.
pub(crate) fn inverse_escape(
    atlas: &ChartAtlas,
    active: RangeInclusive<usize>,
    src: &DyadicCubeSet,
    dst: &DyadicCubeSet,
) -> Option<String> {
    for r in active.clone() {
        for (lower, width) in chart_boxes(atlas, r, src) {
            let neg: Vec<BigRational> =
                lower.iter().zip(&width).map(|(l, w)| super::frac(&-(l + w))).collect();
            for t in active.clone() {
                if let Some(piece) = box_escape(atlas, t, &neg, &width, dst) {
                    return Some(describe("inverse", &[r, t], &piece));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::q;
    use super::*;

    #[test]
    fn minimal_cover_of_half() {
        let c = cover(1, [&vec![q(1, 2)]], 2);
        assert_eq!(c.cubes().cloned().collect::<Vec<_>>(), vec![vec![1], vec![2]]);
        assert_eq!(c.volume(), q(1, 2));
        let corner = cover(1, [&vec![q(0, 1)]], 3);
        assert_eq!(corner.len(), 1);
    }

    #[test]
    fn refine_and_runs() {
        let s = DyadicCubeSet::from_cubes(2, 1, [vec![0, 0], vec![0, 1], vec![1, 1]]);
        let r = s.refine(2);
        assert_eq!(r.len(), 12);
        assert_eq!(r.volume(), s.volume());
        assert_eq!(s.runs(), vec![(vec![0, 0], 2), (vec![1, 1], 1)]);
        assert!(r.first_outside(&s).is_none());
        assert_eq!(DyadicCubeSet::full(2).refine(1).first_outside(&s), Some(vec![1, 0]));
    }

    #[test]
    fn chart_intervals() {
        let (c, w) = (q(2, 3), q(2, 3));
        assert_eq!(intervals_in_chart(&q(0, 1), &q(1, 6), &c, &w), vec![(q(1, 2), q(3, 4))]);
        assert_eq!(intervals_in_chart(&q(1, 2), &q(7, 12), &c, &w), vec![]);
        let touching = intervals_in_chart(&q(1, 3), &q(2, 3), &c, &w);
        assert_eq!(touching, vec![(q(0, 1), q(0, 1)), (q(1, 1), q(1, 1))]);
        assert_eq!(intervals_in_chart(&q(-1, 2), &q(3, 4), &c, &w), vec![(q(0, 1), q(1, 1))]);
        let wrap = intervals_in_chart(&q(1, 4), &q(5, 4), &c, &w);
        assert_eq!(wrap, vec![(q(0, 1), q(1, 1))]);
        let split = intervals_in_chart(&q(1, 4), &q(3, 4), &q(1, 2), &q(9, 10));
        assert_eq!(split, vec![(q(0, 1), q(5, 18)), (q(5, 6), q(1, 1))]);
    }

    #[test]
    fn degenerate_axes_need_one_cell() {
        let set = DyadicCubeSet::from_cubes(2, 1, [vec![1, 0]]);
        let slab = [(q(1, 2), q(1, 2)), (q(0, 1), q(1, 2))];
        assert!(box_uncovered(&slab, &set).is_none());
        let full = [(q(1, 2), q(1, 1)), (q(0, 1), q(1, 2))];
        assert!(box_uncovered(&full, &set).is_none());
        let wide = [(q(1, 4), q(1, 1)), (q(0, 1), q(1, 2))];
        assert_eq!(box_uncovered(&wide, &set), Some(vec![0, 0]));
    }
}
