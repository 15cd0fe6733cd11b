//! Point sets `A_j, B_j` and the cube families `E_j` and `D^i_j` at each level.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::cubes::{cover, inverse_escape, product_escape, DyadicCubeSet};
use super::{frac, verify_cube_families, ChartAtlas, Point, TorusError};

pub const DEFAULT_MAX_RESOLUTION: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Largest exponent `n` allowed for cubes of edge `2^{-n}`.
    pub max_resolution: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_resolution: DEFAULT_MAX_RESOLUTION }
    }
}

/// Everything built at one level `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelFamilies {
    pub level: usize,
    /// `m_i`.
    pub m: u32,
    /// Chart-space point sets `A_0 ⊆ ... ⊆ A_i`.
    pub a_sets: Vec<BTreeSet<Point>>,
    /// Torus point sets `B_0 ⊆ ... ⊆ B_i`.
    pub b_sets: Vec<BTreeSet<Point>>,
    /// `E_j` at its own resolution `l_j`.
    pub native: Vec<DyadicCubeSet>,
    /// `D^i_j` for `j ≤ i`, all at resolution `m_i`; `D^i_j` is the whole cube for `j > i`.
    pub families: Vec<DyadicCubeSet>,
    /// Smallest resolution meeting the measure bound for `A_i`.
    pub measure_resolution: u32,
}

impl LevelFamilies {
    /// `l_0, ..., l_i`.
    pub fn resolutions(&self) -> Vec<u32> {
        self.native.iter().map(|e| e.resolution()).collect()
    }

    /// `D^i_j`, or `None` for the whole cube.
    pub fn family(&self, j: usize) -> Option<&DyadicCubeSet> {
        self.families.get(j)
    }
}

/// Cube families for levels `0..=I` over one atlas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeFamilySet {
    pub atlas: ChartAtlas,
    pub levels: Vec<LevelFamilies>,
}

impl CubeFamilySet {
    pub fn dim(&self) -> usize {
        self.atlas.dim()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `m_0, ..., m_I`.
    pub fn resolutions(&self) -> Vec<u32> {
        self.levels.iter().map(|l| l.m).collect()
    }

    pub fn level(&self, i: usize) -> &LevelFamilies {
        &self.levels[i]
    }
}

fn level_zero(dim: usize) -> LevelFamilies {
    LevelFamilies {
        level: 0,
        m: 0,
        a_sets: vec![],
        b_sets: vec![],
        native: vec![DyadicCubeSet::full(dim)],
        families: vec![DyadicCubeSet::full(dim)],
        measure_resolution: 0,
    }
}

/// `x_0 + 2^{-m} ℤ^d` inside `[0,1]^d`.
fn grid(x0: &[BigRational], m: u32) -> BTreeSet<Point> {
    let h = BigRational::new(BigInt::one(), BigInt::one() << m);
    let axes: Vec<Vec<BigRational>> = x0
        .iter()
        .map(|x| {
            let mut v = Vec::new();
            let mut y = x - (x / &h).floor() * &h;
            while y <= BigRational::one() {
                v.push(y.clone());
                y += &h;
            }
            v
        })
        .collect();
    let mut out: BTreeSet<Point> = BTreeSet::new();
    out.insert(vec![]);
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |y| {
                    let mut v = p.clone();
                    v.push(y.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// `(H ∪ H^{-1}) · (H ∪ H^{-1})` on the torus.
fn symmetric_square(h: &BTreeSet<Point>) -> BTreeSet<Point> {
    let mut sym: BTreeSet<Point> = h.clone();
    sym.extend(h.iter().map(|p| p.iter().map(|x| frac(&-x)).collect::<Point>()));
    let sym: Vec<Point> = sym.into_iter().collect();
    let mut out = BTreeSet::new();
    for x in &sym {
        for y in &sym {
            out.insert(x.iter().zip(y).map(|(a, b)| frac(&(a + b))).collect::<Point>());
        }
    }
    out
}

fn cap_error(level: usize, stage: usize, inclusion: &str) -> TorusError {
    TorusError::ResolutionCapExceeded { level, stage, inclusion: inclusion.to_string() }
}

fn build_level(atlas: &ChartAtlas, i: usize, m_prev: u32, cap: u32) -> Result<LevelFamilies, TorusError> {
    let dim = atlas.dim();
    let active = atlas.active(i);
    let mut a_sets = vec![grid(&atlas.identity_point(), m_prev)];
    let mut b_sets: Vec<BTreeSet<Point>> = Vec::new();
    for j in 0..=i {
        let b: BTreeSet<Point> = active
            .clone()
            .flat_map(|t| a_sets[j].iter().map(move |y| atlas.chart(t).phi_inv(y)))
            .collect();
        if j < i {
            let f = symmetric_square(&b);
            let next: BTreeSet<Point> =
                active.clone().flat_map(|t| f.iter().filter_map(move |x| atlas.chart(t).phi(x))).collect();
            a_sets.push(next);
        }
        b_sets.push(b);
    }

    let bound = BigRational::new(BigInt::one(), BigInt::from(i * i));
    let vol = active.clone().map(|r| atlas.chart(r).volume()).max().expect("an active chart");
    let measure_resolution = (0..=cap)
        .find(|&k| cover(dim, &a_sets[i], k).volume() * &vol <= bound)
        .ok_or_else(|| cap_error(i, i, "measure"))?;
    let top = (m_prev + 1).max(measure_resolution);
    if top > cap {
        return Err(cap_error(i, i, "measure"));
    }

    let mut native = vec![cover(dim, &a_sets[i], top)];
    for j in (0..i).rev() {
        let dst = native.last().expect("E_{j+1} built").clone();
        let mut last = "monotone";
        let mut found = None;
        for p in dst.resolution()..=cap {
            let e = cover(dim, &a_sets[j], p);
            if e.first_outside(&dst).is_some() {
                last = "monotone";
            } else if product_escape(atlas, active.clone(), &e, &dst).is_some() {
                last = "product";
            } else if inverse_escape(atlas, active.clone(), &e, &dst).is_some() {
                last = "inverse";
            } else {
                found = Some(e);
                break;
            }
        }
        native.push(found.ok_or_else(|| cap_error(i, j, last))?);
    }
    native.reverse();
    let m = native[0].resolution();
    let families = native.iter().map(|e| e.refine(m)).collect();
    Ok(LevelFamilies { level: i, m, a_sets, b_sets, native, families, measure_resolution })
}

/// Builds levels `0..=depth` and checks every condition on the result.
pub fn build_cube_families(atlas: &ChartAtlas, depth: usize, opts: BuildOptions) -> Result<CubeFamilySet, TorusError> {
    let mut levels = vec![level_zero(atlas.dim())];
    for i in 1..=depth {
        let prev = levels[i - 1].m;
        levels.push(build_level(atlas, i, prev, opts.max_resolution)?);
    }
    let set = CubeFamilySet { atlas: atlas.clone(), levels };
    let report = verify_cube_families(&set);
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(TorusError::VerificationFailed(format!("{} at level {}", bad.condition, bad.level)));
    }
    Ok(set)
}
