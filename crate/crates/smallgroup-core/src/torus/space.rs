//! The game space whose words label nested dyadic cubes, and the parity
//! demonstration carried over to cube families.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::cubes::DyadicCubeSet;
use super::{CubeFamilySet, TorusError};
use crate::game::{DenseOpenSet, GameSolution, ProductSpace};
use crate::skeleton::{Parity, UltrafilterSurrogate};

/// `∏ {1..M_i}` with `M_0 = 1` and `M_{i+1} = 2^{(m_{i+1} - m_i) d}`; a word of
/// length `i + 1` names a cube of `𝔠^{m_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeGameSpace {
    pub dim: usize,
    pub resolutions: Vec<u32>,
    pub space: ProductSpace,
}

/// Exhaustive tiling check at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingCheck {
    pub level: usize,
    /// Every cube of `𝔠^{m_i}` is named by exactly one word.
    pub bijective: bool,
    /// The children of every cube lie inside it and have the same total volume.
    pub children_tile: bool,
    pub total_volume: BigRational,
}

pub fn cube_game_space(dim: usize, resolutions: &[u32]) -> Result<CubeGameSpace, TorusError> {
    if resolutions.first() != Some(&0) || resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TorusError::NonIncreasingResolutions);
    }
    let mut branching = vec![1u32];
    for w in resolutions.windows(2) {
        let bits = (w[1] - w[0]) as usize * dim;
        if bits >= 32 {
            return Err(TorusError::AtlasInvalid(format!("alphabet 2^{bits} is too large")));
        }
        branching.push(1 << bits);
    }
    let space = ProductSpace::new(branching).map_err(|e| TorusError::AtlasInvalid(e.to_string()))?;
    Ok(CubeGameSpace { dim, resolutions: resolutions.to_vec(), space })
}

impl CubeGameSpace {
    fn step(&self, i: usize) -> u32 {
        self.resolutions[i] - self.resolutions[i - 1]
    }

    /// Extends a cube of `𝔠^{m_{i-1}}` by label `k`; axis 0 carries the highest digits of `k - 1`.
    pub fn child(&self, i: usize, parent: &[u64], k: u32) -> Vec<u64> {
        let delta = self.step(i);
        let mask = (1u64 << delta) - 1;
        let q = (k - 1) as u64;
        (0..self.dim)
            .map(|a| {
                let off = (q >> (delta as usize * (self.dim - 1 - a))) & mask;
                (parent[a] << delta) + off
            })
            .collect()
    }

    /// The cube of `𝔠^{m_{len-1}}` named by a word.
    pub fn cube(&self, word: &[u32]) -> Vec<u64> {
        assert!(!word.is_empty() && word[0] == 1);
        let mut c = vec![0u64; self.dim];
        for (i, &k) in word.iter().enumerate().skip(1) {
            c = self.child(i, &c, k);
        }
        c
    }

    /// The word naming a cube of `𝔠^{m_level}`.
    pub fn word(&self, level: usize, cube: &[u64]) -> Vec<u32> {
        let mut w = vec![1u32; level + 1];
        let mut shift = 0u32;
        for i in (1..=level).rev() {
            let delta = self.step(i);
            let mask = (1u64 << delta) - 1;
            let mut q = 0u64;
            for &x in cube {
                q = (q << delta) | ((x >> shift) & mask);
            }
            w[i] = q as u32 + 1;
            shift += delta;
        }
        w
    }

    pub fn check_tiling(&self, level: usize) -> TilingCheck {
        let m = self.resolutions[level];
        let n = self.space.count(level + 1);
        let cubes: BTreeSet<Vec<u64>> = (0..n).map(|p| self.cube(&self.space.word(level + 1, p))).collect();
        let expected = 1usize << (m as usize * self.dim);
        let bijective = cubes.len() == n && n == expected;
        let cell = DyadicCubeSet::from_cubes(self.dim, m, cubes);
        let total_volume = cell.volume();
        let mut children_tile = true;
        if level + 1 < self.resolutions.len() {
            let fine = self.resolutions[level + 1];
            let unit = DyadicCubeSet::from_cubes(self.dim, m, [vec![0; self.dim]]).volume();
            for p in 0..n {
                let w = self.space.word(level + 1, p);
                let parent = self.cube(&w);
                let kids: Vec<Vec<u64>> =
                    (1..=self.space.branching()[level + 1]).map(|k| self.child(level + 1, &parent, k)).collect();
                let inside = kids.iter().all(|c| DyadicCubeSet::ancestor(c, fine, m) == parent);
                let vol = DyadicCubeSet::from_cubes(self.dim, fine, kids).volume();
                if !inside || vol != unit {
                    children_tile = false;
                    break;
                }
            }
        }
        TilingCheck { level, bijective, children_tile, total_volume }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusDemo {
    pub word: Vec<u32>,
    pub surrogate: UltrafilterSurrogate,
    /// Positions whose label was picked so that the cube lies in `D^i_0`.
    pub chosen: Vec<usize>,
    pub free_stages: Vec<usize>,
    pub in_sets: Vec<bool>,
}

/// Follows the reference word outside the surrogate index set, and elsewhere takes
/// the least label whose cube lies in `D^i_0`.
pub fn torus_demo(
    families: &CubeFamilySet,
    gs: &CubeGameSpace,
    sol: &GameSolution,
    sets: &[DenseOpenSet],
    parity: Parity,
) -> Result<TorusDemo, TorusError> {
    let fail = |msg: String| Err(TorusError::VerificationFailed(msg));
    if gs.resolutions != families.resolutions() {
        return fail("game space resolutions differ from the cube families".into());
    }
    let len = gs.space.len();
    let surrogate = UltrafilterSurrogate::new(parity, sol.breakpoints.clone());
    let u = surrogate.indices(len);
    let mut word = vec![1u32];
    let mut chosen = Vec::new();
    let mut cube = vec![0u64; gs.dim];
    for i in 1..len {
        let d0 = families.level(i).family(0).expect("D_0 exists");
        let label = if u.contains(&i) || i >= sol.reference.len() {
            chosen.push(i);
            match (1..=gs.space.branching()[i]).find(|&k| d0.contains(&gs.child(i, &cube, k))) {
                Some(k) => k,
                None => return fail(format!("no cube of D_0 below position {i}")),
            }
        } else {
            sol.reference[i]
        };
        cube = gs.child(i, &cube, label);
        word.push(label);
    }
    for &i in &chosen {
        let c = gs.cube(&word[..=i]);
        if !families.level(i).family(0).is_some_and(|d| d.contains(&c)) {
            return fail(format!("cube at position {i} is outside D_0"));
        }
    }
    let free_stages: Vec<usize> = (1..=sol.stages()).filter(|&k| !surrogate.selects_block(k - 1)).collect();
    for &k in &free_stages {
        if let Some(j) = (0..k.min(sets.len())).find(|&j| !sets[j].contains_cylinder(&gs.space, &word)) {
            return fail(format!("stage {k} set {}", j + 1));
        }
    }
    let in_sets = sets.iter().map(|s| s.contains_cylinder(&gs.space, &word)).collect();
    Ok(TorusDemo { word, surrogate, chosen, free_stages, in_sets })
}

/// Sum of the volumes of all cubes named at a level, which is `1` for a tiling.
pub fn level_volume(gs: &CubeGameSpace, level: usize) -> BigRational {
    let n = gs.space.count(level + 1);
    let unit = BigRational::new(BigInt::from(1), BigInt::from(1u64) << (gs.resolutions[level] as usize * gs.dim));
    (0..n).fold(BigRational::zero(), |acc, _| acc + &unit)
}

#[cfg(test)]
mod tests {
    use super::super::{build_cube_families, q, BuildOptions, ChartAtlas};
    use super::*;
    use crate::game::{random_sets, solve_game};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branching_from_resolutions() {
        let gs = cube_game_space(1, &[0, 1, 3]).unwrap();
        assert_eq!(gs.space.branching(), &[1, 2, 4]);
        assert_eq!(cube_game_space(2, &[0, 1, 2]).unwrap().space.branching(), &[1, 4, 4]);
        assert_eq!(cube_game_space(1, &[0, 2, 2]), Err(TorusError::NonIncreasingResolutions));
        assert_eq!(cube_game_space(1, &[1, 2]), Err(TorusError::NonIncreasingResolutions));
    }

    #[test]
    fn labels_round_trip_and_tile() {
        for (dim, res) in [(1, vec![0, 1, 3]), (2, vec![0, 1, 2, 4]), (3, vec![0, 1, 2])] {
            let gs = cube_game_space(dim, &res).unwrap();
            for level in 0..res.len() {
                let t = gs.check_tiling(level);
                assert!(t.bijective && t.children_tile, "{dim} {level}");
                assert_eq!(t.total_volume, q(1, 1));
                assert_eq!(level_volume(&gs, level), q(1, 1));
                for p in 0..gs.space.count(level + 1) {
                    let w = gs.space.word(level + 1, p);
                    assert_eq!(gs.word(level, &gs.cube(&w)), w);
                }
            }
        }
    }

    #[test]
    fn axis_zero_is_most_significant() {
        let gs = cube_game_space(2, &[0, 1]).unwrap();
        assert_eq!(gs.cube(&[1, 2]), vec![0, 1]);
        assert_eq!(gs.cube(&[1, 3]), vec![1, 0]);
    }

    #[test]
    fn demo_on_circle() {
        let fam = build_cube_families(&ChartAtlas::two_arcs(), 2, BuildOptions::default()).unwrap();
        let gs = cube_game_space(1, &fam.resolutions()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sets = crate::game::pad_for_demo(&random_sets(&mut rng, &gs.space, 1));
        let sol = solve_game(&gs.space, &sets).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let demo = torus_demo(&fam, &gs, &sol, &sets, parity).unwrap();
            assert!(!demo.free_stages.is_empty());
            assert!(demo.in_sets.iter().all(|&b| b), "{parity:?}");
        }
    }
}
