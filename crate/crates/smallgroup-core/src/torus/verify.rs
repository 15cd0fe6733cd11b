//! Independent check of the six cube-family conditions at every level.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::cubes::{inverse_escape, product_escape, DyadicCubeSet};
use super::CubeFamilySet;

pub const CONDITIONS: [&str; 6] = ["Dmon", "De", "suru", "szorzas", "inv", "mmertek"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionCheck {
    pub level: usize,
    pub condition: &'static str,
    /// The `j` of `D^i_j`, or the chart `r` for the measure bound.
    pub index: Option<usize>,
    pub passed: bool,
    pub witness: Option<String>,
    /// Measure and bound for the measure condition.
    pub values: Option<(BigRational, BigRational)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeFamilyReport {
    pub checks: Vec<ConditionCheck>,
}

impl CubeFamilyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(level: usize, condition: &'static str, index: Option<usize>, witness: Option<String>) -> ConditionCheck {
    ConditionCheck { level, condition, index, passed: witness.is_none(), witness, values: None }
}

fn first_missing_parent(d0: &DyadicCubeSet, coarse: u32) -> Option<Vec<u64>> {
    let parents: BTreeSet<Vec<u64>> =
        d0.cubes().map(|c| DyadicCubeSet::ancestor(c, d0.resolution(), coarse)).collect();
    let side = 1u64 << coarse;
    let total = side.pow(d0.dim() as u32);
    (0..total)
        .map(|mut n| {
            let mut c = vec![0u64; d0.dim()];
            for a in (0..d0.dim()).rev() {
                c[a] = n % side;
                n /= side;
            }
            c
        })
        .find(|c| !parents.contains(c))
}

/// Checks monotonicity, the identity, density at the previous resolution, closure
/// under products and inverses, and the measure bound, for every level `i ≥ 1`.
/// Families `D^i_j` with `j > i` are the whole cube, so those instances hold trivially.
pub fn verify_cube_families(set: &CubeFamilySet) -> CubeFamilyReport {
    let atlas = &set.atlas;
    let x0 = atlas.identity_point();
    let mut checks = Vec::new();
    for i in 1..=set.depth() {
        let lvl = set.level(i);
        let d = &lvl.families;
        let active = atlas.active(i);
        for j in 0..i {
            let w = d[j].first_outside(&d[j + 1]).map(|c| format!("cube {c:?} of D_{j} not in D_{}", j + 1));
            checks.push(check(i, "Dmon", Some(j), w));
        }
        let w = (!d[0].contains_point(&x0)).then(|| format!("x0 = {} not covered", super::show_point(&x0)));
        checks.push(check(i, "De", Some(0), w));
        let coarse = set.level(i - 1).m;
        let w = first_missing_parent(&d[0], coarse).map(|c| format!("cube {c:?} at resolution {coarse} holds no cube of D_0"));
        checks.push(check(i, "suru", Some(0), w));
        for j in 0..i {
            checks.push(check(i, "szorzas", Some(j), product_escape(atlas, active.clone(), &d[j], &d[j + 1])));
            checks.push(check(i, "inv", Some(j), inverse_escape(atlas, active.clone(), &d[j], &d[j + 1])));
        }
        let bound = BigRational::new(BigInt::one(), BigInt::from(i * i));
        for r in active.clone() {
            let measure = d[i].volume() * atlas.chart(r).volume();
            let passed = measure <= bound;
            let witness = (!passed).then(|| format!("measure {measure} exceeds {bound} in chart {r}"));
            checks.push(ConditionCheck {
                level: i,
                condition: "mmertek",
                index: Some(r),
                passed,
                witness,
                values: Some((measure, bound.clone())),
            });
        }
    }
    CubeFamilyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::super::{build_cube_families, BuildOptions, ChartAtlas};
    use super::*;

    #[test]
    fn built_families_pass() {
        let set = build_cube_families(&ChartAtlas::two_arcs(), 2, BuildOptions::default()).unwrap();
        let report = verify_cube_families(&set);
        assert!(report.all_passed());
        let names: BTreeSet<&str> = report.checks.iter().map(|c| c.condition).collect();
        assert_eq!(names, CONDITIONS.into_iter().collect());
    }

    #[test]
    fn damaged_families_fail() {
        let mut set = build_cube_families(&ChartAtlas::two_arcs(), 2, BuildOptions::default()).unwrap();
        let lvl = &mut set.levels[2];
        let m = lvl.m;
        lvl.families[1] = DyadicCubeSet::from_cubes(1, m, lvl.families[0].cubes().cloned());
        let report = verify_cube_families(&set);
        let failed: BTreeSet<&str> = report.failures().iter().map(|c| c.condition).collect();
        assert!(failed.contains("szorzas"), "{failed:?}");

        let mut set = build_cube_families(&ChartAtlas::two_arcs(), 2, BuildOptions::default()).unwrap();
        set.levels[2].families = vec![DyadicCubeSet::full(1).refine(set.levels[2].m); 3];
        let report = verify_cube_families(&set);
        let failed: Vec<&str> = report.failures().iter().map(|c| c.condition).collect();
        assert_eq!(failed, vec!["mmertek", "mmertek"]);

        let mut set = build_cube_families(&ChartAtlas::two_arcs(), 1, BuildOptions::default()).unwrap();
        set.levels[1].families[0] = DyadicCubeSet::new(1, set.levels[1].m);
        let report = verify_cube_families(&set);
        let failed: BTreeSet<&str> = report.failures().iter().map(|c| c.condition).collect();
        assert!(failed.contains("De") && failed.contains("suru"));
    }
}
