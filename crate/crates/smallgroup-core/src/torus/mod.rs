//! Dyadic cube families on the torus `T^d` built from a finite box atlas, with
//! exact rational arithmetic throughout.

mod atlas;
mod construct;
mod cubes;
mod space;
mod verify;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

pub use atlas::{AtlasSpec, Chart, ChartAtlas, ChartSpec};
pub use construct::{build_cube_families, BuildOptions, CubeFamilySet, LevelFamilies, DEFAULT_MAX_RESOLUTION};
pub use cubes::{box_escape, cover, intervals_in_chart, DyadicCubeSet};
pub use space::{cube_game_space, level_volume, torus_demo, CubeGameSpace, TilingCheck, TorusDemo};
pub use verify::{verify_cube_families, ConditionCheck, CubeFamilyReport, CONDITIONS};

/// A point of `T^d` or of `[0,1]^d`.
pub type Point = Vec<BigRational>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TorusError {
    #[error("invalid atlas: {0}")]
    AtlasInvalid(String),
    #[error("no resolution up to the cap satisfies {inclusion} at level {level}, stage {stage}")]
    ResolutionCapExceeded { level: usize, stage: usize, inclusion: String },
    #[error("resolutions must strictly increase from 0")]
    NonIncreasingResolutions,
    #[error("constructed family fails {0}")]
    VerificationFailed(String),
    #[error("malformed rational {0:?}")]
    Rational(String),
}

pub(crate) fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `x - ⌊x⌋`.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<BigRational, TorusError> {
    let bad = || TorusError::Rational(s.to_string());
    let (n, d) = match s.trim().split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

pub(crate) fn show_point(p: &[BigRational]) -> String {
    let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse() {
        assert_eq!(parse_rational("2/3").unwrap(), q(2, 3));
        assert_eq!(parse_rational(" 4 / 6").unwrap(), q(2, 3));
        assert_eq!(parse_rational("-1").unwrap(), q(-1, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn frac_wraps() {
        assert_eq!(frac(&q(-1, 3)), q(2, 3));
        assert_eq!(frac(&q(7, 4)), q(3, 4));
        assert_eq!(frac(&q(1, 1)), q(0, 1));
    }
}
