//! Coordinates `ψ` on `∏ {1..m_i}`, cylinders with exact measure, and the
//! group operation transported to coordinate words.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::group::{Elem, FiberEnumeration, Tower};

/// A coordinate word `(k_0, ..., k_L)` with `1 ≤ k_i ≤ m_i`.
pub type CoordinateWord = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CoordError {
    #[error("word of length {len} does not fit a tower of depth {depth}")]
    Length { len: usize, depth: usize },
    #[error("element word breaks the bonding relation at level {0}")]
    IncompatibleWord(usize),
    #[error("coordinate {value} at level {level} is outside 1..={m}")]
    InvalidCoordinate { level: usize, value: u32, m: usize },
    #[error("words have different lengths {0} and {1}")]
    LengthMismatch(usize, usize),
}

fn check_len(tower: &Tower, len: usize) -> Result<(), CoordError> {
    if len == 0 || len > tower.depth() + 1 {
        Err(CoordError::Length { len, depth: tower.depth() })
    } else {
        Ok(())
    }
}

/// `ψ` applied to a compatible element word `(g_0, ..., g_L)`.
pub fn psi_encode(tower: &Tower, fibers: &FiberEnumeration, word: &[Elem]) -> Result<CoordinateWord, CoordError> {
    check_len(tower, word.len())?;
    if let Some(i) = tower.incompatibility(word) {
        return Err(CoordError::IncompatibleWord(i));
    }
    Ok(word.iter().enumerate().map(|(i, &g)| fibers.psi(i, g)).collect())
}

/// Inverse of [`psi_encode`].
pub fn psi_decode(tower: &Tower, fibers: &FiberEnumeration, coords: &[u32]) -> Result<Vec<Elem>, CoordError> {
    check_len(tower, coords.len())?;
    let mut out = Vec::with_capacity(coords.len());
    for (i, &k) in coords.iter().enumerate() {
        let m = tower.m(i);
        if k == 0 || k as usize > m {
            return Err(CoordError::InvalidCoordinate { level: i, value: k, m });
        }
        let g = if i == 0 { 0 } else { fibers.member(i, out[i - 1], k) };
        out.push(g);
    }
    Ok(out)
}

/// The element word of `g ∈ G_L` through all lower levels.
pub fn element_word(tower: &Tower, level: usize, g: Elem) -> Vec<Elem> {
    let mut word = vec![0; level + 1];
    word[level] = g;
    for i in (1..=level).rev() {
        word[i - 1] = tower.bond(i).apply(word[i]);
    }
    word
}

/// The set of words extending a prefix, with its measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub prefix: CoordinateWord,
    pub measure: BigRational,
}

impl Cylinder {
    pub fn new(tower: &Tower, prefix: CoordinateWord) -> Result<Cylinder, CoordError> {
        let measure = cylinder_measure(tower, &prefix)?;
        Ok(Cylinder { prefix, measure })
    }
}

/// `∏_{i ≤ L} 1/m_i` for a prefix of length `L + 1`.
pub fn cylinder_measure(tower: &Tower, prefix: &[u32]) -> Result<BigRational, CoordError> {
    check_len(tower, prefix.len())?;
    let mut den = BigInt::one();
    for (i, &k) in prefix.iter().enumerate() {
        let m = tower.m(i);
        if k == 0 || k as usize > m {
            return Err(CoordError::InvalidCoordinate { level: i, value: k, m });
        }
        den *= m;
    }
    Ok(BigRational::new(BigInt::one(), den))
}

/// The product measure on `∏ {1..m_i}` restricted to finite unions of cylinders.
#[derive(Clone, Copy, Debug)]
pub struct ProductMeasure<'a> {
    tower: &'a Tower,
}

impl<'a> ProductMeasure<'a> {
    pub fn new(tower: &'a Tower) -> Self {
        ProductMeasure { tower }
    }

    /// Measure of the union of the given cylinders, overlaps counted once.
    pub fn union(&self, prefixes: &[CoordinateWord]) -> Result<BigRational, CoordError> {
        let mut sorted: Vec<&CoordinateWord> = prefixes.iter().collect();
        sorted.sort();
        sorted.dedup();
        let mut total = BigRational::zero();
        let mut last: Option<&CoordinateWord> = None;
        for p in sorted {
            if last.is_some_and(|q| p.starts_with(q)) {
                continue;
            }
            total += cylinder_measure(self.tower, p)?;
            last = Some(p);
        }
        Ok(total)
    }

    /// All cylinders of depth `L`.
    pub fn partition(&self, level: usize) -> Vec<CoordinateWord> {
        let mut words = vec![vec![1u32]];
        for i in 1..=level {
            let m = self.tower.m(i) as u32;
            words = words
                .into_iter()
                .flat_map(|w| {
                    (1..=m).map(move |k| {
                        let mut v = w.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        words
    }
}

/// Haar mass of the coset cylinder `φ_L^{-1}(g)` computed by counting at the top level.
pub fn coset_mass(tower: &Tower, level: usize, g: Elem) -> BigRational {
    let top = tower.depth();
    let n = tower.order(top);
    let hits = (0..n as Elem).filter(|&y| tower.project(top, level, y) == g).count();
    BigRational::new(BigInt::from(hits), BigInt::from(n))
}

/// Whether `|φ_{i,j}^{-1}(X)| / |G_j| = |X| / |G_i|`.
pub fn pushforward_check(tower: &Tower, i: usize, j: usize, x: &[bool]) -> bool {
    assert!(i <= j && x.len() == tower.order(i));
    let hits = (0..tower.order(j) as Elem)
        .filter(|&y| x[tower.project(j, i, y) as usize])
        .count();
    let size = x.iter().filter(|&&b| b).count();
    BigRational::new(BigInt::from(hits), BigInt::from(tower.order(j)))
        == BigRational::new(BigInt::from(size), BigInt::from(tower.order(i)))
}

/// Levelwise product of two coordinate words.
pub fn coord_multiply(
    tower: &Tower,
    fibers: &FiberEnumeration,
    w1: &[u32],
    w2: &[u32],
) -> Result<CoordinateWord, CoordError> {
    if w1.len() != w2.len() {
        return Err(CoordError::LengthMismatch(w1.len(), w2.len()));
    }
    let a = psi_decode(tower, fibers, w1)?;
    let b = psi_decode(tower, fibers, w2)?;
    let prod: Vec<Elem> = a.iter().zip(&b).enumerate().map(|(i, (&x, &y))| tower.group(i).op(x, y)).collect();
    psi_encode(tower, fibers, &prod)
}

/// Levelwise inverse of a coordinate word.
pub fn coord_inverse(tower: &Tower, fibers: &FiberEnumeration, w: &[u32]) -> Result<CoordinateWord, CoordError> {
    let a = psi_decode(tower, fibers, w)?;
    let inv: Vec<Elem> = a.iter().enumerate().map(|(i, &x)| tower.group(i).inverse(x)).collect();
    psi_encode(tower, fibers, &inv)
}

/// The all-ones word of length `len`.
pub fn identity_word(len: usize) -> CoordinateWord {
    vec![1; len]
}
