//! Box charts on the torus `T^d = [0,1)^d` with affine maps onto `[0,1]^d`.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{frac, parse_rational, q, Point, TorusError};

/// The box `corner + [0, size]` (taken mod 1) with `φ(x) = frac(x - corner) / size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    pub corner: Vec<BigRational>,
    pub size: Vec<BigRational>,
}

impl Chart {
    pub fn volume(&self) -> BigRational {
        self.size.iter().fold(BigRational::one(), |acc, w| acc * w)
    }

    /// `φ(x)` when `x` lies in the closed box.
    pub fn phi(&self, x: &[BigRational]) -> Option<Point> {
        x.iter()
            .zip(self.corner.iter().zip(&self.size))
            .map(|(xa, (c, w))| {
                let u = frac(&(xa - c));
                (u <= *w).then(|| u / w)
            })
            .collect()
    }

    /// `φ^{-1}(y)` for `y ∈ [0,1]^d`.
    pub fn phi_inv(&self, y: &[BigRational]) -> Point {
        y.iter()
            .zip(self.corner.iter().zip(&self.size))
            .map(|(ya, (c, w))| frac(&(c + w * ya)))
            .collect()
    }

    /// Whether `x` lies in the open box.
    pub fn interior_contains(&self, x: &[BigRational]) -> bool {
        x.iter().zip(self.corner.iter().zip(&self.size)).all(|(xa, (c, w))| {
            let u = frac(&(xa - c));
            u.is_positive() && u < *w
        })
    }
}

/// Finitely many charts whose open boxes cover the torus, with `0` inside chart 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartAtlas {
    dim: usize,
    charts: Vec<Chart>,
}

impl ChartAtlas {
    pub fn new(dim: usize, charts: Vec<Chart>) -> Result<Self, TorusError> {
        let bad = |msg: String| Err(TorusError::AtlasInvalid(msg));
        if dim == 0 || charts.is_empty() {
            return bad("an atlas needs a positive dimension and at least one chart".into());
        }
        for (t, ch) in charts.iter().enumerate() {
            if ch.corner.len() != dim || ch.size.len() != dim {
                return bad(format!("chart {t} has the wrong dimension"));
            }
            if ch.size.iter().any(|w| !w.is_positive() || *w >= BigRational::one()) {
                return bad(format!("chart {t} has an edge length outside (0,1)"));
            }
        }
        let atlas = ChartAtlas { dim, charts };
        let origin = vec![BigRational::zero(); dim];
        if !atlas.charts[0].interior_contains(&origin) {
            return bad("the identity is not interior to chart 0".into());
        }
        if let Some(p) = atlas.uncovered_point() {
            return bad(format!("point {} lies in no open chart", super::show_point(&p)));
        }
        Ok(atlas)
    }

    /// Each axis split at every chart endpoint; one test point per open gap and per endpoint.
    fn uncovered_point(&self) -> Option<Point> {
        let axes: Vec<Vec<BigRational>> = (0..self.dim)
            .map(|a| {
                let mut cuts: Vec<BigRational> = self
                    .charts
                    .iter()
                    .flat_map(|ch| [frac(&ch.corner[a]), frac(&(&ch.corner[a] + &ch.size[a]))])
                    .collect();
                cuts.push(BigRational::zero());
                cuts.sort();
                cuts.dedup();
                let mut pts = cuts.clone();
                for w in cuts.windows(2) {
                    pts.push((&w[0] + &w[1]) / q(2, 1));
                }
                pts.push((cuts.last().unwrap() + BigRational::one()) / q(2, 1));
                pts
            })
            .collect();
        let mut idx = vec![0usize; self.dim];
        loop {
            let p: Point = idx.iter().enumerate().map(|(a, &i)| axes[a][i].clone()).collect();
            if !self.charts.iter().any(|ch| ch.interior_contains(&p)) {
                return Some(p);
            }
            let mut a = 0;
            loop {
                if a == self.dim {
                    return None;
                }
                idx[a] += 1;
                if idx[a] < axes[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    /// Two arcs of length 2/3 on the circle: `[2/3, 4/3]` and `[1/6, 5/6]`.
    pub fn two_arcs() -> Self {
        let arcs = [(q(2, 3), q(2, 3)), (q(1, 6), q(2, 3))];
        let charts = arcs
            .iter()
            .map(|(c, w)| Chart { corner: vec![c.clone()], size: vec![w.clone()] })
            .collect();
        ChartAtlas::new(1, charts).expect("builtin atlas is valid")
    }

    /// The `d`-fold product of the two-arc atlas; chart 0 is the product of arc 0.
    pub fn two_arcs_power(dim: usize) -> Self {
        let arcs = Self::two_arcs().charts;
        let mut charts = vec![Chart { corner: vec![], size: vec![] }];
        for _ in 0..dim {
            charts = charts
                .into_iter()
                .flat_map(|ch| {
                    arcs.iter().map(move |arc| Chart {
                        corner: [ch.corner.clone(), arc.corner.clone()].concat(),
                        size: [ch.size.clone(), arc.size.clone()].concat(),
                    })
                })
                .collect();
        }
        ChartAtlas::new(dim, charts).expect("product of valid atlases is valid")
    }

    /// Resolves `builtin:two-arcs` in the given dimension.
    pub fn builtin(name: &str, dim: usize) -> Result<Self, TorusError> {
        match name {
            "two-arcs" => Ok(Self::two_arcs_power(dim)),
            _ => Err(TorusError::AtlasInvalid(format!("unknown builtin atlas {name:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, t: usize) -> &Chart {
        &self.charts[t]
    }

    /// Charts `0..=min(i, n - 1)`.
    pub fn active(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        0..=i.min(self.charts.len() - 1)
    }

    /// `x_0 = φ_0(0)`.
    pub fn identity_point(&self) -> Point {
        self.charts[0].phi(&vec![BigRational::zero(); self.dim]).expect("identity lies in chart 0")
    }
}

/// JSON form of an atlas; rationals are strings such as `"2/3"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtlasSpec {
    pub dim: usize,
    pub charts: Vec<ChartSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub corner: Vec<String>,
    pub size: Vec<String>,
}

impl AtlasSpec {
    pub fn build(&self) -> Result<ChartAtlas, TorusError> {
        let parse = |v: &[String]| v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>();
        let charts = self
            .charts
            .iter()
            .map(|c| Ok(Chart { corner: parse(&c.corner)?, size: parse(&c.size)? }))
            .collect::<Result<Vec<_>, TorusError>>()?;
        ChartAtlas::new(self.dim, charts)
    }

    pub fn from_atlas(atlas: &ChartAtlas) -> Self {
        let show = |v: &[BigRational]| v.iter().map(|x| x.to_string()).collect();
        AtlasSpec {
            dim: atlas.dim,
            charts: atlas.charts.iter().map(|c| ChartSpec { corner: show(&c.corner), size: show(&c.size) }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_identity_point() {
        let a = ChartAtlas::two_arcs();
        assert_eq!(a.identity_point(), vec![q(1, 2)]);
        assert_eq!(ChartAtlas::two_arcs_power(2).charts().len(), 4);
    }

    #[test]
    fn half_circles_rejected() {
        let charts = vec![
            Chart { corner: vec![q(3, 4)], size: vec![q(1, 2)] },
            Chart { corner: vec![q(1, 4)], size: vec![q(1, 2)] },
        ];
        match ChartAtlas::new(1, charts) {
            Err(TorusError::AtlasInvalid(msg)) => assert!(msg.contains("1/4") || msg.contains("3/4"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_must_be_interior() {
        let charts = vec![
            Chart { corner: vec![q(0, 1)], size: vec![q(2, 3)] },
            Chart { corner: vec![q(1, 2)], size: vec![q(2, 3)] },
        ];
        assert!(matches!(ChartAtlas::new(1, charts), Err(TorusError::AtlasInvalid(_))));
    }

    #[test]
    fn chart_maps_round_trip() {
        let a = ChartAtlas::two_arcs_power(2);
        let y = vec![q(1, 4), q(7, 8)];
        for ch in a.charts() {
            assert_eq!(ch.phi(&ch.phi_inv(&y)).unwrap(), y);
        }
    }

    #[test]
    fn spec_round_trip() {
        let a = ChartAtlas::two_arcs();
        let spec = AtlasSpec::from_atlas(&a);
        assert_eq!(spec.charts[0].corner, vec!["2/3".to_string()]);
        assert_eq!(spec.build().unwrap(), a);
    }
}
