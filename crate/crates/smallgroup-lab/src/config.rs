//! Scenario configuration: one JSON object tagged by `kind`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use smallgroup_core::group::TowerSpec;
use smallgroup_core::levels::ThinMode;
use smallgroup_core::skeleton::{CombineKind, Parity};
use smallgroup_core::torus::AtlasSpec;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid scenario at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

impl ConfigError {
    fn from_json(e: serde_json::Error) -> Self {
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        if e.is_syntax() || e.is_eof() {
            ConfigError::Syntax { line, column, message }
        } else {
            ConfigError::Schema { line, column, message }
        }
    }
}

/// A tower given inline, as a short generator string, or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TowerInput {
    Short(String),
    Spec(TowerSpec),
}

impl TowerInput {
    /// Reads a file when the string names one, otherwise parses `cyclic:P:E0,..` or `product:Q:D`.
    pub fn resolve(&self) -> Result<TowerSpec, ConfigError> {
        match self {
            TowerInput::Spec(s) => Ok(s.clone()),
            TowerInput::Short(s) if Path::new(s).is_file() => {
                let text = read(s)?;
                serde_json::from_str(&text).map_err(ConfigError::from_json)
            }
            TowerInput::Short(s) => TowerSpec::parse_short(s).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }
}

/// An atlas given inline, as `builtin:NAME`, or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtlasInput {
    Named(String),
    Spec(AtlasSpec),
}

impl Default for AtlasInput {
    fn default() -> Self {
        AtlasInput::Named("builtin:two-arcs".into())
    }
}

impl AtlasInput {
    pub fn resolve(&self) -> Result<Option<AtlasSpec>, ConfigError> {
        match self {
            AtlasInput::Spec(s) => Ok(Some(s.clone())),
            AtlasInput::Named(s) if s.starts_with("builtin:") => Ok(None),
            AtlasInput::Named(s) => {
                let text = read(s)?;
                serde_json::from_str(&text).map(Some).map_err(ConfigError::from_json)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessInput {
    pub word: Vec<u32>,
    pub n: usize,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombineInput {
    pub kind: CombineKind,
    pub a: WitnessInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<WitnessInput>,
    /// Indices below this are dropped from the combined index set.
    #[serde(default)]
    pub threshold: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailInput {
    pub n: usize,
    pub i0: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn samples() -> usize {
    DEFAULT_SAMPLES
}

fn dim_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsetsParams {
    pub tower: TowerInput,
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jmax: Option<usize>,
    #[serde(default = "yes")]
    pub verify: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinParams {
    pub generator: String,
    pub depth: usize,
    pub mode: ThinMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordsParams {
    pub tower: TowerInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encode: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode: Option<Vec<u32>>,
    #[serde(default)]
    pub exhaustive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonParams {
    pub tower: TowerInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<WitnessInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combine: Option<CombineInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tailmeasure: Option<TailInput>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDemo {
    pub tower: TowerInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    pub space: Vec<u32>,
    /// Each set is a list of cylinder prefixes.
    pub dense: Vec<Vec<Vec<u32>>>,
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<GameDemo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoParams {
    pub tower: TowerInput,
    /// Explicit sets; random tail-window sets are drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<Vec<Vec<u32>>>>,
    #[serde(default = "one")]
    pub sets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusParams {
    #[serde(default = "dim_one")]
    pub dim: usize,
    #[serde(default)]
    pub atlas: AtlasInput,
    pub depth: usize,
    #[serde(default = "yes")]
    pub verify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_resolution: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfinitePipelineParams {
    pub generator: String,
    pub depth: usize,
    pub mode: ThinMode,
    #[serde(default = "two")]
    pub sets: usize,
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusPipelineParams {
    #[serde(default = "dim_one")]
    pub dim: usize,
    #[serde(default)]
    pub atlas: AtlasInput,
    pub depth: usize,
    #[serde(default = "one")]
    pub sets: usize,
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Levelsets(LevelsetsParams),
    Thin(ThinParams),
    Coords(CoordsParams),
    Skeleton(SkeletonParams),
    Game(GameParams),
    Demo(DemoParams),
    Torus(TorusParams),
    FullProfinitePipeline(ProfinitePipelineParams),
    FullTorusPipeline(TorusPipelineParams),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Levelsets(_) => "levelsets",
            Scenario::Thin(_) => "thin",
            Scenario::Coords(_) => "coords",
            Scenario::Skeleton(_) => "skeleton",
            Scenario::Game(_) => "game",
            Scenario::Demo(_) => "demo",
            Scenario::Torus(_) => "torus",
            Scenario::FullProfinitePipeline(_) => "full-profinite-pipeline",
            Scenario::FullTorusPipeline(_) => "full-torus-pipeline",
        }
    }

    /// The scenario's own seed, if it takes one.
    pub fn seed_mut(&mut self) -> Option<&mut Option<u64>> {
        match self {
            Scenario::Game(p) => Some(&mut p.seed),
            Scenario::Demo(p) => Some(&mut p.seed),
            Scenario::FullProfinitePipeline(p) => Some(&mut p.seed),
            Scenario::FullTorusPipeline(p) => Some(&mut p.seed),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Scenario::Game(p) => p.seed,
            Scenario::Demo(p) => p.seed,
            Scenario::FullProfinitePipeline(p) => p.seed,
            Scenario::FullTorusPipeline(p) => p.seed,
            _ => None,
        }
        .unwrap_or(DEFAULT_SEED)
    }

    /// Range checks that do not need any construction.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match self {
            Scenario::Thin(p) if p.depth == 0 => bad("depth must be at least 1"),
            Scenario::FullProfinitePipeline(p) if p.depth == 0 => bad("depth must be at least 1"),
            Scenario::Torus(TorusParams { dim: 0, .. }) | Scenario::FullTorusPipeline(TorusPipelineParams { dim: 0, .. }) => {
                bad("dim must be at least 1")
            }
            Scenario::Torus(TorusParams { depth: 0, .. }) | Scenario::FullTorusPipeline(TorusPipelineParams { depth: 0, .. }) => {
                bad("depth must be at least 1")
            }
            Scenario::Game(p) if p.space.is_empty() => bad("space must have at least one coordinate"),
            Scenario::Game(p) if p.space.contains(&0) => bad("alphabet sizes must be positive"),
            Scenario::Game(p) if p.dense.is_empty() => bad("at least one dense set is required"),
            Scenario::Skeleton(p) if p.check.is_none() && p.combine.is_none() && p.tailmeasure.is_none() => {
                bad("skeleton needs check, combine or tailmeasure")
            }
            Scenario::Skeleton(SkeletonParams { combine: Some(c), .. })
                if (c.kind == CombineKind::Product) != c.b.is_some() =>
            {
                bad("product takes two operands and inverse takes one")
            }
            Scenario::Coords(p) if p.encode.is_none() && p.decode.is_none() && !p.exhaustive => {
                bad("coords needs encode, decode or exhaustive")
            }
            _ => Ok(()),
        }
    }
}

fn read(path: &str) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_string(), source })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(ConfigError::from_json)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &str) -> Result<Scenario, ConfigError> {
    parse_scenario(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_examples() {
        let s = parse_scenario(r#"{"kind":"thin","generator":"cyclic:2","depth":2,"mode":"apriori"}"#).unwrap();
        assert_eq!(s.kind(), "thin");
        let g = parse_scenario(r#"{"kind":"game","space":[2,2],"dense":[[[1,1],[2,1]]]}"#).unwrap();
        match g {
            Scenario::Game(p) => assert_eq!(p.samples, DEFAULT_SAMPLES),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_scenario("{\n  \"kind\": \"thin\",\n  \"depth\": }") {
            Err(ConfigError::Syntax { line: 3, column, .. }) => assert!(column > 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_and_kinds_rejected() {
        assert!(matches!(
            parse_scenario(r#"{"kind":"thin","generator":"cyclic:2","depth":2,"mode":"apriori","extra":1}"#),
            Err(ConfigError::Schema { .. })
        ));
        assert!(matches!(parse_scenario(r#"{"kind":"nope"}"#), Err(ConfigError::Schema { .. })));
        assert!(matches!(
            parse_scenario(r#"{"kind":"thin","generator":"cyclic:2","depth":0,"mode":"exact"}"#),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{"kind":"full-torus-pipeline","depth":2,"seed":5}"#;
        let s = parse_scenario(text).unwrap();
        let again = parse_scenario(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.seed(), 5);
    }
}
