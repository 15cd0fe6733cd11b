//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smallgroup_core::levels::ThinMode;
use smallgroup_core::skeleton::{CombineKind, Parity};

use crate::config::*;
use crate::report::Report;
use crate::run::{run_scenario, RunOptions};
use crate::schema::REPORT_SCHEMA;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const THREADS_ENV: &str = "SMALLGROUP_LAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "smallgroup-lab", version, about = "Runs tower, game and torus scenarios and emits check reports")]
pub struct Cli {
    /// Scenario file; overrides the subcommand's own flags.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Seed for ChaCha8Rng.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Largest group order a generator may emit.
    #[arg(long, global = true)]
    pub max_order: Option<u64>,
    /// Largest dyadic resolution exponent per axis.
    #[arg(long, global = true)]
    pub max_resolution: Option<u32>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level sets of one level and their closure relations.
    Levelsets(LevelsetsArgs),
    /// Thins a generator so that |B_i^i| i^2 <= m_i.
    Thin(ThinArgs),
    /// Coordinate encoding and decoding.
    Coords(CoordsArgs),
    /// Witness membership, combination and tail measure.
    Skeleton(SkeletonArgs),
    /// Solves a game on dense open cylinder sets.
    Game(GameArgs),
    /// Block-parity demonstration on a tower's coordinate space.
    Demo(DemoArgs),
    /// Dyadic cube families on the torus.
    Torus(TorusArgs),
    /// End-to-end pipelines.
    Pipeline(PipelineArgs),
    /// Prints the report JSON schema.
    Schema,
}

#[derive(Debug, Args)]
pub struct LevelsetsArgs {
    /// Tower file or short form such as cyclic:2:0,1,2.
    #[arg(long)]
    tower: Option<String>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    jmax: Option<usize>,
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args)]
pub struct ThinArgs {
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value = "exact")]
    mode: ThinMode,
}

#[derive(Debug, Args)]
pub struct CoordsArgs {
    #[arg(long)]
    tower: Option<String>,
    /// Element word, comma separated.
    #[arg(long)]
    encode: Option<String>,
    /// Coordinate word, comma separated.
    #[arg(long)]
    decode: Option<String>,
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Debug, Args)]
pub struct SkeletonArgs {
    #[arg(long)]
    tower: Option<String>,
    /// WORD:N:INDICES, for example 1,2,2:1:2.
    #[arg(long)]
    check: Option<String>,
    /// product:WORD:N:INDICES;WORD:N:INDICES or inverse:WORD:N:INDICES.
    #[arg(long)]
    combine: Option<String>,
    #[arg(long, default_value_t = 0)]
    threshold: usize,
    /// N,I0.
    #[arg(long)]
    tailmeasure: Option<String>,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    /// Alphabet sizes, comma separated.
    #[arg(long)]
    space: Option<String>,
    /// JSON file holding a list of sets, each a list of cylinder prefixes.
    #[arg(long)]
    dense: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    demo: bool,
    #[arg(long)]
    tower: Option<String>,
    #[arg(long)]
    parity: Option<Parity>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    tower: Option<String>,
    #[arg(long)]
    dense: Option<String>,
    #[arg(long, default_value_t = 1)]
    sets: usize,
    #[arg(long)]
    parity: Option<Parity>,
}

#[derive(Debug, Args)]
pub struct TorusArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Atlas file or builtin:two-arcs.
    #[arg(long, default_value = "builtin:two-arcs")]
    atlas: String,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    verify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PipelineKind {
    Profinite,
    Torus,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_enum)]
    kind: Option<PipelineKind>,
    #[arg(long, default_value = "product:2")]
    generator: String,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value = "exact")]
    mode: ThinMode,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value = "builtin:two-arcs")]
    atlas: String,
    #[arg(long)]
    sets: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("missing --{flag}")))
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, ConfigError> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| ConfigError::Invalid(format!("bad {what} entry {x:?}"))))
        .collect()
}

fn witness_arg(s: &str) -> Result<WitnessInput, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [word, n, indices] = parts[..] else {
        return Err(ConfigError::Invalid(format!("expected WORD:N:INDICES, got {s:?}")));
    };
    let n = n.trim().parse().map_err(|_| ConfigError::Invalid(format!("bad witness level {n:?}")))?;
    Ok(WitnessInput { word: list(word, "word")?, n, indices: list(indices, "index")? })
}

fn combine_arg(s: &str, threshold: usize) -> Result<CombineInput, ConfigError> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| ConfigError::Invalid(format!("bad combine {s:?}")))?;
    let kind = match kind {
        "product" => CombineKind::Product,
        "inverse" => CombineKind::Inverse,
        _ => return Err(ConfigError::Invalid(format!("unknown combine kind {kind:?}"))),
    };
    let (a, b) = match rest.split_once(';') {
        Some((a, b)) => (witness_arg(a)?, Some(witness_arg(b)?)),
        None => (witness_arg(rest)?, None),
    };
    Ok(CombineInput { kind, a, b, threshold })
}

fn dense_file(path: &str) -> Result<Vec<Vec<Vec<u32>>>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() })
}

fn scenario_from_args(cmd: &Command) -> Result<Scenario, ConfigError> {
    let tower = |t: &Option<String>| need(t.clone(), "tower").map(TowerInput::Short);
    let sc = match cmd {
        Command::Levelsets(a) => Scenario::Levelsets(LevelsetsParams {
            tower: tower(&a.tower)?,
            level: need(a.level, "level")?,
            jmax: a.jmax,
            verify: a.verify,
        }),
        Command::Thin(a) => Scenario::Thin(ThinParams {
            generator: need(a.generator.clone(), "generator")?,
            depth: need(a.depth, "depth")?,
            mode: a.mode,
            max_order: None,
        }),
        Command::Coords(a) => Scenario::Coords(CoordsParams {
            tower: tower(&a.tower)?,
            encode: a.encode.as_deref().map(|s| list(s, "word")).transpose()?,
            decode: a.decode.as_deref().map(|s| list(s, "word")).transpose()?,
            exhaustive: a.exhaustive,
        }),
        Command::Skeleton(a) => Scenario::Skeleton(SkeletonParams {
            tower: tower(&a.tower)?,
            check: a.check.as_deref().map(witness_arg).transpose()?,
            combine: a.combine.as_deref().map(|s| combine_arg(s, a.threshold)).transpose()?,
            tailmeasure: match a.tailmeasure.as_deref().map(|s| list::<usize>(s, "tail")).transpose()? {
                Some(v) if v.len() == 2 => Some(TailInput { n: v[0], i0: v[1] }),
                Some(_) => return Err(ConfigError::Invalid("--tailmeasure takes N,I0".into())),
                None => None,
            },
        }),
        Command::Game(a) => Scenario::Game(GameParams {
            space: list(&need(a.space.clone(), "space")?, "space")?,
            dense: dense_file(&need(a.dense.clone(), "dense")?)?,
            samples: a.samples,
            seed: None,
            demo: if a.demo { Some(GameDemo { tower: tower(&a.tower)?, parity: a.parity }) } else { None },
        }),
        Command::Demo(a) => Scenario::Demo(DemoParams {
            tower: tower(&a.tower)?,
            dense: a.dense.as_deref().map(dense_file).transpose()?,
            sets: a.sets,
            parity: a.parity,
            seed: None,
        }),
        Command::Torus(a) => Scenario::Torus(TorusParams {
            dim: a.dim,
            atlas: AtlasInput::Named(a.atlas.clone()),
            depth: need(a.depth, "depth")?,
            verify: a.verify,
            max_resolution: None,
        }),
        Command::Pipeline(a) => match need(a.kind, "kind")? {
            PipelineKind::Profinite => Scenario::FullProfinitePipeline(ProfinitePipelineParams {
                generator: a.generator.clone(),
                depth: need(a.depth, "depth")?,
                mode: a.mode,
                sets: a.sets.unwrap_or(2),
                samples: a.samples,
                max_order: None,
                seed: None,
            }),
            PipelineKind::Torus => Scenario::FullTorusPipeline(TorusPipelineParams {
                dim: a.dim,
                atlas: AtlasInput::Named(a.atlas.clone()),
                depth: need(a.depth, "depth")?,
                sets: a.sets.unwrap_or(1),
                samples: a.samples,
                max_resolution: None,
                seed: None,
            }),
        },
        Command::Schema => unreachable!("handled before"),
    };
    sc.validate()?;
    Ok(sc)
}

fn verb_accepts(cmd: &Command, kind: &str) -> bool {
    match cmd {
        Command::Pipeline(_) => true,
        Command::Levelsets(_) => kind == "levelsets",
        Command::Thin(_) => kind == "thin",
        Command::Coords(_) => kind == "coords",
        Command::Skeleton(_) => kind == "skeleton",
        Command::Game(_) => kind == "game",
        Command::Demo(_) => kind == "demo",
        Command::Torus(_) => kind == "torus",
        Command::Schema => false,
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Table => report.to_table(),
    }
}

fn emit(text: &str, out: Option<&str>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, ConfigError> {
    configure_threads()?;
    if let Some(Command::Schema) = cli.command {
        return Ok(match emit(REPORT_SCHEMA, cli.out.as_deref()) {
            Ok(()) => EXIT_PASS,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INTERNAL
            }
        });
    }
    let scenario = match (&cli.config, &cli.command) {
        (Some(path), cmd) => {
            let sc = load_scenario(path)?;
            if let Some(cmd) = cmd {
                if !verb_accepts(cmd, sc.kind()) {
                    return Err(ConfigError::Invalid(format!("config kind {} does not match the subcommand", sc.kind())));
                }
            }
            sc
        }
        (None, Some(cmd)) => scenario_from_args(cmd)?,
        (None, None) => return Err(ConfigError::Invalid("a subcommand or --config is required".into())),
    };
    let opts = RunOptions { seed: cli.seed, max_order: cli.max_order, max_resolution: cli.max_resolution };
    let report = run_scenario(&scenario, &opts)?;
    if let Err(e) = emit(&render(&report, cli.format), cli.out.as_deref()) {
        eprintln!("error: {e}");
        return Ok(EXIT_INTERNAL);
    }
    if let Some(e) = &report.error {
        eprintln!("{}: {}", e.kind, e.message);
    }
    Ok(if report.passed() { EXIT_PASS } else { EXIT_FAIL })
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(|| execute(&cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(_) => EXIT_INTERNAL,
    }
}
