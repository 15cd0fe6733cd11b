//! Scenario execution: each kind drives the core modules and records checks.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use smallgroup_core::coords::{
    coord_inverse, coord_multiply, cylinder_measure, element_word, psi_decode, psi_encode,
};
use smallgroup_core::game::{
    demo_nonmeager, pad_for_demo, random_sets, solve_game, verify_game, DenseOpenSet, GameSolution, ProductSpace,
};
use smallgroup_core::group::{enumerate_fibers, parse_generator, Elem, Tower};
use smallgroup_core::levels::{
    build_level_sets, thin_tower, verify_level_closure, ClosureReport, ThinError, TowerContext, DEFAULT_MAX_ORDER,
};
use smallgroup_core::skeleton::{
    first_violation, tail_event_measure, witness_combine, CombineKind, Parity, SkeletonError, WitnessedElement,
};
use smallgroup_core::torus::{
    build_cube_families, cube_game_space, torus_demo, verify_cube_families, AtlasSpec, BuildOptions, ChartAtlas,
    CubeFamilySet, CubeGameSpace, DEFAULT_MAX_RESOLUTION,
};

use crate::config::*;
use crate::report::{Check, ErrorInfo, Exact, Report};

/// Command-line overrides applied on top of a scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub max_order: Option<u64>,
    pub max_resolution: Option<u32>,
}

enum Failure {
    Config(ConfigError),
    Build { kind: &'static str, message: String },
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn build_err(kind: &'static str, e: impl std::fmt::Display) -> Failure {
    Failure::Build { kind, message: e.to_string() }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Config(ConfigError::Invalid(msg.into()))
}

type Step = Result<(), Failure>;

#[derive(Default)]
struct Outcome {
    results: Map<String, Value>,
    checks: Vec<Check>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.to_string(), v);
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn apply_overrides(sc: &mut Scenario, opts: &RunOptions) {
    if let (Some(seed), Some(slot)) = (opts.seed, sc.seed_mut()) {
        *slot = Some(seed);
    }
    if let Some(cap) = opts.max_order {
        match sc {
            Scenario::Thin(p) => p.max_order = Some(cap),
            Scenario::FullProfinitePipeline(p) => p.max_order = Some(cap),
            _ => {}
        }
    }
    if let Some(cap) = opts.max_resolution {
        match sc {
            Scenario::Torus(p) => p.max_resolution = Some(cap),
            Scenario::FullTorusPipeline(p) => p.max_resolution = Some(cap),
            _ => {}
        }
    }
}

/// Runs one scenario. Configuration problems are returned as errors; construction
/// failures are recorded in the report.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Report, ConfigError> {
    let mut sc = scenario.clone();
    apply_overrides(&mut sc, opts);
    sc.validate()?;
    let seed = match sc.seed_mut() {
        Some(_) => sc.seed(),
        None => opts.seed.unwrap_or(DEFAULT_SEED),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let res = match &sc {
        Scenario::Levelsets(p) => levelsets(p, &mut out),
        Scenario::Thin(p) => thin(p, &mut out).map(|_| ()),
        Scenario::Coords(p) => coords(p, &mut out),
        Scenario::Skeleton(p) => skeleton(p, &mut out),
        Scenario::Game(p) => game(p, &mut out, &mut rng),
        Scenario::Demo(p) => demo(p, &mut out, &mut rng),
        Scenario::Torus(p) => torus(p, &mut out).map(|_| ()),
        Scenario::FullProfinitePipeline(p) => profinite_pipeline(p, &mut out, &mut rng),
        Scenario::FullTorusPipeline(p) => torus_pipeline(p, &mut out, &mut rng),
    };
    let error = match res {
        Ok(()) => None,
        Err(Failure::Config(e)) => return Err(e),
        Err(Failure::Build { kind, message }) => Some(ErrorInfo { kind: kind.to_string(), message }),
    };
    let echo = serde_json::to_value(&sc).expect("scenario serializes");
    Ok(Report::new(echo, seed, Value::Object(out.results), out.checks, error))
}

fn load_tower(input: &TowerInput) -> Result<Tower, Failure> {
    input.resolve()?.build().map_err(|e| build_err("Tower", e))
}

fn closure_checks(out: &mut Outcome, report: &ClosureReport) {
    for c in &report.checks {
        let name = format!("{} level {} j {}", c.relation, report.level, c.j);
        let tag = smallgroup_core::levels::RELATIONS.into_iter().find(|r| *r == c.relation).expect("known relation");
        out.check(Check::new(name, tag, c.passed).witness(&c.witness));
    }
}

fn levelsets(p: &LevelsetsParams, out: &mut Outcome) -> Step {
    let tower = load_tower(&p.tower)?;
    if p.level > tower.depth() {
        return Err(invalid(format!("level {} exceeds tower depth {}", p.level, tower.depth())));
    }
    let fibers = enumerate_fibers(&tower);
    let jmax = p.jmax.unwrap_or(p.level);
    let sets = build_level_sets(&tower, &fibers, p.level, jmax);
    let stages: Vec<Value> = (0..=jmax.min(p.level))
        .map(|j| {
            json!({
                "j": j,
                "a_size": sets.a_len(j).expect("stored"),
                "b": sets.b(j).expect("stored"),
            })
        })
        .collect();
    out.put("level", json!(p.level));
    out.put("order", json!(tower.order(p.level)));
    out.put("m", json!(tower.m(p.level)));
    out.put("jmax", json!(jmax));
    out.put("stages", Value::Array(stages));
    if p.verify {
        closure_checks(out, &verify_level_closure(&tower, &fibers, &sets));
    }
    Ok(())
}

fn korl_checks(out: &mut Outcome, report: &smallgroup_core::levels::ThinningReport) {
    for l in &report.levels {
        let lhs = &l.b_size * BigUint::from(l.level * l.level);
        out.check(
            Check::new(format!("korl level {}", l.level), "korl", l.holds)
                .value("b_size_times_i_squared", Exact::int(lhs))
                .value("m", Exact::int(l.m.clone())),
        );
    }
}

fn thin(p: &ThinParams, out: &mut Outcome) -> Result<Tower, Failure> {
    thin_with(&p.generator, p.depth, p.mode, p.max_order, out)
}

fn thin_with(
    generator: &str,
    depth: usize,
    mode: smallgroup_core::levels::ThinMode,
    max_order: Option<u64>,
    out: &mut Outcome,
) -> Result<Tower, Failure> {
    let gen = parse_generator(generator).map_err(|e| invalid(e.to_string()))?;
    let cap = BigUint::from(max_order.unwrap_or(DEFAULT_MAX_ORDER));
    match thin_tower(gen.as_ref(), depth, mode, &cap) {
        Ok((tower, report)) => {
            out.put("thinning", serde_json::to_value(&report).expect("serializes"));
            out.put("ms", json!(tower.ms()));
            korl_checks(out, &report);
            Ok(tower)
        }
        Err(e @ ThinError::GeneratorExhausted { .. }) => Err(build_err("GeneratorExhausted", e)),
        Err(e) => Err(build_err("Tower", e)),
    }
}

fn coords(p: &CoordsParams, out: &mut Outcome) -> Step {
    let tower = load_tower(&p.tower)?;
    let fibers = enumerate_fibers(&tower);
    if let Some(word) = &p.encode {
        let c = psi_encode(&tower, &fibers, word).map_err(|e| build_err("Coord", e))?;
        let back = psi_decode(&tower, &fibers, &c).map_err(|e| build_err("Coord", e))?;
        let measure = cylinder_measure(&tower, &c).map_err(|e| build_err("Coord", e))?;
        let expected = ratio(1, tower.order(c.len() - 1));
        out.put("word", json!(word));
        out.put("coordinates", json!(c));
        out.put("measure", json!(Exact::from(&measure)));
        out.check(Check::new("encode then decode", "psidef", &back == word).witness_on_fail(&back));
        out.check(
            Check::new("cylinder measure", "halmos", measure == expected)
                .value("measure", Exact::from(&measure))
                .value("expected", Exact::from(&expected)),
        );
    }
    if let Some(c) = &p.decode {
        let word = psi_decode(&tower, &fibers, c).map_err(|e| build_err("Coord", e))?;
        let again = psi_encode(&tower, &fibers, &word).map_err(|e| build_err("Coord", e))?;
        out.put("decoded", json!(word));
        out.check(Check::new("decode then encode", "psidef", &again == c).witness_on_fail(&again));
    }
    if p.exhaustive {
        coords_exhaustive(&tower, &fibers, out);
    }
    Ok(())
}

/// ψ round trips, cylinder measures and the identity word over every element of every level.
fn coords_exhaustive(tower: &Tower, fibers: &smallgroup_core::group::FiberEnumeration, out: &mut Outcome) {
    let mut bad_round: Option<Vec<Elem>> = None;
    let mut bad_measure: Option<Vec<u32>> = None;
    let mut count = 0usize;
    for l in 0..=tower.depth() {
        let expected = ratio(1, tower.order(l));
        let mut seen = BTreeSet::new();
        for g in 0..tower.order(l) as Elem {
            count += 1;
            let word = element_word(tower, l, g);
            let c = psi_encode(tower, fibers, &word).expect("compatible");
            if psi_decode(tower, fibers, &c).ok().as_ref() != Some(&word) || !seen.insert(c.clone()) {
                bad_round.get_or_insert(word.clone());
            }
            if cylinder_measure(tower, &c).ok() != Some(expected.clone()) {
                bad_measure.get_or_insert(c);
            }
        }
        if seen.len() != tower.ms()[..=l].iter().product::<usize>() {
            bad_round.get_or_insert(vec![]);
        }
    }
    let ones = (0..=tower.depth()).all(|l| {
        psi_encode(tower, fibers, &vec![0; l + 1]).ok() == Some(vec![1; l + 1])
    });
    out.put("elements_checked", json!(count));
    out.check(Check::new("psi bijective on every level", "psidef", bad_round.is_none()).witness(&bad_round));
    out.check(Check::new("cylinder measure 1/|G_L|", "halmos", bad_measure.is_none()).witness(&bad_measure));
    out.check(Check::new("identity maps to ones", "ee", ones));
}

fn witnessed(w: &WitnessInput) -> WitnessedElement {
    WitnessedElement::new(w.word.clone(), w.n, w.indices.iter().copied())
}

fn skeleton(p: &SkeletonParams, out: &mut Outcome) -> Step {
    let tower = load_tower(&p.tower)?;
    let ctx = TowerContext::new(tower);
    if let Some(w) = &p.check {
        let u: BTreeSet<usize> = w.indices.iter().copied().collect();
        let v = first_violation(&ctx.levels, &w.word, w.n, &u).map_err(|e| build_err("Skeleton", e))?;
        out.put("member", json!(v.is_none()));
        out.check(Check::new("membership", "BAof", v.is_none()).witness(v));
    }
    if let Some(c) = &p.combine {
        let a = witnessed(&c.a);
        let b = c.b.as_ref().map(witnessed);
        let tag = match c.kind {
            CombineKind::Product => "Bszorz",
            CombineKind::Inverse => "ginverze",
        };
        let name = match c.kind {
            CombineKind::Product => "product witness",
            CombineKind::Inverse => "inverse witness",
        };
        match witness_combine(&ctx, c.kind, &a, b.as_ref(), c.threshold) {
            Ok(e) => {
                out.put("combined", serde_json::to_value(&e).expect("serializes"));
                out.check(Check::new(name, tag, true));
            }
            Err(e @ (SkeletonError::WitnessViolation(_) | SkeletonError::NotWitnessed(_))) => {
                out.check(Check::new(name, tag, false).witness(e.to_string()));
            }
            Err(e) => return Err(build_err("Skeleton", e)),
        }
    }
    if let Some(t) = &p.tailmeasure {
        tail_check(&ctx, t.n, t.i0, out)?;
    }
    Ok(())
}

fn tail_check(ctx: &TowerContext, n: usize, i0: usize, out: &mut Outcome) -> Step {
    let depth = ctx.depth();
    let (measure, bound) = tail_event_measure(ctx, n, i0, depth).map_err(|e| build_err("Skeleton", e))?;
    let mut c = Check::new(format!("tail n {n} i0 {i0}"), "korl", bound.as_ref().map_or(true, |b| &measure <= b))
        .value("measure", Exact::from(&measure));
    if let Some(b) = &bound {
        c = c.value("bound", Exact::from(b));
    }
    out.check(c);
    Ok(())
}

fn dense_sets(space: &ProductSpace, dense: &[Vec<Vec<u32>>]) -> Result<Vec<DenseOpenSet>, Failure> {
    dense
        .iter()
        .map(|cyls| DenseOpenSet::from_cylinders(space, cyls).map_err(|e| invalid(e.to_string())))
        .collect()
}

fn usable_positions(space: &ProductSpace) -> (usize, bool) {
    let b = space.branching();
    (b.iter().filter(|&&m| m >= 2).count(), b.last().is_some_and(|&m| m >= 2))
}

/// `t` random sets, checking that padding leaves room for the demonstration.
fn demo_sets<R: Rng>(space: &ProductSpace, t: usize, rng: &mut R) -> Result<Vec<DenseOpenSet>, Failure> {
    let (usable, last) = usable_positions(space);
    if t == 0 || usable < t + 1 || !last {
        return Err(invalid(format!(
            "{t} random sets need {} coordinates with two or more symbols, including the last; the space has {usable}",
            t + 1
        )));
    }
    Ok(random_sets(rng, space, t))
}

fn game_checks<R: Rng>(
    space: &ProductSpace,
    sets: &[DenseOpenSet],
    samples: usize,
    out: &mut Outcome,
    rng: &mut R,
) -> Result<GameSolution, Failure> {
    for (k, s) in sets.iter().enumerate() {
        out.check(Check::new(format!("set {} dense", k + 1), "rezid", s.is_dense(space)));
    }
    let sol = solve_game(space, sets).map_err(|e| build_err("Game", e))?;
    let report = verify_game(space, &sol, sets, samples, rng);
    for s in &report.stages {
        out.check(Check::new(format!("stage {} set {}", s.stage, s.set), "ffff", s.passed).witness(&s.witness));
    }
    out.check(
        Check::new("sampled words", "ffff", report.samples.failures == 0)
            .witness(&report.samples.first_failure)
            .value("drawn", Exact::int(report.samples.drawn))
            .value("failures", Exact::int(report.samples.failures)),
    );
    out.put("solution", serde_json::to_value(&sol).expect("serializes"));
    Ok(sol)
}

fn parities(p: Option<Parity>) -> Vec<Parity> {
    match p {
        Some(p) => vec![p],
        None => vec![Parity::Even, Parity::Odd],
    }
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
    }
}

fn profinite_demos(
    ctx: &TowerContext,
    space: &ProductSpace,
    sets: &[DenseOpenSet],
    sol: &GameSolution,
    parity: Option<Parity>,
    out: &mut Outcome,
) -> Step {
    let mut demos = Vec::new();
    for par in parities(parity) {
        let name = parity_name(par);
        match demo_nonmeager(ctx, space, sol, sets, par) {
            Ok(d) => {
                let level0 = d.element.is_witnessed(&ctx.levels).unwrap_or(false);
                let all_in = d.in_sets.iter().all(|&b| b);
                out.check(Check::new(format!("demo {name} level-0 witness"), "ee", level0));
                out.check(Check::new(format!("demo {name} in every set"), "ffff", all_in).witness_on_fail(&d.in_sets));
                demos.push(serde_json::to_value(&d).expect("serializes"));
            }
            Err(e) => {
                out.check(Check::new(format!("demo {name} level-0 witness"), "ee", false).witness(e.to_string()));
            }
        }
    }
    out.put("demos", Value::Array(demos));
    Ok(())
}

fn tower_space(ctx: &TowerContext) -> Result<ProductSpace, Failure> {
    ProductSpace::new(ctx.ms().iter().map(|&m| m as u32).collect()).map_err(|e| build_err("Game", e))
}

fn game(p: &GameParams, out: &mut Outcome, rng: &mut ChaCha8Rng) -> Step {
    let space = ProductSpace::new(p.space.clone()).map_err(|e| invalid(e.to_string()))?;
    let sets = dense_sets(&space, &p.dense)?;
    game_checks(&space, &sets, p.samples, out, rng)?;
    if let Some(d) = &p.demo {
        let ctx = TowerContext::new(load_tower(&d.tower)?);
        if ctx.ms().iter().map(|&m| m as u32).collect::<Vec<_>>() != p.space {
            return Err(invalid(format!("space {:?} differs from the tower's fiber sizes {:?}", p.space, ctx.ms())));
        }
        let padded = pad_for_demo(&sets);
        let sol = solve_game(&space, &padded).map_err(|e| build_err("Game", e))?;
        out.put("demo_solution", serde_json::to_value(&sol).expect("serializes"));
        profinite_demos(&ctx, &space, &padded, &sol, d.parity, out)?;
    }
    Ok(())
}

fn demo(p: &DemoParams, out: &mut Outcome, rng: &mut ChaCha8Rng) -> Step {
    let ctx = TowerContext::new(load_tower(&p.tower)?);
    let space = tower_space(&ctx)?;
    let sets = match &p.dense {
        Some(d) => dense_sets(&space, d)?,
        None => demo_sets(&space, p.sets, rng)?,
    };
    out.put("space", json!(space.branching()));
    let padded = pad_for_demo(&sets);
    let sol = game_checks(&space, &padded, DEFAULT_SAMPLES, out, rng)?;
    profinite_demos(&ctx, &space, &padded, &sol, p.parity, out)
}

fn load_atlas(dim: usize, input: &AtlasInput) -> Result<ChartAtlas, Failure> {
    match input.resolve()? {
        None => {
            let AtlasInput::Named(name) = input else { unreachable!() };
            ChartAtlas::builtin(name.trim_start_matches("builtin:"), dim).map_err(|e| invalid(e.to_string()))
        }
        Some(spec) => {
            if spec.dim != dim {
                return Err(invalid(format!("atlas has dimension {} but dim is {dim}", spec.dim)));
            }
            spec.build().map_err(|e| build_err("AtlasInvalid", e))
        }
    }
}

fn torus_build(
    dim: usize,
    atlas: &AtlasInput,
    depth: usize,
    max_resolution: Option<u32>,
    verify: bool,
    out: &mut Outcome,
) -> Result<(CubeFamilySet, CubeGameSpace), Failure> {
    let atlas = load_atlas(dim, atlas)?;
    out.put("atlas", serde_json::to_value(AtlasSpec::from_atlas(&atlas)).expect("serializes"));
    let opts = BuildOptions { max_resolution: max_resolution.unwrap_or(DEFAULT_MAX_RESOLUTION) };
    let fam = build_cube_families(&atlas, depth, opts).map_err(|e| build_err("Torus", e))?;
    let levels: Vec<Value> = fam.levels[1..]
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "m": l.m,
                "l": l.resolutions(),
                "measure_resolution": l.measure_resolution,
                "a_sizes": l.a_sets.iter().map(|a| a.len()).collect::<Vec<_>>(),
                "b_sizes": l.b_sets.iter().map(|b| b.len()).collect::<Vec<_>>(),
                "e_sizes": l.native.iter().map(|e| e.len()).collect::<Vec<_>>(),
                "d_sizes": l.families.iter().map(|d| d.len()).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.put("resolutions", json!(fam.resolutions()));
    out.put("levels", Value::Array(levels));
    if verify {
        for c in verify_cube_families(&fam).checks {
            let name = match c.index {
                Some(j) => format!("{} level {} index {j}", c.condition, c.level),
                None => format!("{} level {}", c.condition, c.level),
            };
            let mut check = Check::new(name, c.condition, c.passed).witness(&c.witness);
            if let Some((m, b)) = &c.values {
                check = check.value("measure", Exact::from(m)).value("bound", Exact::from(b));
            }
            out.check(check);
        }
    }
    let gs = cube_game_space(dim, &fam.resolutions()).map_err(|e| build_err("Torus", e))?;
    out.put("branching", json!(gs.space.branching()));
    if verify {
        for level in 0..gs.resolutions.len() {
            let t = gs.check_tiling(level);
            out.check(Check::new(format!("frakC level {level}"), "frakC", t.bijective));
            out.check(
                Check::new(format!("kitolt level {level}"), "kitolt", t.children_tile)
                    .value("total_volume", Exact::from(&t.total_volume)),
            );
        }
    }
    Ok((fam, gs))
}

fn torus(p: &TorusParams, out: &mut Outcome) -> Result<(), Failure> {
    torus_build(p.dim, &p.atlas, p.depth, p.max_resolution, p.verify, out).map(|_| ())
}

fn random_witnessed<R: Rng>(ctx: &TowerContext, rng: &mut R) -> WitnessedElement {
    let len = ctx.depth() + 1;
    let n = rng.gen_range(0..len);
    let u: BTreeSet<usize> = (0..len).filter(|_| rng.gen_bool(0.5)).collect();
    let word = (0..len)
        .map(|i| {
            if u.contains(&i) {
                let b = ctx.levels[i].b(n).expect("available");
                b[rng.gen_range(0..b.len())]
            } else {
                rng.gen_range(1..=ctx.ms()[i] as u32)
            }
        })
        .collect();
    WitnessedElement::new(word, n, u)
}

fn profinite_pipeline(p: &ProfinitePipelineParams, out: &mut Outcome, rng: &mut ChaCha8Rng) -> Step {
    let tower = thin_with(&p.generator, p.depth, p.mode, p.max_order, out)?;
    let ctx = TowerContext::new(tower);
    for i in 0..=ctx.depth() {
        closure_checks(out, &verify_level_closure(&ctx.tower, &ctx.fibers, &ctx.levels[i]));
    }
    coords_exhaustive(&ctx.tower, &ctx.fibers, out);

    let top = ctx.depth();
    let n = ctx.tower.order(top) as Elem;
    let pairs = p.samples.min(1000);
    let mut bad_mul = None;
    let mut bad_inv = None;
    for _ in 0..pairs {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let ab = ctx.tower.group(top).op(a, b);
        let enc = |g| psi_encode(&ctx.tower, &ctx.fibers, &element_word(&ctx.tower, top, g)).expect("compatible");
        let (wa, wb) = (enc(a), enc(b));
        if coord_multiply(&ctx.tower, &ctx.fibers, &wa, &wb).ok() != Some(enc(ab)) {
            bad_mul.get_or_insert((a, b));
        }
        if coord_inverse(&ctx.tower, &ctx.fibers, &wa).ok() != Some(enc(ctx.tower.group(top).inverse(a))) {
            bad_inv.get_or_insert(a);
        }
    }
    out.check(
        Check::new("coordinate product", "psidef", bad_mul.is_none())
            .witness(bad_mul)
            .value("pairs", Exact::int(pairs)),
    );
    out.check(Check::new("coordinate inverse", "ginverze", bad_inv.is_none()).witness(bad_inv));

    let identity = WitnessedElement::identity(top + 1);
    out.check(Check::new("identity witnessed at level 0", "ee", identity.is_witnessed(&ctx.levels).unwrap_or(false)));
    let mut combine_failures: Vec<String> = Vec::new();
    for _ in 0..pairs.min(200) {
        let a = random_witnessed(&ctx, rng);
        let b = random_witnessed(&ctx, rng);
        if let Err(e) = witness_combine(&ctx, CombineKind::Product, &a, Some(&b), 0) {
            combine_failures.push(format!("product: {e}"));
        }
        if let Err(e) = witness_combine(&ctx, CombineKind::Inverse, &a, None, 0) {
            combine_failures.push(format!("inverse: {e}"));
        }
    }
    out.check(
        Check::new("witness products", "Bszorz", !combine_failures.iter().any(|f| f.starts_with("product")))
            .witness(combine_failures.iter().find(|f| f.starts_with("product"))),
    );
    out.check(
        Check::new("witness inverses", "ginverze", !combine_failures.iter().any(|f| f.starts_with("inverse")))
            .witness(combine_failures.iter().find(|f| f.starts_with("inverse"))),
    );
    for i0 in 1..=top {
        for n in 0..=i0 {
            tail_check(&ctx, n, i0, out)?;
        }
    }

    let space = tower_space(&ctx)?;
    let sets = pad_for_demo(&demo_sets(&space, p.sets, rng)?);
    let sol = game_checks(&space, &sets, p.samples, out, rng)?;
    profinite_demos(&ctx, &space, &sets, &sol, None, out)
}

fn torus_pipeline(p: &TorusPipelineParams, out: &mut Outcome, rng: &mut ChaCha8Rng) -> Step {
    let (fam, gs) = torus_build(p.dim, &p.atlas, p.depth, p.max_resolution, true, out)?;
    let sets = pad_for_demo(&demo_sets(&gs.space, p.sets, rng)?);
    let sol = game_checks(&gs.space, &sets, p.samples, out, rng)?;
    let mut demos = Vec::new();
    for par in [Parity::Even, Parity::Odd] {
        let name = parity_name(par);
        match torus_demo(&fam, &gs, &sol, &sets, par) {
            Ok(d) => {
                out.check(Check::new(format!("demo {name} cubes in D_0"), "tsor", true));
                out.check(
                    Check::new(format!("demo {name} in every set"), "ffff", d.in_sets.iter().all(|&b| b))
                        .witness_on_fail(&d.in_sets),
                );
                demos.push(json!({ "parity": name, "word": d.word, "chosen": d.chosen, "free_stages": d.free_stages }));
            }
            Err(e) => out.check(Check::new(format!("demo {name} cubes in D_0"), "tsor", false).witness(e.to_string())),
        }
    }
    out.put("demos", Value::Array(demos));
    Ok(())
}
