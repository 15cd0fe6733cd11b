use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smallgroup_core::game::{demo_nonmeager, pad_for_demo, random_sets, solve_game, verify_game, ProductSpace};
use smallgroup_core::group::{CyclicGenerator, ProductGenerator, TowerGenerator};
use smallgroup_core::levels::{thin_tower, ThinMode, TowerContext, DEFAULT_MAX_ORDER};
use smallgroup_core::skeleton::{membership_truncated, tail_event_measure, Parity};
use smallgroup_core::torus::{
    build_cube_families, cube_game_space, torus_demo, verify_cube_families, BuildOptions, ChartAtlas,
};

fn space_of(ctx: &TowerContext) -> ProductSpace {
    ProductSpace::new(ctx.ms().iter().map(|&m| m as u32).collect()).unwrap()
}

#[test]
fn thinned_tower_through_demo() {
    let cap = BigUint::from(DEFAULT_MAX_ORDER);
    for gen in [&ProductGenerator::cyclic(2) as &dyn TowerGenerator, &CyclicGenerator { base: 2 }] {
        let (tower, report) = thin_tower(gen, 3, ThinMode::Exact, &cap).unwrap();
        assert!(report.all_hold());
        let ctx = TowerContext::new(tower);
        let space = space_of(&ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sets = pad_for_demo(&random_sets(&mut rng, &space, 2));
        let sol = solve_game(&space, &sets).unwrap();
        assert!(verify_game(&space, &sol, &sets, 100, &mut rng).passed());
        for parity in [Parity::Even, Parity::Odd] {
            let d = demo_nonmeager(&ctx, &space, &sol, &sets, parity).unwrap();
            let u = d.surrogate.indices(space.len());
            assert!(membership_truncated(&ctx.levels, &d.element.word, 0, &u).unwrap());
            assert!(d.in_sets.iter().all(|&b| b));
        }
    }
}

#[test]
fn tail_measures_on_thinned_tower() {
    let (tower, _) = thin_tower(&ProductGenerator::cyclic(2), 4, ThinMode::Exact, &BigUint::from(DEFAULT_MAX_ORDER)).unwrap();
    let ctx = TowerContext::new(tower);
    for i0 in 1..=4 {
        for n in 0..=i0 {
            let (measure, bound) = tail_event_measure(&ctx, n, i0, 4).unwrap();
            assert!(measure <= bound.unwrap(), "n {n} i0 {i0}");
        }
    }
}

#[test]
fn circle_families_through_demo() {
    let fam = build_cube_families(&ChartAtlas::two_arcs(), 2, BuildOptions::default()).unwrap();
    assert!(verify_cube_families(&fam).all_passed());
    let gs = cube_game_space(1, &fam.resolutions()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sets = pad_for_demo(&random_sets(&mut rng, &gs.space, 1));
    let sol = solve_game(&gs.space, &sets).unwrap();
    for parity in [Parity::Even, Parity::Odd] {
        let d = torus_demo(&fam, &gs, &sol, &sets, parity).unwrap();
        assert!(d.in_sets.iter().all(|&b| b));
        assert_eq!(d.word.len(), gs.space.len());
    }
}
