use pqkd_core::approx_diag::{approx_eigendecomposition, model_budget};
use pqkd_core::keyrate::{build_objective_map, rho_a_block, solve_block, BlockProblem, BlockSpec, Families, FrankWolfe};
use pqkd_core::laser::model_state;
use pqkd_core::pipeline::decoy_point;
use pqkd_core::protocol::bob_povms;
use pqkd_core::{EigenBlock, RunConfig, Source};

fn ideal_blocks(d: u32) -> Vec<EigenBlock> {
    let budget = model_budget(0.5, 1.0, d);
    approx_eigendecomposition(&model_state(0.5, 1.0, d).unwrap(), &budget, 2).unwrap()
}

#[test]
fn vacuum_block_gives_a_pure_uniform_register() {
    let blocks = ideal_blocks(6);
    assert_eq!(blocks[0].vector.amplitudes.iter().position(|z| z.norm() > 0.5), Some(0));
    let rho = rho_a_block(&blocks[0], &[1.0 / 3.0; 3], 6).unwrap();
    for z in rho.iter() {
        assert!((z.re - 1.0 / 3.0).abs() < 1e-14 && z.im.abs() < 1e-14);
    }
}

#[test]
fn register_diagonal_equals_the_priors() {
    let priors = [0.25, 0.25, 0.5];
    for b in ideal_blocks(6) {
        let rho = rho_a_block(&b, &priors, 6).unwrap();
        for i in 0..3 {
            assert!((rho[(i, i)].re - priors[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn single_photon_key_states_are_orthogonal() {
    let blocks = ideal_blocks(6);
    let rho = rho_a_block(&blocks[1], &[1.0 / 3.0; 3], 6).unwrap();
    assert!(rho[(0, 1)].norm() < 1e-14);
    // Each key state overlaps the X state with amplitude 1/√2.
    assert!((rho[(0, 2)].norm() - (0.5f64).sqrt() / 3.0).abs() < 1e-14);
}

#[test]
fn dropping_constraint_families_never_raises_the_bound() {
    let cfg = RunConfig::from_toml("truncation.d = 4\ntruncation.blocks = 2").unwrap();
    let source = Source { label: "ideal".into(), q: 1.0 };
    let report = decoy_point(&cfg, &source, 0.5, 0.0).unwrap();
    let povms = bob_povms(cfg.protocol.t_x, cfg.truncation.n).unwrap();
    let map = build_objective_map(&povms).unwrap();
    let fw = FrankWolfe::default();
    let spec = BlockSpec::from_decoy(&report.blocks[1], report.eps_proj, &cfg.protocol.priors, &report.yields, 4).unwrap();
    let full = solve_block(&BlockProblem::new(spec.clone(), &povms, Families::default()).unwrap(), &map, &fw).unwrap();
    assert!(full.certified && full.bound > 0.0, "{full:?}");
    let relaxations = [
        Families { decoy: false, ..Families::default() },
        Families { window: false, ..Families::default() },
        Families { decoy: false, partial_trace: true, window: false },
    ];
    for families in relaxations {
        let r = solve_block(&BlockProblem::new(spec.clone(), &povms, families).unwrap(), &map, &fw).unwrap();
        // A certified lower bound on the larger set sits below any value attained on the smaller one.
        assert!(r.bound <= full.best_value + 1e-9, "{families:?}: {} > {}", r.bound, full.best_value);
    }
}

#[test]
fn unconstrained_register_gives_no_key() {
    let cfg = RunConfig::from_toml("truncation.d = 4\ntruncation.blocks = 2").unwrap();
    let source = Source { label: "ideal".into(), q: 1.0 };
    let report = decoy_point(&cfg, &source, 0.5, 0.0).unwrap();
    let povms = bob_povms(cfg.protocol.t_x, cfg.truncation.n).unwrap();
    let map = build_objective_map(&povms).unwrap();
    let spec = BlockSpec::from_decoy(&report.blocks[1], report.eps_proj, &cfg.protocol.priors, &report.yields, 4).unwrap();
    let families = Families { decoy: false, partial_trace: false, window: false };
    let r = solve_block(&BlockProblem::new(spec, &povms, families).unwrap(), &map, &FrankWolfe::default()).unwrap();
    assert_eq!(r.rate, 0.0);
}
