use pqkd_core::approx_diag::{approx_eigendecomposition, model_budget};
use pqkd_core::decoy::{
    block_yields, build_smn, general_povm_yield_bounds, relaxed_instance, standard_decoy_lp, yield_bounds, DecoySetup,
    DecoyVariant, VirtualCorrections,
};
use pqkd_core::fock::{FockKet, ModeSpace};
use pqkd_core::laser::model_state;
use pqkd_core::protocol::{bob_povms, loss_channel, preparation_isometry, simulate_statistics};
use pqkd_core::{Event, ProtocolParams, Signal};

const D: u32 = 4;
const N: u32 = 2;

fn params(distance_km: f64) -> ProtocolParams {
    ProtocolParams { distance_km, ..Default::default() }
}

#[test]
fn vacuum_decoy_pins_the_vacuum_no_click_yield() {
    let p = params(10.0);
    let stats = simulate_statistics(&p).unwrap();
    let povms = bob_povms(p.t_x, N).unwrap();
    let smn = build_smn(&relaxed_instance(Signal::Zero, 1.0, D, N, p.t_x, &povms, &stats).unwrap()).unwrap();
    let vacuum = FockKet::basis(&ModeSpace::single(D), &[0]).unwrap().projector();
    let b = yield_bounds(&smn, &vacuum, &povms[Event::NoClick.index()], VirtualCorrections::default()).unwrap();
    assert!(b.certified);
    assert!(b.lower >= 1.0 - 1e-6, "{b:?}");
}

#[test]
fn fock_yields_bracket_the_loss_channel() {
    let p = params(30.0);
    let stats = simulate_statistics(&p).unwrap();
    let povms = bob_povms(p.t_x, N).unwrap();
    for s in Signal::ALL {
        let smn = build_smn(&relaxed_instance(s, 1.0, D, N, p.t_x, &povms, &stats).unwrap()).unwrap();
        let v = preparation_isometry(s, D).unwrap();
        for n in 0..=2 {
            let fock = FockKet::basis(&ModeSpace::single(D), &[n]).unwrap().projector();
            let out = loss_channel(p.transmittance(), &v.conjugate(&fock).unwrap()).unwrap().compress(&povms[0].space).unwrap();
            for f in &povms {
                let truth = f.trace_with(&out).unwrap().re;
                let b = yield_bounds(&smn, &fock, f, VirtualCorrections::default()).unwrap();
                assert!(b.lower - 1e-7 <= truth && truth <= b.upper + 1e-7, "{} n={n}: {truth} not in {b:?}", s.label());
            }
        }
    }
}

#[test]
fn virtual_corrections_widen_each_side_by_its_cost() {
    let p = params(0.0);
    let stats = simulate_statistics(&p).unwrap();
    let povms = bob_povms(p.t_x, N).unwrap();
    let smn = build_smn(&relaxed_instance(Signal::Plus, 1.0, D, N, p.t_x, &povms, &stats).unwrap()).unwrap();
    let one = FockKet::basis(&ModeSpace::single(D), &[1]).unwrap().projector();
    let f = &povms[Event::ZEarly.index()];
    let base = yield_bounds(&smn, &one, f, VirtualCorrections::default()).unwrap();
    let wide = yield_bounds(&smn, &one, f, VirtualCorrections { w: 0.01, eps: 0.02 }).unwrap();
    assert!(base.lower > 0.02 && base.upper < 0.97, "interval must be interior for this check: {base:?}");
    assert!((base.lower - wide.lower - 0.02).abs() < 1e-7);
    assert!((wide.upper - base.upper - 0.03).abs() < 1e-7);
    assert!(wide.flags.w_virtual && wide.flags.eps_virtual);
}

#[test]
fn full_outside_weight_makes_the_upper_side_vacuous() {
    let p = params(0.0);
    let stats = simulate_statistics(&p).unwrap();
    let povms = bob_povms(p.t_x, N).unwrap();
    let smn = build_smn(&relaxed_instance(Signal::Zero, 1.0, D, N, p.t_x, &povms, &stats).unwrap()).unwrap();
    let one = FockKet::basis(&ModeSpace::single(D), &[1]).unwrap().projector();
    let b = general_povm_yield_bounds(&smn, &one, &povms[Event::Multi.index()], 1.0, VirtualCorrections::default()).unwrap();
    assert_eq!(b.upper, 1.0);
    assert!(b.flags.w_outside);
}

#[test]
fn standard_lp_brackets_the_single_photon_yield() {
    let eta: f64 = 0.3;
    let mus = [0.5, 0.1, 0.0];
    let gamma: Vec<f64> = mus.iter().map(|&m| 1.0 - (-eta * m).exp()).collect();
    let y1 = standard_decoy_lp(&mus, &gamma, 8, 1).unwrap();
    assert!(y1.lower - 1e-8 <= eta && eta <= y1.upper + 1e-8, "{y1:?}");
    assert!(y1.upper - y1.lower < 0.5);
    // The vacuum intensity pins the dark yield.
    let y0 = standard_decoy_lp(&mus, &gamma, 8, 0).unwrap();
    assert!(y0.upper <= 1e-6, "{y0:?}");
}

#[test]
fn full_variant_brackets_the_encoded_block_statistics() {
    let (d, n) = (2u32, 1u32);
    let p = params(0.0);
    let stats = simulate_statistics(&p).unwrap();
    let povms = bob_povms(p.t_x, n).unwrap();
    let budget = model_budget(p.signal_intensity, 1.0, d);
    let blocks = approx_eigendecomposition(&model_state(p.signal_intensity, 1.0, d).unwrap(), &budget, 2).unwrap();
    let setup = DecoySetup { q: 1.0, d, n, t_x: p.t_x, povms: &povms, stats: &stats, variant: DecoyVariant::Full };
    let y = block_yields(&setup, &blocks).unwrap();
    for s in Signal::ALL {
        let v = preparation_isometry(s, d).unwrap();
        for (k, b) in blocks.iter().enumerate() {
            let out = loss_channel(p.transmittance(), &v.conjugate(&b.vector.projector()).unwrap())
                .unwrap()
                .compress(&povms[0].space)
                .unwrap();
            for (e, f) in povms.iter().enumerate() {
                let truth = f.trace_with(&out).unwrap().re;
                let bound = y.events[s.index()][k][e];
                assert!(bound.lower - 1e-7 <= truth && truth <= bound.upper + 1e-7);
            }
        }
    }
    assert!(y.all_certified());
}
