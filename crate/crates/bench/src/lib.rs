//! Fixtures shared by the benchmarks. Each builds one representative input at the
//! default truncation so timings track the cost of a real sweep point.

use num_complex::Complex64;
use pqkd_core::decoy::{build_smn, relaxed_instance, Smn};
use pqkd_core::fock::linalg::kron;
use pqkd_core::fock::{FockKet, ModeSpace};
use pqkd_core::keyrate::{build_objective_map, ObjectiveMap};
use pqkd_core::optim::{Coeff, ConicProblem};
use pqkd_core::protocol::{bob_povms, simulate_statistics};
use pqkd_core::{CMatrix, DensityOperator, ProtocolParams, Signal, Statistics};

pub const D: u32 = 10;
pub const N: u32 = 2;

pub fn params() -> ProtocolParams {
    ProtocolParams { distance_km: 25.0, ..Default::default() }
}

pub fn povms() -> Vec<DensityOperator> {
    bob_povms(params().t_x, N).expect("default POVMs")
}

pub fn statistics() -> Statistics {
    simulate_statistics(&params()).expect("default statistics")
}

/// Decoy feasible set of the key-0 signal.
pub fn decoy_smn(q: f64) -> Smn {
    let p = params();
    build_smn(&relaxed_instance(Signal::Zero, q, D, N, p.t_x, &povms(), &statistics()).expect("instance")).expect("program")
}

/// Decoy program for the single-photon ZLate statistic, ready to solve.
pub fn decoy_problem(q: f64) -> ConicProblem {
    let smn = decoy_smn(q);
    let povms = povms();
    let sigma = FockKet::basis(&ModeSpace::single(D), &[1]).expect("Fock state").projector();
    let mut problem = smn.problems[0].clone();
    let objective = kron(&sigma.matrix.transpose(), &povms[2].matrix);
    problem.set_objective(vec![(smn.choi, Coeff::auto(objective))]);
    problem
}

pub fn objective_map() -> ObjectiveMap {
    build_objective_map(&povms()).expect("objective map")
}

/// Full-rank state on the objective's input, deterministic.
pub fn interior_state(dim: usize) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(((i * 7 + j * 3) % 11) as f64 / 11.0, ((i + 2 * j) % 5) as f64 / 10.0));
    let m = &a * a.adjoint() + CMatrix::identity(dim, dim).scale(0.05);
    let t = m.trace().re;
    m.unscale(t)
}
