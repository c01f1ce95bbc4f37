use num_complex::Complex64;

use super::params::Signal;
use crate::error::Result;
use crate::fock::{linear_network_isometry, CMatrix, DensityOperator, FockMap, ObservedBin, ThresholdMeasurement};

/// Output-mode indices of Bob's receiver.
pub mod modes {
    pub const Z_EARLY: usize = 0;
    pub const Z_LATE: usize = 1;
    pub const X_MINUS_OUTER_EARLY: usize = 2;
    pub const X_MINUS_MIDDLE: usize = 3;
    pub const X_MINUS_OUTER_LATE: usize = 4;
    pub const X_PLUS_OUTER_EARLY: usize = 5;
    pub const X_PLUS_MIDDLE: usize = 6;
    pub const X_PLUS_OUTER_LATE: usize = 7;
    pub const LOSS_EARLY: usize = 8;
    pub const LOSS_LATE: usize = 9;
}

/// Bob's events: the five outcomes of the three observed detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    NoClick,
    ZEarly,
    ZLate,
    XMinus,
    Multi,
}

impl Event {
    pub const ALL: [Event; 5] = [Event::NoClick, Event::ZEarly, Event::ZLate, Event::XMinus, Event::Multi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Event::NoClick => "no-click",
            Event::ZEarly => "z-early",
            Event::ZLate => "z-late",
            Event::XMinus => "x-minus",
            Event::Multi => "multi",
        }
    }

    /// Event of a click vector over `[Z-early, Z-late, X-minus middle]`.
    pub fn classify(clicks: &[bool]) -> Event {
        let count = clicks.iter().filter(|&&c| c).count();
        match count {
            0 => Event::NoClick,
            1 if clicks[0] => Event::ZEarly,
            1 if clicks[1] => Event::ZLate,
            1 => Event::XMinus,
            _ => Event::Multi,
        }
    }

    /// Key bit announced by Bob, if any.
    pub fn key_bit(self) -> Option<usize> {
        match self {
            Event::ZLate => Some(0),
            Event::ZEarly => Some(1),
            _ => None,
        }
    }
}

/// Bob's passive receiver as a linear network on the two temporal modes `(early, late)`.
#[derive(Clone, Debug)]
pub struct BobNetwork {
    /// `n_out x 2`; loss modes are present only when `eta < 1`.
    pub mode_map: CMatrix,
    /// Detectors defining the event schema: Z-early, Z-late, X-minus middle.
    pub observed: Vec<ObservedBin>,
    pub t_x: f64,
    pub eta: f64,
}

/// Bob's receiver preceded by a pure-loss channel of transmittance `eta`.
pub fn bob_network(t_x: f64, eta: f64) -> BobNetwork {
    use modes::*;
    let n_out = if eta < 1.0 { 10 } else { 8 };
    let z = ((1.0 - t_x) * eta).sqrt();
    let x = (t_x * eta).sqrt() / 2.0;
    let loss = (1.0 - eta).max(0.0).sqrt();
    let mut m = CMatrix::zeros(n_out, 2);
    let c = |v: f64| Complex64::new(v, 0.0);
    m[(Z_EARLY, 0)] = c(z);
    m[(Z_LATE, 1)] = c(z);
    m[(X_MINUS_OUTER_EARLY, 0)] = c(x);
    m[(X_MINUS_MIDDLE, 0)] = c(x);
    m[(X_MINUS_MIDDLE, 1)] = c(-x);
    m[(X_MINUS_OUTER_LATE, 1)] = c(x);
    m[(X_PLUS_OUTER_EARLY, 0)] = c(x);
    m[(X_PLUS_MIDDLE, 0)] = c(x);
    m[(X_PLUS_MIDDLE, 1)] = c(x);
    m[(X_PLUS_OUTER_LATE, 1)] = c(x);
    if n_out == 10 {
        m[(LOSS_EARLY, 0)] = c(loss);
        m[(LOSS_LATE, 1)] = c(loss);
    }
    BobNetwork { mode_map: m, observed: event_bins(), t_x, eta }
}

fn event_bins() -> Vec<ObservedBin> {
    vec![
        ObservedBin::new("z-early", vec![modes::Z_EARLY]),
        ObservedBin::new("z-late", vec![modes::Z_LATE]),
        ObservedBin::new("x-minus-middle", vec![modes::X_MINUS_MIDDLE]),
    ]
}

/// Detectors used by the cross-click observable: both Z bins and both X-minus outer bins.
pub fn cross_click_bins() -> Vec<ObservedBin> {
    vec![
        ObservedBin::new("z-early", vec![modes::Z_EARLY]),
        ObservedBin::new("z-late", vec![modes::Z_LATE]),
        ObservedBin::new("x-minus-outer-early", vec![modes::X_MINUS_OUTER_EARLY]),
        ObservedBin::new("x-minus-outer-late", vec![modes::X_MINUS_OUTER_LATE]),
    ]
}

/// Bob's five event POVMs on inputs with at most `n` photons (lossless receiver).
pub fn bob_povms(t_x: f64, n: u32) -> Result<Vec<DensityOperator>> {
    let net = bob_network(t_x, 1.0);
    let meas = ThresholdMeasurement::new(&net.mode_map, &net.observed, n)?;
    Ok(Event::ALL.iter().map(|&e| meas.event(|c| Event::classify(c) == e)).collect())
}

/// POVM of a cross click: some Z click together with some X-minus outer-bin click.
pub fn cross_click_povm(t_x: f64, n: u32) -> Result<DensityOperator> {
    let net = bob_network(t_x, 1.0);
    let meas = ThresholdMeasurement::new(&net.mode_map, &cross_click_bins(), n)?;
    Ok(meas.event(|c| (c[0] || c[1]) && (c[2] || c[3])))
}

/// Preparation isometry from one base mode into the two temporal modes `(early, late)`.
pub fn preparation_isometry(signal: Signal, cutoff: u32) -> Result<FockMap> {
    let c = |v: f64| Complex64::new(v, 0.0);
    let s = 0.5f64.sqrt();
    let map = match signal {
        Signal::Zero => [c(0.0), c(1.0)],
        Signal::One => [c(1.0), c(0.0)],
        Signal::Plus => [c(s), c(s)],
    };
    linear_network_isometry(&CMatrix::from_column_slice(2, 1, &map), cutoff)
}

/// Pure-loss channel of transmittance `eta` on every mode of a total-cutoff state.
pub fn loss_channel(eta: f64, state: &DensityOperator) -> Result<DensityOperator> {
    let n_modes = state.space.n_modes();
    let cutoff = state.space.cutoff();
    let mut m = CMatrix::zeros(2 * n_modes, n_modes);
    for j in 0..n_modes {
        m[(j, j)] = Complex64::new(eta.sqrt(), 0.0);
        m[(n_modes + j, j)] = Complex64::new((1.0 - eta).sqrt(), 0.0);
    }
    let v = linear_network_isometry(&m, cutoff)?;
    let embedded = state.embed(&v.from)?;
    let out = v.conjugate(&embedded)?;
    out.partial_trace(&(0..n_modes).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_ket, FockKet, ModeSpace};

    #[test]
    fn network_is_isometric() {
        for (t, eta) in [(0.1, 1.0), (0.3, 0.2), (0.0, 1.0)] {
            let net = bob_network(t, eta);
            let g = net.mode_map.adjoint() * &net.mode_map;
            assert!((g - CMatrix::identity(2, 2)).camax() < 1e-15);
        }
    }

    #[test]
    fn no_split_routes_everything_to_z() {
        let net = bob_network(0.0, 1.0);
        assert_eq!(net.mode_map[(modes::Z_EARLY, 0)].re, 1.0);
        assert_eq!(net.mode_map[(modes::X_MINUS_MIDDLE, 0)].re, 0.0);
    }

    #[test]
    fn equal_pulses_cancel_in_middle_bin() {
        let net = bob_network(0.1, 1.0);
        let out = &net.mode_map * CMatrix::from_column_slice(2, 1, &[Complex64::new(0.3, 0.0); 2]);
        assert_eq!(out[(modes::X_MINUS_MIDDLE, 0)].norm(), 0.0);
    }

    #[test]
    fn preparation_isometries() {
        for s in Signal::ALL {
            let v = preparation_isometry(s, 6).unwrap();
            assert!(v.isometry_defect() < 1e-12);
            let vac = v.apply_ket(&FockKet::basis(&v.from, &[0]).unwrap()).unwrap();
            assert_eq!(vac.amplitudes[0].re, 1.0);
        }
        let v = preparation_isometry(Signal::Plus, 2).unwrap();
        let one = v.apply_ket(&FockKet::basis(&v.from, &[1]).unwrap()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((one.amplitudes[v.to.index_of(&[1, 0]).unwrap()].re - s).abs() < 1e-15);
        assert!((one.amplitudes[v.to.index_of(&[0, 1]).unwrap()].re - s).abs() < 1e-15);
    }

    #[test]
    fn plus_of_coherent_state_is_product() {
        let n = 8;
        let beta = 0.9;
        let v = preparation_isometry(Signal::Plus, n).unwrap();
        let out = v.apply_ket(&coherent_ket(Complex64::new(beta, 0.0), n)).unwrap();
        let half = coherent_ket(Complex64::new(beta * 0.5f64.sqrt(), 0.0), n);
        for (i, occ) in v.to.basis().iter().enumerate() {
            let expect = half.amplitudes[occ[0] as usize] * half.amplitudes[occ[1] as usize];
            assert!((out.amplitudes[i] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn mean_photon_number_is_preserved() {
        let n = 12;
        let mu: f64 = 0.5;
        let base = coherent_ket(Complex64::new(mu.sqrt(), 0.0), n);
        for s in Signal::ALL {
            let v = preparation_isometry(s, n).unwrap();
            let out = v.apply_ket(&base).unwrap();
            let mean: f64 =
                (0..v.to.dim()).map(|i| out.amplitudes[i].norm_sqr() * v.to.photons(i) as f64).sum();
            let mean_in: f64 = (0..=n as usize).map(|k| base.amplitudes[k].norm_sqr() * k as f64).sum();
            assert!((mean - mean_in).abs() < 1e-14);
        }
    }

    #[test]
    fn bob_povms_are_complete() {
        let povms = bob_povms(0.1, 3).unwrap();
        let mut sum = CMatrix::zeros(povms[0].dim(), povms[0].dim());
        for p in &povms {
            sum += &p.matrix;
        }
        assert!((sum - CMatrix::identity(10, 10)).camax() < 1e-10);
    }

    #[test]
    fn loss_channel_on_single_photon() {
        let s = ModeSpace::total(2, 2);
        let rho = FockKet::basis(&s, &[1, 0]).unwrap().projector();
        let out = loss_channel(0.3, &rho).unwrap();
        assert!((out.matrix[(0, 0)].re - 0.7).abs() < 1e-15);
        let i = out.space.index_of(&[1, 0]).unwrap();
        assert!((out.matrix[(i, i)].re - 0.3).abs() < 1e-15);
        assert_eq!(out.space, s);
    }
}
