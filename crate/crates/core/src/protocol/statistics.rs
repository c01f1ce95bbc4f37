use num_complex::Complex64;

use super::network::{bob_network, modes, Event};
use super::params::{ProtocolParams, Signal};
use crate::error::Result;
use crate::fock::all_patterns;

/// Observed statistics of every `(signal, intensity)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Statistics {
    /// Distinct intensities, signal first.
    pub intensities: Vec<f64>,
    /// `gamma[signal][intensity][event]`.
    pub gamma: Vec<Vec<[f64; 5]>>,
    /// `cross_click[signal][intensity]`.
    pub cross_click: Vec<Vec<f64>>,
}

impl Statistics {
    pub fn gamma(&self, signal: Signal, intensity: usize, event: Event) -> f64 {
        self.gamma[signal.index()][intensity][event.index()]
    }

    pub fn cross_click(&self, signal: Signal, intensity: usize) -> f64 {
        self.cross_click[signal.index()][intensity]
    }

    pub fn intensity_index(&self, mu: f64) -> Option<usize> {
        self.intensities.iter().position(|&m| m == mu)
    }
}

/// Input amplitudes `(early, late)` of a coherent base state of mean photon number `mu`.
pub fn signal_amplitudes(signal: Signal, mu: f64) -> [Complex64; 2] {
    let a = mu.sqrt();
    let h = (mu / 2.0).sqrt();
    let c = |v: f64| Complex64::new(v, 0.0);
    match signal {
        Signal::Zero => [c(0.0), c(a)],
        Signal::One => [c(a), c(0.0)],
        Signal::Plus => [c(h), c(h)],
    }
}

/// Event probabilities and cross-click probability for coherent input amplitudes.
pub fn coherent_statistics(amplitudes: [Complex64; 2], t_x: f64, eta: f64) -> ([f64; 5], f64) {
    let net = bob_network(t_x, eta);
    let out: Vec<Complex64> =
        (0..net.mode_map.nrows()).map(|o| net.mode_map[(o, 0)] * amplitudes[0] + net.mode_map[(o, 1)] * amplitudes[1]).collect();
    let mean = |m: usize| out[m].norm_sqr();
    let click = |m: f64| -(-m).exp_m1();
    let p = [click(mean(modes::Z_EARLY)), click(mean(modes::Z_LATE)), click(mean(modes::X_MINUS_MIDDLE))];
    let mut gamma = [0.0; 5];
    for pattern in all_patterns(3) {
        let prob: f64 = pattern.iter().zip(&p).map(|(&c, &pb)| if c { pb } else { 1.0 - pb }).product();
        gamma[Event::classify(&pattern).index()] += prob;
    }
    let any_z = click(mean(modes::Z_EARLY) + mean(modes::Z_LATE));
    let any_outer = click(mean(modes::X_MINUS_OUTER_EARLY) + mean(modes::X_MINUS_OUTER_LATE));
    (gamma, any_z * any_outer)
}

/// Statistics of the loss-only channel with ideal threshold detectors.
pub fn simulate_statistics(params: &ProtocolParams) -> Result<Statistics> {
    params.validate()?;
    let eta = params.transmittance();
    let intensities = params.intensities();
    let mut gamma = Vec::with_capacity(3);
    let mut cross = Vec::with_capacity(3);
    for s in Signal::ALL {
        let mut g_row = Vec::with_capacity(intensities.len());
        let mut c_row = Vec::with_capacity(intensities.len());
        for &mu in &intensities {
            let (g, cc) = coherent_statistics(signal_amplitudes(s, mu), params.t_x, eta);
            g_row.push(g);
            c_row.push(cc);
        }
        gamma.push(g_row);
        cross.push(c_row);
    }
    Ok(Statistics { intensities, gamma, cross_click: cross })
}
