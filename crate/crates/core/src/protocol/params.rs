use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three signal encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signal {
    /// Photon in the late bin; key bit 0.
    Zero,
    /// Photon in the early bin; key bit 1.
    One,
    /// Equal superposition of both bins.
    Plus,
}

impl Signal {
    pub const ALL: [Signal; 3] = [Signal::Zero, Signal::One, Signal::Plus];

    pub fn index(self) -> usize {
        match self {
            Signal::Zero => 0,
            Signal::One => 1,
            Signal::Plus => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Signal::Zero => "0",
            Signal::One => "1",
            Signal::Plus => "+",
        }
    }

    pub fn parse(s: &str) -> Result<Signal> {
        match s {
            "0" => Ok(Signal::Zero),
            "1" => Ok(Signal::One),
            "+" | "plus" => Ok(Signal::Plus),
            _ => Err(Error::InvalidArgument(format!("unknown signal label {s:?}"))),
        }
    }
}

/// Physical and protocol parameters of one operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub signal_intensity: f64,
    pub decoy_intensities: Vec<f64>,
    /// Probability of each signal, indexed by [`Signal::index`].
    pub priors: [f64; 3],
    pub attenuation_db_per_km: f64,
    pub distance_km: f64,
    /// Fraction of light routed to the interferometer.
    pub t_x: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            signal_intensity: 0.5,
            decoy_intensities: vec![0.0, 0.5],
            priors: [1.0 / 3.0; 3],
            attenuation_db_per_km: 0.16,
            distance_km: 0.0,
            t_x: 0.1,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.priors.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument(format!("priors {:?} are not a distribution", self.priors)));
        }
        if !(self.t_x > 0.0 && self.t_x < 1.0) {
            return Err(Error::InvalidArgument(format!("t_x = {} outside (0,1)", self.t_x)));
        }
        if !(self.attenuation_db_per_km >= 0.0) || !(self.distance_km >= 0.0) {
            return Err(Error::InvalidArgument("attenuation and distance must be non-negative".into()));
        }
        if self.intensities().iter().any(|&mu| !(mu >= 0.0) || !mu.is_finite()) {
            return Err(Error::InvalidArgument("intensities must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Channel transmittance `10^{-αL/10}`.
    pub fn transmittance(&self) -> f64 {
        transmittance(self.attenuation_db_per_km, self.distance_km)
    }

    /// Distinct intensities, signal first, decoys in the given order.
    pub fn intensities(&self) -> Vec<f64> {
        let mut out = vec![self.signal_intensity];
        for &mu in &self.decoy_intensities {
            if !out.contains(&mu) {
                out.push(mu);
            }
        }
        out
    }

    pub fn with_distance(&self, distance_km: f64) -> Self {
        Self { distance_km, ..self.clone() }
    }
}

pub fn transmittance(attenuation_db_per_km: f64, distance_km: f64) -> f64 {
    10f64.powf(-attenuation_db_per_km * distance_km / 10.0)
}
