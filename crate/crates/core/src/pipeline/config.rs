use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoy::DecoyVariant;
use crate::error::{Error, Result};
use crate::keyrate::FrankWolfe;
use crate::laser::{q_from_visibility, PhaseModel};
use crate::protocol::ProtocolParams;

/// Full run configuration. Every key has a default, so an empty file is valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub laser: LaserConfig,
    pub protocol: ProtocolConfig,
    pub truncation: TruncationConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// The source: either a measured visibility or an explicit degree of phase randomisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserConfig {
    pub visibility: Option<f64>,
    pub q: Option<f64>,
    /// Phase models turning the visibility into `q`, one source each.
    pub phase_models: Vec<PhaseModel>,
    /// Also evaluate a perfectly phase-randomised reference source.
    pub include_ideal: bool,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self { visibility: Some(0.0019), q: None, phase_models: PhaseModel::ALL.to_vec(), include_ideal: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub mu_s: f64,
    /// Candidate signal intensities; the best certified rate per point is kept.
    pub mu_grid: Option<Vec<f64>>,
    pub decoys: Vec<f64>,
    pub priors: [f64; 3],
    /// Fibre attenuation in dB/km.
    pub attenuation: f64,
    pub t_x: f64,
    /// Error-correction efficiency.
    pub f_ec: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let p = ProtocolParams::default();
        Self {
            mu_s: p.signal_intensity,
            mu_grid: None,
            decoys: p.decoy_intensities,
            priors: p.priors,
            attenuation: p.attenuation_db_per_km,
            t_x: p.t_x,
            f_ec: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// Photon cutoff of the source projection.
    pub d: u32,
    /// Photon cutoff of the measurement projection.
    pub n: u32,
    /// Eigenblocks kept in the key rate.
    pub blocks: usize,
    /// Cutoff of the dense reference used by diagnostics.
    pub d_oracle: u32,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { d: 10, n: 2, blocks: 3, d_oracle: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub decoy_variant: DecoyVariant,
    pub fw_max_iterations: usize,
    pub fw_min_improvement: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let fw = FrankWolfe::default();
        Self { decoy_variant: DecoyVariant::Relaxed, fw_max_iterations: fw.max_iterations, fw_min_improvement: fw.min_improvement }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub distances: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { distances: vec![0.0, 25.0, 50.0, 75.0, 100.0] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Default destination when none is given on the command line.
    pub path: Option<PathBuf>,
}

/// A source to evaluate: a label and its degree of phase randomisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Source {
    pub label: String,
    pub q: f64,
}

impl RunConfig {
    /// Parses TOML text. A visibility given explicitly overrides the default one, and
    /// an explicit `q` clears the default visibility.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg: RunConfig = raw.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let laser = raw.get("laser");
        let has = |key: &str| laser.and_then(|l| l.get(key)).is_some();
        if has("q") && !has("visibility") {
            cfg.laser.visibility = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (self.laser.visibility, self.laser.q) {
            (Some(_), Some(_)) => return bad("give exactly one of laser.visibility and laser.q, not both".into()),
            (None, None) => return bad("give exactly one of laser.visibility and laser.q".into()),
            (Some(v), None) if !(0.0..=1.0).contains(&v) => return bad(format!("laser.visibility = {v} outside [0, 1]")),
            (None, Some(q)) if !(0.0..=1.0).contains(&q) => return bad(format!("laser.q = {q} outside [0, 1]")),
            _ => {}
        }
        if self.laser.visibility.is_some() && self.laser.phase_models.is_empty() {
            return bad("laser.phase_models is empty".into());
        }
        let t = &self.truncation;
        if !(t.n >= 1 && t.d >= t.n) {
            return bad(format!("truncation needs d >= n >= 1, got d = {}, n = {}", t.d, t.n));
        }
        if t.blocks == 0 || t.blocks > t.d as usize + 1 {
            return bad(format!("truncation.blocks = {} outside [1, d + 1]", t.blocks));
        }
        if let Some(&x) = self.sweep.distances.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return bad(format!("sweep distance {x} is not a finite non-negative number"));
        }
        if !(self.protocol.f_ec >= 1.0) {
            return bad(format!("protocol.f_ec = {} below the Shannon limit 1", self.protocol.f_ec));
        }
        if let Some(grid) = &self.protocol.mu_grid {
            if grid.is_empty() || grid.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
                return bad("protocol.mu_grid must be non-empty and positive".into());
            }
        }
        if !(self.protocol.mu_s > 0.0) {
            return bad(format!("protocol.mu_s = {} must be positive", self.protocol.mu_s));
        }
        self.params(self.protocol.mu_s, 0.0).validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Protocol parameters at one signal intensity and distance.
    pub fn params(&self, mu_s: f64, distance_km: f64) -> ProtocolParams {
        ProtocolParams {
            signal_intensity: mu_s,
            decoy_intensities: self.protocol.decoys.clone(),
            priors: self.protocol.priors,
            attenuation_db_per_km: self.protocol.attenuation,
            distance_km,
            t_x: self.protocol.t_x,
        }
    }

    /// Signal intensities to evaluate per point.
    pub fn mu_candidates(&self) -> Vec<f64> {
        self.protocol.mu_grid.clone().unwrap_or_else(|| vec![self.protocol.mu_s])
    }

    /// Sources in evaluation order: one per phase model, then the ideal reference.
    pub fn sources(&self) -> Result<Vec<Source>> {
        let mut out = Vec::new();
        match (self.laser.visibility, self.laser.q) {
            (_, Some(q)) => out.push(Source { label: "explicit".into(), q }),
            (Some(v), None) => {
                for &m in &self.laser.phase_models {
                    out.push(Source { label: m.name().into(), q: q_from_visibility(v, m)? });
                }
            }
            (None, None) => return Err(Error::Config("no source given".into())),
        }
        if self.laser.include_ideal && !out.iter().any(|s| s.q == 1.0) {
            out.push(Source { label: "ideal".into(), q: 1.0 });
        }
        Ok(out)
    }

    pub fn frank_wolfe(&self) -> FrankWolfe {
        FrankWolfe {
            max_iterations: self.solver.fw_max_iterations,
            min_improvement: self.solver.fw_min_improvement,
            ..FrankWolfe::default()
        }
    }

    /// Hex SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("configuration serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sources().unwrap().len(), 3);
    }

    #[test]
    fn explicit_q_replaces_visibility() {
        let cfg = RunConfig::from_toml("laser.q = 0.9\nlaser.include_ideal = false").unwrap();
        assert_eq!(cfg.sources().unwrap(), vec![Source { label: "explicit".into(), q: 0.9 }]);
    }

    #[test]
    fn both_visibility_and_q_is_rejected() {
        assert!(matches!(RunConfig::from_toml("laser.q = 0.9\nlaser.visibility = 0.01"), Err(Error::Config(_))));
    }

    #[test]
    fn truncation_order_is_checked() {
        assert!(matches!(RunConfig::from_toml("[truncation]\nd = 2\nn = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("truncation.n = 0"), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_and_negative_distances_are_rejected() {
        assert!(RunConfig::from_toml("laser.colour = 1").is_err());
        assert!(RunConfig::from_toml("sweep.distances = [0, -5]").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.protocol.t_x = 0.2;
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
