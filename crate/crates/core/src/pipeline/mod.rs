//! Batch pipeline: characterise the source, simulate statistics, bound the decoy
//! statistics of every eigenblock, and bound the key rate. Results are written as CSV.

mod config;
mod report;

pub use config::{LaserConfig, OutputConfig, ProtocolConfig, RunConfig, SolverConfig, Source, SweepConfig, TruncationConfig};
pub use report::{
    format_number, write_characterisation_csv, write_decoy_csv, write_keyrate_csv, write_statistics_csv, CSV_VERSION,
};

use rayon::prelude::*;

use crate::approx_diag::{approx_eigendecomposition, model_budget, EigenBlock};
use crate::decoy::{block_yields, BlockYields, DecoySetup};
use crate::error::Result;
use crate::keyrate::{delta_leak, solve_blocks, total_keyrate, BlockSpec, KeyRateSummary};
use crate::laser::{model_state, q_from_visibility, PhaseModel};
use crate::protocol::{bob_povms, simulate_statistics, weight_outside_bound, Signal, Statistics};

/// Degree of phase randomisation implied by the configured visibility under one model.
#[derive(Clone, Debug, PartialEq)]
pub struct Characterisation {
    pub model: PhaseModel,
    pub visibility: f64,
    pub q: f64,
}

/// `q` under every configured phase model; empty when `q` is given explicitly.
pub fn characterise(cfg: &RunConfig) -> Result<Vec<Characterisation>> {
    let Some(v) = cfg.laser.visibility else { return Ok(Vec::new()) };
    cfg.laser
        .phase_models
        .iter()
        .map(|&model| Ok(Characterisation { model, visibility: v, q: q_from_visibility(v, model)? }))
        .collect()
}

/// Simulated loss-only statistics at the configured signal intensity.
pub fn simulate(cfg: &RunConfig, distance_km: f64) -> Result<Statistics> {
    simulate_statistics(&cfg.params(cfg.protocol.mu_s, distance_km))
}

/// Decoy analysis of one operating point.
#[derive(Clone, Debug)]
pub struct DecoyReport {
    pub source: Source,
    pub distance_km: f64,
    pub mu_s: f64,
    pub eps_proj: f64,
    pub blocks: Vec<EigenBlock>,
    pub yields: BlockYields,
    pub stats: Statistics,
    /// Bound on the output weight outside the measurement projection, per intensity,
    /// maximised over signals.
    pub w_n: Vec<f64>,
}

pub fn decoy_point(cfg: &RunConfig, source: &Source, mu_s: f64, distance_km: f64) -> Result<DecoyReport> {
    let params = cfg.params(mu_s, distance_km);
    let t = &cfg.truncation;
    let stats = simulate_statistics(&params)?;
    let povms = bob_povms(params.t_x, t.n)?;
    let budget = model_budget(mu_s, source.q, t.d);
    let blocks = approx_eigendecomposition(&model_state(mu_s, source.q, t.d)?, &budget, t.blocks)?;
    let setup = DecoySetup {
        q: source.q,
        d: t.d,
        n: t.n,
        t_x: params.t_x,
        povms: &povms,
        stats: &stats,
        variant: cfg.solver.decoy_variant,
    };
    let yields = block_yields(&setup, &blocks)?;
    let w_n = (0..stats.intensities.len())
        .map(|k| Signal::ALL.iter().map(|&s| weight_outside_bound(stats.cross_click(s, k), t.n, params.t_x)).fold(0.0, f64::max))
        .collect();
    Ok(DecoyReport { source: source.clone(), distance_km, mu_s, eps_proj: budget.eps_proj, blocks, yields, stats, w_n })
}

/// Certified key rate of one operating point with its correction ledger.
#[derive(Clone, Debug)]
pub struct KeyRatePoint {
    pub source: Source,
    pub distance_km: f64,
    pub mu_s: f64,
    pub eta: f64,
    pub eps_proj: f64,
    pub intensities: Vec<f64>,
    pub w_n: Vec<f64>,
    /// Eigenvalue of each kept block.
    pub block_values: Vec<f64>,
    pub summary: KeyRateSummary,
    pub decoy_max_gap: f64,
    pub decoy_max_margin: f64,
    /// Whether every decoy interval and every block bound came from a certified solve.
    pub certified: bool,
}

fn keyrate_at(cfg: &RunConfig, source: &Source, mu_s: f64, distance_km: f64) -> Result<KeyRatePoint> {
    let report = decoy_point(cfg, source, mu_s, distance_km)?;
    let povms = bob_povms(cfg.protocol.t_x, cfg.truncation.n)?;
    let specs = report
        .blocks
        .iter()
        .map(|b| BlockSpec::from_decoy(b, report.eps_proj, &cfg.protocol.priors, &report.yields, cfg.truncation.d))
        .collect::<Result<Vec<_>>>()?;
    let rates = solve_blocks(specs, &povms, &cfg.frank_wolfe())?;
    let leak = delta_leak(&report.stats, &cfg.protocol.priors, cfg.protocol.f_ec);
    let summary = total_keyrate(&rates, leak);
    let yields = &report.yields;
    let all = yields.events.iter().flatten().flatten().chain(yields.in_projection.iter().flatten());
    let decoy_max_margin = all.map(|b| b.margin).fold(0.0, f64::max);
    let usable_certified = report.blocks.iter().zip(&rates).all(|(b, r)| !b.usable || r.weight <= 0.0 || r.certified);
    Ok(KeyRatePoint {
        source: source.clone(),
        distance_km,
        mu_s,
        eta: cfg.params(mu_s, distance_km).transmittance(),
        eps_proj: report.eps_proj,
        intensities: report.stats.intensities.clone(),
        w_n: report.w_n.clone(),
        block_values: report.blocks.iter().map(|b| b.value).collect(),
        summary,
        decoy_max_gap: yields.max_gap(),
        decoy_max_margin,
        certified: yields.all_certified() && usable_certified,
    })
}

/// Key rate of one source at one distance, the best over the signal-intensity candidates.
pub fn keyrate_point(cfg: &RunConfig, source: &Source, distance_km: f64) -> Result<KeyRatePoint> {
    let mut best: Option<KeyRatePoint> = None;
    for mu in cfg.mu_candidates() {
        let p = keyrate_at(cfg, source, mu, distance_km)?;
        if best.as_ref().map_or(true, |b| p.summary.total > b.summary.total) {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one signal intensity"))
}

/// Every `(source, distance)` point, ordered by source then distance.
///
/// Points run on the current rayon pool; the order of the result does not depend on it.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<KeyRatePoint>> {
    let sources = cfg.sources()?;
    let jobs: Vec<(&Source, f64)> =
        sources.iter().flat_map(|s| cfg.sweep.distances.iter().map(move |&x| (s, x))).collect();
    jobs.par_iter().map(|(s, x)| keyrate_point(cfg, s, *x)).collect()
}
