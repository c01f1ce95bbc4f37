use crate::approx_diag::model_budget;
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, ModeSpace};
use crate::laser::model_state;
use crate::protocol::{preparation_isometry, weight_outside_bound, Signal, Statistics};

/// Finite-projection corrections attached to one actual state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Corrections {
    /// Weight of the state outside the state-space projection.
    pub w_m: f64,
    /// Off-diagonal cost of the state-space projection.
    pub eps_m: f64,
    /// Weight of the channel output outside the measurement-space projection.
    pub w_n: f64,
}

impl Corrections {
    /// Interval the projected statistic must lie in, given the observed value.
    pub fn interval(&self, gamma: f64) -> (f64, f64) {
        (gamma - self.w_n - self.w_m - 2.0 * self.eps_m, gamma + self.eps_m)
    }
}

/// One actual state with its observed statistics.
#[derive(Clone, Debug)]
pub struct DecoyRow {
    /// Projected state on the instance's state space.
    pub state: DensityOperator,
    /// Observed probability of each POVM element.
    pub gamma: Vec<f64>,
    pub corrections: Corrections,
    pub label: String,
}

/// Everything the finite decoy program needs: projected states, projected POVMs,
/// statistics, and correction terms.
#[derive(Clone, Debug)]
pub struct DecoyInstance {
    pub state_space: ModeSpace,
    /// Projected POVM elements on the measurement space, each commuting with its projection.
    pub povms: Vec<DensityOperator>,
    pub rows: Vec<DecoyRow>,
}

impl DecoyInstance {
    pub fn povm_space(&self) -> &ModeSpace {
        &self.povms[0].space
    }

    pub fn validate(&self) -> Result<()> {
        if self.povms.is_empty() {
            return Err(Error::InvalidArgument("decoy instance without POVM elements".into()));
        }
        let k = self.povm_space();
        if self.povms.iter().any(|p| p.space != *k) {
            return Err(Error::Dimension("POVM elements live on different spaces".into()));
        }
        for row in &self.rows {
            if row.state.space != self.state_space {
                return Err(Error::Dimension(format!("row {} is not on the state space", row.label)));
            }
            if row.gamma.len() != self.povms.len() {
                return Err(Error::Dimension(format!(
                    "row {} has {} statistics for {} POVM elements",
                    row.label,
                    row.gamma.len(),
                    self.povms.len()
                )));
            }
            let c = row.corrections;
            if !(c.w_m >= 0.0 && c.eps_m >= 0.0 && c.w_n >= 0.0) {
                return Err(Error::InvalidArgument(format!("row {} has negative corrections {c:?}", row.label)));
            }
        }
        Ok(())
    }
}

/// Corrections of the model laser at intensity `mu` with cross-click probability `p_cc`.
pub fn model_corrections(mu: f64, q: f64, d: u32, n: u32, t_x: f64, p_cc: f64) -> Corrections {
    let budget = model_budget(mu, q, d);
    Corrections { w_m: budget.weight, eps_m: budget.eps_proj, w_n: weight_outside_bound(p_cc, n, t_x) }
}

/// Per-signal instance with the preparation absorbed into the channel.
///
/// The state space is the single base mode with at most `d` photons. Only rows of
/// `signal` are kept, one per distinct intensity.
pub fn relaxed_instance(
    signal: Signal,
    q: f64,
    d: u32,
    n: u32,
    t_x: f64,
    povms: &[DensityOperator],
    stats: &Statistics,
) -> Result<DecoyInstance> {
    let state_space = ModeSpace::single(d);
    let mut rows = Vec::with_capacity(stats.intensities.len());
    for (k, &mu) in stats.intensities.iter().enumerate() {
        rows.push(DecoyRow {
            state: model_state(mu, q, d)?,
            gamma: stats.gamma[signal.index()][k].to_vec(),
            corrections: model_corrections(mu, q, d, n, t_x, stats.cross_click(signal, k)),
            label: format!("signal {} mu {mu}", signal.label()),
        });
    }
    let inst = DecoyInstance { state_space, povms: povms.to_vec(), rows };
    inst.validate()?;
    Ok(inst)
}

/// Instance over the two temporal modes with every signal's rows kept.
///
/// States are the encoded projected laser states. Encoding preserves photon number, so
/// the corrections equal those of the base state.
pub fn full_instance(
    q: f64,
    d: u32,
    n: u32,
    t_x: f64,
    povms: &[DensityOperator],
    stats: &Statistics,
) -> Result<DecoyInstance> {
    let state_space = ModeSpace::total(2, d);
    let mut rows = Vec::new();
    for s in Signal::ALL {
        let v = preparation_isometry(s, d)?;
        for (k, &mu) in stats.intensities.iter().enumerate() {
            rows.push(DecoyRow {
                state: v.conjugate(&model_state(mu, q, d)?)?,
                gamma: stats.gamma[s.index()][k].to_vec(),
                corrections: model_corrections(mu, q, d, n, t_x, stats.cross_click(s, k)),
                label: format!("signal {} mu {mu}", s.label()),
            });
        }
    }
    let inst = DecoyInstance { state_space, povms: povms.to_vec(), rows };
    inst.validate()?;
    Ok(inst)
}
