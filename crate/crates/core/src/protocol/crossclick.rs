/// Probability that `n` photons produce a cross click (a Z click together with an
/// X-minus outer-bin click), independent of how they are split between time bins.
///
/// `f(n) = 1 - tⁿ - (1 - t/4)ⁿ + (3t/4)ⁿ`, non-decreasing in `n`, zero for `n ≤ 1`.
pub fn cross_click_prob_fock(n: u32, t: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let n = n as i32;
    (1.0 - t.powi(n) - (1.0 - t / 4.0).powi(n) + (0.75 * t).powi(n)).clamp(0.0, 1.0)
}

/// Upper bound on the probability that more than `n` photons reach Bob, from the
/// observed cross-click probability. Returns 1 when the bound is vacuous.
pub fn weight_outside_bound(p_cc: f64, n: u32, t: f64) -> f64 {
    let f = cross_click_prob_fock(n + 1, t);
    if !(f > 0.0) {
        return 1.0;
    }
    (p_cc.max(0.0) / f).min(1.0)
}
