//! Fixed-threshold relay policies and the machinery that derives them.
//!
//! Replacing the dependent wake gaps by their i.i.d. idealization turns the
//! relay's stopping problem into one with a stationary solution: transmit as
//! soon as the best progress so far reaches a fixed threshold `alpha`. The
//! threshold is the unique fixed point of the one-step value function
//!
//! ```text
//! beta1(b) = E[max{b, Z}] - 1/(eta * K)
//! ```
//!
//! where `Z` is a candidate's progress, `K` the candidate count, and `eta`
//! the weight of progress against delay. Iterating the corresponding value
//! recursion ([`iterate_value`]) only confirms the fixed point, so the
//! runtime policy needs nothing beyond `alpha` itself.
//!
//! The two degenerate thresholds recover the class extremes: `alpha = 0`
//! stops at the first wake (first-forward) and the sentinel `alpha = 1`
//! waits for every candidate (max-forward). [`calibrate_threshold`] picks
//! the threshold whose closed-form mean progress hits a target, clamping to
//! those extremes when the target lies outside the achievable band.

use crate::analytics::sf_mean_progress;
use crate::error::{Error, Result};
use crate::geometry::ProgressModel;
use crate::numeric::interp_uniform;

/// Residual tolerance of the fixed-point bisection.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Mean-progress tolerance of the calibration bisection.
pub const CALIBRATION_TOL: f64 = 1e-6;
/// Values of `beta1(0)` at or below this count as "no positive fixed
/// point"; absorbs rounding when `eta` sits exactly on the cutoff.
const DEGENERATE_TOL: f64 = 1e-12;
const MAX_BISECT: usize = 200;

/// How a threshold was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdOrigin {
    /// Fixed point of the one-step value for this delay-progress multiplier.
    Multiplier(f64),
    /// Calibrated so the closed-form mean progress equals this target.
    TargetProgress(f64),
}

/// A stopping threshold on best progress, plus the context it was derived
/// in. `alpha = 1` is the wait-for-everyone sentinel (progress equal to 1
/// has probability zero); thresholds from [`solve_threshold`] always lie in
/// `[0, 1)` and satisfy `|beta1(alpha) - alpha| <=` [`FIXED_POINT_TOL`]
/// when positive.
#[derive(Debug, Clone, Copy)]
pub struct SfThreshold {
    pub alpha: f64,
    pub origin: ThresholdOrigin,
    pub node_count: usize,
    /// Multiplier at or below which the threshold collapses to zero and the
    /// policy degenerates to first-forward: `1 / (E[Z] * K)`.
    pub eta_cutoff: f64,
}

fn check_policy_inputs(node_count: usize, eta: f64) -> Result<f64> {
    if node_count == 0 {
        return Err(Error::Domain("candidate count must be positive".into()));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!(
            "progress multiplier must be positive, got {eta}"
        )));
    }
    Ok(1.0 / (eta * node_count as f64))
}

/// One-step value `beta1(b) = E[max{b, Z}] - 1/(eta * K)`: the expected
/// best progress after waiting for exactly one more wake, net of the mean
/// waiting cost. Continuous, nondecreasing, and convex in `b`.
pub fn one_step_value(model: &ProgressModel, node_count: usize, eta: f64, b: f64) -> Result<f64> {
    let cost = check_policy_inputs(node_count, eta)?;
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!("best progress {b} outside [0,1]")));
    }
    Ok(b + model.mean_excess(b) - cost)
}

/// A function of best progress tabulated on the model grid over `[0, 1]`,
/// read back with linear interpolation.
#[derive(Debug, Clone)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn at(&self, b: f64) -> f64 {
        interp_uniform(0.0, 1.0, &self.values, b)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Tabulates `E[max{b, Z, floor(max{b, Z})}] - cost` on the model grid,
/// where `floor` is given by its grid values. Expectations use the exact
/// cell masses of the tabulated progress law, so raising `floor` pointwise
/// never lowers any output value.
fn floored_expectation(model: &ProgressModel, floor: &[f64], cost: f64) -> Vec<f64> {
    let grid = model.grid();
    let cdf = model.cdf();
    let n = grid.len() - 1;
    let kept: Vec<f64> = grid.iter().zip(floor).map(|(&z, &v)| z.max(v)).collect();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        let mass = cdf[j + 1] - cdf[j];
        suffix[j] = suffix[j + 1] + mass * 0.5 * (kept[j] + kept[j + 1]);
    }
    (0..=n)
        .map(|i| cdf[i] * kept[i] + suffix[i] - cost)
        .collect()
}

/// [`one_step_value`] tabulated on the model grid.
pub fn one_step_table(model: &ProgressModel, node_count: usize, eta: f64) -> Result<ValueTable> {
    let cost = check_policy_inputs(node_count, eta)?;
    let zeros = vec![0.0; model.grid().len()];
    Ok(ValueTable {
        values: floored_expectation(model, &zeros, cost),
    })
}

/// One step of the value recursion:
/// `next(b) = E[max{b, Z, prev(max{b, Z})}] - 1/(eta * K)`.
///
/// Applied to the one-step table this produces a pointwise nondecreasing
/// sequence that is constant at and above the fixed-point threshold.
pub fn iterate_value(
    model: &ProgressModel,
    node_count: usize,
    eta: f64,
    prev: &ValueTable,
) -> Result<ValueTable> {
    let cost = check_policy_inputs(node_count, eta)?;
    if prev.values.len() != model.grid().len() {
        return Err(Error::Domain(format!(
            "value table has {} entries for a {}-node grid",
            prev.values.len(),
            model.grid().len()
        )));
    }
    Ok(ValueTable {
        values: floored_expectation(model, &prev.values, cost),
    })
}

/// Solves `beta1(alpha) = alpha` for the stopping threshold. When even an
/// empty hand is worth less than one more wait (`beta1(0) <= 0`) there is
/// no positive fixed point and the threshold is zero, which happens exactly
/// for multipliers at or below the recorded cutoff.
pub fn solve_threshold(model: &ProgressModel, node_count: usize, eta: f64) -> Result<SfThreshold> {
    let cost = check_policy_inputs(node_count, eta)?;
    let eta_cutoff = 1.0 / (model.mean_progress() * node_count as f64);
    let made = |alpha: f64| SfThreshold {
        alpha,
        origin: ThresholdOrigin::Multiplier(eta),
        node_count,
        eta_cutoff,
    };
    // gap(b) = beta1(b) - b, strictly decreasing from beta1(0) to -cost.
    let gap = |b: f64| model.mean_excess(b) - cost;
    if gap(0.0) <= DEGENERATE_TOL {
        return Ok(made(0.0));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g.abs() <= FIXED_POINT_TOL {
            return Ok(made(mid));
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!(
        "threshold bisection stalled on [{lo}, {hi}]"
    )))
}

/// Finds the threshold whose closed-form mean one-hop progress equals
/// `target` (within [`CALIBRATION_TOL`]). Targets at or below the
/// first-forward mean clamp to `alpha = 0`; targets at or above the
/// max-forward mean clamp to the wait-for-everyone sentinel `alpha = 1`.
pub fn calibrate_threshold(
    model: &ProgressModel,
    node_count: usize,
    target: f64,
) -> Result<SfThreshold> {
    if node_count == 0 {
        return Err(Error::Domain("candidate count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!(
            "target progress {target} outside [0,1]"
        )));
    }
    let eta_cutoff = 1.0 / (model.mean_progress() * node_count as f64);
    let made = |alpha: f64| SfThreshold {
        alpha,
        origin: ThresholdOrigin::TargetProgress(target),
        node_count,
        eta_cutoff,
    };
    let floor = sf_mean_progress(model, node_count, 0.0)?;
    if target <= floor {
        return Ok(made(0.0));
    }
    let ceiling = sf_mean_progress(model, node_count, 1.0)?;
    if target >= ceiling {
        return Ok(made(1.0));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let achieved = sf_mean_progress(model, node_count, mid)?;
        if (achieved - target).abs() <= CALIBRATION_TOL {
            return Ok(made(mid));
        }
        if achieved < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!(
        "calibration bisection stalled on [{lo}, {hi}] for target {target}"
    )))
}

/// Threshold stopping rule: transmit at the `woken`-th wake iff the best
/// progress so far reaches `alpha` or every candidate has woken.
pub fn sf_decide(alpha: f64, woken: usize, node_count: usize, best: f64) -> bool {
    debug_assert!((1..=node_count).contains(&woken));
    woken >= node_count || best >= alpha
}

/// First-forward: transmit at the first wake.
pub fn ff_decide(woken: usize) -> bool {
    woken >= 1
}

/// Max-forward: wait for every candidate, then transmit to the best.
pub fn mf_decide(woken: usize, node_count: usize) -> bool {
    woken >= node_count
}
