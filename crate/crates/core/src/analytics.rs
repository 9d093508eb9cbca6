//! Closed-form one-hop averages for the threshold policy family.
//!
//! For a fixed threshold `alpha` on best progress, both the mean one-hop
//! delay and the mean one-hop progress have closed forms in terms of
//! `p = P(Z > alpha)`, the probability that a single candidate beats the
//! threshold. These are the curves a Monte-Carlo run must land on, which
//! makes them the reference the simulator is tested against, and they are
//! cheap enough to bisect on when calibrating thresholds.
//!
//! Delays are in wake periods, progress in units of the radio range.

use crate::error::{Error, Result};
use crate::geometry::ProgressModel;
use crate::numeric::{binomial, integrate_uniform};
use std::io::{self, Write};

fn check_inputs(node_count: usize, alpha: f64) -> Result<()> {
    if node_count == 0 {
        return Err(Error::Domain("candidate count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("threshold {alpha} outside [0,1]")));
    }
    Ok(())
}

/// Mean delay until transmission under threshold `alpha` with `node_count`
/// candidates. Conditioning on the number of candidates above the
/// threshold: if `k >= 1` of them qualify, the wait is the first qualifying
/// wake, with mean `1/(k+1)`; if none qualify the relay sits out all wakes,
/// with mean `K/(K+1)`.
pub fn sf_mean_delay(model: &ProgressModel, node_count: usize, alpha: f64) -> Result<f64> {
    check_inputs(node_count, alpha)?;
    let p = model.tail_at(alpha);
    let q = 1.0 - p;
    let n = node_count as u64;
    let k_f = node_count as f64;
    let mut total = q.powi(node_count as i32) * k_f / (k_f + 1.0);
    for k in 1..=node_count {
        total += binomial(n, k as u64) * p.powi(k as i32) * q.powi((node_count - k) as i32)
            / (k as f64 + 1.0);
    }
    Ok(total)
}

/// Mean progress of the transmission target under threshold `alpha`.
///
/// Splitting `P(best delivered progress > z)` at the threshold: below
/// `alpha` the relay ends up above `z` unless every candidate is below it;
/// above `alpha`, it delivers beyond `z` exactly when some candidate
/// qualifies and the first qualifier reaches past `z`, giving the tail
/// `(1 - (1-p_alpha)^K) * p_z / p_alpha`. Integrating the two branches over
/// the tabulated tail yields the mean. An empty qualifying region
/// (`p_alpha = 0`) puts all mass in the first branch.
pub fn sf_mean_progress(model: &ProgressModel, node_count: usize, alpha: f64) -> Result<f64> {
    check_inputs(node_count, alpha)?;
    let ki = node_count as i32;
    let p_alpha = model.tail_at(alpha);
    let any_above: Vec<f64> = model
        .tail()
        .iter()
        .map(|&p| 1.0 - (1.0 - p).powi(ki))
        .collect();
    let below = integrate_uniform(0.0, 1.0, &any_above, 0.0, alpha);
    let above = if p_alpha > 0.0 {
        (1.0 - (1.0 - p_alpha).powi(ki)) / p_alpha
            * integrate_uniform(0.0, 1.0, model.tail(), alpha, 1.0)
    } else {
        0.0
    };
    Ok(below + above)
}

/// One-hop averages of a policy, with the parameters that produced them.
#[derive(Debug, Clone)]
pub struct HopAverages {
    pub policy: String,
    pub node_count: usize,
    pub sink_distance: f64,
    pub alpha: f64,
    /// Delay-progress multiplier the threshold came from, when there is one.
    pub eta: Option<f64>,
    pub mean_delay: f64,
    pub mean_progress: f64,
}

/// Column header matching [`HopAverages::csv_line`].
pub const AVERAGES_CSV_HEADER: &str = "policy,K,L_i,alpha,eta,mean_delay,mean_progress";

impl HopAverages {
    pub fn csv_line(&self) -> String {
        let eta = self.eta.map(|e| e.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.policy,
            self.node_count,
            self.sink_distance,
            self.alpha,
            eta,
            self.mean_delay,
            self.mean_progress
        )
    }
}

/// Averages for an explicit threshold.
pub fn sf_averages(
    model: &ProgressModel,
    node_count: usize,
    alpha: f64,
    eta: Option<f64>,
) -> Result<HopAverages> {
    Ok(HopAverages {
        policy: "sf".into(),
        node_count,
        sink_distance: model.ctx().sink_distance,
        alpha,
        eta,
        mean_delay: sf_mean_delay(model, node_count, alpha)?,
        mean_progress: sf_mean_progress(model, node_count, alpha)?,
    })
}

/// First-forward averages: the `alpha = 0` specialization.
pub fn ff_averages(model: &ProgressModel, node_count: usize) -> Result<HopAverages> {
    let mut avg = sf_averages(model, node_count, 0.0, None)?;
    avg.policy = "ff".into();
    Ok(avg)
}

/// Max-forward averages: the `alpha = 1` specialization.
pub fn mf_averages(model: &ProgressModel, node_count: usize) -> Result<HopAverages> {
    let mut avg = sf_averages(model, node_count, 1.0, None)?;
    avg.policy = "mf".into();
    Ok(avg)
}

/// Writes the header and one line per row.
pub fn write_averages_csv<W: Write>(out: &mut W, rows: &[HopAverages]) -> io::Result<()> {
    writeln!(out, "{AVERAGES_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}
