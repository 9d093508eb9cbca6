//! Sleep-wake timing of candidate nodes.
//!
//! Every node wakes once per period at a fixed offset drawn uniformly at
//! random, stays up momentarily, and sleeps again. From a packet holder's
//! point of view the candidates' wake offsets within the next period are
//! therefore order statistics of independent uniforms: [`sample_wakes`]
//! draws one such sorted sequence, [`order_stat_pdf`] gives the density of
//! the k-th wake instant, and [`cond_interwake_pdf`] the density of the gap
//! to the next wake given how much of the period has already elapsed.

use crate::error::{Error, Result};
use crate::numeric::ln_factorial;
use rand::Rng;

/// Time until the next wake instant of a node with the given phase offset,
/// measured from `now`. Wake instants are `k * period + phase` for
/// `k = 0, 1, 2, ...`; the result lies in `[0, period)`.
pub fn waiting_time(now: f64, phase: f64, period: f64) -> Result<f64> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Domain(format!("period must be positive, got {period}")));
    }
    if !(phase.is_finite() && (0.0..period).contains(&phase)) {
        return Err(Error::Domain(format!(
            "phase must lie in [0, period), got {phase}"
        )));
    }
    if !(now.is_finite() && now >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {now}")));
    }
    let mut k = ((now - phase) / period).ceil().max(0.0);
    // Settle k on the smallest index whose instant is not before `now`,
    // guarding against rounding in the division above.
    while k * period + phase < now {
        k += 1.0;
    }
    while k >= 1.0 && (k - 1.0) * period + phase >= now {
        k -= 1.0;
    }
    Ok(k * period + phase - now)
}

/// Sorted wake instants of the candidates within one period, with the gaps
/// between consecutive instants.
#[derive(Debug, Clone)]
pub struct WakeSequence {
    /// Ascending wake instants in `[0, 1)`.
    pub instants: Vec<f64>,
    /// `gaps[0] = instants[0]`, then successive differences.
    pub gaps: Vec<f64>,
}

/// Draws the wake instants of `node_count` candidates: independent uniforms
/// on `[0, 1)`, sorted.
pub fn sample_wakes<R: Rng + ?Sized>(node_count: usize, rng: &mut R) -> Result<WakeSequence> {
    if node_count == 0 {
        return Err(Error::Domain("need at least one candidate node".into()));
    }
    let mut instants: Vec<f64> = (0..node_count).map(|_| rng.random()).collect();
    instants.sort_by(f64::total_cmp);
    let mut gaps = Vec::with_capacity(node_count);
    let mut prev = 0.0;
    for &t in &instants {
        gaps.push(t - prev);
        prev = t;
    }
    Ok(WakeSequence { instants, gaps })
}

/// Density of the `rank`-th smallest of `node_count` independent uniforms
/// on `[0, 1]`, evaluated at `u`. Factorials go through log-gamma so large
/// counts neither overflow nor lose the leading digits.
pub fn order_stat_pdf(node_count: usize, rank: usize, u: f64) -> Result<f64> {
    if rank == 0 || rank > node_count {
        return Err(Error::Domain(format!(
            "rank {rank} outside 1..={node_count}"
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("evaluation point {u} outside [0,1]")));
    }
    let n = node_count as u64;
    let k = rank as u64;
    let ln_coef = ln_factorial(n) - ln_factorial(k - 1) - ln_factorial(n - k);
    // Zero exponents are dropped before taking logs so the boundary points
    // u = 0 and u = 1 evaluate cleanly.
    let lhs = if k == 1 { 0.0 } else { (k - 1) as f64 * u.ln() };
    let rhs = if k == n { 0.0 } else { (n - k) as f64 * (1.0 - u).ln() };
    Ok((ln_coef + lhs + rhs).exp())
}

/// Density of the gap from the `rank`-th wake to the next one, given that
/// the `rank`-th happened with `elapsed` of the period already gone. The
/// remaining `node_count - rank` wake instants are uniform on the rest of
/// the period, so the gap density at `u` is
/// `m * (1 - elapsed - u)^(m-1) / (1 - elapsed)^m` with `m` the number of
/// candidates still asleep.
pub fn cond_interwake_pdf(node_count: usize, rank: usize, elapsed: f64, gap: f64) -> Result<f64> {
    if node_count < 2 || rank == 0 || rank >= node_count {
        return Err(Error::Domain(format!(
            "rank {rank} has no successor among {node_count} candidates"
        )));
    }
    if !(0.0..1.0).contains(&elapsed) {
        return Err(Error::Domain(format!(
            "elapsed fraction {elapsed} outside [0,1)"
        )));
    }
    let remaining = 1.0 - elapsed;
    if !(0.0..=remaining).contains(&gap) {
        return Err(Error::Domain(format!(
            "gap {gap} outside [0, {remaining}]"
        )));
    }
    let m = (node_count - rank) as i32;
    let base = (remaining - gap).max(0.0);
    Ok(m as f64 * base.powi(m - 1) / remaining.powi(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::simpson;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn waiting_time_basic_cases() {
        assert_eq!(waiting_time(0.3, 0.8, 1.0).unwrap(), 0.5);
        assert_eq!(waiting_time(0.9, 0.8, 1.0).unwrap(), 0.9);
        assert_eq!(waiting_time(1.8, 0.8, 1.0).unwrap(), 0.0);
        assert_eq!(waiting_time(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(waiting_time(-1.0, 0.5, 1.0).is_err());
        assert!(waiting_time(0.0, 1.0, 1.0).is_err());
        assert!(waiting_time(0.0, 0.5, 0.0).is_err());
    }

    proptest! {
        // Dyadic inputs keep every intermediate exact, so periodicity holds
        // with equality rather than a tolerance.
        #[test]
        fn waiting_time_is_periodic_on_dyadic_inputs(ti in 0u32..4096, pi in 0u32..1024) {
            let t = ti as f64 / 1024.0;
            let phase = pi as f64 / 1024.0;
            let w = waiting_time(t, phase, 1.0).unwrap();
            prop_assert!((0.0..1.0).contains(&w));
            prop_assert_eq!(waiting_time(t + 1.0, phase, 1.0).unwrap(), w);
            // The instant it points at really is a wake instant boundary.
            prop_assert_eq!(waiting_time(t + w, phase, 1.0).unwrap(), 0.0);
        }

        #[test]
        fn waiting_time_respects_shorter_periods(ti in 0u32..4096, pi in 0u32..256) {
            let period = 0.25;
            let t = ti as f64 / 1024.0;
            let phase = pi as f64 / 1024.0;
            let w = waiting_time(t, phase, period).unwrap();
            prop_assert!((0.0..period).contains(&w));
            prop_assert_eq!(waiting_time(t + period, phase, period).unwrap(), w);
        }
    }

    #[test]
    fn wake_sequences_are_sorted_with_consistent_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let seq = sample_wakes(17, &mut rng).unwrap();
            assert_eq!(seq.instants.len(), 17);
            let mut prev = 0.0;
            for (i, &t) in seq.instants.iter().enumerate() {
                assert!((0.0..1.0).contains(&t));
                assert!(t >= prev);
                assert!(seq.gaps[i] >= 0.0);
                prev = t;
            }
            let total: f64 = seq.gaps.iter().sum();
            assert_abs_diff_eq!(total, *seq.instants.last().unwrap(), epsilon = 1e-12);
        }
        assert!(sample_wakes(0, &mut rng).is_err());
    }

    #[test]
    fn first_wake_mean_matches_order_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (count, want) in [(1usize, 0.5), (5, 1.0 / 6.0)] {
            let trials = 1_000_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let w = sample_wakes(count, &mut rng).unwrap().instants[0];
                sum += w;
                sum_sq += w * w;
            }
            let mean = sum / trials as f64;
            let var = (sum_sq - sum * sum / trials as f64) / (trials - 1) as f64;
            let se = (var / trials as f64).sqrt();
            assert!(
                (mean - want).abs() <= 3.0 * se,
                "count={count}: mean {mean} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn order_stat_pdf_closed_values() {
        // A single candidate's wake instant is uniform.
        for u in [0.0, 0.25, 1.0] {
            assert_abs_diff_eq!(order_stat_pdf(1, 1, u).unwrap(), 1.0, epsilon = 1e-12);
        }
        // Minimum of n uniforms at 0 has density n; maximum at 1 likewise.
        assert_abs_diff_eq!(order_stat_pdf(7, 1, 0.0).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(order_stat_pdf(7, 7, 1.0).unwrap(), 7.0, epsilon = 1e-12);
        assert_eq!(order_stat_pdf(7, 3, 0.0).unwrap(), 0.0);
        // 5!/(2!2!) * 0.5^4 = 1.875 exactly.
        assert_abs_diff_eq!(order_stat_pdf(5, 3, 0.5).unwrap(), 1.875, epsilon = 1e-12);
        assert!(order_stat_pdf(5, 0, 0.5).is_err());
        assert!(order_stat_pdf(5, 6, 0.5).is_err());
        assert!(order_stat_pdf(5, 3, 1.5).is_err());
    }

    #[test]
    fn order_stat_pdf_normalizes() {
        let total = simpson(|u| order_stat_pdf(5, 3, u).unwrap(), 0.0, 1.0, 2048);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        // Also at a size where naive factorials would overflow f64.
        let total = simpson(|u| order_stat_pdf(180, 90, u).unwrap(), 0.0, 1.0, 8192);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn third_wake_histogram_matches_density() {
        // Chi-square goodness of fit of simulated third wake instants
        // (out of five) against the order-statistic density, 50 equal-width
        // bins, 1% critical value for 49 degrees of freedom.
        let trials = 1_000_000usize;
        let bins = 50usize;
        let mut counts = vec![0u64; bins];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..trials {
            let w = sample_wakes(5, &mut rng).unwrap().instants[2];
            let b = ((w * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            let p = simpson(|u| order_stat_pdf(5, 3, u).unwrap(), lo, hi, 64);
            let expect = p * trials as f64;
            chi2 += (c as f64 - expect).powi(2) / expect;
        }
        assert!(chi2 <= 74.92, "chi-square statistic {chi2}");
    }

    #[test]
    fn conditional_gap_density_normalizes_with_known_mean() {
        // With elapsed 0.4 and three candidates still asleep the mean gap is
        // (1 - 0.4) / 4 = 0.15.
        let (count, rank, elapsed) = (5usize, 2usize, 0.4f64);
        let rem = 1.0 - elapsed;
        let total = simpson(
            |u| cond_interwake_pdf(count, rank, elapsed, u).unwrap(),
            0.0,
            rem,
            2048,
        );
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        let mean = simpson(
            |u| u * cond_interwake_pdf(count, rank, elapsed, u).unwrap(),
            0.0,
            rem,
            2048,
        );
        assert_abs_diff_eq!(mean, 0.15, epsilon = 1e-9);
        // Last remaining candidate: the gap is uniform on what is left.
        let flat = cond_interwake_pdf(4, 3, 0.25, 0.1).unwrap();
        assert_abs_diff_eq!(flat, 1.0 / 0.75, epsilon = 1e-12);
        assert!(cond_interwake_pdf(5, 5, 0.4, 0.1).is_err());
        assert!(cond_interwake_pdf(5, 2, 1.0, 0.0).is_err());
        assert!(cond_interwake_pdf(5, 2, 0.4, 0.7).is_err());
    }

    #[test]
    fn every_gap_shares_one_marginal_law() {
        // Each gap, whatever its rank, has CDF 1 - (1-u)^K. Check the first
        // and third gaps empirically.
        let trials = 1_000_000usize;
        let count = 5usize;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut g1 = Vec::with_capacity(trials);
        let mut g3 = Vec::with_capacity(trials);
        for _ in 0..trials {
            let seq = sample_wakes(count, &mut rng).unwrap();
            g1.push(seq.gaps[0]);
            g3.push(seq.gaps[2]);
        }
        for gaps in [&mut g1, &mut g3] {
            gaps.sort_by(f64::total_cmp);
            let mut ks: f64 = 0.0;
            for (i, &u) in gaps.iter().enumerate() {
                let f = 1.0 - (1.0 - u).powi(count as i32);
                let lo = i as f64 / trials as f64;
                let hi = (i + 1) as f64 / trials as f64;
                ks = ks.max((f - lo).abs()).max((hi - f).abs());
            }
            assert!(ks <= 0.002, "KS distance {ks}");
        }
    }
}
