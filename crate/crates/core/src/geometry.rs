//! Forwarding-region geometry and the distribution of one-hop progress.
//!
//! A relay holding a packet sits at some distance `L` from the sink and can
//! reach any node within one radio range. Its forwarding region is the part
//! of that radio disk lying strictly closer to the sink. A candidate node at
//! distance `L - z` from the sink makes progress `z`; with candidates placed
//! uniformly, the chord length of the region at progress level `z` induces a
//! density over `z`:
//!
//! ```text
//! f(z) = 2 (L - z) * acos( (L^2 + (L-z)^2 - 1) / (2 L (L - z)) ) / V
//! ```
//!
//! on `0 <= z <= 1`, where `V` is the full region area (the same kernel
//! integrated over `[0, 1]`). All lengths here are normalized so the radio
//! range is 1 and the wake period is 1; [`HopContext::from_raw`] performs the
//! rescaling.
//!
//! [`ProgressModel`] tabulates the density, its CDF, and the tail
//! `tail(z) = area(z) / area(0)` (the probability that a uniformly placed
//! candidate makes progress at least `z`) on a uniform grid, and provides
//! interpolation and inverse-CDF sampling on top of the tables.

use crate::error::{Error, Result};
use crate::numeric;
use rand::Rng;

/// Default number of grid cells in a [`ProgressModel`] (the table has one
/// more point than cells).
pub const DEFAULT_GRID_CELLS: usize = 1024;

/// Subintervals of the composite Simpson rule used for region areas.
pub const AREA_QUAD_CELLS: usize = 4096;

/// How far outside [-1, 1] the acos argument may drift before it is treated
/// as a real domain violation rather than rounding.
const ACOS_CLAMP_TOL: f64 = 1e-12;

/// Tolerance on the unnormalized CDF total before renormalization.
const CDF_TOTAL_TOL: f64 = 1e-6;

/// Per-cell Gauss-Legendre order for the cumulative CDF quadrature.
const CDF_CELL_ORDER: usize = 8;

/// One relay's local situation: distance to the sink and the number of
/// candidate nodes in its forwarding region, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopContext {
    /// Distance from the relay to the sink, in radio ranges.
    pub sink_distance: f64,
    /// Radio range after normalization; always 1.
    pub radio_range: f64,
    /// Wake period after normalization; always 1.
    pub wake_period: f64,
    /// Number of candidate nodes in the forwarding region.
    pub node_count: usize,
}

impl HopContext {
    /// Context in already-normalized units (radio range 1, wake period 1).
    pub fn new(sink_distance: f64, node_count: usize) -> Result<Self> {
        Self::from_raw(sink_distance, 1.0, 1.0, node_count)
    }

    /// Rescales raw units: distances divide by the radio range, times divide
    /// by the wake period.
    pub fn from_raw(
        sink_distance: f64,
        radio_range: f64,
        wake_period: f64,
        node_count: usize,
    ) -> Result<Self> {
        if !(sink_distance.is_finite() && sink_distance > 0.0) {
            return Err(Error::Domain(format!(
                "sink distance must be positive and finite, got {sink_distance}"
            )));
        }
        if !(radio_range.is_finite() && radio_range > 0.0) {
            return Err(Error::Domain(format!(
                "radio range must be positive and finite, got {radio_range}"
            )));
        }
        if !(wake_period.is_finite() && wake_period > 0.0) {
            return Err(Error::Domain(format!(
                "wake period must be positive and finite, got {wake_period}"
            )));
        }
        Ok(HopContext {
            sink_distance: sink_distance / radio_range,
            radio_range: 1.0,
            wake_period: 1.0,
            node_count,
        })
    }

    /// True when the sink itself is within radio range, in which case the
    /// relay hands the packet straight to the sink instead of running a
    /// relay-selection policy.
    pub fn reaches_sink(&self) -> bool {
        self.sink_distance <= self.radio_range
    }
}

/// Chord-length kernel of the forwarding region at progress level `z`.
/// This is the unnormalized progress density; integrating it over `[z, 1]`
/// gives the area of the sub-region with progress at least `z`.
fn chord_kernel(sink_distance: f64, z: f64) -> Result<f64> {
    if z == 1.0 {
        // The acos argument is exactly 1 here algebraically; short-circuit
        // so the endpoint is exact under floating point too.
        return Ok(0.0);
    }
    let l = sink_distance;
    let d = l - z;
    let raw = (l * l + d * d - 1.0) / (2.0 * l * d);
    let arg = if (-1.0..=1.0).contains(&raw) {
        raw
    } else if raw > 1.0 && raw <= 1.0 + ACOS_CLAMP_TOL {
        1.0
    } else if (-1.0 - ACOS_CLAMP_TOL..-1.0).contains(&raw) {
        -1.0
    } else {
        return Err(Error::Numeric(format!(
            "acos argument {raw} at z={z} escapes [-1,1]; sink distance {l} \
             is not compatible with a unit radio range"
        )));
    };
    Ok(2.0 * d * arg.acos())
}

/// Area of the part of the forwarding region whose progress is at least `z`,
/// by composite Simpson quadrature of the chord kernel over `[z, 1]`.
pub fn region_area(ctx: &HopContext, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!(
            "progress level must lie in [0,1], got {z}"
        )));
    }
    if z == 1.0 {
        return Ok(0.0);
    }
    let cells = AREA_QUAD_CELLS;
    let h = (1.0 - z) / cells as f64;
    let mut sum = chord_kernel(ctx.sink_distance, z)? + chord_kernel(ctx.sink_distance, 1.0)?;
    for i in 1..cells {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * chord_kernel(ctx.sink_distance, z + i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Tabulated progress distribution for one relay position.
#[derive(Debug, Clone)]
pub struct ProgressModel {
    ctx: HopContext,
    area_full: f64,
    grid: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    tail: Vec<f64>,
    unnormalized_cdf_total: f64,
}

impl ProgressModel {
    /// Builds the tables on a uniform grid with `grid_cells` cells
    /// (`grid_cells + 1` points spanning `[0, 1]`).
    ///
    /// The PDF is the chord kernel divided by the full region area. The CDF
    /// accumulates per-cell Gauss-Legendre integrals of the same kernel and
    /// is renormalized so its final value is exactly 1; the pre-normalization
    /// total must already be within 1e-6 of 1 or construction fails. The tail
    /// column stores `region_area(z) / region_area(0)` at every grid point.
    pub fn build(ctx: HopContext, grid_cells: usize) -> Result<Self> {
        if grid_cells < 64 {
            return Err(Error::Domain(format!(
                "progress grid needs at least 64 cells, got {grid_cells}"
            )));
        }
        if ctx.sink_distance <= ctx.radio_range {
            return Err(Error::Domain(format!(
                "progress model requires the sink to be beyond one radio range \
                 (distance {}, range {}); closer relays hand off to the sink directly",
                ctx.sink_distance, ctx.radio_range
            )));
        }
        let n = grid_cells;
        let grid: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let area_full = region_area(&ctx, 0.0)?;
        if !(area_full.is_finite() && area_full > 0.0) {
            return Err(Error::Numeric(format!(
                "degenerate forwarding region area {area_full}"
            )));
        }

        let mut pdf = Vec::with_capacity(n + 1);
        for &z in &grid {
            pdf.push(chord_kernel(ctx.sink_distance, z)? / area_full);
        }

        let (gl_nodes, gl_weights) = numeric::gauss_legendre_unit(CDF_CELL_ORDER);
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let h = 1.0 / n as f64;
        for j in 0..n {
            let lo = grid[j];
            let mut cell = 0.0;
            for (&xi, &w) in gl_nodes.iter().zip(&gl_weights) {
                cell += w * chord_kernel(ctx.sink_distance, lo + xi * h)?;
            }
            cdf.push(cdf[j] + cell * h / area_full);
        }
        let unnormalized_cdf_total = cdf[n];
        if (unnormalized_cdf_total - 1.0).abs() > CDF_TOTAL_TOL {
            return Err(Error::Numeric(format!(
                "progress density integrates to {unnormalized_cdf_total}, \
                 more than {CDF_TOTAL_TOL} away from 1"
            )));
        }
        for c in cdf.iter_mut() {
            *c /= unnormalized_cdf_total;
        }

        let mut tail = Vec::with_capacity(n + 1);
        for &z in &grid {
            tail.push(region_area(&ctx, z)? / area_full);
        }
        for j in 0..n {
            if tail[j + 1] > tail[j] {
                return Err(Error::Numeric(format!(
                    "tail table not nonincreasing near z={}",
                    grid[j]
                )));
            }
            if cdf[j + 1] < cdf[j] {
                return Err(Error::Numeric(format!(
                    "cdf table not nondecreasing near z={}",
                    grid[j]
                )));
            }
        }

        Ok(ProgressModel {
            ctx,
            area_full,
            grid,
            pdf,
            cdf,
            tail,
            unnormalized_cdf_total,
        })
    }

    pub fn ctx(&self) -> &HopContext {
        &self.ctx
    }

    /// Full forwarding-region area (progress level 0).
    pub fn area_full(&self) -> f64 {
        self.area_full
    }

    /// Value the cumulative quadrature reached before being scaled to 1.
    pub fn unnormalized_cdf_total(&self) -> f64 {
        self.unnormalized_cdf_total
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn pdf_at(&self, z: f64) -> f64 {
        numeric::interp_uniform(0.0, 1.0, &self.pdf, z)
    }

    pub fn cdf_at(&self, z: f64) -> f64 {
        numeric::interp_uniform(0.0, 1.0, &self.cdf, z)
    }

    /// Probability that a uniformly placed candidate makes progress at least
    /// `z` (interpolated from the tail table).
    pub fn tail_at(&self, z: f64) -> f64 {
        numeric::interp_uniform(0.0, 1.0, &self.tail, z)
    }

    /// Mean progress of a single candidate, `integral of tail over [0,1]`,
    /// exact for the piecewise-linear tail table.
    pub fn mean_progress(&self) -> f64 {
        numeric::integrate_uniform(0.0, 1.0, &self.tail, 0.0, 1.0)
    }

    /// `E[(Z - b)^+]`, the expected progress in excess of `b`, computed as
    /// the exact integral of the piecewise-linear survival function
    /// `1 - cdf` over `[b, 1]`.
    pub fn mean_excess(&self, b: f64) -> f64 {
        let b = b.clamp(0.0, 1.0);
        (1.0 - b) - numeric::integrate_uniform(0.0, 1.0, &self.cdf, b, 1.0)
    }

    /// Inverse of the piecewise-linear CDF. `q` must lie in `[0, 1]`;
    /// `quantile(0) = 0` and `quantile(1) = 1`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile input {q} outside [0,1]")));
        }
        // First index with cdf >= q, then interpolate inside the cell to
        // its left.
        let i = self.cdf.partition_point(|&c| c < q);
        if i == 0 {
            return Ok(0.0);
        }
        let j = i - 1;
        let denom = self.cdf[j + 1] - self.cdf[j];
        if denom <= 0.0 {
            return Ok(self.grid[j]);
        }
        let t = (q - self.cdf[j]) / denom;
        Ok(self.grid[j] + t * (self.grid[j + 1] - self.grid[j]))
    }

    /// Draws one progress value by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let q: f64 = rng.random();
        // q is in [0, 1), so the domain check cannot fire.
        self.quantile(q).expect("uniform draw within [0,1)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx10() -> HopContext {
        HopContext::new(10.0, 5).unwrap()
    }

    /// Rejection-sampling estimate of the region area at progress levels 0
    /// and `z`, together with standard errors. Samples points uniformly in
    /// the bounding square of the radio disk around the relay at the origin,
    /// with the sink on the x-axis at distance `l`.
    fn rejection_oracle(l: f64, z: f64, points: u64, seed: u64) -> (f64, f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_region = 0u64;
        let mut in_subregion = 0u64;
        for _ in 0..points {
            let x = rng.random::<f64>() * 2.0 - 1.0;
            let y = rng.random::<f64>() * 2.0 - 1.0;
            if x * x + y * y > 1.0 {
                continue;
            }
            let dx = x - l;
            let progress = l - (dx * dx + y * y).sqrt();
            if progress > 0.0 {
                in_region += 1;
                if progress >= z {
                    in_subregion += 1;
                }
            }
        }
        let square = 4.0;
        let p = in_region as f64 / points as f64;
        let area = square * p;
        let area_se = square * (p * (1.0 - p) / points as f64).sqrt();
        let t = in_subregion as f64 / in_region as f64;
        let tail = t;
        let tail_se = (t * (1.0 - t) / in_region as f64).sqrt();
        (area, area_se, tail, tail_se)
    }

    #[test]
    fn area_matches_rejection_oracle() {
        let ctx = ctx10();
        let (area, area_se, tail, tail_se) = rejection_oracle(10.0, 0.5, 10_000_000, 7);
        let got_area = region_area(&ctx, 0.0).unwrap();
        assert!(
            (got_area - area).abs() <= 3.0 * area_se,
            "area {got_area} vs oracle {area} +- {area_se}"
        );
        let got_tail = region_area(&ctx, 0.5).unwrap() / got_area;
        assert!(
            (got_tail - tail).abs() <= 3.0 * tail_se,
            "tail {got_tail} vs oracle {tail} +- {tail_se}"
        );
    }

    #[test]
    fn area_approaches_half_disk_for_distant_sink() {
        let ctx = HopContext::new(1000.0, 1).unwrap();
        let area = region_area(&ctx, 0.0).unwrap();
        assert_abs_diff_eq!(area, std::f64::consts::FRAC_PI_2, epsilon = 1e-3);
    }

    #[test]
    fn area_is_zero_at_full_progress_and_decreasing() {
        let ctx = ctx10();
        assert_eq!(region_area(&ctx, 1.0).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for j in 0..=50 {
            let a = region_area(&ctx, j as f64 / 50.0).unwrap();
            assert!(a <= prev && a >= 0.0);
            prev = a;
        }
    }

    #[test]
    fn area_rejects_bad_inputs() {
        let ctx = ctx10();
        assert!(matches!(region_area(&ctx, -0.1), Err(Error::Domain(_))));
        assert!(matches!(region_area(&ctx, 1.5), Err(Error::Domain(_))));
        // A sink well inside the radio range makes the acos argument escape.
        let close = HopContext::new(0.4, 1).unwrap();
        assert!(matches!(region_area(&close, 0.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn context_normalizes_raw_units() {
        let ctx = HopContext::from_raw(50.0, 5.0, 2.0, 3).unwrap();
        assert_eq!(ctx.sink_distance, 10.0);
        assert_eq!(ctx.radio_range, 1.0);
        assert_eq!(ctx.wake_period, 1.0);
        assert!(!ctx.reaches_sink());
        assert!(HopContext::new(0.8, 1).unwrap().reaches_sink());
        assert!(HopContext::new(0.0, 1).is_err());
        assert!(HopContext::new(f64::NAN, 1).is_err());
        assert!(HopContext::from_raw(1.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn model_tables_are_consistent() {
        let model = ProgressModel::build(ctx10(), DEFAULT_GRID_CELLS).unwrap();
        let n = DEFAULT_GRID_CELLS;

        assert!((model.unnormalized_cdf_total() - 1.0).abs() <= 1e-6);
        assert_eq!(model.cdf()[0], 0.0);
        assert_eq!(model.cdf()[n], 1.0);
        assert_eq!(model.tail()[0], 1.0);
        assert_eq!(model.tail()[n], 0.0);
        assert_eq!(model.pdf()[n], 0.0);

        // The pdf times the full area reproduces the chord kernel pointwise,
        // and the tail times the full area reproduces the sub-region areas.
        let ctx = *model.ctx();
        for (j, &z) in model.grid().iter().enumerate().step_by(37) {
            let kernel = chord_kernel(ctx.sink_distance, z).unwrap();
            assert!((model.pdf()[j] * model.area_full() - kernel).abs() <= 1e-10);
            let area = region_area(&ctx, z).unwrap();
            let rel = (model.tail()[j] * model.area_full() - area).abs() / area.max(1e-300);
            assert!(rel <= 1e-14, "tail/area mismatch at z={z}: rel={rel}");
        }

        // The cdf and tail columns come from different quadratures of the
        // same kernel; they must agree closely.
        for j in 0..=n {
            let diff = ((1.0 - model.cdf()[j]) - model.tail()[j]).abs();
            assert!(diff <= 1e-6, "cdf/tail drift {diff} at index {j}");
        }

        // pdf at z=0 equals the closed-form chord value divided by the area.
        let l = 10.0f64;
        let want = 2.0 * l * ((2.0 * l * l - 1.0) / (2.0 * l * l)).acos() / model.area_full();
        assert_abs_diff_eq!(model.pdf_at(0.0), want, epsilon = 1e-12);
    }

    #[test]
    fn model_rejects_bad_construction() {
        assert!(matches!(
            ProgressModel::build(ctx10(), 32),
            Err(Error::Domain(_))
        ));
        let near = HopContext::new(0.9, 2).unwrap();
        assert!(matches!(
            ProgressModel::build(near, 128),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn quantile_endpoints_and_monotonicity() {
        let model = ProgressModel::build(ctx10(), 256).unwrap();
        assert_eq!(model.quantile(0.0).unwrap(), 0.0);
        assert_eq!(model.quantile(1.0).unwrap(), 1.0);
        assert!(model.quantile(-0.1).is_err());
        assert!(model.quantile(1.1).is_err());
        let mut prev = 0.0;
        for i in 0..=1000 {
            let z = model.quantile(i as f64 / 1000.0).unwrap();
            assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn sampler_matches_its_cdf() {
        let model = ProgressModel::build(ctx10(), DEFAULT_GRID_CELLS).unwrap();
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut samples: Vec<f64> = (0..n).map(|_| model.sample(&mut rng)).collect();
        samples.sort_by(f64::total_cmp);

        // Kolmogorov-Smirnov distance between the empirical CDF and the
        // model CDF the sampler inverts.
        let mut ks: f64 = 0.0;
        for (i, &z) in samples.iter().enumerate() {
            let f = model.cdf_at(z);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((f - lo).abs()).max((hi - f).abs());
        }
        assert!(ks <= 0.002, "KS distance {ks}");

        let mean: f64 = samples.iter().sum::<f64>() / n as f64;
        let var: f64 = samples.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let want = model.mean_progress();
        assert!(
            (mean - want).abs() <= 3.0 * se,
            "sample mean {mean} vs tail integral {want}"
        );
    }

    #[test]
    fn mean_excess_matches_direct_quadrature() {
        let model = ProgressModel::build(ctx10(), DEFAULT_GRID_CELLS).unwrap();
        for b in [0.0, 0.3, 0.7, 1.0] {
            let direct = numeric::simpson(|z| 1.0 - model.cdf_at(z), b, 1.0, 2048);
            assert_abs_diff_eq!(model.mean_excess(b), direct, epsilon = 1e-8);
        }
        assert_eq!(model.mean_excess(1.0), 0.0);
    }
}
