//! Backward induction for the exact-model optimal stopping rule.
//!
//! With the true (dependent) wake-gap law, the relay's state after the k-th
//! wake is the elapsed fraction `w` of the period together with the best
//! progress `b` seen so far. Working backwards from the forced stop at the
//! last wake, each stage gets a value surface
//!
//! ```text
//! phi_k(w, b) = E[ max{b, Z, phi_{k+1}(w + U, max{b, Z})} - U/eta ]
//! ```
//!
//! over the gap `U` to the next wake and a fresh progress draw `Z`; the
//! optimal rule transmits at stage `k` exactly when `b >= phi_k(w, b)`.
//! Surfaces are tabulated on a uniform `w x b` grid with bilinear reads in
//! between.
//!
//! Quadrature: the gap integral uses Gauss-Legendre points mapped onto
//! `[0, 1-w]` with the conditional gap density folded into the weights (the
//! weights then sum to one exactly up to rounding, including in the `w = 1`
//! limit row, where the gap collapses to zero). The progress integral uses
//! cell masses read off the tabulated progress law's distribution function,
//! evaluated at cell midpoints; masses telescope to one regardless of the
//! density's steepness near full progress.

use crate::error::{Error, Result};
use crate::geometry::ProgressModel;
use crate::numeric::{gauss_legendre_unit, interp_uniform};
use rayon::prelude::*;
use std::io::{self, BufRead, Write};

/// Default points per grid axis.
pub const DEFAULT_GRID_POINTS: usize = 100;
const GAP_QUAD_POINTS: usize = 64;
const PROGRESS_CELLS: usize = 256;
const WEIGHT_SUM_TOL: f64 = 1e-6;
const BOUNDARY_TOL: f64 = 1e-12;

/// Stage value surfaces `phi_k` on a uniform `w x b` grid, `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSurface {
    stage_count: usize,
    eta: f64,
    grid_w: Vec<f64>,
    grid_b: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

fn unit_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect()
}

fn bilinear(values: &[f64], n_w: usize, n_b: usize, w: f64, b: f64) -> f64 {
    let tw = (w.clamp(0.0, 1.0) * (n_w - 1) as f64).min((n_w - 1) as f64);
    let tb = (b.clamp(0.0, 1.0) * (n_b - 1) as f64).min((n_b - 1) as f64);
    let iw = (tw as usize).min(n_w - 2);
    let jb = (tb as usize).min(n_b - 2);
    let fw = tw - iw as f64;
    let fb = tb - jb as f64;
    let at = |i: usize, j: usize| values[i * n_b + j];
    (1.0 - fw) * ((1.0 - fb) * at(iw, jb) + fb * at(iw, jb + 1))
        + fw * ((1.0 - fb) * at(iw + 1, jb) + fb * at(iw + 1, jb + 1))
}

impl ThresholdSurface {
    pub fn stage_count(&self) -> usize {
        self.stage_count
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid_w(&self) -> &[f64] {
        &self.grid_w
    }

    pub fn grid_b(&self) -> &[f64] {
        &self.grid_b
    }

    /// Raw grid values of `phi_k`, row-major over `(w, b)`.
    pub fn stage(&self, k: usize) -> &[f64] {
        &self.phi[k - 1]
    }

    /// Bilinear read of `phi_k` at an arbitrary state.
    pub fn value_at(&self, k: usize, w: f64, b: f64) -> f64 {
        bilinear(
            &self.phi[k - 1],
            self.grid_w.len(),
            self.grid_b.len(),
            w,
            b,
        )
    }

    /// Largest absolute gap between the next-to-last stage and its one-step
    /// closed form `b + E[(Z-b)^+] - (1-w)/(2 eta)` over the grid. `None`
    /// for single-stage surfaces. Useful as a build-quality summary.
    pub fn stage_form_gap(&self, model: &ProgressModel) -> Option<f64> {
        if self.stage_count < 2 {
            return None;
        }
        let n_b = self.grid_b.len();
        let vals = self.stage(self.stage_count - 1);
        let mut worst = 0.0f64;
        for (i, &w) in self.grid_w.iter().enumerate() {
            for (j, &b) in self.grid_b.iter().enumerate() {
                let form = b + model.mean_excess(b) - (1.0 - w) / (2.0 * self.eta);
                worst = worst.max((vals[i * n_b + j] - form).abs());
            }
        }
        Some(worst)
    }

    /// Writes the surface as `k,w,b,phi` rows behind a metadata comment.
    pub fn export_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "# stages={} eta={} grid_w={} grid_b={}",
            self.stage_count,
            self.eta,
            self.grid_w.len(),
            self.grid_b.len()
        )?;
        writeln!(out, "k,w,b,phi")?;
        for k in 1..=self.stage_count {
            let vals = self.stage(k);
            for (i, &w) in self.grid_w.iter().enumerate() {
                for (j, &b) in self.grid_b.iter().enumerate() {
                    writeln!(out, "{k},{w},{b},{}", vals[i * self.grid_b.len() + j])?;
                }
            }
        }
        Ok(())
    }

    /// Reads a surface back from [`export_csv`](Self::export_csv) output.
    pub fn import_csv<R: BufRead>(input: R) -> Result<ThresholdSurface> {
        let bad = |msg: String| Error::Config(msg);
        let mut stages = None;
        let mut eta = None;
        let mut n_w = None;
        let mut n_b = None;
        let mut values: Vec<f64> = Vec::new();
        let mut seen_header = false;
        for line in input.lines() {
            let line = line.map_err(|e| bad(format!("surface read failed: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                // Comments other than the metadata line (a front end may
                // prepend its own provenance block) are skipped.
                if !meta.starts_with("stages=") {
                    continue;
                }
                for token in meta.split_whitespace() {
                    let (key, val) = token
                        .split_once('=')
                        .ok_or_else(|| bad(format!("bad metadata token {token}")))?;
                    let parse =
                        |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
                    match key {
                        "stages" => stages = Some(parse(val)? as usize),
                        "eta" => eta = Some(parse(val)?),
                        "grid_w" => n_w = Some(parse(val)? as usize),
                        "grid_b" => n_b = Some(parse(val)? as usize),
                        _ => return Err(bad(format!("unknown metadata key {key}"))),
                    }
                }
                continue;
            }
            if !seen_header {
                if line != "k,w,b,phi" {
                    return Err(bad(format!("unexpected header line {line}")));
                }
                seen_header = true;
                continue;
            }
            let field = line
                .rsplit(',')
                .next()
                .ok_or_else(|| bad(format!("malformed row {line}")))?;
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| bad(format!("bad value {field}: {e}")))?,
            );
        }
        let (stage_count, eta, n_w, n_b) = match (stages, eta, n_w, n_b) {
            (Some(s), Some(e), Some(w), Some(b)) => (s, e, w, b),
            _ => return Err(bad("missing surface metadata".into())),
        };
        if stage_count == 0 || n_w < 2 || n_b < 2 {
            return Err(bad("degenerate surface dimensions".into()));
        }
        if values.len() != stage_count * n_w * n_b {
            return Err(bad(format!(
                "expected {} values, found {}",
                stage_count * n_w * n_b,
                values.len()
            )));
        }
        let phi = values
            .chunks(n_w * n_b)
            .map(|chunk| chunk.to_vec())
            .collect();
        Ok(ThresholdSurface {
            stage_count,
            eta,
            grid_w: unit_grid(n_w),
            grid_b: unit_grid(n_b),
            phi,
        })
    }
}

/// Solves the backward recursion for `node_count` candidates on an
/// `n_w x n_b` state grid.
pub fn solve_bf(
    model: &ProgressModel,
    node_count: usize,
    eta: f64,
    n_w: usize,
    n_b: usize,
) -> Result<ThresholdSurface> {
    if node_count == 0 {
        return Err(Error::Domain("candidate count must be positive".into()));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!(
            "progress multiplier must be positive, got {eta}"
        )));
    }
    if n_w < 2 || n_b < 2 {
        return Err(Error::Domain(format!(
            "state grid {n_w}x{n_b} too small to interpolate"
        )));
    }
    let grid_w = unit_grid(n_w);
    let grid_b = unit_grid(n_b);

    // Progress quadrature: cell masses and midpoints, shared by all stages.
    let cells = PROGRESS_CELLS;
    let mut mass = Vec::with_capacity(cells);
    let mut mid = Vec::with_capacity(cells);
    for c in 0..cells {
        let lo = c as f64 / cells as f64;
        let hi = (c + 1) as f64 / cells as f64;
        mass.push(model.cdf_at(hi) - model.cdf_at(lo));
        mid.push((c as f64 + 0.5) / cells as f64);
    }
    let mass_total: f64 = mass.iter().sum();
    if (mass_total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Numeric(format!(
            "progress quadrature mass {mass_total} drifted from 1"
        )));
    }
    let cdf_b: Vec<f64> = grid_b.iter().map(|&b| model.cdf_at(b)).collect();

    let (xi, omega) = gauss_legendre_unit(GAP_QUAD_POINTS);

    let mut phi: Vec<Vec<f64>> = vec![Vec::new(); node_count];
    phi[node_count - 1] = vec![0.0; n_w * n_b];

    for k in (1..node_count).rev() {
        let remaining = (node_count - k) as f64;
        // Gap quadrature in normalized coordinates: after substituting
        // u = (1-w) xi, the conditional density contributes
        // remaining * (1-xi)^(remaining-1) independent of w.
        let lambda: Vec<f64> = xi
            .iter()
            .zip(&omega)
            .map(|(&x, &o)| o * remaining * (1.0 - x).powi(remaining as i32 - 1))
            .collect();
        let lambda_total: f64 = lambda.iter().sum();
        if (lambda_total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Numeric(format!(
                "gap quadrature weight sum {lambda_total} drifted from 1 at stage {k}"
            )));
        }

        let next = &phi[k];
        let mut cur = vec![0.0; n_w * n_b];
        cur.par_chunks_mut(n_b).enumerate().for_each(|(i, row)| {
            let w = grid_w[i];
            // Quadrature points for the gap, with the w = 1 limit row
            // collapsing to a zero gap and zero residual delay.
            let (points, mean_gap): (Vec<(f64, f64)>, f64) = if i == n_w - 1 {
                (vec![(0.0, 1.0)], 0.0)
            } else {
                let pts = xi
                    .iter()
                    .zip(&lambda)
                    .map(|(&x, &l)| ((1.0 - w) * x, l))
                    .collect();
                (pts, (1.0 - w) / (remaining + 1.0))
            };
            let blended: Vec<Vec<f64>> = points
                .iter()
                .map(|&(u, _)| {
                    let tw = ((w + u).clamp(0.0, 1.0) * (n_w - 1) as f64).min((n_w - 1) as f64);
                    let iw = (tw as usize).min(n_w - 2);
                    let fw = tw - iw as f64;
                    (0..n_b)
                        .map(|j| {
                            (1.0 - fw) * next[iw * n_b + j] + fw * next[(iw + 1) * n_b + j]
                        })
                        .collect()
                })
                .collect();
            // Stopped-or-continuing value at each progress-cell midpoint,
            // already averaged over the gap.
            let merged: Vec<f64> = mid
                .iter()
                .map(|&z| {
                    points
                        .iter()
                        .zip(&blended)
                        .map(|(&(_, l), rows)| l * z.max(interp_uniform(0.0, 1.0, rows, z)))
                        .sum()
                })
                .collect();
            let mut suffix = vec![0.0; cells + 1];
            for c in (0..cells).rev() {
                suffix[c] = suffix[c + 1] + mass[c] * merged[c];
            }
            for j in 0..n_b {
                let b = grid_b[j];
                let held: f64 = points
                    .iter()
                    .zip(&blended)
                    .map(|(&(_, l), rows)| l * b.max(rows[j]))
                    .sum();
                let cell = ((b * cells as f64) as usize).min(cells - 1);
                let cell_hi = model.cdf_at((cell + 1) as f64 / cells as f64);
                let straddle = (cell_hi - cdf_b[j]).max(0.0);
                let straddle_val = if mid[cell] >= b { merged[cell] } else { held };
                row[j] = cdf_b[j] * held + straddle * straddle_val + suffix[cell + 1]
                    - mean_gap / eta;
            }
        });
        phi[k - 1] = cur;
    }

    let surface = ThresholdSurface {
        stage_count: node_count,
        eta,
        grid_w,
        grid_b,
        phi,
    };
    let bound = 1.0 + 1.0 / eta;
    for k in 1..=node_count {
        let vals = surface.stage(k);
        for (idx, &v) in vals.iter().enumerate() {
            if !v.is_finite() || v >= bound {
                return Err(Error::Numeric(format!(
                    "stage {k} value {v} out of range at index {idx}"
                )));
            }
        }
        for i in 0..n_w {
            let top = vals[i * n_b + (n_b - 1)];
            if top > 1.0 + BOUNDARY_TOL {
                return Err(Error::Numeric(format!(
                    "stage {k} exceeds 1 at full progress: {top}"
                )));
            }
        }
    }
    Ok(surface)
}

/// Optimal stopping rule: transmit at the `k`-th wake iff the best progress
/// reaches the stage surface there, with a forced stop at the last wake.
pub fn bf_decide(surface: &ThresholdSurface, k: usize, w: f64, b: f64) -> bool {
    debug_assert!(k >= 1);
    k >= surface.stage_count() || b >= surface.value_at(k, w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HopContext;

    fn model(sink_distance: f64, count: usize) -> ProgressModel {
        let ctx = HopContext::new(sink_distance, count).unwrap();
        ProgressModel::build(ctx, 1024).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model(10.0, 5);
        assert!(solve_bf(&m, 0, 2.0, 100, 100).is_err());
        assert!(solve_bf(&m, 5, 0.0, 100, 100).is_err());
        assert!(solve_bf(&m, 5, -1.0, 100, 100).is_err());
        assert!(solve_bf(&m, 5, 2.0, 1, 100).is_err());
    }

    #[test]
    fn last_stage_is_identically_zero() {
        let m = model(10.0, 5);
        let s = solve_bf(&m, 5, 2.0, 50, 50).unwrap();
        assert!(s.stage(5).iter().all(|&v| v == 0.0));
        assert!(s.stage(4).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn next_to_last_stage_matches_its_closed_form() {
        let m = model(10.0, 5);
        let s = solve_bf(&m, 5, 2.0, DEFAULT_GRID_POINTS, DEFAULT_GRID_POINTS).unwrap();
        let gap = s.stage_form_gap(&m).unwrap();
        assert!(gap <= 1e-4, "max closed-form gap {gap}");
        // Off-grid read against the same form.
        let (w, b) = (0.5, 0.3);
        let form = b + m.mean_excess(b) - (1.0 - w) / 4.0;
        assert!(
            (s.value_at(4, w, b) - form).abs() <= 1e-4,
            "{} vs {form}",
            s.value_at(4, w, b)
        );
    }

    #[test]
    fn next_to_last_stage_is_monotone_in_both_coordinates() {
        let m = model(10.0, 5);
        let s = solve_bf(&m, 5, 2.0, 60, 60).unwrap();
        let vals = s.stage(4);
        let (n_w, n_b) = (60, 60);
        for i in 0..n_w {
            for j in 0..n_b {
                if i + 1 < n_w {
                    assert!(vals[(i + 1) * n_b + j] >= vals[i * n_b + j] - 1e-12);
                }
                if j + 1 < n_b {
                    assert!(vals[i * n_b + j + 1] >= vals[i * n_b + j] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn earlier_stage_matches_nested_riemann_oracle() {
        let m = model(10.0, 3);
        let eta = 2.0;
        let s = solve_bf(&m, 3, eta, DEFAULT_GRID_POINTS, DEFAULT_GRID_POINTS).unwrap();

        // Independent evaluation of stage 1 for three candidates: the gap
        // density is 2(1-w-u)/(1-w)^2, and stage 2 has the closed form
        // v + E[(Z-v)^+] - (1-w')/(2 eta). Midpoint Riemann sums with
        // renormalized weights on a 2000 x 2000 mesh.
        let steps = 2000usize;
        let excess: Vec<f64> = (0..=steps)
            .map(|i| m.mean_excess(i as f64 / steps as f64))
            .collect();
        let stage2 = |w2: f64, v: f64| {
            v + interp_uniform(0.0, 1.0, &excess, v) - (1.0 - w2) / (2.0 * eta)
        };
        let oracle = |w: f64, b: f64| {
            let du = (1.0 - w) / steps as f64;
            let dz = 1.0 / steps as f64;
            let u_mid: Vec<f64> = (0..steps).map(|i| (i as f64 + 0.5) * du).collect();
            let u_wt: Vec<f64> = u_mid
                .iter()
                .map(|&u| 2.0 * (1.0 - w - u) / ((1.0 - w) * (1.0 - w)) * du)
                .collect();
            let z_mid: Vec<f64> = (0..steps).map(|i| (i as f64 + 0.5) * dz).collect();
            let z_wt: Vec<f64> = z_mid.iter().map(|&z| m.pdf_at(z) * dz).collect();
            let u_total: f64 = u_wt.iter().sum();
            let z_total: f64 = z_wt.iter().sum();
            let mut acc = 0.0;
            for (&u, &wu) in u_mid.iter().zip(&u_wt) {
                let mut inner = 0.0;
                for (&z, &wz) in z_mid.iter().zip(&z_wt) {
                    let v = b.max(z);
                    inner += wz * v.max(stage2(w + u, v));
                }
                acc += wu * (inner / z_total - u / eta);
            }
            acc / u_total
        };

        for (w, b) in [(0.0, 0.0), (0.25, 0.3), (0.5, 0.5), (0.75, 0.2), (0.9, 0.8)] {
            let got = s.value_at(1, w, b);
            let want = oracle(w, b);
            assert!(
                (got - want).abs() <= 1e-3,
                "stage 1 at ({w},{b}): {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn raising_the_multiplier_raises_every_surface() {
        let m = model(10.0, 4);
        let lo = solve_bf(&m, 4, 2.0, 40, 40).unwrap();
        let hi = solve_bf(&m, 4, 4.0, 40, 40).unwrap();
        for k in 1..=4 {
            for (a, b) in lo.stage(k).iter().zip(hi.stage(k)) {
                assert!(*b >= *a);
            }
        }
    }

    #[test]
    fn surfaces_stay_below_the_transmit_ceiling() {
        let m = model(10.0, 5);
        let s = solve_bf(&m, 5, 2.0, 50, 50).unwrap();
        let bound = 1.0 + 1.0 / 2.0;
        for k in 1..=5 {
            for &v in s.stage(k) {
                assert!(v.is_finite() && v < bound);
            }
            for i in 0..50 {
                assert!(s.stage(k)[i * 50 + 49] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn decision_rule_boundaries() {
        let m = model(10.0, 5);
        let s = solve_bf(&m, 5, 2.0, 80, 80).unwrap();
        for w in [0.0, 0.3, 0.9, 1.0] {
            assert!(bf_decide(&s, 5, w, 0.0));
            for k in 1..=5 {
                assert!(bf_decide(&s, k, w, 1.0));
            }
        }
        // At the next-to-last stage the rule reduces to comparing the
        // expected improvement against the discounted residual wait:
        // stop iff E[(Z-b)^+] <= (1-w)/(2 eta).
        let w = 0.5;
        let residual = (1.0 - w) / 4.0;
        let (stop_b, cont_b) = (0.5, 0.2);
        assert!(m.mean_excess(stop_b) < residual - 0.01);
        assert!(m.mean_excess(cont_b) > residual + 0.01);
        assert!(bf_decide(&s, 4, w, stop_b));
        assert!(!bf_decide(&s, 4, w, cont_b));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = model(10.0, 3);
        let s = solve_bf(&m, 3, 2.0, 20, 20).unwrap();
        let mut buf = Vec::new();
        s.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2 + 3 * 20 * 20);
        assert!(text.starts_with("# stages=3 eta=2 grid_w=20 grid_b=20\nk,w,b,phi\n"));
        let back = ThresholdSurface::import_csv(&buf[..]).unwrap();
        assert_eq!(back, s);

        // Foreign comment lines ahead of the metadata are ignored.
        let mut prefixed = b"# tool 0.1.0\n# eta=7\n".to_vec();
        prefixed.extend_from_slice(&buf);
        assert_eq!(ThresholdSurface::import_csv(&prefixed[..]).unwrap(), s);

        assert!(ThresholdSurface::import_csv(&b"k,w,b,phi\n"[..]).is_err());
        assert!(ThresholdSurface::import_csv(&b"# stages=2 eta=1 grid_w=5 grid_b=5\nk,w,b,phi\n1,0,0,0\n"[..]).is_err());
    }
}
