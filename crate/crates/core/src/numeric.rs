//! Small numerical toolbox shared across the crate: composite Simpson
//! quadrature, Gauss-Legendre nodes, exact integration and interpolation of
//! uniformly tabulated piecewise-linear functions, and log-factorials.

use statrs::function::gamma::ln_gamma;

/// Composite Simpson rule with `cells` uniform subintervals (`cells` even).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, cells: usize) -> f64 {
    assert!(
        cells >= 2 && cells.is_multiple_of(2),
        "simpson needs an even cell count"
    );
    if hi <= lo {
        return 0.0;
    }
    let h = (hi - lo) / cells as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..cells {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Gauss-Legendre nodes and weights mapped to the unit interval, so the
/// weights sum to 1 and `sum(w_i * f(x_i))` approximates the average of `f`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th root from the +1 end; mirror for the other half.
        nodes[i] = (1.0 - x) / 2.0;
        nodes[n - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[n - 1 - i] = w / 2.0;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Linear interpolation into a table over a uniform grid on [x0, x1],
/// clamped at the ends. `ys.len() >= 2`.
pub fn interp_uniform(x0: f64, x1: f64, ys: &[f64], x: f64) -> f64 {
    let n = ys.len() - 1;
    let pos = (x - x0) / (x1 - x0) * n as f64;
    if pos <= 0.0 {
        return ys[0];
    }
    if pos >= n as f64 {
        return ys[n];
    }
    let j = pos.floor() as usize;
    let t = pos - j as f64;
    ys[j] * (1.0 - t) + ys[j + 1] * t
}

/// Exact integral over [lo, hi] of the piecewise-linear function tabulated
/// on a uniform grid spanning [x0, x1]. Bounds are clamped to the grid.
pub fn integrate_uniform(x0: f64, x1: f64, ys: &[f64], lo: f64, hi: f64) -> f64 {
    let lo = lo.max(x0);
    let hi = hi.min(x1);
    if hi <= lo {
        return 0.0;
    }
    let n = ys.len() - 1;
    let h = (x1 - x0) / n as f64;
    let value = |x: f64| interp_uniform(x0, x1, ys, x);
    let first = (((lo - x0) / h).floor() as usize).min(n - 1);
    let last = (((hi - x0) / h).ceil() as usize).clamp(first + 1, n);
    // Single-cell case plus whole cells in between, trapezoid is exact on
    // each linear piece.
    let cell_lo = x0 + first as f64 * h;
    let cell_hi = x0 + last as f64 * h;
    if last == first + 1 {
        return (hi - lo) * 0.5 * (value(lo) + value(hi));
    }
    let mut total = (cell_lo + h - lo) * 0.5 * (value(lo) + ys[first + 1]);
    for j in first + 1..last - 1 {
        total += h * 0.5 * (ys[j] + ys[j + 1]);
    }
    total += (hi - (cell_hi - h)) * 0.5 * (ys[last - 1] + value(hi));
    total
}

/// ln(n!) via the log-gamma function.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Binomial coefficient as f64, built multiplicatively. Exact for the
/// moderate sizes used here and overflow-free for much larger ones.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Running mean/variance sums that can be merged across batches in a fixed
/// order, keeping parallel reductions deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean, from the unbiased sample variance.
    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}
