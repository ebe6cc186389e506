//! Tail diagnostics: radial survival curves, their L1 distance, moments and
//! the Hill estimator.

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::sample_set::SampleSet;
use crate::samplers::student_t_radial_density;
use crate::scalar::{norm, Scalar};

pub const DEFAULT_GRID_POINTS: usize = 200;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|g| !g.is_finite()) {
        return invalid("grid values must be finite");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("grid must be strictly increasing");
    }
    Ok(())
}

/// Fraction of radii strictly greater than each grid point.
pub fn rccdf_empirical(radii: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return invalid("radii must be nonnegative");
    }
    if radii.is_empty() {
        return invalid("no radii");
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| {
            let at_most = sorted.partition_point(|&r| r <= g);
            (sorted.len() - at_most) as f64 / n
        })
        .collect())
}

/// Weighted variant over a sample set: `Σ w_i 1{‖x_i‖ > r}`.
pub fn rccdf_weighted<T: Scalar>(s: &SampleSet<T>, grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let mut pairs: Vec<(f64, f64)> = s.iter().map(|(x, w)| (norm(x).to_f64_lossy(), w.to_f64_lossy())).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut tail = vec![0.0; pairs.len() + 1];
    for i in (0..pairs.len()).rev() {
        tail[i] = tail[i + 1] + pairs[i].1;
    }
    Ok(grid
        .iter()
        .map(|&g| tail[pairs.partition_point(|p| p.0 <= g)].clamp(0.0, 1.0))
        .collect())
}

/// `P(‖X‖ > r)` for the isotropic Student-t in `R^d`, by quadrature of the
/// radial density.
pub fn rccdf_truth_student_t(nu: f64, d: usize, r: f64) -> Result<f64> {
    if !(nu > 0.0) || d == 0 {
        return invalid("Student-t needs ν > 0 and d ≥ 1");
    }
    if !(r >= 0.0) {
        return invalid("radius must be nonnegative");
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    if r.is_infinite() {
        return Ok(0.0);
    }
    let opts = QuadOptions { rel_tol: 1e-10, ..QuadOptions::default() };
    let density = |s: f64| student_t_radial_density(d, nu, s);
    // Integrate whichever side carries less mass so the difference keeps precision.
    let head = integrate(density, 0.0, r, &opts)?.value;
    let value = if head < 0.5 {
        1.0 - head
    } else {
        let opts = QuadOptions { r_max: (r * 1e8).max(1e8), ..opts };
        integrate(density, r, f64::INFINITY, &opts)?.value
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Trapezoidal integral of `|a − b|` over `grid`.
pub fn l1_error(grid: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    check_grid(grid)?;
    if a.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: a.len() });
    }
    if b.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: b.len() });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    Ok(grid.windows(2).zip(diff.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum())
}

/// `Σ w_i ‖x_i‖^r`.
pub fn empirical_moment<T: Scalar>(s: &SampleSet<T>, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return invalid("moment order must be nonnegative");
    }
    Ok(s.iter()
        .map(|(x, w)| {
            let rad = norm(x).to_f64_lossy();
            w.to_f64_lossy() * if r == 0.0 { 1.0 } else { rad.powf(r) }
        })
        .sum())
}

/// Checks `M_z ≤ M_β + 1` for every `z` in `zs` with `1 ≤ z ≤ β`. Returns
/// the largest observed `M_z − M_β − 1` (nonpositive when the bound holds).
pub fn moment_lemma_slack<T: Scalar>(s: &SampleSet<T>, beta: f64, zs: &[f64]) -> Result<f64> {
    if !(beta >= 1.0) {
        return invalid("β must be at least 1");
    }
    let top = empirical_moment(s, beta)?;
    let mut worst = f64::NEG_INFINITY;
    for &z in zs {
        if !(1.0..=beta).contains(&z) {
            return invalid(format!("moment order {z} outside [1, {beta}]"));
        }
        let excess = empirical_moment(s, z)? - top - 1.0;
        // The two sums differ in rounding; only a genuine violation counts.
        let noise = 1e-12 * (1.0 + top);
        worst = worst.max(if excess.abs() <= noise { 0.0 } else { excess });
    }
    Ok(worst)
}

/// Hill estimator of the survival exponent from the `k` largest radii:
/// `k / Σ_{i<k} ln(r_(i) / r_(k))`.
pub fn hill_tail_index(radii: &[f64], k: usize) -> Result<f64> {
    if k < 2 {
        return invalid("Hill estimator needs at least two order statistics");
    }
    if k >= radii.len() {
        return invalid(format!("k = {k} must be below the sample size {}", radii.len()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let xk = sorted[k];
    if !(xk > 0.0) {
        return invalid("the k-th largest radius must be positive");
    }
    let s: f64 = sorted[..k].iter().map(|&x| (x / xk).ln()).sum();
    if !(s > 0.0) {
        return invalid("top order statistics are tied");
    }
    Ok(k as f64 / s)
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Geometric grid from the 1st to the 99.9th percentile of `radii`.
pub fn default_grid(radii: &[f64], points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return invalid("a grid needs at least two points");
    }
    let mut sorted: Vec<f64> = radii.iter().copied().filter(|r| *r > 0.0 && r.is_finite()).collect();
    if sorted.len() < 2 {
        return invalid("need at least two positive radii");
    }
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, 0.01);
    let hi = quantile_sorted(&sorted, 0.999);
    if !(hi > lo) {
        return invalid("radii are degenerate");
    }
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo * (ratio * i as f64).exp()).collect();
    grid[points - 1] = hi;
    Ok(grid)
}

/// Freedman–Diaconis bin count for the radii.
pub fn freedman_diaconis_bins(radii: &[f64]) -> Result<usize> {
    if radii.len() < 2 {
        return invalid("need at least two radii");
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let span = sorted[sorted.len() - 1] - sorted[0];
    if !(iqr > 0.0) || !(span > 0.0) {
        return Ok(1);
    }
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    Ok(((span / width).ceil() as usize).clamp(1, 1_000_000))
}

/// Survival curve read off a histogram of the radii: the survival fraction
/// at each bin edge, linearly interpolated onto `grid`.
pub fn rccdf_histogram(radii: &[f64], grid: &[f64], bins: Option<usize>) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let bins = match bins {
        Some(0) => return invalid("bin count must be positive"),
        Some(b) => b,
        None => freedman_diaconis_bins(radii)?,
    };
    let (lo, hi) = radii.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    if !(hi > lo) {
        return rccdf_empirical(radii, grid);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &r in radii {
        let k = (((r - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = radii.len() as f64;
    let mut survival = vec![0.0; bins + 1];
    let mut acc = 0usize;
    for k in (0..bins).rev() {
        acc += counts[k];
        survival[k] = acc as f64 / n;
    }
    Ok(grid
        .iter()
        .map(|&g| {
            if g <= lo {
                1.0
            } else if g >= hi {
                0.0
            } else {
                let t = (g - lo) / width;
                let k = (t as usize).min(bins - 1);
                let f = t - k as f64;
                survival[k] + f * (survival[k + 1] - survival[k])
            }
        })
        .collect())
}

/// One row per grid point: truth, empirical and absolute difference.
#[derive(Debug, Clone, PartialEq)]
pub struct TailComparison {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub empirical: Vec<f64>,
    pub l1: f64,
}

/// Compares the radial survival of `samples` with a reference curve.
pub fn compare_tails<T: Scalar>(samples: &SampleSet<T>, grid: Vec<f64>, truth: Vec<f64>) -> Result<TailComparison> {
    let empirical = rccdf_weighted(samples, &grid)?;
    let l1 = l1_error(&grid, &truth, &empirical)?;
    Ok(TailComparison { grid, truth, empirical, l1 })
}

/// Reference survival curve of an isotropic Student-t on `grid`.
pub fn student_t_truth_curve(nu: f64, d: usize, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&r| rccdf_truth_student_t(nu, d, r)).collect()
}
