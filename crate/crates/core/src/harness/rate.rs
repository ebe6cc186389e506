//! Convergence rate of the plug-in estimator in the `P = Q` design, where
//! the population value is zero and every estimate is pure error.

use crate::conjugate::Alpha;
use crate::discrete_dual::solve_discrete_dual;
use crate::error::{invalid, Result};
use crate::neural::{estimate_dual, TrainConfig};
use crate::samplers::{sample_student_t, stream_rng};

#[derive(Debug, Clone, PartialEq)]
pub enum RateMethod {
    Exact,
    Neural(TrainConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyConfig {
    pub dim: usize,
    pub alpha: f64,
    /// Student-t degrees of freedom shared by `P` and `Q`.
    pub nu: f64,
    pub lipschitz: f64,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub method: RateMethod,
    /// Worker threads for independent cells; results do not depend on it.
    pub threads: usize,
}

impl Default for RateStudyConfig {
    fn default() -> Self {
        RateStudyConfig {
            dim: 1,
            alpha: 8.0,
            nu: 12.0,
            lipschitz: 1.0,
            sizes: vec![50, 100, 200, 400, 800, 1600],
            seeds: (0..20).collect(),
            method: RateMethod::Exact,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    /// `|D̂(P_n‖Q_n)|` per seed, in seed order.
    pub errors: Vec<f64>,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    pub slope: f64,
    pub intercept: f64,
    /// Violated sample-complexity conditions (empty when all hold).
    pub warnings: Vec<String>,
}

/// Conditions under which the sample-complexity theorem gives the
/// `n^{−1/2}` rate for heavy tails `(β1, β2)` in dimension `d`. Returns one
/// message per violated condition.
pub fn rate_preconditions(d: usize, alpha: f64, beta1: f64, beta2: f64) -> Vec<String> {
    let mut w = Vec::new();
    if !(alpha > 1.0) {
        w.push(format!("α = {alpha} must exceed 1"));
        return w;
    }
    let k = alpha / (alpha - 1.0);
    let mut need = |ok: bool, what: String| {
        if !ok {
            w.push(what);
        }
    };
    match d {
        0 => need(false, "dimension must be positive".into()),
        1 => {
            need(beta1 > 7.0, format!("β1 = {beta1} must exceed 7"));
            need(beta2 > 13.0, format!("β2 = {beta2} must exceed 13"));
            need(2.0 * k + 4.0 < beta1 - 1.0, format!("2α/(α−1) + 4 = {} must be below β1 − 1 = {}", 2.0 * k + 4.0, beta1 - 1.0));
            need(6.0 * k < beta2 - 7.0, format!("6α/(α−1) = {} must be below β2 − 7 = {}", 6.0 * k, beta2 - 7.0));
        }
        2 => {
            need(beta1 > 10.0, format!("β1 = {beta1} must exceed 10"));
            need(beta2 > 18.0, format!("β2 = {beta2} must exceed 18"));
            need(4.0 * k + 4.0 < beta1 - 2.0, format!("4α/(α−1) + 4 = {} must be below β1 − 2 = {}", 4.0 * k + 4.0, beta1 - 2.0));
            need(8.0 * k < beta2 - 10.0, format!("8α/(α−1) = {} must be below β2 − 10 = {}", 8.0 * k, beta2 - 10.0));
        }
        _ => {
            let df = d as f64;
            need(beta1 > 3.0 * df, format!("β1 = {beta1} must exceed 3d = {}", 3.0 * df));
            need(beta2 > 5.0 * df, format!("β2 = {beta2} must exceed 5d = {}", 5.0 * df));
            need(2.0 * df * k < beta1 - df, format!("2dα/(α−1) = {} must be below β1 − d = {}", 2.0 * df * k, beta1 - df));
            need(2.0 * k < beta2 / df - 3.0, format!("2α/(α−1) = {} must be below β2/d − 3 = {}", 2.0 * k, beta2 / df - 3.0));
        }
    }
    w
}

/// Least-squares fit of `ln y = intercept + slope · ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("need at least two matching points");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return invalid("log-log fit needs positive values");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return invalid("sizes must not all be equal");
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn cell(cfg: &RateStudyConfig, n: usize, seed: u64) -> Result<f64> {
    // Distinct streams for P and Q so that the two samples are independent.
    let mut rng = stream_rng(seed, n as u64);
    let sp = rand::Rng::random::<u64>(&mut rng);
    let sq = rand::Rng::random::<u64>(&mut rng);
    let p = sample_student_t::<f64>(cfg.dim, cfg.nu, n, sp)?;
    let q = sample_student_t::<f64>(cfg.dim, cfg.nu, n, sq)?;
    let a = Alpha::Power(cfg.alpha);
    let v = match &cfg.method {
        RateMethod::Exact => solve_discrete_dual(&p, &q, a, cfg.lipschitz)?.objective,
        RateMethod::Neural(tc) => estimate_dual(&p, &q, a, cfg.lipschitz, &TrainConfig { seed, ..tc.clone() })?.estimate,
    };
    Ok(v.abs())
}

pub fn rate_study(cfg: &RateStudyConfig) -> Result<RateStudy> {
    if cfg.sizes.len() < 4 {
        return invalid(format!("a rate fit needs at least 4 sizes, got {}", cfg.sizes.len()));
    }
    if cfg.seeds.is_empty() {
        return invalid("no seeds");
    }
    if cfg.sizes.contains(&0) || !(cfg.nu > 0.0) || cfg.dim == 0 {
        return invalid("sizes, ν and the dimension must be positive");
    }
    let beta = cfg.nu + cfg.dim as f64;
    let warnings = rate_preconditions(cfg.dim, cfg.alpha, beta, beta);
    let cells: Vec<(usize, u64)> = cfg.sizes.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let threads = cfg.threads.max(1).min(cells.len());
    let mut results: Vec<Option<Result<f64>>> = (0..cells.len()).map(|_| None).collect();
    if threads == 1 {
        for (slot, &(n, s)) in results.iter_mut().zip(&cells) {
            *slot = Some(cell(cfg, n, s));
        }
    } else {
        // Static round-robin partition; each cell is written to its own slot.
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let cells = &cells;
                    scope.spawn(move || {
                        (t..cells.len()).step_by(threads).map(|i| (i, cell(cfg, cells[i].0, cells[i].1))).collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("rate-study worker panicked") {
                    results[i] = Some(r);
                }
            }
        });
    }
    let mut flat = Vec::with_capacity(cells.len());
    for r in results {
        flat.push(r.expect("every cell is computed")?);
    }
    let k = cfg.seeds.len();
    let rows: Vec<RateRow> = cfg
        .sizes
        .iter()
        .zip(flat.chunks(k))
        .map(|(&n, errs)| RateRow { n, errors: errs.to_vec(), mean_error: errs.iter().sum::<f64>() / k as f64 })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let (slope, intercept) = fit_loglog(&xs, &ys)?;
    Ok(RateStudy { rows, slope, intercept, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_examples() {
        assert!(rate_preconditions(1, 8.0, 14.0, 14.0).is_empty());
        let w = rate_preconditions(1, 7.0, 14.0, 14.0);
        assert_eq!(w.len(), 1, "{w:?}");
        assert!(w[0].contains("6α/(α−1)"));
        assert!(rate_preconditions(2, 10.0, 30.0, 40.0).is_empty());
        assert_eq!(rate_preconditions(2, 10.0, 10.0, 18.0).len(), 4);
        assert!(rate_preconditions(3, 20.0, 20.0, 40.0).is_empty());
        assert!(!rate_preconditions(3, 20.0, 9.0, 40.0).is_empty());
        assert!(!rate_preconditions(1, 1.0, 100.0, 100.0).is_empty());
        // The acceptance instance: Student-t ν = 12 in one dimension gives β = 13.
        assert_eq!(rate_preconditions(1, 8.0, 13.0, 13.0).len(), 2);
    }

    #[test]
    fn loglog_fit() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let (s, c) = fit_loglog(&xs, &ys).unwrap();
        assert!((s + 0.5).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12);
        assert!(fit_loglog(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_study_and_threads() {
        let cfg = RateStudyConfig { sizes: vec![20, 40, 80, 160], seeds: vec![0, 1, 2], ..RateStudyConfig::default() };
        let a = rate_study(&cfg).unwrap();
        assert!(a.rows.iter().all(|r| r.mean_error >= 0.0));
        assert_eq!(a.warnings.len(), 2);
        let b = rate_study(&RateStudyConfig { threads: 3, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert!(rate_study(&RateStudyConfig { sizes: vec![10, 20, 40], ..cfg }).is_err());
    }
}
