//! Exact Wasserstein-1 distances between finitely supported measures with
//! the Euclidean ground metric.
//!
//! * one dimension: `∫|F_a − F_b|` from the merged sorted supports;
//! * equal counts with uniform weights: min-cost assignment (shortest
//!   augmenting paths with dual potentials, `O(n³)`);
//! * otherwise: successive-shortest-path min-cost flow on integer masses
//!   obtained by putting all weights over a common denominator.

use crate::error::{invalid, Error, Result};
use crate::sample_set::SampleSet;
use crate::scalar::{euclidean, pairwise_sum, Scalar};

/// Default cap on the common denominator of rationalized weights.
pub const DEFAULT_DENOMINATOR_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W1Method {
    /// Quantile formula in one dimension, assignment for equal uniform
    /// counts, flow otherwise.
    Auto,
    Quantile,
    Assignment,
    Flow,
}

fn check_pair<T: Scalar>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return invalid("W1 needs nonempty sample sets");
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

/// `W1` between one-dimensional measures, `∫|F_a − F_b| dx`.
pub fn w1_1d<T: Scalar>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<T> {
    check_pair(a, b)?;
    if a.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: a.dim() });
    }
    // Signed atoms: +w for a, −w for b; F_a − F_b is their running sum.
    let mut atoms: Vec<(T, T)> = a
        .points()
        .iter()
        .zip(a.weights())
        .map(|(&x, &w)| (x, w))
        .chain(b.points().iter().zip(b.weights()).map(|(&x, &w)| (x, -w)))
        .collect();
    atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut diff = T::zero();
    let mut pieces = Vec::with_capacity(atoms.len());
    for k in 0..atoms.len() - 1 {
        diff = diff + atoms[k].1;
        let gap = atoms[k + 1].0 - atoms[k].0;
        if gap > T::zero() {
            pieces.push(diff.abs() * gap);
        }
    }
    Ok(pairwise_sum(&pieces))
}

/// Minimum-cost perfect matching on a square cost matrix (row-major).
/// Returns `(assignment[row] = column, total cost)`.
pub fn min_cost_assignment<T: Scalar>(n: usize, cost: &[T]) -> Result<(Vec<usize>, T)> {
    if cost.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: cost.len() });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost matrix".into()));
    }
    // Rows and columns are 1-based below; index 0 is the virtual start.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    let terms: Vec<T> = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect();
    Ok((assignment, pairwise_sum(&terms)))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest denominator `q` with `|w − p/q| ≤ tol`, by continued fractions.
fn rational_denominator(w: f64, tol: f64, limit: u64) -> Option<u64> {
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut x = w;
    for _ in 0..64 {
        let a = x.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > limit as f64 {
            return None;
        }
        if (w - h2 / k2).abs() <= tol {
            return Some(k2 as u64);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = x - a;
        if frac <= 0.0 {
            return None;
        }
        x = 1.0 / frac;
    }
    None
}

/// Integer masses over a common denominator `D`: `w_i ≈ units_i / D`.
pub fn rationalize<T: Scalar>(weights: &[T], cap: u64) -> Result<(Vec<u64>, u64)> {
    let tol = 1e-12f64;
    let search_limit = 1u64 << 52;
    let mut denom = 1u64;
    for &w in weights {
        let wf = w.to_f64_lossy();
        let tol_w = tol.max(4.0 * T::eps().to_f64_lossy() * wf.abs());
        let q = rational_denominator(wf, tol_w, search_limit)
            .ok_or(Error::Rationalization { required: search_limit, cap })?;
        let g = gcd(denom, q);
        denom = (denom / g).checked_mul(q).ok_or(Error::Rationalization { required: u64::MAX, cap })?;
        if denom > cap {
            return Err(Error::Rationalization { required: denom, cap });
        }
    }
    let mut units: Vec<u64> = weights.iter().map(|&w| (w.to_f64_lossy() * denom as f64).round() as u64).collect();
    // Rounding can leave the total a few units off D; absorb into the largest mass.
    let total: u64 = units.iter().sum();
    if total != denom {
        let (imax, _) = units.iter().enumerate().max_by_key(|(_, &u)| u).unwrap_or((0, &0));
        units[imax] = (units[imax] + denom).saturating_sub(total);
    }
    Ok((units, denom))
}

/// Minimum-cost transportation between integer supplies and demands of equal
/// total, on a dense `n × m` cost matrix. Returns the optimal cost.
pub fn min_cost_flow<T: Scalar>(supply: &[u64], demand: &[u64], cost: &[T]) -> Result<T> {
    let (n, m) = (supply.len(), demand.len());
    if cost.len() != n * m {
        return Err(Error::DimensionMismatch { expected: n * m, got: cost.len() });
    }
    if supply.iter().sum::<u64>() != demand.iter().sum::<u64>() {
        return invalid("supplies and demands must have equal totals");
    }
    if cost.iter().any(|c| !c.is_finite() || *c < T::zero()) {
        return Err(Error::NonFinite("transport costs must be finite and nonnegative".into()));
    }
    let mut flow = vec![0u64; n * m];
    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    // Node potentials keep reduced costs nonnegative: sources 0..n, sinks n..n+m.
    let mut pot = vec![T::zero(); n + m];
    let inf = T::infinity();
    loop {
        if need.iter().all(|&x| x == 0) {
            break;
        }
        let mut dist = vec![inf; n + m];
        let mut prev = vec![usize::MAX; n + m];
        let mut done = vec![false; n + m];
        for i in 0..n {
            if left[i] > 0 {
                dist[i] = T::zero();
            }
        }
        // Dense Dijkstra on reduced costs.
        loop {
            let mut best = None;
            for v in 0..n + m {
                if !done[v] && dist[v] < inf && best.is_none_or(|b: usize| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            if v < n {
                for j in 0..m {
                    let w = n + j;
                    let rc = cost[v * m + j] + pot[v] - pot[w];
                    let nd = dist[v] + rc.max(T::zero());
                    if nd < dist[w] {
                        dist[w] = nd;
                        prev[w] = v;
                    }
                }
            } else {
                let j = v - n;
                for i in 0..n {
                    if flow[i * m + j] > 0 {
                        let rc = -cost[i * m + j] + pot[v] - pot[i];
                        let nd = dist[v] + rc.max(T::zero());
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = v;
                        }
                    }
                }
            }
        }
        let target = (0..m)
            .filter(|&j| need[j] > 0 && dist[n + j] < inf)
            .min_by(|&x, &y| dist[n + x].partial_cmp(&dist[n + y]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(tj) = target else {
            return Err(Error::NonFinite("transport problem became disconnected".into()));
        };
        // Bottleneck along the path back to a source.
        let mut amount = need[tj];
        let mut v = n + tj;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(left[v]);
        let source = v;
        let mut v = n + tj;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                flow[v * m + (u - n)] -= amount;
            }
            v = u;
        }
        left[source] -= amount;
        need[tj] -= amount;
        let cap = dist.iter().copied().filter(|d| *d < inf).fold(T::zero(), T::max);
        for (p, d) in pot.iter_mut().zip(&dist) {
            *p = *p + if *d < inf { *d } else { cap };
        }
    }
    let terms: Vec<T> = flow
        .iter()
        .zip(cost)
        .filter(|(&f, _)| f > 0)
        .map(|(&f, &c)| T::c(f as f64) * c)
        .collect();
    Ok(pairwise_sum(&terms))
}

fn cost_matrix<T: Scalar>(a: &SampleSet<T>, b: &SampleSet<T>) -> Vec<T> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            c.push(euclidean(a.point(i), b.point(j)));
        }
    }
    c
}

/// Exact `W1(a, b)`; see [`W1Method::Auto`] for the dispatch.
pub fn w1_exact<T: Scalar>(a: &SampleSet<T>, b: &SampleSet<T>) -> Result<T> {
    w1_with(a, b, W1Method::Auto, DEFAULT_DENOMINATOR_CAP)
}

/// `W1(a, b)` with an explicit solver and denominator cap.
pub fn w1_with<T: Scalar>(a: &SampleSet<T>, b: &SampleSet<T>, method: W1Method, cap: u64) -> Result<T> {
    check_pair(a, b)?;
    let square_uniform = a.len() == b.len() && a.is_uniform() && b.is_uniform();
    let method = match method {
        W1Method::Auto if a.dim() == 1 => W1Method::Quantile,
        W1Method::Auto if square_uniform => W1Method::Assignment,
        W1Method::Auto => W1Method::Flow,
        m => m,
    };
    match method {
        W1Method::Quantile => w1_1d(a, b),
        W1Method::Assignment => {
            if !square_uniform {
                return invalid("assignment solver needs equal counts with uniform weights");
            }
            let (_, total) = min_cost_assignment(a.len(), &cost_matrix(a, b))?;
            Ok(total / T::from_count(a.len()))
        }
        W1Method::Flow => {
            let (sa, da) = rationalize(a.weights(), cap)?;
            let (sb, db) = rationalize(b.weights(), cap)?;
            let g = gcd(da, db);
            let denom = (da / g).checked_mul(db).ok_or(Error::Rationalization { required: u64::MAX, cap })?;
            if denom > cap {
                return Err(Error::Rationalization { required: denom, cap });
            }
            let supply: Vec<u64> = sa.iter().map(|&u| u * (denom / da)).collect();
            let demand: Vec<u64> = sb.iter().map(|&u| u * (denom / db)).collect();
            let total = min_cost_flow(&supply, &demand, &cost_matrix(a, b))?;
            Ok(total / T::c(denom as f64))
        }
        W1Method::Auto => unreachable!(),
    }
}

/// The computable dominant term `L · W1(P_m, Q_n)` of the a-posteriori bound.
pub fn posteriori_bound<T: Scalar>(p_m: &SampleSet<T>, q_n: &SampleSet<T>, l: T) -> Result<T> {
    if !(l > T::zero()) {
        return invalid(format!("Lipschitz constant must be positive, got {l}"));
    }
    Ok(l * w1_exact(p_m, q_n)?)
}

/// `L · W1(P_m, Q_n) + D(Q_n‖Q)` for callers able to evaluate the second
/// term, which bounds the proximal divergence between `P_m` and `Q`.
pub fn composed_bound<T: Scalar>(p_m: &SampleSet<T>, q_n: &SampleSet<T>, l: T, reference_term: T) -> Result<T> {
    Ok(posteriori_bound(p_m, q_n, l)? + reference_term)
}
