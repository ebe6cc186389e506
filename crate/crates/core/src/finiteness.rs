//! Finiteness of the Lipschitz-regularized α-divergence between two
//! heavy-tailed densities, decided from their tail exponents.
//!
//! With `p ≍ ‖x‖^{−β₁}` and `q ≍ ‖x‖^{−β₂}` in dimension `d` and `α > 1`:
//!
//! | rule                 | clause (i)                                          | clause (ii)   | otherwise  |
//! |----------------------|-----------------------------------------------------|---------------|------------|
//! | [`finiteness_w1`]     | `d < β₁ ≤ d+1`, `β₂ − β₁ < (β₁ − d)/(α − 1)`          | `β₁ > d+1`    | Infinite   |
//! | [`finiteness_w2`]     | same with `d+2`                                     | `β₁ > d+2`    | Undecided  |
//! | [`finiteness_lowdim`] | as W1 with `d` replaced by the intrinsic dimension  |               | Infinite   |
//! | [`finiteness_w1_kl`]  | always finite                                       |               |            |
//!
//! The W1 rule is an equivalence; the W2 rule is only sufficient and never
//! reports `Infinite`. The boundary `β₂ − β₁ = (β₁ − d)/(α − 1)` is Infinite.
//!
//! Numerical evidence for each verdict comes from two radial integrals. In the
//! infinite regime a witness potential `γ̂ = τ‖x‖` or `τ‖x‖^{(α−1)(β₂−β₁)}`
//! produces a lower bound whose truncated integral keeps growing
//! ([`witness_integral`]). In the finite regime the pointwise bound
//! `min(‖x‖^{α(β₂−β₁)−β₂}, ‖x‖^{1−β₁})` has a converging tail
//! ([`upper_bound_integral`]).

use std::cell::Cell;
use std::fmt;

use crate::conjugate::{f_alpha, Alpha};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions, QuadResult};
use crate::scalar::{unit_sphere_area, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Finite,
    Infinite,
    /// A sufficient condition for finiteness holds.
    FiniteSufficient,
    /// No sufficient condition holds; finiteness is not decided.
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Finite => "finite",
            Verdict::Infinite => "infinite",
            Verdict::FiniteSufficient => "finite-sufficient",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    W1ClauseI,
    W1ClauseII,
    W1Neither,
    Kl,
    W2ClauseI,
    W2ClauseII,
    W2Neither,
    LowDimClauseI,
    LowDimClauseII,
    LowDimNeither,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::W1ClauseI => "w1-clause-i",
            Rule::W1ClauseII => "w1-clause-ii",
            Rule::W1Neither => "w1-neither-clause",
            Rule::Kl => "kl-always-finite",
            Rule::W2ClauseI => "w2-clause-i",
            Rule::W2ClauseII => "w2-clause-ii",
            Rule::W2Neither => "w2-neither-clause",
            Rule::LowDimClauseI => "lowdim-clause-i",
            Rule::LowDimClauseII => "lowdim-clause-ii",
            Rule::LowDimNeither => "lowdim-neither-clause",
        })
    }
}

/// A verdict with the clause that produced it and the inputs it was given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailVerdict<T> {
    pub verdict: Verdict,
    pub rule: Rule,
    /// `d`, or the intrinsic dimension for the low-dimensional rule.
    pub dim: usize,
    pub alpha: Alpha<T>,
    pub beta1: T,
    pub beta2: T,
}

fn check_tails<T: Scalar>(d: usize, beta1: T, beta2: T) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    let dd = T::from_count(d);
    if !(beta1 > dd) || !(beta2 > dd) || !beta1.is_finite() || !beta2.is_finite() {
        return invalid(format!(
            "tail exponents must exceed the dimension d = {d} (beta1 = {beta1}, beta2 = {beta2})"
        ));
    }
    Ok(())
}

fn power_order<T: Scalar>(a: Alpha<T>) -> Result<T> {
    match a {
        Alpha::Power(al) if al > T::one() => Ok(al),
        Alpha::Power(al) => Err(Error::Unsupported(format!("finiteness rules need alpha > 1, got {al}"))),
        Alpha::Kl => Err(Error::Unsupported("use finiteness_w1_kl for the KL divergence".into())),
    }
}

/// `(clause i, clause ii)` with the linear budget `d + reach`.
fn clauses<T: Scalar>(d: usize, reach: usize, al: T, beta1: T, beta2: T) -> (bool, bool) {
    let dd = T::from_count(d);
    let edge = T::from_count(d + reach);
    let first = beta1 > dd && beta1 <= edge && beta2 - beta1 < (beta1 - dd) / (al - T::one());
    (first, beta1 > edge)
}

/// Finiteness of the W1-proximal α-divergence (`α > 1`); an equivalence.
pub fn finiteness_w1<T: Scalar>(d: usize, a: Alpha<T>, beta1: T, beta2: T) -> Result<TailVerdict<T>> {
    check_tails(d, beta1, beta2)?;
    let al = power_order(a)?;
    let (verdict, rule) = match clauses(d, 1, al, beta1, beta2) {
        (true, _) => (Verdict::Finite, Rule::W1ClauseI),
        (_, true) => (Verdict::Finite, Rule::W1ClauseII),
        _ => (Verdict::Infinite, Rule::W1Neither),
    };
    Ok(TailVerdict { verdict, rule, dim: d, alpha: a, beta1, beta2 })
}

/// The W1-proximal KL divergence is finite for all admissible tails.
pub fn finiteness_w1_kl<T: Scalar>(d: usize, beta1: T, beta2: T) -> Result<TailVerdict<T>> {
    check_tails(d, beta1, beta2)?;
    Ok(TailVerdict { verdict: Verdict::Finite, rule: Rule::Kl, dim: d, alpha: Alpha::Kl, beta1, beta2 })
}

/// Sufficient condition for finiteness of the W2-proximal α-divergence.
pub fn finiteness_w2<T: Scalar>(d: usize, a: Alpha<T>, beta1: T, beta2: T) -> Result<TailVerdict<T>> {
    check_tails(d, beta1, beta2)?;
    let al = power_order(a)?;
    let (verdict, rule) = match clauses(d, 2, al, beta1, beta2) {
        (true, _) => (Verdict::FiniteSufficient, Rule::W2ClauseI),
        (_, true) => (Verdict::FiniteSufficient, Rule::W2ClauseII),
        _ => (Verdict::Undecided, Rule::W2Neither),
    };
    Ok(TailVerdict { verdict, rule, dim: d, alpha: a, beta1, beta2 })
}

/// The W1 rule for measures concentrated on a `d*`-dimensional submanifold,
/// with tails measured in intrinsic coordinates.
pub fn finiteness_lowdim<T: Scalar>(d_star: usize, a: Alpha<T>, beta1: T, beta2: T) -> Result<TailVerdict<T>> {
    check_tails(d_star, beta1, beta2)?;
    let al = power_order(a)?;
    let (verdict, rule) = match clauses(d_star, 1, al, beta1, beta2) {
        (true, _) => (Verdict::Finite, Rule::LowDimClauseI),
        (_, true) => (Verdict::Finite, Rule::LowDimClauseII),
        _ => (Verdict::Infinite, Rule::LowDimNeither),
    };
    Ok(TailVerdict { verdict, rule, dim: d_star, alpha: a, beta1, beta2 })
}

fn radial_options() -> QuadOptions {
    QuadOptions { rel_tol: 1e-10, ..QuadOptions::default() }
}

/// `∫_1^{r_max} S_d r^{d−1} g(r) dr`, split at decades.
fn radial_integral(d: usize, r_max: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    if !(r_max > 1.0) {
        return invalid(format!("r_max must exceed 1, got {r_max}"));
    }
    let surface = unit_sphere_area::<f64>(d);
    let h = |r: f64| surface * r.powi(d as i32 - 1) * g(r);
    let opts = radial_options();
    let mut total = 0.0;
    let mut lo = 1.0;
    while lo < r_max {
        let hi = (10.0 * lo).min(r_max);
        total += integrate(h, lo, hi, &opts)?.value;
        lo = hi;
    }
    Ok(total)
}

/// The witness potential and lower-bound integrand for an infinite instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    /// Exponent `s` of `γ̂(x) = τ‖x‖^s`: `1`, or `(α−1)(β₂−β₁)` when that is below one.
    pub potential_exponent: f64,
    /// Exponent of the positive term `τ r^{e₁}`.
    pub e1: f64,
    /// Exponent of the negative term `τ^{α/(α−1)} r^{e₂}`.
    pub e2: f64,
}

/// Selects the witness for `(α, β₁, β₂)` on the unit-constant densities.
pub fn witness(alpha: f64, beta1: f64, beta2: f64) -> Witness {
    let k = alpha / (alpha - 1.0);
    let gap = beta2 - beta1;
    let s = if gap >= 1.0 / (alpha - 1.0) { 1.0 } else { (alpha - 1.0) * gap };
    Witness { potential_exponent: s, e1: s - beta1, e2: k * s - beta2 }
}

/// Truncated lower-bound integral of the witness construction:
/// `∫_{1 ≤ ‖x‖ ≤ r_max} (τ‖x‖^{e₁} − τ^{α/(α−1)}‖x‖^{e₂}) dx`.
///
/// The densities are taken as `‖x‖^{−β₁}` and `‖x‖^{−β₂}` outside the unit
/// ball. Only defined in the infinite regime.
pub fn witness_integral(d: usize, a: Alpha<f64>, beta1: f64, beta2: f64, tau: f64, r_max: f64) -> Result<f64> {
    let v = finiteness_w1(d, a, beta1, beta2)?;
    if v.verdict != Verdict::Infinite {
        return Err(Error::NotApplicable(format!(
            "witness integral needs an infinite instance; (d={d}, alpha={a}, beta1={beta1}, beta2={beta2}) is finite"
        )));
    }
    let al = a.order();
    if !(tau > 0.0 && tau < 1.0) {
        return invalid(format!("tau must lie in (0, 1), got {tau}"));
    }
    let w = witness(al, beta1, beta2);
    let tk = tau.powf(al / (al - 1.0));
    radial_integral(d, r_max, |r| tau * r.powf(w.e1) - tk * r.powf(w.e2))
}

/// Exponent of the pointwise upper bound on the proximal integrand:
/// `min(α(β₂−β₁) − β₂, 1 − β₁)`.
pub fn upper_bound_exponent(alpha: f64, beta1: f64, beta2: f64) -> f64 {
    (alpha * (beta2 - beta1) - beta2).min(1.0 - beta1)
}

/// `∫_{1 ≤ ‖x‖ ≤ r_max} ‖x‖^{u} dx` with `u` from [`upper_bound_exponent`].
pub fn upper_bound_integral(d: usize, a: Alpha<f64>, beta1: f64, beta2: f64, r_max: f64) -> Result<f64> {
    check_tails(d, beta1, beta2)?;
    let u = upper_bound_exponent(power_order(a)?, beta1, beta2);
    radial_integral(d, r_max, |r| r.powf(u))
}

/// Truncation radii used for the growth tables.
pub const EVIDENCE_RADII: [f64; 3] = [1e2, 1e4, 1e6];

/// Witness values must grow by this factor per two decades.
pub const DIVERGENCE_RATIO: f64 = 3.0;

/// Tail increments must shrink at least by this factor per two decades.
pub const CAUCHY_CONTRACTION: f64 = 0.5;

/// Truncated integrals at [`EVIDENCE_RADII`] and the resulting decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub verdict: Verdict,
    pub values: Vec<(f64, f64)>,
    /// Whether the numbers agree with `verdict`.
    pub consistent: bool,
}

/// Numerical evidence for the W1 verdict on `(d, α, β₁, β₂)`: witness growth
/// for Infinite, Cauchy convergence of the upper bound for Finite.
pub fn evidence(d: usize, a: Alpha<f64>, beta1: f64, beta2: f64, tau: f64) -> Result<Evidence> {
    let v = finiteness_w1(d, a, beta1, beta2)?;
    let values = if v.verdict == Verdict::Infinite {
        EVIDENCE_RADII
            .iter()
            .map(|&r| witness_integral(d, a, beta1, beta2, tau, r).map(|x| (r, x)))
            .collect::<Result<Vec<_>>>()?
    } else {
        EVIDENCE_RADII
            .iter()
            .map(|&r| upper_bound_integral(d, a, beta1, beta2, r).map(|x| (r, x)))
            .collect::<Result<Vec<_>>>()?
    };
    let consistent = if v.verdict == Verdict::Infinite {
        values.windows(2).all(|w| w[0].1 > 0.0 && w[1].1 >= DIVERGENCE_RATIO * w[0].1)
    } else {
        let inc1 = values[1].1 - values[0].1;
        let inc2 = values[2].1 - values[1].1;
        inc1 >= 0.0 && inc2 >= 0.0 && inc2 <= CAUCHY_CONTRACTION * inc1
    };
    Ok(Evidence { verdict: v.verdict, values, consistent })
}

/// Tuples straddling the W1 boundary for `d ∈ {1,2,3}` and `α ∈ {1.5, 2, 4}`.
///
/// Each tuple keeps a margin of `0.3` in the radial exponent of the relevant
/// integrand so the two-decade tests above are decisive.
pub fn boundary_grid() -> Vec<(usize, f64, f64, f64)> {
    let margin = 0.3;
    let mut out = Vec::new();
    for d in 1..=3usize {
        let df = d as f64;
        for alpha in [1.5, 2.0, 4.0] {
            let am1 = alpha - 1.0;
            for off in [0.3, 0.6] {
                let b1 = df + off;
                let edge = off / am1;
                // Finite below the boundary, infinite past it, and the linear witness regime.
                out.push((d, alpha, b1, (b1 + edge - margin / am1).max(df + 0.1)));
                out.push((d, alpha, b1, b1 + edge + margin / am1));
                out.push((d, alpha, b1, b1 + 1.0 / am1 + 1.0));
            }
            for off in [1.5, 2.5] {
                let b1 = df + off;
                out.push((d, alpha, b1, b1 - 0.5));
                out.push((d, alpha, b1, b1 + 1.0));
                out.push((d, alpha, b1, b1 + 5.0));
            }
        }
    }
    out
}

/// How the integration domain of [`divergence_quadrature`] is described.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// One-dimensional segments covering the supports of both densities.
    Segments(Vec<(f64, f64)>),
    /// Radially symmetric densities in dimension `dim`, given as functions of
    /// the radius on `[0, ∞)`.
    Radial { dim: usize },
}

/// `D_α(P‖Q) = ∫ q f_α(p/q)` by adaptive quadrature.
///
/// Returns `+∞` if `P` puts mass where `q` vanishes (for `α > 1` and KL) or if
/// the integrand tail is not integrable.
pub fn divergence_quadrature<P, Q>(p: P, q: Q, a: Alpha<f64>, support: &Support) -> Result<QuadResult>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    if let Alpha::Power(al) = a {
        if al <= 0.0 {
            return invalid("alpha must be positive");
        }
    }
    let singular = Cell::new(false);
    let bad = Cell::new(false);
    let integrand = |x: f64| -> f64 {
        let (pv, qv) = (p(x), q(x));
        if !(pv >= 0.0) || !(qv >= 0.0) {
            bad.set(true);
            return 0.0;
        }
        if qv == 0.0 {
            if pv > 0.0 {
                singular.set(true);
            }
            return 0.0;
        }
        // Arguments are nonnegative here, so f_alpha cannot fail.
        qv * f_alpha(pv / qv, a).unwrap_or(f64::NAN)
    };
    let opts = QuadOptions::default();
    let segments = match support {
        Support::Segments(s) => s.clone(),
        Support::Radial { .. } => vec![(0.0, f64::INFINITY)],
    };
    if segments.is_empty() {
        return invalid("support has no segments");
    }
    let mut total = QuadResult { value: 0.0, error_estimate: 0.0, tail_exponent: None, evaluations: 0 };
    for &(lo, hi) in &segments {
        let r = match support {
            Support::Radial { dim } => {
                let s = unit_sphere_area::<f64>(*dim);
                let dm1 = *dim as i32 - 1;
                integrate(|r| s * r.powi(dm1) * integrand(r), lo, hi, &opts)?
            }
            Support::Segments(_) => integrate(integrand, lo, hi, &opts)?,
        };
        total.value += r.value;
        total.error_estimate += r.error_estimate;
        total.evaluations += r.evaluations;
        if r.tail_exponent.is_some() {
            total.tail_exponent = r.tail_exponent;
        }
    }
    if bad.get() {
        return Err(Error::NonFinite("densities must be nonnegative numbers".into()));
    }
    let absorbs = match a {
        Alpha::Power(al) => al > 1.0,
        Alpha::Kl => true,
    };
    if singular.get() && absorbs {
        total.value = f64::INFINITY;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{student_t_radial_density, Example1Part, Family};
    use proptest::prelude::*;

    fn a(x: f64) -> Alpha<f64> {
        Alpha::Power(x)
    }

    #[test]
    fn w1_examples() {
        let v = finiteness_w1(1, a(2.0), 1.5, 3.0).unwrap();
        assert_eq!((v.verdict, v.rule), (Verdict::Infinite, Rule::W1Neither));
        let v = finiteness_w1(1, a(2.0), 1.5, 1.8).unwrap();
        assert_eq!((v.verdict, v.rule), (Verdict::Finite, Rule::W1ClauseI));
        let v = finiteness_w1(2, a(4.0), 3.5, 2.1).unwrap();
        assert_eq!((v.verdict, v.rule), (Verdict::Finite, Rule::W1ClauseII));
        assert_eq!(v.dim, 2);
        assert_eq!(v.beta2, 2.1);
    }

    #[test]
    fn boundary_ties() {
        // β₁ = d + 1 falls into clause (i).
        let v = finiteness_w1(1, a(2.0), 2.0, 2.5).unwrap();
        assert_eq!(v.rule, Rule::W1ClauseI);
        // Equality in the gap condition is infinite.
        let v = finiteness_w1(1, a(2.0), 1.5, 2.0).unwrap();
        assert_eq!(v.verdict, Verdict::Infinite);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(finiteness_w1_kl(1, 1.1, 1.1).unwrap().verdict, Verdict::Finite);
        assert_eq!(finiteness_w1_kl(3, 100.0, 3.5).unwrap().verdict, Verdict::Finite);
        assert!(finiteness_w1_kl(2, 2.0, 5.0).is_err());
    }

    #[test]
    fn w2_examples() {
        let v = finiteness_w2(2, a(2.0), 4.5, 9.0).unwrap();
        assert_eq!((v.verdict, v.rule), (Verdict::FiniteSufficient, Rule::W2ClauseII));
        let v = finiteness_w2(2, a(2.0), 3.0, 3.5).unwrap();
        assert_eq!((v.verdict, v.rule), (Verdict::FiniteSufficient, Rule::W2ClauseI));
        let v = finiteness_w2(2, a(2.0), 3.0, 5.0).unwrap();
        assert_eq!(v.verdict, Verdict::Undecided);
    }

    #[test]
    fn lowdim_examples() {
        for b2 in [1.1, 3.0, 50.0] {
            assert_eq!(finiteness_lowdim(1, a(2.0), 2.5, b2).unwrap().verdict, Verdict::Finite);
        }
        assert_eq!(finiteness_lowdim(2, a(2.0), 2.5, 4.0).unwrap().verdict, Verdict::Infinite);
    }

    #[test]
    fn rejects_invalid() {
        assert!(finiteness_w1(1, a(2.0), 1.0, 3.0).is_err());
        assert!(finiteness_w1(2, a(2.0), 3.0, 1.5).is_err());
        assert!(finiteness_w1(1, a(0.5), 1.5, 3.0).is_err());
        assert!(finiteness_w1(1, Alpha::Kl, 1.5, 3.0).is_err());
        assert!(finiteness_w1(0, a(2.0), 1.5, 3.0).is_err());
        assert!(finiteness_lowdim(0, a(2.0), 1.5, 3.0).is_err());
        assert!(witness_integral(1, a(2.0), 1.5, 1.8, 0.1, 1e4).is_err());
        assert!(witness_integral(1, a(2.0), 1.5, 3.0, 1.5, 1e4).is_err());
    }

    /// Closed form of `∫_1^X r^s dr`.
    fn power_antiderivative(s: f64, x: f64) -> f64 {
        if (s + 1.0).abs() < 1e-14 {
            x.ln()
        } else {
            (x.powf(s + 1.0) - 1.0) / (s + 1.0)
        }
    }

    #[test]
    fn witness_matches_antiderivative_and_grows() {
        let (al, b1, b2, tau) = (2.0, 1.5, 3.0, 0.1);
        let w = witness(al, b1, b2);
        let oracle = |x: f64| 2.0 * (tau * power_antiderivative(w.e1, x) - tau * tau * power_antiderivative(w.e2, x));
        let v2 = witness_integral(1, a(al), b1, b2, tau, 1e2).unwrap();
        let v4 = witness_integral(1, a(al), b1, b2, tau, 1e4).unwrap();
        assert!((v2 - oracle(1e2)).abs() < 1e-9 * oracle(1e2));
        assert!((v4 - oracle(1e4)).abs() < 1e-9 * oracle(1e4));
        assert!(v4 >= 3.0 * v2, "{v2} -> {v4}");
        let mut prev = 0.0;
        let mut r = 2.0;
        while r <= 1e6 {
            let v = witness_integral(1, a(al), b1, b2, tau, r).unwrap();
            assert!(v >= prev);
            prev = v;
            r *= 2.0;
        }
    }

    #[test]
    fn witness_selection() {
        // Gap 1.5 ≥ 1/(α−1) = 1: linear witness.
        assert_eq!(witness(2.0, 1.5, 3.0).potential_exponent, 1.0);
        // Gap 0.6 < 1: sublinear witness with matched exponents.
        let w = witness(2.0, 1.5, 2.1);
        assert!((w.potential_exponent - 0.6).abs() < 1e-12);
        assert!((w.e1 - w.e2).abs() < 1e-12);
    }

    #[test]
    fn grid_agreement() {
        let grid = boundary_grid();
        assert!(grid.len() >= 50);
        let mut finite = 0;
        for &(d, al, b1, b2) in &grid {
            let e = evidence(d, a(al), b1, b2, 0.1).unwrap();
            assert!(e.consistent, "({d}, {al}, {b1}, {b2}) {:?}", e);
            finite += usize::from(e.verdict == Verdict::Finite);
        }
        assert!(finite > 10 && finite < grid.len() - 10);
    }

    #[test]
    fn lowdim_mirrors_w1() {
        for &(d, al, b1, b2) in &boundary_grid() {
            assert_eq!(
                finiteness_lowdim(d, a(al), b1, b2).unwrap().verdict,
                finiteness_w1(d, a(al), b1, b2).unwrap().verdict
            );
        }
    }

    proptest! {
        #[test]
        fn w1_monotone_in_beta1(d in 1usize..4, al in 1.05f64..6.0, b1 in 0.01f64..4.0, step in 0.0f64..3.0, b2 in 0.01f64..8.0) {
            let df = d as f64;
            let lo = finiteness_w1(d, a(al), df + b1, df + b2).unwrap().verdict;
            let hi = finiteness_w1(d, a(al), df + b1 + step, df + b2).unwrap().verdict;
            prop_assert!(!(lo == Verdict::Finite && hi == Verdict::Infinite));
        }

        #[test]
        fn w2_never_infinite_and_weaker_than_w1(d in 1usize..4, al in 1.05f64..6.0, b1 in 0.01f64..5.0, b2 in 0.01f64..8.0) {
            let df = d as f64;
            let v2 = finiteness_w2(d, a(al), df + b1, df + b2).unwrap().verdict;
            prop_assert!(v2 != Verdict::Infinite && v2 != Verdict::Finite);
            let v1 = finiteness_w1(d, a(al), df + b1, df + b2).unwrap().verdict;
            if v1 == Verdict::Finite && b1 <= 1.0 {
                prop_assert_eq!(v2, Verdict::FiniteSufficient);
            }
        }
    }

    #[test]
    fn divergence_of_identical_densities_is_zero() {
        let p = |x: f64| if x >= 1.0 { 2.0 * x.powi(-3) } else { 0.0 };
        for al in [Alpha::Power(2.0), Alpha::Power(0.5), Alpha::Kl] {
            let r = divergence_quadrature(p, p, al, &Support::Segments(vec![(1.0, f64::INFINITY)])).unwrap();
            assert!(r.value.abs() < 1e-12, "{al}: {}", r.value);
        }
    }

    #[test]
    fn example1_divergences() {
        let fam = |part| Family::Example1 { part, delta: 1.0 };
        let (p, q, eta) = (fam(Example1Part::P), fam(Example1Part::Q), fam(Example1Part::Eta));
        let dens = |f: &Family<f64>| {
            let f = f.clone();
            move |x: f64| f.density(&[x]).unwrap()
        };
        // Tail integrand written out explicitly, against the antiderivative 32/(3x³)·... evaluated at 2.
        let tail = integrate(|x: f64| ((64.0 / (x * x) - 1.0) / 2.0) / (x * x), 2.0, f64::INFINITY, &QuadOptions::default())
            .unwrap();
        assert!((tail.value - 13.0 / 12.0).abs() < 1e-9);
        let t = divergence_quadrature(dens(&eta), dens(&q), a(2.0), &Support::Segments(vec![(2.0, f64::INFINITY)]))
            .unwrap();
        assert!((t.value - 13.0 / 12.0).abs() < 1e-8, "{}", t.value);
        let segs = Support::Segments(vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::INFINITY)]);
        let full = divergence_quadrature(dens(&eta), dens(&q), a(2.0), &segs).unwrap();
        assert!((full.value - 5.0 / 6.0).abs() < 1e-8, "{}", full.value);
        let pq = divergence_quadrature(dens(&p), dens(&q), a(2.0), &segs).unwrap();
        assert_eq!(pq.value, f64::INFINITY);
        // For α < 1 the missing mass contributes nothing.
        let half = divergence_quadrature(dens(&p), dens(&q), a(0.5), &segs).unwrap();
        assert!(half.value.is_finite());
    }

    #[test]
    fn radial_tail_divergence() {
        // p ~ r^{-3}, q ~ r^{-6} in d = 2 with α = 2: integrand r · r^{-6+6} diverges.
        let p = |r: f64| student_t_radial_density(2, 1.0, r) / (2.0 * std::f64::consts::PI * r.max(1e-300));
        let q = |r: f64| student_t_radial_density(2, 4.0, r) / (2.0 * std::f64::consts::PI * r.max(1e-300));
        let r = divergence_quadrature(p, q, a(2.0), &Support::Radial { dim: 2 }).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        let same = divergence_quadrature(q, q, a(2.0), &Support::Radial { dim: 2 }).unwrap();
        assert!(same.value.abs() < 1e-10);
        // KL between the two is finite.
        let kl = divergence_quadrature(p, q, Alpha::Kl, &Support::Radial { dim: 2 }).unwrap();
        assert!(kl.value.is_finite() && kl.value > 0.0);
    }
}
