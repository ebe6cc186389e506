//! The α-divergence generator `f_α`, its Legendre conjugate, and the shift
//! functional `Λ[γ] = inf_ν { ν + E_Q[f*(γ − ν)] }`.
//!
//! Power branch: `f_α(x) = (x^α − 1) / (α(α − 1))` for `α > 0, α ≠ 1`.
//! KL branch: `f(x) = x ln x`, conjugate `e^{y−1}`. KL is a separate variant
//! rather than a numerical limit of the power branch.

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Divergence order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha<T> {
    /// `f_α` with `α > 0`, `α ≠ 1`.
    Power(T),
    /// Kullback–Leibler, the `α → 1` member of the family.
    Kl,
}

impl<T: Scalar> Alpha<T> {
    pub fn power(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return invalid(format!("alpha must be positive and finite, got {alpha}"));
        }
        if alpha == T::one() {
            return invalid("alpha = 1 is the KL divergence; use Alpha::Kl");
        }
        Ok(Alpha::Power(alpha))
    }

    pub fn kl() -> Self {
        Alpha::Kl
    }

    /// Parses `"kl"` or a positive number.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("kl") {
            return Ok(Alpha::Kl);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse alpha from {s:?}")))?;
        if v == 1.0 {
            return Ok(Alpha::Kl);
        }
        Alpha::power(T::c(v))
    }

    /// The numeric order (`1` for KL).
    pub fn order(&self) -> T {
        match *self {
            Alpha::Power(a) => a,
            Alpha::Kl => T::one(),
        }
    }

    pub fn is_kl(&self) -> bool {
        matches!(self, Alpha::Kl)
    }

    /// Rejects `α ∈ (0, 1)`; the estimators and the shift functional need
    /// `α > 1` or KL.
    pub fn ensure_at_least_one(&self) -> Result<()> {
        match *self {
            Alpha::Power(a) if a < T::one() => Err(Error::Unsupported(format!(
                "alpha = {a} in (0, 1); only alpha > 1 or KL is supported here"
            ))),
            _ => Ok(()),
        }
    }

    /// Value `f'(1)`: the optimal potential when the two measures agree.
    pub fn derivative_at_one(&self) -> T {
        match *self {
            Alpha::Power(a) => T::one() / (a - T::one()),
            Alpha::Kl => T::one(),
        }
    }
}

impl<T: Scalar> std::fmt::Display for Alpha<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alpha::Power(a) => write!(f, "{a}"),
            Alpha::Kl => write!(f, "kl"),
        }
    }
}

/// Default ceiling for conjugate values, `1e300` or the type maximum if smaller.
pub fn default_ceiling<T: Scalar>() -> T {
    if T::max_value().to_f64_lossy() < 1e300 {
        T::max_value()
    } else {
        T::c(1e300)
    }
}

/// `f_α(x)` for `x ≥ 0`.
pub fn f_alpha<T: Scalar>(x: T, a: Alpha<T>) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return invalid(format!("f_alpha requires x >= 0, got {x}"));
    }
    Ok(match a {
        Alpha::Power(al) => (x.powf(al) - T::one()) / (al * (al - T::one())),
        Alpha::Kl => {
            if x == T::zero() {
                T::zero()
            } else {
                x * x.ln()
            }
        }
    })
}

/// Conjugate value together with an overflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateValue<T> {
    pub value: T,
    /// The raw value exceeded the ceiling and was clamped.
    pub saturated: bool,
}

/// `f*_α(y)` with the default ceiling. Returns `+∞` where the conjugate is
/// infinite (`y ≥ 0` for `α ∈ (0, 1)`).
pub fn f_alpha_star<T: Scalar>(y: T, a: Alpha<T>) -> T {
    f_alpha_star_guarded(y, a, default_ceiling()).value
}

/// `f*_α(y)`, clamping finite overflow at `ceiling`.
pub fn f_alpha_star_guarded<T: Scalar>(y: T, a: Alpha<T>, ceiling: T) -> ConjugateValue<T> {
    let raw = match a {
        Alpha::Power(al) if al > T::one() => {
            let base = T::one() / (al * (al - T::one()));
            if y > T::zero() {
                let e = al / (al - T::one());
                ((al - T::one()) * y).powf(e) / al + base
            } else {
                base
            }
        }
        Alpha::Power(al) => {
            if y >= T::zero() {
                return ConjugateValue { value: T::infinity(), saturated: false };
            }
            let one_m = T::one() - al;
            let e = al / one_m;
            (one_m.powf(-e) * (-y).powf(-e)) / al - T::one() / (al * one_m)
        }
        Alpha::Kl => (y - T::one()).exp(),
    };
    if raw > ceiling || raw.is_nan() {
        ConjugateValue { value: ceiling, saturated: true }
    } else {
        ConjugateValue { value: raw, saturated: false }
    }
}

/// `f*_α'(y)`, defined for `α > 1` and KL.
pub fn f_alpha_star_prime<T: Scalar>(y: T, a: Alpha<T>) -> Result<T> {
    a.ensure_at_least_one()?;
    Ok(star_prime_unchecked(y, a))
}

/// `f*_α''(y)` (right derivative at the kink `y = 0`), `α > 1` or KL.
pub fn f_alpha_star_second<T: Scalar>(y: T, a: Alpha<T>) -> Result<T> {
    a.ensure_at_least_one()?;
    Ok(star_second_unchecked(y, a))
}

#[inline]
pub(crate) fn star_prime_unchecked<T: Scalar>(y: T, a: Alpha<T>) -> T {
    match a {
        Alpha::Power(al) => {
            if y > T::zero() {
                ((al - T::one()) * y).powf(T::one() / (al - T::one()))
            } else {
                T::zero()
            }
        }
        Alpha::Kl => (y - T::one()).exp(),
    }
}

#[inline]
pub(crate) fn star_second_unchecked<T: Scalar>(y: T, a: Alpha<T>) -> T {
    match a {
        Alpha::Power(al) => {
            if y > T::zero() {
                let k = (T::c(2.0) - al) / (al - T::one());
                ((al - T::one()) * y).powf(k)
            } else {
                T::zero()
            }
        }
        Alpha::Kl => (y - T::one()).exp(),
    }
}

/// Output of [`shift_functional`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftResult<T> {
    /// `Λ[γ]`.
    pub lambda_value: T,
    /// Minimising shift `ν*`.
    pub nu_star: T,
    pub iterations: usize,
}

/// Default bisection tolerance on `ν`.
pub const SHIFT_TOLERANCE: f64 = 1e-10;

const MAX_DOUBLINGS: usize = 200;

/// Computes `Λ[γ] = inf_ν { ν + Σ_j w_j f*(γ_j − ν) }`.
///
/// The derivative `h(ν) = 1 − Σ_j w_j f*'(γ_j − ν)` is nondecreasing; the
/// root is bracketed by `[min γ − f'(1) − s, max γ]` with `s` doubled until
/// `h` changes sign, then bisected to `tolerance`.
pub fn shift_functional<T: Scalar>(
    gamma_values: &[T],
    weights: &[T],
    a: Alpha<T>,
    tolerance: T,
) -> Result<ShiftResult<T>> {
    a.ensure_at_least_one()?;
    if gamma_values.is_empty() || gamma_values.len() != weights.len() {
        return invalid(format!(
            "shift functional needs equal nonempty lengths, got {} values and {} weights",
            gamma_values.len(),
            weights.len()
        ));
    }
    check_probability_vector(weights)?;
    if gamma_values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("shift functional potential values".into()));
    }
    let (gmin, gmax) = gamma_values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &g| (lo.min(g), hi.max(g)));

    let slope = |nu: T| -> T {
        let s = gamma_values
            .iter()
            .zip(weights)
            .fold(T::zero(), |acc, (&g, &w)| acc + w * star_prime_unchecked(g - nu, a));
        T::one() - s
    };

    let mut hi = gmax;
    let base = gmin - a.derivative_at_one();
    let mut s = T::one();
    let mut lo = base - s;
    let mut doublings = 0;
    while slope(lo) >= T::zero() {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::BracketExpansion { doublings: MAX_DOUBLINGS });
        }
        s = s + s;
        lo = base - s;
    }
    // h(max γ) ≥ 1 − e^{-1} > 0 for KL and = 1 for the power branch.
    debug_assert!(slope(hi) > T::zero());

    let mut iterations = 0;
    let tol = tolerance.max(T::eps());
    while hi - lo > tol * T::one().max(lo.abs().max(hi.abs())) {
        let mid = lo + (hi - lo) * T::c(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let nu = lo + (hi - lo) * T::c(0.5);
    let lambda_value = nu + shifted_expectation(gamma_values, weights, a, nu);
    Ok(ShiftResult { lambda_value, nu_star: nu, iterations })
}

/// `Σ_j w_j f*(γ_j − ν)`.
pub fn shifted_expectation<T: Scalar>(gamma_values: &[T], weights: &[T], a: Alpha<T>, nu: T) -> T {
    gamma_values
        .iter()
        .zip(weights)
        .fold(T::zero(), |acc, (&g, &w)| acc + w * f_alpha_star(g - nu, a))
}

pub(crate) fn check_probability_vector<T: Scalar>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
        return invalid("weights must be finite and nonnegative");
    }
    let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    let tol = T::c(1e-12).max(T::eps() * T::from_count(4 * weights.len().max(1)));
    if (total - T::one()).abs() > tol {
        return invalid(format!("weights must sum to 1, got {total}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(v: f64) -> Alpha<f64> {
        Alpha::power(v).unwrap()
    }

    /// Brute-force conjugate `sup_x { xy − f(x) }` on a grid of `x ≥ 0`.
    fn conjugate_by_grid(y: f64, al: Alpha<f64>) -> f64 {
        (0..=400_000)
            .map(|i| i as f64 * 1e-4)
            .map(|x| x * y - f_alpha(x, al).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn generator_values() {
        assert_eq!(f_alpha(1.0, a(2.0)).unwrap(), 0.0);
        assert!((f_alpha(2.0, a(2.0)).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(f_alpha(1.0, Alpha::Kl).unwrap(), 0.0);
        assert_eq!(f_alpha(0.0, Alpha::Kl).unwrap(), 0.0);
        assert!(f_alpha(-0.1, a(2.0)).is_err());
    }

    #[test]
    fn alpha_validation() {
        assert!(Alpha::power(0.0f64).is_err());
        assert!(Alpha::power(1.0f64).is_err());
        assert!(Alpha::power(f64::NAN).is_err());
        assert_eq!(Alpha::<f64>::parse("KL").unwrap(), Alpha::Kl);
        assert_eq!(Alpha::<f64>::parse("1").unwrap(), Alpha::Kl);
        assert_eq!(Alpha::<f64>::parse("2.5").unwrap(), Alpha::Power(2.5));
        assert!(a(0.5).ensure_at_least_one().is_err());
    }

    #[test]
    fn conjugate_values() {
        assert!((f_alpha_star(1.0, a(2.0)) - 1.0).abs() < 1e-15);
        assert!((f_alpha_star(-5.0, a(2.0)) - 0.5).abs() < 1e-15);
        assert_eq!(f_alpha_star(0.3, a(0.5)), f64::INFINITY);
        assert!((f_alpha_star(0.0, Alpha::Kl) - (-1.0f64).exp()).abs() < 1e-15);
        // Negative branch for α = 1/2: 4/|y| − 4.
        assert!((f_alpha_star(-2.0, a(0.5)) - (2.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn conjugate_matches_grid_supremum() {
        for &(y, al) in &[(1.0, 2.0), (0.4, 3.0), (1.5, 1.5), (-0.7, 2.0)] {
            let grid = conjugate_by_grid(y, a(al));
            assert!((f_alpha_star(y, a(al)) - grid).abs() < 1e-6, "y={y} α={al}");
        }
        let grid = conjugate_by_grid(0.5, Alpha::Kl);
        assert!((f_alpha_star(0.5, Alpha::Kl) - grid).abs() < 1e-6);
        let grid = conjugate_by_grid(-1.0, a(0.5));
        assert!((f_alpha_star(-1.0, a(0.5)) - grid).abs() < 1e-3);
    }

    #[test]
    fn conjugate_saturates() {
        let v = f_alpha_star_guarded(1e200, a(1.001), 1e300);
        assert!(v.saturated);
        assert_eq!(v.value, 1e300);
        assert!(!f_alpha_star_guarded(2.0, a(2.0), 1e300).saturated);
        assert!(f_alpha_star::<f32>(1e30, Alpha::Power(1.01)).is_finite());
    }

    #[test]
    fn conjugate_derivative_values() {
        assert!((f_alpha_star_prime(3.0, a(2.0)).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(f_alpha_star_prime(-1.0, a(2.0)).unwrap(), 0.0);
        assert!((f_alpha_star_prime(2.0, a(3.0)).unwrap() - 2.0).abs() < 1e-14);
        assert!(f_alpha_star_prime(1.0, a(0.5)).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &al in &[1.5, 2.0, 3.0, 8.0] {
            for i in 0..100 {
                let y = 0.1 + 9.9 * i as f64 / 99.0;
                let h = 1e-5 * y;
                let fd = (f_alpha_star(y + h, a(al)) - f_alpha_star(y - h, a(al))) / (2.0 * h);
                let d = f_alpha_star_prime(y, a(al)).unwrap();
                assert!(((fd - d) / d).abs() < 1e-6, "α={al} y={y}");
                let fd2 = (f_alpha_star_prime(y + h, a(al)).unwrap()
                    - f_alpha_star_prime(y - h, a(al)).unwrap())
                    / (2.0 * h);
                let d2 = f_alpha_star_second(y, a(al)).unwrap();
                assert!(((fd2 - d2) / d2).abs() < 1e-5, "α={al} y={y}");
            }
        }
    }

    /// Λ by dense grid search over ν ∈ [lo, hi].
    fn lambda_by_grid(g: &[f64], w: &[f64], al: Alpha<f64>, lo: f64, hi: f64) -> f64 {
        let n = 1_000_000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|nu| nu + shifted_expectation(g, w, al, nu))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn shift_of_constant_potential() {
        let g = [0.7; 5];
        let w = [0.1, 0.2, 0.3, 0.2, 0.2];
        let r = shift_functional(&g, &w, a(2.0), 1e-10).unwrap();
        assert!((r.lambda_value - 0.7).abs() < 1e-9);
        assert!((r.nu_star - (0.7 - 1.0)).abs() < 1e-8);
        let grid = lambda_by_grid(&g, &w, a(2.0), -5.0, 5.0);
        assert!((r.lambda_value - grid).abs() < 1e-8);
        assert!(r.iterations > 0);
    }

    #[test]
    fn shift_matches_grid_search() {
        let g = [0.0, 2.0];
        let w = [0.5, 0.5];
        for al in [a(2.0), a(1.5), a(4.0), Alpha::Kl] {
            let r = shift_functional(&g, &w, al, 1e-10).unwrap();
            let grid = lambda_by_grid(&g, &w, al, -5.0, 5.0);
            assert!((r.lambda_value - grid).abs() < 1e-8, "{al}: {} vs {grid}", r.lambda_value);
        }
        // KL closed form: Λ = ln E[e^γ].
        let r = shift_functional(&g, &w, Alpha::Kl, 1e-12).unwrap();
        let closed = (0.5 * (0.0f64.exp() + 2.0f64.exp())).ln();
        assert!((r.lambda_value - closed).abs() < 1e-10);
    }

    #[test]
    fn shift_rejects_bad_input() {
        assert!(shift_functional(&[0.0, 1.0], &[0.5, 0.6], a(2.0), 1e-10).is_err());
        assert!(shift_functional(&[0.0, 1.0], &[-0.5, 1.5], a(2.0), 1e-10).is_err());
        assert!(shift_functional::<f64>(&[], &[], a(2.0), 1e-10).is_err());
        assert!(shift_functional(&[0.0], &[1.0], a(0.5), 1e-10).is_err());
        assert!(shift_functional(&[f64::NAN], &[1.0], a(2.0), 1e-10).is_err());
    }

    #[test]
    fn shift_works_in_single_precision() {
        let r = shift_functional(&[0.0f32, 2.0], &[0.5, 0.5], Alpha::Power(2.0f32), 1e-6).unwrap();
        let r64 = shift_functional(&[0.0f64, 2.0], &[0.5, 0.5], a(2.0), 1e-10).unwrap();
        assert!((r.lambda_value as f64 - r64.lambda_value).abs() < 1e-5);
    }

    fn alpha_strategy() -> impl Strategy<Value = Alpha<f64>> {
        prop_oneof![
            Just(Alpha::Kl),
            (1.05f64..8.0).prop_map(Alpha::Power),
        ]
    }

    proptest! {
        #[test]
        fn conjugate_is_convex(y1 in -5.0f64..5.0, y2 in -5.0f64..5.0, t in 0.0f64..1.0, al in alpha_strategy()) {
            let lhs = f_alpha_star(t * y1 + (1.0 - t) * y2, al);
            let rhs = t * f_alpha_star(y1, al) + (1.0 - t) * f_alpha_star(y2, al);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn fenchel_young(x in 0.0f64..10.0, y in -5.0f64..5.0, al in alpha_strategy()) {
            let fx = f_alpha(x, al).unwrap();
            prop_assert!(f_alpha_star(y, al) >= x * y - fx - 1e-12 * (1.0 + fx.abs()));
        }

        #[test]
        fn fenchel_young_equality(x in 0.01f64..10.0, al in alpha_strategy()) {
            // y = f'(x) attains the supremum.
            let y = match al {
                Alpha::Power(v) => x.powf(v - 1.0) / (v - 1.0),
                Alpha::Kl => x.ln() + 1.0,
            };
            let fx = f_alpha(x, al).unwrap();
            let gap = f_alpha_star(y, al) - (x * y - fx);
            prop_assert!(gap.abs() < 1e-8 * (1.0 + fx.abs() + (x * y).abs()));
        }

        #[test]
        fn shift_equivariant_and_minimal(
            g in proptest::collection::vec(-3.0f64..3.0, 1..12),
            probe in -6.0f64..6.0,
            al in alpha_strategy(),
        ) {
            let n = g.len();
            let w = vec![1.0 / n as f64; n];
            let base = shift_functional(&g, &w, al, 1e-10).unwrap();
            let moved: Vec<f64> = g.iter().map(|v| v + 7.0).collect();
            let shifted = shift_functional(&moved, &w, al, 1e-10).unwrap();
            prop_assert!((shifted.lambda_value - base.lambda_value - 7.0).abs() < 1e-8);
            let at_probe = probe + shifted_expectation(&g, &w, al, probe);
            prop_assert!(base.lambda_value <= at_probe + 1e-9);
        }
    }
}
