//! The half-line pair whose plain divergence and transport cost are both
//! infinite while the proximal combination stays finite.
//!
//! `P` has density `(1+δ) x^{−(2+δ)}` on `[1, ∞)`; `Q` is uniform with mass
//! 1/2 on `[0, 1)` and has density `x^{−2}` on `[2, ∞)`; the intermediate
//! `η` is `P` scaled by two, living on `[2, ∞)`.

use crate::conjugate::{f_alpha_star, Alpha};
use crate::discrete_dual::solve_discrete_dual;
use crate::error::{invalid, Result};
use crate::finiteness::{divergence_quadrature, Support, DIVERGENCE_RATIO, EVIDENCE_RADII};
use crate::quadrature::{integrate, QuadOptions};
use crate::samplers::{sample_example1, Example1Part, Family};

/// Truncation levels of the divergence evidence tables.
pub const TRUNCATION_LEVELS: [f64; 3] = EVIDENCE_RADII;

#[derive(Debug, Clone, PartialEq)]
pub struct Example1Report {
    pub delta: f64,
    pub alpha: Alpha<f64>,
    pub lipschitz: f64,
    /// `∫_2^∞ q f_α(η/q)`.
    pub tail_integral: f64,
    /// `D_α(η‖Q)` over the full support.
    pub divergence_eta_q: f64,
    /// `W1(P, η)` by quadrature of the CDF difference.
    pub w1_p_eta: f64,
    /// The same in closed form.
    pub w1_p_eta_closed: f64,
    /// `D_α(η‖Q) + L·W1(P, η)`.
    pub bound: f64,
    /// Plain quadrature of `D_α(P‖Q)`; infinite because `P` charges `[1, 2)`.
    pub divergence_p_q: f64,
    /// Quadrature of `W1(P, Q)` with the divergent tail detected.
    pub w1_p_q: f64,
    /// `(M, sup_{|γ|≤M} E_P γ − Λ_Q[γ])`.
    pub divergence_table: Vec<(f64, f64)>,
    /// `(R, ∫_0^R |F_P − F_Q|)`.
    pub w1_table: Vec<(f64, f64)>,
    pub divergence_grows: bool,
    pub w1_grows: bool,
    pub sample_size: usize,
    /// Discrete dual on `n = m = sample_size` draws.
    pub estimate: f64,
    pub slack: f64,
    pub estimate_within_bound: bool,
}

fn density(part: Example1Part, delta: f64) -> impl Fn(f64) -> f64 {
    let fam = Family::Example1 { part, delta };
    move |x| fam.density(&[x]).unwrap_or(f64::NAN)
}

fn cdf(part: Example1Part, delta: f64) -> impl Fn(f64) -> f64 {
    let fam = Family::Example1 { part, delta };
    move |x| fam.cdf(x).unwrap_or(f64::NAN)
}

fn quad_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-12, ..QuadOptions::default() }
}

/// `∫_1^∞ |F_P − F_η|`.
fn w1_p_eta(delta: f64) -> Result<f64> {
    let (fp, fe) = (cdf(Example1Part::P, delta), cdf(Example1Part::Eta, delta));
    let g = |x: f64| (fp(x) - fe(x)).abs();
    Ok(integrate(g, 1.0, 2.0, &quad_opts())?.value + integrate(g, 2.0, f64::INFINITY, &quad_opts())?.value)
}

/// `1 − (1 − 2^{−δ})/δ + (2^{1+δ} − 1) 2^{−δ}/δ`.
fn w1_p_eta_closed(delta: f64) -> f64 {
    let h = 2f64.powf(-delta);
    1.0 - (1.0 - h) / delta + (2f64.powf(1.0 + delta) - 1.0) * h / delta
}

/// `(f*')^{-1}(r)`: the `y` with `f*'(y) = r`, for `r > 0`.
fn star_prime_inverse(r: f64, a: Alpha<f64>) -> f64 {
    match a {
        Alpha::Power(al) => r.powf(al - 1.0) / (al - 1.0),
        Alpha::Kl => 1.0 + r.ln(),
    }
}

/// `sup_{|γ| ≤ M} E_P γ − inf_ν (ν + E_Q f*(γ − ν))`, solved pointwise in `γ`
/// for each `ν` and by golden-section search over `ν`.
pub fn truncated_divergence(delta: f64, a: Alpha<f64>, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return invalid("truncation level must be positive");
    }
    let (p, q) = (density(Example1Part::P, delta), density(Example1Part::Q, delta));
    let value_at = |nu: f64| -> Result<f64> {
        let h = |x: f64| {
            let (pv, qv) = (p(x), q(x));
            if qv == 0.0 {
                return m * pv;
            }
            let y = if pv > 0.0 { star_prime_inverse(pv / qv, a) } else { f64::NEG_INFINITY };
            let g = (nu + y).clamp(-m, m);
            g * pv - qv * f_alpha_star(g - nu, a)
        };
        let mut total = -nu;
        for (lo, hi) in [(0.0, 1.0), (1.0, 2.0), (2.0, f64::INFINITY)] {
            total += integrate(h, lo, hi, &quad_opts())?.value;
        }
        Ok(total)
    };
    // Concave in ν; the optimum lies well inside this bracket.
    let (mut lo, mut hi) = (-2.0 * m - 10.0, 2.0 * m + 10.0);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (value_at(x1)?, value_at(x2)?);
    while hi - lo > 1e-9 * (1.0 + m) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = value_at(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = value_at(x1)?;
        }
    }
    Ok(f1.max(f2))
}

/// `∫_0^R |F_P − F_Q|`.
pub fn truncated_w1(delta: f64, r: f64) -> Result<f64> {
    if !(r > 2.0) {
        return invalid("truncation radius must exceed 2");
    }
    let (fp, fq) = (cdf(Example1Part::P, delta), cdf(Example1Part::Q, delta));
    let g = |x: f64| (fp(x) - fq(x)).abs();
    let mut total = 0.0;
    for (lo, hi) in [(0.0, 1.0), (1.0, 2.0), (2.0, r)] {
        total += integrate(g, lo, hi, &quad_opts())?.value;
    }
    Ok(total)
}

fn grows(table: &[(f64, f64)]) -> bool {
    table.windows(2).all(|w| w[1].1 >= DIVERGENCE_RATIO * w[0].1)
}

/// Default settings: 2,000 draws from each measure.
pub fn run_example1(delta: f64, a: Alpha<f64>, l: f64) -> Result<Example1Report> {
    run_example1_with(delta, a, l, 2000, 0)
}

pub fn run_example1_with(delta: f64, a: Alpha<f64>, l: f64, n: usize, seed: u64) -> Result<Example1Report> {
    if !(delta > 0.0) || !delta.is_finite() {
        return invalid("δ must be positive");
    }
    match a {
        Alpha::Power(al) if al > 1.0 => {}
        _ => return invalid("this construction needs α > 1"),
    }
    if !(l > 0.0) {
        return invalid("L must be positive");
    }
    let (p, q, eta) = (
        density(Example1Part::P, delta),
        density(Example1Part::Q, delta),
        density(Example1Part::Eta, delta),
    );
    let tail_integral = divergence_quadrature(&eta, &q, a, &Support::Segments(vec![(2.0, f64::INFINITY)]))?.value;
    let divergence_eta_q =
        divergence_quadrature(&eta, &q, a, &Support::Segments(vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::INFINITY)]))?.value;
    let w1_quad = w1_p_eta(delta)?;
    let bound = divergence_eta_q + l * w1_quad;
    let divergence_p_q =
        divergence_quadrature(&p, &q, a, &Support::Segments(vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::INFINITY)]))?.value;
    let (fp, fq) = (cdf(Example1Part::P, delta), cdf(Example1Part::Q, delta));
    let w1_p_q = integrate(|x| (fp(x) - fq(x)).abs(), 2.0, f64::INFINITY, &QuadOptions::default())?.value;

    let divergence_table = TRUNCATION_LEVELS
        .iter()
        .map(|&m| truncated_divergence(delta, a, m).map(|v| (m, v)))
        .collect::<Result<Vec<_>>>()?;
    let w1_table = TRUNCATION_LEVELS
        .iter()
        .map(|&r| truncated_w1(delta, r).map(|v| (r, v)))
        .collect::<Result<Vec<_>>>()?;

    let ps = sample_example1(Example1Part::P, delta, n, seed)?;
    let qs = sample_example1(Example1Part::Q, delta, n, seed.wrapping_add(1))?;
    let estimate = solve_discrete_dual(&ps, &qs, a, l)?.objective;
    let slack = 0.2;
    Ok(Example1Report {
        delta,
        alpha: a,
        lipschitz: l,
        tail_integral,
        divergence_eta_q,
        w1_p_eta: w1_quad,
        w1_p_eta_closed: w1_p_eta_closed(delta),
        bound,
        divergence_p_q,
        w1_p_q,
        divergence_grows: grows(&divergence_table),
        w1_grows: grows(&w1_table),
        divergence_table,
        w1_table,
        sample_size: n,
        estimate,
        slack,
        estimate_within_bound: estimate <= bound + slack,
    })
}
