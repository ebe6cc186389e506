//! Seeded samplers and exact densities for the distribution families used by
//! the experiments: isotropic Student-t, Gaussian priors and the three
//! one-dimensional measures of the Example-1 construction.
//!
//! All randomness comes from [`ChaCha20Rng`], a counter-based generator; the
//! transcendental functions go through `libm`, so a `(parameters, seed)` pair
//! yields the same sample set on every platform. Independent parallel
//! streams are obtained with [`stream_rng`], which partitions the counter
//! space by stream id.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::sample_set::SampleSet;
use crate::scalar::{norm, unit_sphere_area, Scalar};

/// Generator used throughout the crate.
pub type SeededRng = ChaCha20Rng;

/// Generator for `seed` on the default stream.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream.
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut SeededRng) -> f64 {
    rng.random::<f64>()
}

/// Standard normal pair by the Box–Muller transform.
pub fn normal_pair(rng: &mut SeededRng) -> (f64, f64) {
    // 1 − u lies in (0, 1], so the logarithm is finite.
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * libm::cos(th), r * libm::sin(th))
}

/// Fills `out` with independent standard normals.
pub fn fill_normal(rng: &mut SeededRng, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}

/// Gamma(shape, 1) variate (Marsaglia–Tsang, with the `U^{1/a}` boost for
/// shape below one).
pub fn gamma_variate(rng: &mut SeededRng, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = gamma_variate(rng, shape + 1.0);
        let u = 1.0 - uniform(rng);
        return g * libm::pow(u, 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let (x, _) = normal_pair(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = 1.0 - uniform(rng);
        if u < 1.0 - 0.0331 * x * x * x * x || libm::log(u) < 0.5 * x * x + d * (1.0 - v + libm::log(v)) {
            return d * v;
        }
    }
}

/// Chi-square variate with `k` degrees of freedom.
pub fn chi_square_variate(rng: &mut SeededRng, k: f64) -> f64 {
    2.0 * gamma_variate(rng, 0.5 * k)
}

/// Which measure of the Example-1 construction to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example1Part {
    /// Density `(1+δ) x^{−(2+δ)}` on `[1, ∞)`.
    P,
    /// Density `1/2` on `[0, 1)` and `x^{−2}` on `[2, ∞)`.
    Q,
    /// Intermediate measure `(1+δ) 2^{1+δ} x^{−(2+δ)}` on `[2, ∞)`.
    Eta,
}

/// Distribution families with exact densities.
#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    StudentT { dim: usize, nu: T },
    Gaussian { mean: Vec<T>, scale: T },
    Example1 { part: Example1Part, delta: T },
}

impl<T: Scalar> Family<T> {
    pub fn dim(&self) -> usize {
        match self {
            Family::StudentT { dim, .. } => *dim,
            Family::Gaussian { mean, .. } => mean.len(),
            Family::Example1 { .. } => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Family::StudentT { dim, nu } => {
                if *dim == 0 || !(*nu > T::zero()) || !nu.is_finite() {
                    return invalid(format!("Student-t needs dim >= 1 and nu > 0, got dim={dim} nu={nu}"));
                }
            }
            Family::Gaussian { mean, scale } => {
                if mean.is_empty() || !(*scale > T::zero()) {
                    return invalid("Gaussian needs a nonempty mean and scale > 0");
                }
            }
            Family::Example1 { delta, .. } => {
                if !(*delta > T::zero()) {
                    return invalid(format!("Example-1 needs delta > 0, got {delta}"));
                }
            }
        }
        Ok(())
    }

    /// Exact normalized density at `x`.
    pub fn density(&self, x: &[T]) -> Result<T> {
        self.validate()?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            Family::StudentT { dim, nu } => {
                let r2 = x.iter().fold(T::zero(), |a, &v| a + v * v);
                student_t_density_r2(*dim, *nu, r2)
            }
            Family::Gaussian { mean, scale } => {
                let d = T::from_count(mean.len());
                let r2 = x.iter().zip(mean).fold(T::zero(), |a, (&v, &m)| a + (v - m) * (v - m));
                let s2 = *scale * *scale;
                (-(r2 / (T::c(2.0) * s2))).exp() / (T::c(2.0) * T::PI() * s2).powf(d * T::c(0.5))
            }
            Family::Example1 { part, delta } => example1_density(*part, *delta, x[0]),
        })
    }

    /// CDF of the one-dimensional families (Example-1 measures).
    pub fn cdf(&self, x: T) -> Result<T> {
        self.validate()?;
        match self {
            Family::Example1 { part, delta } => Ok(example1_cdf(*part, *delta, x)),
            _ => Err(Error::Unsupported("closed-form CDF is only provided for the Example-1 family".into())),
        }
    }

    /// Draws `n` points.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet<T>> {
        self.validate()?;
        match self {
            Family::StudentT { dim, nu } => sample_student_t(*dim, *nu, n, seed),
            Family::Gaussian { mean, scale } => sample_gaussian(mean.len(), n, seed, mean, *scale),
            Family::Example1 { part, delta } => sample_example1(*part, *delta, n, seed),
        }
    }

    /// Tail envelope `c_lower ‖x‖^{−β} ≤ density ≤ c_upper ‖x‖^{−β}` for
    /// `‖x‖ ≥ radius`. `None` for light-tailed families. The Example-1
    /// measures live on the positive half-line and the envelope refers to
    /// their support.
    pub fn heavy_tail_profile(&self, radius: T) -> Option<HeavyTailProfile<T>> {
        match self {
            Family::StudentT { dim, nu } => {
                let beta = *nu + T::from_count(*dim);
                // p(x) = C ν^{β/2} (ν + r²)^{−β/2} = C ν^{β/2} r^{−β} (1 + ν/r²)^{−β/2}.
                let c = student_t_density_r2(*dim, *nu, T::zero()) * nu.powf(beta * T::c(0.5));
                let lower = c * (T::one() + *nu / (radius * radius)).powf(-beta * T::c(0.5));
                HeavyTailProfile::new(*dim, beta, radius, lower, c, None).ok()
            }
            Family::Gaussian { .. } => None,
            Family::Example1 { part, delta } => {
                let one = T::one();
                let (beta, c, r_min) = match part {
                    Example1Part::P => (T::c(2.0) + *delta, one + *delta, one),
                    Example1Part::Q => (T::c(2.0), one, T::c(2.0)),
                    Example1Part::Eta => {
                        (T::c(2.0) + *delta, (one + *delta) * T::c(2.0).powf(one + *delta), T::c(2.0))
                    }
                };
                HeavyTailProfile::new(1, beta, radius.max(r_min), c, c, None).ok()
            }
        }
    }
}

fn student_t_density_r2<T: Scalar>(dim: usize, nu: T, r2: T) -> T {
    let d = T::from_count(dim);
    let half = T::c(0.5);
    let log_c = ((nu + d) * half).lgamma() - (nu * half).lgamma() - d * half * (nu * T::PI()).ln();
    (log_c - (nu + d) * half * (T::one() + r2 / nu).ln()).exp()
}

/// Density of the radius `‖X‖` of a `dim`-dimensional isotropic Student-t.
pub fn student_t_radial_density<T: Scalar>(dim: usize, nu: T, r: T) -> T {
    if r < T::zero() {
        return T::zero();
    }
    let surface = unit_sphere_area::<T>(dim);
    let rd1 = if dim == 1 { T::one() } else { r.powi(dim as i32 - 1) };
    surface * rd1 * student_t_density_r2(dim, nu, r * r)
}

fn example1_density<T: Scalar>(part: Example1Part, delta: T, x: T) -> T {
    let one = T::one();
    let two = T::c(2.0);
    match part {
        Example1Part::P => {
            if x >= one {
                (one + delta) * x.powf(-(two + delta))
            } else {
                T::zero()
            }
        }
        Example1Part::Q => {
            if x >= T::zero() && x < one {
                T::c(0.5)
            } else if x >= two {
                one / (x * x)
            } else {
                T::zero()
            }
        }
        Example1Part::Eta => {
            if x >= two {
                (one + delta) * two.powf(one + delta) * x.powf(-(two + delta))
            } else {
                T::zero()
            }
        }
    }
}

fn example1_cdf<T: Scalar>(part: Example1Part, delta: T, x: T) -> T {
    let one = T::one();
    let two = T::c(2.0);
    match part {
        Example1Part::P => {
            if x < one {
                T::zero()
            } else {
                one - x.powf(-(one + delta))
            }
        }
        Example1Part::Q => {
            if x < T::zero() {
                T::zero()
            } else if x < one {
                x * T::c(0.5)
            } else if x < two {
                T::c(0.5)
            } else {
                one - one / x
            }
        }
        Example1Part::Eta => {
            if x < two {
                T::zero()
            } else {
                one - (two / x).powf(one + delta)
            }
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return invalid("sample count must be at least 1");
    }
    Ok(())
}

/// `n` draws of the `d`-dimensional isotropic Student-t with `nu` degrees of
/// freedom, as `z·sqrt(ν/w)` with `z` standard normal and `w ~ χ²_ν`.
/// The density tail decays as `‖x‖^{−(ν+d)}`.
pub fn sample_student_t<T: Scalar>(d: usize, nu: T, n: usize, seed: u64) -> Result<SampleSet<T>> {
    check_count(n)?;
    if d == 0 || !(nu > T::zero()) || !nu.is_finite() {
        return invalid(format!("Student-t needs d >= 1 and nu > 0, got d={d} nu={nu}"));
    }
    let nu64 = nu.to_f64_lossy();
    let mut rng = seeded_rng(seed);
    let mut z = vec![0.0; d];
    let mut points = Vec::with_capacity(n * d);
    for _ in 0..n {
        fill_normal(&mut rng, &mut z);
        let w = chi_square_variate(&mut rng, nu64).max(f64::MIN_POSITIVE);
        let s = libm::sqrt(nu64 / w);
        points.extend(z.iter().map(|&v| T::c(v * s)));
    }
    clamp_to_finite(&mut points);
    SampleSet::new(d, points)
}

// Extremely small chi-square draws can push a coordinate past the scalar range.
fn clamp_to_finite<T: Scalar>(points: &mut [T]) {
    for v in points.iter_mut() {
        if !v.is_finite() {
            *v = if *v > T::zero() { T::max_value() } else { T::min_value() };
        }
    }
}

/// Inverse-CDF draws from one of the Example-1 measures.
///
/// For `Q`, `u ∈ [0, 1/2)` maps to `2u` and `u ∈ [1/2, 1)` to `1/(1 − u)`;
/// the flat CDF segment on `[1, 2)` is never produced.
pub fn sample_example1<T: Scalar>(which: Example1Part, delta: T, n: usize, seed: u64) -> Result<SampleSet<T>> {
    check_count(n)?;
    if !(delta > T::zero()) {
        return invalid(format!("delta must be positive, got {delta}"));
    }
    let k = 1.0 / (1.0 + delta.to_f64_lossy());
    let mut rng = seeded_rng(seed);
    let points: Vec<T> = (0..n)
        .map(|_| {
            let u = uniform(&mut rng);
            let x = match which {
                Example1Part::P => libm::pow(1.0 - u, -k),
                Example1Part::Eta => 2.0 * libm::pow(1.0 - u, -k),
                Example1Part::Q => {
                    if u < 0.5 {
                        2.0 * u
                    } else {
                        1.0 / (1.0 - u)
                    }
                }
            };
            T::c(x)
        })
        .collect();
    SampleSet::new(1, points)
}

/// `n` draws of `N(mean, scale² I)`.
pub fn sample_gaussian<T: Scalar>(d: usize, n: usize, seed: u64, mean: &[T], scale: T) -> Result<SampleSet<T>> {
    check_count(n)?;
    if d == 0 || mean.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
    }
    if !(scale > T::zero()) {
        return invalid(format!("scale must be positive, got {scale}"));
    }
    let mut rng = seeded_rng(seed);
    let mut z = vec![0.0; n * d];
    fill_normal(&mut rng, &mut z);
    let s = scale.to_f64_lossy();
    let points = z
        .chunks_exact(d)
        .flat_map(|row| row.iter().zip(mean).map(move |(&v, &m)| m + T::c(v * s)))
        .collect();
    SampleSet::new(d, points)
}

/// Tail envelope of a density: `c_lower ‖x‖^{−β} ≤ p(x) ≤ c_upper ‖x‖^{−β}`
/// for `‖x‖ ≥ radius`, optionally concentrated on a `d*`-dimensional
/// submanifold.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTailProfile<T> {
    pub dim: usize,
    pub beta: T,
    pub radius: T,
    pub c_lower: T,
    pub c_upper: T,
    pub intrinsic_dim: Option<usize>,
}

impl<T: Scalar> HeavyTailProfile<T> {
    pub fn new(
        dim: usize,
        beta: T,
        radius: T,
        c_lower: T,
        c_upper: T,
        intrinsic_dim: Option<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if !(beta > T::from_count(dim)) {
            return invalid(format!("tail exponent {beta} must exceed the dimension {dim}"));
        }
        if !(radius > T::zero()) {
            return invalid("envelope radius must be positive");
        }
        if !(c_lower > T::zero()) || c_lower > c_upper {
            return invalid("envelope constants need 0 < c_lower <= c_upper");
        }
        if let Some(ds) = intrinsic_dim {
            if ds == 0 || ds > dim {
                return invalid(format!("intrinsic dimension {ds} must be in 1..={dim}"));
            }
        }
        Ok(HeavyTailProfile { dim, beta, radius, c_lower, c_upper, intrinsic_dim })
    }

    /// Whether `value` at a point of norm `r ≥ radius` lies inside the envelope.
    pub fn contains(&self, r: T, value: T) -> bool {
        let base = r.powf(-self.beta);
        let slack = T::c(1e-12);
        value >= self.c_lower * base * (T::one() - slack) && value <= self.c_upper * base * (T::one() + slack)
    }
}

/// Empirical radius helper for callers working with raw coordinates.
pub fn radius_of<T: Scalar>(x: &[T]) -> T {
    norm(x)
}
