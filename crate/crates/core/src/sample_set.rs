//! Weighted empirical measures and their CSV representation.
//!
//! CSV layout: a header line `dim=<d>` (or `dim=<d>,weighted` when the last
//! column carries weights), then one point per line. A file with no header is
//! read as one scalar sample per line. Values are written with 17 significant
//! digits so that export/import round-trips exactly in `f64`.

use std::io::{BufRead, Write};

use crate::conjugate::check_probability_vector;
use crate::error::{invalid, Error, Result};
use crate::scalar::{norm, Scalar};

/// Empirical measure `Σ_i w_i δ_{x_i}` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    points: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> SampleSet<T> {
    /// Uniformly weighted set from row-major coordinates.
    pub fn new(dim: usize, points: Vec<T>) -> Result<Self> {
        let n = Self::count(dim, &points)?;
        let w = T::one() / T::from_count(n);
        Self::with_weights(dim, points, vec![w; n])
    }

    pub fn with_weights(dim: usize, points: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let n = Self::count(dim, &points)?;
        if weights.len() != n {
            return invalid(format!("{} weights for {n} points", weights.len()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample coordinates".into()));
        }
        check_probability_vector(&weights)?;
        Ok(SampleSet { dim, points, weights })
    }

    /// Builds a 1-D uniform set from scalar values.
    pub fn from_scalars(values: Vec<T>) -> Result<Self> {
        Self::new(1, values)
    }

    fn count(dim: usize, points: &[T]) -> Result<usize> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if points.is_empty() {
            return invalid("sample set must be nonempty");
        }
        if points.len() % dim != 0 {
            return invalid(format!("{} coordinates is not a multiple of dim {dim}", points.len()));
        }
        Ok(points.len() / dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Whether all weights equal `1/n` up to rounding.
    pub fn is_uniform(&self) -> bool {
        let w = T::one() / T::from_count(self.len());
        self.weights.iter().all(|&x| (x - w).abs() <= T::c(1e-12).max(T::eps() * T::c(4.0)) * w.max(T::one()))
    }

    /// Euclidean norms of the points.
    pub fn radii(&self) -> Vec<T> {
        self.points.chunks_exact(self.dim).map(norm).collect()
    }

    /// Weighted mean vector.
    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for (x, w) in self.iter() {
            for (mi, &xi) in m.iter_mut().zip(x) {
                *mi = *mi + w * xi;
            }
        }
        m
    }

    /// Writes the CSV representation. Weights are emitted only for
    /// non-uniform sets.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let weighted = !self.is_uniform();
        if weighted {
            writeln!(out, "dim={},weighted", self.dim)?;
        } else {
            writeln!(out, "dim={}", self.dim)?;
        }
        let mut line = String::new();
        for (x, w) in self.iter() {
            line.clear();
            for (k, v) in x.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_real(*v));
            }
            if weighted {
                line.push(',');
                line.push_str(&fmt_real(w));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the CSV representation; see the module docs.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut weighted = false;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut seen_data = false;
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if !seen_data && dim.is_none() && t.starts_with("dim=") {
                let mut parts = t.split(',');
                let d = parts.next().unwrap_or_default()["dim=".len()..].trim();
                let d: usize = d
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno, message: format!("bad dimension {d:?}") })?;
                if d == 0 {
                    return Err(Error::Parse { line: lineno, message: "dimension must be positive".into() });
                }
                for flag in parts {
                    match flag.trim() {
                        "weighted" => weighted = true,
                        other => {
                            return Err(Error::Parse { line: lineno, message: format!("unknown header flag {other:?}") })
                        }
                    }
                }
                dim = Some(d);
                continue;
            }
            if !seen_data && dim.is_none() {
                dim = Some(1);
            }
            seen_data = true;
            let d = dim.unwrap_or(1);
            let expected = d + usize::from(weighted);
            let mut count = 0;
            for field in t.split(',') {
                count += 1;
                if count > expected {
                    break;
                }
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("cannot parse number {:?}", field.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line: lineno, message: "non-finite value".into() });
                }
                if count <= d {
                    points.push(T::c(v));
                } else {
                    weights.push(T::c(v));
                }
            }
            if count != expected {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {expected} columns, found {}", t.split(',').count()),
                });
            }
        }
        let d = dim.unwrap_or(1);
        if points.is_empty() {
            return invalid("CSV contains no samples");
        }
        if weighted {
            Self::with_weights(d, points, weights)
        } else {
            Self::new(d, points)
        }
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real<T: Scalar>(v: T) -> String {
    let x = v.to_f64_lossy();
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}
