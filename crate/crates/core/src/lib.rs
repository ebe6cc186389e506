//! Wasserstein-proximal α-divergences for heavy-tailed distributions.

pub mod conjugate;
pub mod discrete_dual;
pub mod error;
pub mod metrics;
pub mod finiteness;
pub mod gpa;
pub mod harness;
pub mod neural;
pub mod quadrature;
pub mod sample_set;
pub mod samplers;
pub mod scalar;
pub mod wasserstein;

pub use conjugate::{f_alpha, f_alpha_star, shift_functional, Alpha};
pub use error::{Error, Result};
pub use sample_set::SampleSet;
pub use scalar::Scalar;

pub type SampleSet64 = SampleSet<f64>;
pub type SampleSet32 = SampleSet<f32>;
pub type Alpha64 = Alpha<f64>;
pub type DualPotential64 = discrete_dual::DualPotential<f64>;
pub type DualPotential32 = discrete_dual::DualPotential<f32>;
pub type LipschitzNet64 = neural::LipschitzNet<f64>;
pub type LipschitzNet32 = neural::LipschitzNet<f32>;
