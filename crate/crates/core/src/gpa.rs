//! Generative particle algorithm: particles descend the gradient of the
//! trained dual potential, with the discriminator warm-started between
//! transport steps.
//!
//! With the W1-proximal constraint the potential is `L`-Lipschitz, so no
//! particle moves more than `η·L` per step. Without it nothing bounds the
//! velocity, and heavy-tailed targets produce run-away particles.

use crate::conjugate::Alpha;
use crate::error::{invalid, Error, Result};
use crate::metrics::{default_grid, l1_error, rccdf_empirical, rccdf_weighted, DEFAULT_GRID_POINTS};
use crate::neural::{LipschitzMode, LipschitzNet, TrainConfig, Trainer};
use crate::sample_set::SampleSet;
use crate::samplers::sample_gaussian;
use crate::scalar::{norm, Scalar};

/// Positions are clamped to this norm in unconstrained runs.
pub const RUNAWAY_CLAMP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GpaMode {
    W1Proximal { lipschitz: f64 },
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpaSchedule {
    pub outer_steps: usize,
    pub inner_steps: usize,
    /// Particle step `η`, constant over the run.
    pub step_size: f64,
    pub seed: u64,
    /// Discriminator architecture, batches and learning rate; `mode` and
    /// `seed` are overridden by the run.
    pub train: TrainConfig,
    /// Record the rCCDF error every this many steps (and at the last step).
    pub diagnostics_every: usize,
}

impl Default for GpaSchedule {
    fn default() -> Self {
        GpaSchedule {
            outer_steps: 3000,
            inner_steps: 10,
            step_size: 0.1,
            seed: 0,
            train: TrainConfig::default(),
            diagnostics_every: 1,
        }
    }
}

impl GpaSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.outer_steps == 0 || self.inner_steps == 0 || self.diagnostics_every == 0 {
            return invalid("outer_steps, inner_steps and diagnostics_every must be positive");
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return invalid("step size must be positive");
        }
        self.train.validate()
    }
}

/// Isotropic Gaussian the particles are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub mean: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<T> {
    pub dim: usize,
    /// Row-major `n × dim`.
    pub positions: Vec<T>,
    pub step: usize,
    pub step_size: f64,
    /// Largest displacement norm in the last transport step.
    pub max_speed: f64,
    /// Particles clamped in the last transport step.
    pub clamped: Vec<usize>,
}

impl<T: Scalar> ParticleEnsemble<T> {
    pub fn new(dim: usize, positions: Vec<T>) -> Result<Self> {
        if dim == 0 || positions.len() % dim != 0 {
            return invalid("positions must be a multiple of the dimension");
        }
        Ok(ParticleEnsemble { dim, positions, step: 0, step_size: 0.0, max_speed: 0.0, clamped: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_sample_set(&self) -> Result<SampleSet<T>> {
        SampleSet::new(self.dim, self.positions.clone())
    }

    pub fn radii(&self) -> Vec<f64> {
        self.positions.chunks_exact(self.dim).map(|x| norm(x).to_f64_lossy()).collect()
    }
}

/// `x_i ← x_i − η ∇γ(x_i)`. Positions that leave the ball of radius
/// [`RUNAWAY_CLAMP`] or become non-finite are pulled back to its boundary
/// and listed in `clamped`.
pub fn gpa_step<T: Scalar>(particles: &ParticleEnsemble<T>, net: &LipschitzNet<T>, eta: T) -> Result<ParticleEnsemble<T>> {
    if net.input_dim() != particles.dim {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), got: particles.dim });
    }
    let d = particles.dim;
    let mut out = particles.clone();
    out.step += 1;
    out.step_size = eta.to_f64_lossy();
    out.max_speed = 0.0;
    out.clamped.clear();
    let mut ws = net.workspace();
    let mut g = vec![T::zero(); d];
    let clamp = T::c(RUNAWAY_CLAMP);
    for (i, x) in out.positions.chunks_exact_mut(d).enumerate() {
        net.input_gradient(x, &mut ws, &mut g);
        let old = x.to_vec();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi = *xi - eta * *gi;
        }
        let r = norm(x);
        if !r.is_finite() || r > clamp {
            let src: &[T] = if r.is_finite() { x } else { &old };
            let sr = norm(src);
            let dir: Vec<T> = if sr > T::zero() && sr.is_finite() {
                src.iter().map(|v| *v / sr).collect()
            } else {
                let mut e = vec![T::zero(); d];
                e[0] = T::one();
                e
            };
            for (xi, di) in x.iter_mut().zip(dir) {
                *xi = di * clamp;
            }
            out.clamped.push(i);
        }
        let moved: Vec<T> = x.iter().zip(&old).map(|(a, b)| *a - *b).collect();
        out.max_speed = out.max_speed.max(norm(&moved).to_f64_lossy());
    }
    Ok(out)
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GpaRecord {
    pub step: usize,
    /// Minibatch dual objective after the inner ascent steps.
    pub objective: f64,
    pub max_speed: f64,
    /// rCCDF L1 error against the reference, when recorded at this step.
    pub l1_error: Option<f64>,
    /// Clamp events so far.
    pub runaways: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunawayEvent {
    pub step: usize,
    pub particle: usize,
}

/// Reference radial survival curve used by the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReference {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
}

impl TailReference {
    /// Empirical curve of the target on the default percentile grid.
    pub fn from_target<T: Scalar>(target: &SampleSet<T>) -> Result<Self> {
        let radii: Vec<f64> = target.radii().iter().map(|r| r.to_f64_lossy()).collect();
        let grid = default_grid(&radii, DEFAULT_GRID_POINTS)?;
        let truth = rccdf_weighted(target, &grid)?;
        Ok(TailReference { grid, truth })
    }

    pub fn l1(&self, radii: &[f64]) -> Result<f64> {
        let emp = rccdf_empirical(radii, &self.grid)?;
        l1_error(&self.grid, &self.truth, &emp)
    }
}

#[derive(Debug, Clone)]
pub struct GpaResult<T> {
    pub ensemble: ParticleEnsemble<T>,
    pub diagnostics: Vec<GpaRecord>,
    pub runaway_events: Vec<RunawayEvent>,
    /// Step at which the discriminator produced non-finite values, if any.
    pub aborted_at: Option<usize>,
    pub net: LipschitzNet<T>,
}

impl<T> GpaResult<T> {
    pub fn final_l1(&self) -> Option<f64> {
        self.diagnostics.iter().rev().find_map(|r| r.l1_error)
    }

    pub fn max_speed(&self) -> f64 {
        self.diagnostics.iter().map(|r| r.max_speed).fold(0.0, f64::max)
    }
}

/// Runs the particle algorithm from Gaussian draws of the prior.
pub fn gpa_run<T: Scalar>(
    target: &SampleSet<T>,
    n_particles: usize,
    prior: &Prior,
    a: Alpha<T>,
    mode: GpaMode,
    schedule: &GpaSchedule,
) -> Result<GpaResult<T>> {
    if prior.mean.len() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: prior.mean.len() });
    }
    if n_particles == 0 {
        return invalid("n_particles must be positive");
    }
    let mean: Vec<T> = prior.mean.iter().map(|&m| T::c(m)).collect();
    let init = sample_gaussian(target.dim(), n_particles, schedule.seed ^ 0x7061_7274, &mean, T::c(prior.scale))?;
    let ensemble = ParticleEnsemble::new(target.dim(), init.points().to_vec())?;
    let reference = TailReference::from_target(target)?;
    gpa_run_from(target, ensemble, a, mode, schedule, Some(&reference))
}

/// Runs the particle algorithm from given positions. Without a reference
/// no rCCDF errors are recorded.
pub fn gpa_run_from<T: Scalar>(
    target: &SampleSet<T>,
    mut ensemble: ParticleEnsemble<T>,
    a: Alpha<T>,
    mode: GpaMode,
    schedule: &GpaSchedule,
    reference: Option<&TailReference>,
) -> Result<GpaResult<T>> {
    schedule.validate()?;
    if target.is_empty() || ensemble.is_empty() {
        return invalid("target and particles must be nonempty");
    }
    if ensemble.dim != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: ensemble.dim });
    }
    let (l, net_mode) = match mode {
        GpaMode::W1Proximal { lipschitz } => {
            if !(lipschitz > 0.0) || !lipschitz.is_finite() {
                return invalid("Lipschitz budget must be positive");
            }
            (lipschitz, LipschitzMode::Spectral)
        }
        GpaMode::Unconstrained => (1.0, LipschitzMode::Unconstrained),
    };
    let cfg = TrainConfig { mode: net_mode, seed: schedule.seed, ..schedule.train.clone() };
    let mut trainer = Trainer::new(target.dim(), a, T::c(l), cfg)?;
    let eta = T::c(schedule.step_size);
    let mut diagnostics = Vec::with_capacity(schedule.outer_steps);
    let mut runaway_events = Vec::new();
    let mut aborted_at = None;
    for step in 0..schedule.outer_steps {
        let particles = ensemble.to_sample_set()?;
        let mut objective = f64::NAN;
        for _ in 0..schedule.inner_steps {
            match trainer.step(&particles, target, schedule.train.learning_rate) {
                Ok(v) => objective = v.to_f64_lossy(),
                Err(Error::NonFinite(_)) => {
                    aborted_at = Some(step);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if aborted_at.is_some() || !trainer.net.params().iter().all(|p| p.is_finite()) {
            aborted_at = Some(step);
            break;
        }
        ensemble = gpa_step(&ensemble, &trainer.net, eta)?;
        runaway_events.extend(ensemble.clamped.iter().map(|&particle| RunawayEvent { step, particle }));
        let last = step + 1 == schedule.outer_steps;
        let l1_error = match reference {
            Some(r) if last || step % schedule.diagnostics_every == 0 => Some(r.l1(&ensemble.radii())?),
            _ => None,
        };
        diagnostics.push(GpaRecord {
            step,
            objective,
            max_speed: ensemble.max_speed,
            l1_error,
            runaways: runaway_events.len(),
        });
    }
    if aborted_at.is_some() {
        if let Some(r) = reference {
            let l1 = r.l1(&ensemble.radii())?;
            diagnostics.push(GpaRecord {
                step: ensemble.step,
                objective: f64::NAN,
                max_speed: 0.0,
                l1_error: Some(l1),
                runaways: runaway_events.len(),
            });
        }
    }
    Ok(GpaResult { ensemble, diagnostics, runaway_events, aborted_at, net: trainer.net })
}

/// Moving average of `values` over `window` entries (shorter at the start).
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= w {
            acc -= values[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}

/// Particles beyond `factor` times the target's 99.9th percentile radius.
pub fn runaway_count<T: Scalar>(particles: &ParticleEnsemble<T>, target: &SampleSet<T>, factor: f64) -> usize {
    let mut radii: Vec<f64> = target.radii().iter().map(|r| r.to_f64_lossy()).collect();
    radii.sort_by(f64::total_cmp);
    let h = 0.999 * (radii.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(radii.len() - 1);
    let q = radii[lo] + (h - lo as f64) * (radii[hi] - radii[lo]);
    let limit = factor * q;
    particles.radii().iter().filter(|&&r| !(r <= limit)).count()
}
