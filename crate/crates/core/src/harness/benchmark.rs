//! Particle runs on an isotropic Student-t target, with and without the
//! Lipschitz constraint on the discriminator.

use crate::conjugate::Alpha;
use crate::error::{invalid, Result};
use crate::gpa::{gpa_run_from, runaway_count, smoothed, GpaMode, GpaSchedule, ParticleEnsemble, TailReference};
use crate::metrics::{default_grid, student_t_truth_curve, DEFAULT_GRID_POINTS};
use crate::neural::{Activation, TrainConfig};
use crate::samplers::{sample_gaussian, sample_student_t};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub nu: f64,
    pub dim: usize,
    pub n_particles: usize,
    pub n_target: usize,
    pub alpha: f64,
    pub lipschitz: f64,
    pub prior_scale: f64,
    pub schedule: GpaSchedule,
    pub modes: Vec<GpaMode>,
    pub seeds: Vec<u64>,
    /// Particles beyond this multiple of the target's 99.9th percentile
    /// radius count as run-aways.
    pub runaway_factor: f64,
    /// Moving-average window for the objective trend.
    pub trend_window: usize,
}

impl BenchmarkConfig {
    /// Two-dimensional run sized for a single core.
    pub fn desk(nu: f64) -> Self {
        BenchmarkConfig {
            nu,
            dim: 2,
            n_particles: 2000,
            n_target: 10_000,
            alpha: 2.0,
            lipschitz: 1.0,
            prior_scale: 1.0,
            schedule: GpaSchedule {
                outer_steps: 3000,
                inner_steps: 10,
                step_size: 0.5,
                seed: 0,
                train: TrainConfig {
                    hidden: vec![32, 32],
                    activation: Activation::SmoothAbs,
                    batch_p: 256,
                    batch_q: 256,
                    learning_rate: 5e-3,
                    ..TrainConfig::default()
                },
                diagnostics_every: 50,
            },
            modes: vec![GpaMode::W1Proximal { lipschitz: 1.0 }, GpaMode::Unconstrained],
            seeds: vec![0, 1, 2],
            runaway_factor: 10.0,
            trend_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub seed: u64,
    pub mode: GpaMode,
    pub l1_error: f64,
    pub runaways: usize,
    pub clamp_events: usize,
    pub max_speed: f64,
    /// `η·L` for proximal runs.
    pub speed_bound: Option<f64>,
    pub aborted_at: Option<usize>,
    /// Smoothed objective at the end is no larger than at the start.
    pub objective_decreased: bool,
    pub objective_start: f64,
    pub objective_end: f64,
}

impl BenchmarkRow {
    pub fn speed_ok(&self) -> bool {
        self.speed_bound.map_or(true, |b| self.max_speed <= b * (1.0 + 1e-3))
    }
}

pub fn run_student_t_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    if !(cfg.nu > 0.0) {
        return invalid("ν must be positive");
    }
    if cfg.seeds.is_empty() || cfg.modes.is_empty() {
        return invalid("need at least one seed and one mode");
    }
    let a = Alpha::Power(cfg.alpha);
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let target = sample_student_t::<f64>(cfg.dim, cfg.nu, cfg.n_target, seed.wrapping_add(0x7467))?;
        let grid = default_grid(&target.radii(), DEFAULT_GRID_POINTS)?;
        let truth = student_t_truth_curve(cfg.nu, cfg.dim, &grid)?;
        let reference = TailReference { grid, truth };
        let mean = vec![0.0; cfg.dim];
        let init = sample_gaussian::<f64>(cfg.dim, cfg.n_particles, seed.wrapping_add(0x7061), &mean, cfg.prior_scale)?;
        for &mode in &cfg.modes {
            let schedule = GpaSchedule { seed, ..cfg.schedule.clone() };
            let ensemble = ParticleEnsemble::new(cfg.dim, init.points().to_vec())?;
            let res = gpa_run_from(&target, ensemble, a, mode, &schedule, Some(&reference))?;
            let objective: Vec<f64> = res.diagnostics.iter().map(|d| d.objective).filter(|v| v.is_finite()).collect();
            let sm = smoothed(&objective, cfg.trend_window);
            let w = cfg.trend_window.min(sm.len()).max(1);
            let start = sm.get(w - 1).copied().unwrap_or(f64::NAN);
            let end = sm.last().copied().unwrap_or(f64::NAN);
            rows.push(BenchmarkRow {
                seed,
                mode,
                l1_error: res.final_l1().unwrap_or(f64::NAN),
                runaways: runaway_count(&res.ensemble, &target, cfg.runaway_factor),
                clamp_events: res.runaway_events.len(),
                max_speed: res.max_speed(),
                speed_bound: match mode {
                    GpaMode::W1Proximal { lipschitz } => Some(schedule.step_size * lipschitz),
                    GpaMode::Unconstrained => None,
                },
                aborted_at: res.aborted_at,
                objective_decreased: end <= start,
                objective_start: start,
                objective_end: end,
            });
        }
    }
    Ok(rows)
}
