//! `wprox`: command-line front end. Every flag can also be given in a
//! `key = value` file passed with `--config`; flags win over the file, and
//! the `WPROX_SEED` environment variable wins over both for the seed.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use wprox::discrete_dual::{solve_discrete_dual_with, DualMethod, DualOptions};
use wprox::finiteness::{finiteness_lowdim, finiteness_w1, finiteness_w1_kl, finiteness_w2, TailVerdict};
use wprox::gpa::{gpa_run, GpaMode, GpaSchedule, Prior};
use wprox::harness::{
    ingest_csv, rate_study, run_example1_with, run_student_t_benchmark, BenchmarkConfig, Config, RateMethod,
    RateStudyConfig, Table, SEED_ENV,
};
use wprox::metrics::{default_grid, rccdf_empirical, rccdf_histogram, student_t_truth_curve, DEFAULT_GRID_POINTS};
use wprox::neural::{estimate_dual, Activation, LipschitzMode, TrainConfig};
use wprox::samplers::{Example1Part, Family};
use wprox::wasserstein::{w1_with, W1Method, DEFAULT_DENOMINATOR_CAP};
use wprox::{Alpha, Error, Result, SampleSet};

#[derive(Parser)]
#[command(name = "wprox", version, about = "Wasserstein-proximal α-divergences for heavy-tailed data")]
struct Cli {
    /// Flat key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (or directory for `gpa`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finiteness verdict for heavy tails (β1, β2).
    Finiteness(FinitenessArgs),
    /// Exact W1 between two sample files.
    W1(W1Args),
    /// Dual estimate of the Lipschitz-regularized divergence.
    Estimate(EstimateArgs),
    /// Generative particle algorithm run.
    Gpa(GpaArgs),
    /// Convergence rate of the plug-in estimator with P = Q.
    RateStudy(RateArgs),
    /// The half-line example with infinite divergence and transport cost.
    Example1(Example1Args),
    /// Particle runs on a Student-t target, with and without the constraint.
    StudentTBench(BenchArgs),
    /// Radial survival curves and their L1 error.
    Metrics(MetricsArgs),
    /// Draws samples from a built-in family.
    Sample(SampleArgs),
}

#[derive(Args)]
struct FinitenessArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// w1, w2 or lowdim (dim is then the intrinsic dimension).
    #[arg(long)]
    rule: Option<String>,
}

#[derive(Args)]
struct W1Args {
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    /// auto, quantile, assignment or flow.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    denominator_cap: Option<u64>,
}

#[derive(Args)]
struct NetArgs {
    /// Comma-separated hidden widths.
    #[arg(long)]
    hidden: Option<String>,
    /// leaky-erf, tanh or smooth-abs.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    power_iters: Option<usize>,
    #[arg(long)]
    eval_window: Option<usize>,
    /// spectral, penalty or none.
    #[arg(long)]
    lipschitz_mode: Option<String>,
    #[arg(long)]
    penalty_weight: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// exact, pga or neural.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to store the trained network (neural only).
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args)]
struct GpaArgs {
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    alpha: Option<String>,
    /// proximal or unconstrained.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    outer_steps: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    prior_scale: Option<f64>,
    #[arg(long)]
    diagnostics_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    sizes: Option<String>,
    /// Number of seeds, starting from `seed`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// exact or neural.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args)]
struct Example1Args {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    target_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Number of seeds, starting from `seed`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outer_steps: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args)]
struct MetricsArgs {
    /// Samples whose tail is evaluated.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Student-t reference: degrees of freedom.
    #[arg(long)]
    nu: Option<f64>,
    /// Reference samples, used instead of a Student-t curve.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Histogram bins for the reference curve (Freedman–Diaconis when absent).
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    /// student-t, gaussian, example1-p, example1-q or example1-eta.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Merges flags with the configuration file.
struct Settings {
    cfg: Config,
    env_seed: Option<String>,
}

impl Settings {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.cfg.parsed(key),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn need<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(flag, key)?.ok_or_else(|| Error::InvalidParameter(format!("missing --{key}")))
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        flag.or_else(|| self.cfg.get(key).map(PathBuf::from))
            .ok_or_else(|| Error::InvalidParameter(format!("missing --{key}")))
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(v) = &self.env_seed {
            return v.trim().parse().map_err(|e| Error::InvalidParameter(format!("{SEED_ENV}: {e}")));
        }
        self.or(flag, "seed", 0)
    }

    fn alpha(&self, flag: Option<String>, default: &str) -> Result<Alpha<f64>> {
        Alpha::parse(&self.or(flag, "alpha", default.to_string())?)
    }

    fn train(&self, net: NetArgs, seed: u64, defaults: TrainConfig) -> Result<TrainConfig> {
        let hidden = match self.get(net.hidden, "hidden")? {
            Some(h) => parse_list::<usize>(&h)?,
            None => defaults.hidden.clone(),
        };
        let activation = match self.get(net.activation, "activation")? {
            Some(a) => parse_activation(&a)?,
            None => defaults.activation,
        };
        let weight = self.or(net.penalty_weight, "penalty-weight", 10.0)?;
        let mode = match self.get(net.lipschitz_mode, "lipschitz-mode")?.as_deref() {
            None => defaults.mode,
            Some("spectral") => LipschitzMode::Spectral,
            Some("penalty") => LipschitzMode::Penalty { weight },
            Some("none") => LipschitzMode::Unconstrained,
            Some(other) => return Err(Error::InvalidParameter(format!("unknown lipschitz mode {other:?}"))),
        };
        let batch = self.or(net.batch, "batch", defaults.batch_p)?;
        let iterations = self.or(net.iterations, "iterations", defaults.iterations)?;
        let cfg = TrainConfig {
            hidden,
            activation,
            mode,
            batch_p: batch,
            batch_q: batch,
            iterations,
            learning_rate: self.or(net.learning_rate, "learning-rate", defaults.learning_rate)?,
            power_iters: self.or(net.power_iters, "power-iters", defaults.power_iters)?,
            seed,
            eval_window: self.or(net.eval_window, "eval-window", defaults.eval_window.min(iterations))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| Error::InvalidParameter(format!("bad list entry {x:?}: {e}"))))
        .collect()
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "leaky-erf" => Ok(Activation::LeakyErf),
        "tanh" => Ok(Activation::Tanh),
        "smooth-abs" => Ok(Activation::SmoothAbs),
        _ => Err(Error::InvalidParameter(format!("unknown activation {s:?}"))),
    }
}

fn real(v: f64) -> String {
    Table::real(v)
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => table.write(BufWriter::new(File::create(path)?)),
        None => table.write(io::stdout().lock()),
    }
}

fn finiteness(s: &Settings, a: FinitenessArgs) -> Result<Table> {
    let d = s.need(a.dim, "dim")?;
    let alpha = s.alpha(a.alpha, "2")?;
    let b1 = s.need(a.beta1, "beta1")?;
    let b2 = s.need(a.beta2, "beta2")?;
    let v: TailVerdict<f64> = match (s.or(a.rule, "rule", "w1".to_string())?.as_str(), alpha) {
        ("w1", Alpha::Kl) => finiteness_w1_kl(d, b1, b2)?,
        ("w1", _) => finiteness_w1(d, alpha, b1, b2)?,
        ("w2", _) => finiteness_w2(d, alpha, b1, b2)?,
        ("lowdim", _) => finiteness_lowdim(d, alpha, b1, b2)?,
        (other, _) => return Err(Error::InvalidParameter(format!("unknown rule {other:?}"))),
    };
    let mut t = Table::new(&["dim", "alpha", "beta1", "beta2", "verdict", "rule"]);
    t.push(vec![v.dim.to_string(), v.alpha.to_string(), real(v.beta1), real(v.beta2), v.verdict.to_string(), v.rule.to_string()]);
    Ok(t)
}

fn w1(s: &Settings, a: W1Args) -> Result<Table> {
    let p = ingest_csv(&s.path(a.p, "p")?, None)?;
    let q = ingest_csv(&s.path(a.q, "q")?, None)?;
    let method = match s.or(a.method, "method", "auto".to_string())?.as_str() {
        "auto" => W1Method::Auto,
        "quantile" => W1Method::Quantile,
        "assignment" => W1Method::Assignment,
        "flow" => W1Method::Flow,
        other => return Err(Error::InvalidParameter(format!("unknown W1 method {other:?}"))),
    };
    let cap = s.or(a.denominator_cap, "denominator-cap", DEFAULT_DENOMINATOR_CAP)?;
    let mut t = Table::new(&["w1"]);
    t.push(vec![real(w1_with(&p, &q, method, cap)?)]);
    Ok(t)
}

fn estimate(s: &Settings, a: EstimateArgs) -> Result<Table> {
    let p = ingest_csv(&s.path(a.p, "p")?, None)?;
    let q = ingest_csv(&s.path(a.q, "q")?, None)?;
    let alpha = s.alpha(a.alpha, "2")?;
    let l = s.or(a.lipschitz, "lipschitz", 1.0)?;
    let seed = s.seed(a.seed)?;
    let method = s.or(a.method, "method", "exact".to_string())?;
    match method.as_str() {
        "exact" | "pga" => {
            let opts = DualOptions {
                method: if method == "exact" { DualMethod::InteriorPoint } else { DualMethod::ProjectedGradient },
                ..DualOptions::default()
            };
            let r = solve_discrete_dual_with(&p, &q, alpha, l, &opts)?;
            let mut t = Table::new(&["method", "estimate", "w1_cap", "gap_bound", "iterations", "converged"]);
            t.push(vec![
                method.clone(),
                real(r.objective),
                r.w1_cap.map_or("nan".into(), real),
                r.gap_bound.map_or("nan".into(), real),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]);
            Ok(t)
        }
        "neural" => {
            let cfg = s.train(a.net, seed, TrainConfig::default())?;
            let r = estimate_dual(&p, &q, alpha, l, &cfg)?;
            if let Some(path) = s.get(a.model_out.map(|p| p.display().to_string()), "model-out")? {
                r.net.write_to(BufWriter::new(File::create(path)?))?;
            }
            let mut t = Table::new(&["iteration", "objective", "estimate"]);
            let last = r.trace.len() - 1;
            for (k, v) in r.trace.iter().enumerate() {
                t.push(vec![k.to_string(), real(*v), if k == last { real(r.estimate) } else { String::new() }]);
            }
            Ok(t)
        }
        other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
    }
}

fn gpa(s: &Settings, a: GpaArgs, out: Option<&Path>) -> Result<()> {
    let target = ingest_csv(&s.path(a.target, "target")?, None)?;
    let n = s.or(a.particles, "particles", 2000)?;
    let alpha = s.alpha(a.alpha, "2")?;
    let l = s.or(a.lipschitz, "lipschitz", 1.0)?;
    let mode = match s.or(a.mode, "mode", "proximal".to_string())?.as_str() {
        "proximal" => GpaMode::W1Proximal { lipschitz: l },
        "unconstrained" => GpaMode::Unconstrained,
        other => return Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
    };
    let seed = s.seed(a.seed)?;
    let base = GpaSchedule::default();
    let schedule = GpaSchedule {
        outer_steps: s.or(a.outer_steps, "outer-steps", base.outer_steps)?,
        inner_steps: s.or(a.inner_steps, "inner-steps", base.inner_steps)?,
        step_size: s.or(a.eta, "eta", base.step_size)?,
        seed,
        train: s.train(a.net, seed, base.train)?,
        diagnostics_every: s.or(a.diagnostics_every, "diagnostics-every", base.diagnostics_every)?,
    };
    let prior = Prior { mean: vec![0.0; target.dim()], scale: s.or(a.prior_scale, "prior-scale", 1.0)? };
    let r = gpa_run(&target, n, &prior, alpha, mode, &schedule)?;
    let mut diag = Table::new(&["step", "objective", "max_speed", "l1_error", "runaways"]);
    for d in &r.diagnostics {
        diag.push(vec![
            d.step.to_string(),
            real(d.objective),
            real(d.max_speed),
            d.l1_error.map_or(String::new(), real),
            d.runaways.to_string(),
        ]);
    }
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            emit(&diag, Some(&dir.join("diagnostics.csv")))?;
            r.ensemble.to_sample_set()?.write_csv(BufWriter::new(File::create(dir.join("particles.csv"))?))?;
            Ok(())
        }
        None => emit(&diag, None),
    }
}

fn rate(s: &Settings, a: RateArgs) -> Result<Table> {
    let seed = s.seed(a.seed)?;
    let count = s.or(a.seeds, "seeds", 20)?;
    let base = RateStudyConfig::default();
    let method = match s.or(a.method, "method", "exact".to_string())?.as_str() {
        "exact" => RateMethod::Exact,
        "neural" => RateMethod::Neural(s.train(a.net, seed, TrainConfig::default())?),
        other => return Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
    };
    let cfg = RateStudyConfig {
        dim: s.or(a.dim, "dim", base.dim)?,
        alpha: s.or(a.alpha, "alpha", base.alpha)?,
        nu: s.or(a.nu, "nu", base.nu)?,
        lipschitz: s.or(a.lipschitz, "lipschitz", base.lipschitz)?,
        sizes: match s.get(a.sizes, "sizes")? {
            Some(v) => parse_list(&v)?,
            None => base.sizes,
        },
        seeds: (seed..seed + count).collect(),
        method,
        threads: s.or(a.threads, "threads", 1)?,
    };
    let r = rate_study(&cfg)?;
    for w in &r.warnings {
        eprintln!("warning: rate conditions not met: {w}");
    }
    let mut t = Table::new(&["n", "mean_error", "fitted_error", "slope", "intercept"]);
    for row in &r.rows {
        let fitted = (r.intercept + r.slope * (row.n as f64).ln()).exp();
        t.push(vec![row.n.to_string(), real(row.mean_error), real(fitted), real(r.slope), real(r.intercept)]);
    }
    Ok(t)
}

fn example1(s: &Settings, a: Example1Args) -> Result<Table> {
    let delta = s.or(a.delta, "delta", 1.0)?;
    let alpha = s.alpha(a.alpha, "2")?;
    let l = s.or(a.lipschitz, "lipschitz", 1.0)?;
    let n = s.or(a.n, "n", 2000)?;
    let r = run_example1_with(delta, alpha, l, n, s.seed(a.seed)?)?;
    let mut t = Table::new(&["quantity", "level", "value"]);
    let mut put = |name: &str, level: String, v: f64| t.push(vec![name.to_string(), level, real(v)]);
    put("tail_integral", String::new(), r.tail_integral);
    put("divergence_eta_q", String::new(), r.divergence_eta_q);
    put("w1_p_eta", String::new(), r.w1_p_eta);
    put("w1_p_eta_closed", String::new(), r.w1_p_eta_closed);
    put("bound", String::new(), r.bound);
    put("divergence_p_q", String::new(), r.divergence_p_q);
    put("w1_p_q", String::new(), r.w1_p_q);
    for (m, v) in &r.divergence_table {
        put("divergence_truncated", real(*m), *v);
    }
    for (radius, v) in &r.w1_table {
        put("w1_truncated", real(*radius), *v);
    }
    put("estimate", r.sample_size.to_string(), r.estimate);
    Ok(t)
}

fn bench(s: &Settings, a: BenchArgs) -> Result<Table> {
    let nu = s.or(a.nu, "nu", 1.0)?;
    let mut cfg = BenchmarkConfig::desk(nu);
    let seed = s.seed(a.seed)?;
    let count = s.or(a.seeds, "seeds", 3)?;
    cfg.seeds = (seed..seed + count).collect();
    cfg.n_particles = s.or(a.particles, "particles", cfg.n_particles)?;
    cfg.n_target = s.or(a.target_size, "target-size", cfg.n_target)?;
    cfg.alpha = s.or(a.alpha, "alpha", cfg.alpha)?;
    let l = s.or(a.lipschitz, "lipschitz", cfg.lipschitz)?;
    cfg.lipschitz = l;
    cfg.modes = vec![GpaMode::W1Proximal { lipschitz: l }, GpaMode::Unconstrained];
    cfg.schedule.outer_steps = s.or(a.outer_steps, "outer-steps", cfg.schedule.outer_steps)?;
    cfg.schedule.inner_steps = s.or(a.inner_steps, "inner-steps", cfg.schedule.inner_steps)?;
    cfg.schedule.step_size = s.or(a.eta, "eta", cfg.schedule.step_size)?;
    cfg.schedule.train = s.train(a.net, seed, cfg.schedule.train.clone())?;
    let rows = run_student_t_benchmark(&cfg)?;
    let mut t = Table::new(&["seed", "mode", "l1_error", "runaways", "clamp_events", "max_speed", "speed_ok", "aborted_at"]);
    for r in rows {
        t.push(vec![
            r.seed.to_string(),
            match r.mode {
                GpaMode::W1Proximal { .. } => "proximal".into(),
                GpaMode::Unconstrained => "unconstrained".into(),
            },
            real(r.l1_error),
            r.runaways.to_string(),
            r.clamp_events.to_string(),
            real(r.max_speed),
            r.speed_ok().to_string(),
            r.aborted_at.map_or(String::new(), |v| v.to_string()),
        ]);
    }
    Ok(t)
}

fn metrics(s: &Settings, a: MetricsArgs) -> Result<Table> {
    let samples = ingest_csv(&s.path(a.samples, "samples")?, None)?;
    let points = s.or(a.grid_points, "grid-points", DEFAULT_GRID_POINTS)?;
    let reference = match a.reference.or_else(|| s.cfg.get("reference").map(PathBuf::from)) {
        Some(path) => Some(ingest_csv(&path, Some(samples.dim()))?),
        None => None,
    };
    let (grid, truth) = match reference {
        Some(r) => {
            let radii = r.radii();
            let grid = default_grid(&radii, points)?;
            let truth = rccdf_histogram(&radii, &grid, s.get(a.bins, "bins")?)?;
            (grid, truth)
        }
        None => {
            let nu = s.need(a.nu, "nu")?;
            let grid = default_grid(&samples.radii(), points)?;
            let truth = student_t_truth_curve(nu, samples.dim(), &grid)?;
            (grid, truth)
        }
    };
    let empirical = rccdf_empirical(&samples.radii(), &grid)?;
    let mut t = Table::new(&["radius", "truth", "empirical", "abs_error"]);
    for i in 0..grid.len() {
        t.push(vec![real(grid[i]), real(truth[i]), real(empirical[i]), real((truth[i] - empirical[i]).abs())]);
    }
    Ok(t)
}

fn sample(s: &Settings, a: SampleArgs) -> Result<SampleSet<f64>> {
    let n = s.need(a.n, "n")?;
    let seed = s.seed(a.seed)?;
    let dim = s.or(a.dim, "dim", 1)?;
    let delta = s.or(a.delta, "delta", 1.0)?;
    let family = match s.or(a.family, "family", "student-t".to_string())?.as_str() {
        "student-t" => Family::StudentT { dim, nu: s.need(a.nu, "nu")? },
        "gaussian" => Family::Gaussian { mean: vec![0.0; dim], scale: s.or(a.scale, "scale", 1.0)? },
        "example1-p" => Family::Example1 { part: Example1Part::P, delta },
        "example1-q" => Family::Example1 { part: Example1Part::Q, delta },
        "example1-eta" => Family::Example1 { part: Example1Part::Eta, delta },
        other => return Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
    };
    family.sample(n, seed)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let out_flag = cli.out.clone();
    let settings = Settings { env_seed: std::env::var(SEED_ENV).ok(), cfg };
    let out = out_flag.or_else(|| settings.cfg.get("out").map(PathBuf::from));
    let out = out.as_deref();
    let table = match cli.command {
        Command::Finiteness(a) => finiteness(&settings, a)?,
        Command::W1(a) => w1(&settings, a)?,
        Command::Estimate(a) => estimate(&settings, a)?,
        Command::Gpa(a) => return gpa(&settings, a, out),
        Command::RateStudy(a) => rate(&settings, a)?,
        Command::Example1(a) => example1(&settings, a)?,
        Command::StudentTBench(a) => bench(&settings, a)?,
        Command::Metrics(a) => metrics(&settings, a)?,
        Command::Sample(a) => {
            let s = sample(&settings, a)?;
            return match out {
                Some(path) => s.write_csv(BufWriter::new(File::create(path)?)),
                None => {
                    let mut lock = io::stdout().lock();
                    s.write_csv(&mut lock)?;
                    lock.flush().map_err(Error::from)
                }
            };
        }
    };
    emit(&table, out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
