//! Neural estimator of the Lipschitz-regularized α-divergence.
//!
//! The potential γ is a fully connected network with a smooth activation
//! whose slope lies in `(0, 1]`. Its output is multiplied by the budget `L`.
//! With every weight matrix of operator norm at most one, the whole map is
//! `L`-Lipschitz. Training maximizes the shifted dual objective
//! `E_P γ − ν − E_Q f*(γ − ν)` on minibatches with Adam. The shift ν is not a
//! trainable parameter: on every minibatch it is the exact minimizer of the
//! one-dimensional convex inner problem.
//!
//! | mode            | Lipschitz control                                        |
//! |-----------------|----------------------------------------------------------|
//! | `Spectral`      | each matrix divided by `max(1, σ̂)` after every update      |
//! | `Penalty`       | squared excess of pairwise difference quotients over `L` |
//! | `Unconstrained` | none (the plain α-divergence dual)                        |

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::conjugate::{shift_functional, star_prime_unchecked, Alpha, SHIFT_TOLERANCE};
use crate::error::{invalid, Error, Result};
use crate::sample_set::SampleSet;
use crate::samplers::{fill_normal, stream_rng, uniform, SeededRng};
use crate::scalar::{euclidean, pairwise_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x/2 + (√π/4) erf(x)`, slope `(1 + e^{−x²})/2 ∈ (1/2, 1]`.
    LeakyErf,
    /// `tanh`, slope in `(0, 1]`.
    Tanh,
    /// `√(1 + x²) − 1`, a smoothed `|x|` with slope in `(−1, 1)` tending to
    /// `±1`; it keeps gradient norms from shrinking layer after layer.
    SmoothAbs,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::LeakyErf => T::c(0.5) * x + T::c(0.25 * PI.sqrt()) * x.erf_fn(),
            Activation::Tanh => x.tanh(),
            Activation::SmoothAbs => (T::one() + x * x).sqrt() - T::one(),
        }
    }

    #[inline]
    pub fn slope<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::LeakyErf => T::c(0.5) * (T::one() + (-x * x).exp()),
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::SmoothAbs => x / (T::one() + x * x).sqrt(),
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::LeakyErf => 0,
            Activation::Tanh => 1,
            Activation::SmoothAbs => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::LeakyErf),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::SmoothAbs),
            _ => Err(Error::Model(format!("unknown activation code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzMode {
    Spectral,
    Penalty { weight: f64 },
    Unconstrained,
}

/// Dense layer `z = W h + b` with `W` row-major `outputs × inputs`, plus the
/// persistent singular-vector estimates used by power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    u: Vec<T>,
    v: Vec<T>,
    sigma: T,
}

impl<T: Scalar> Layer<T> {
    fn new(inputs: usize, outputs: usize, weight: Vec<T>, bias: Vec<T>, rng: &mut SeededRng) -> Self {
        let mut u = vec![0.0; outputs];
        let mut v = vec![0.0; inputs];
        fill_normal(rng, &mut u);
        fill_normal(rng, &mut v);
        Layer {
            inputs,
            outputs,
            weight,
            bias,
            u: u.into_iter().map(T::c).collect(),
            v: v.into_iter().map(T::c).collect(),
            sigma: T::zero(),
        }
    }

    /// Latest power-iteration estimate of the operator norm.
    pub fn sigma_estimate(&self) -> T {
        self.sigma
    }

    fn mul(&self, h: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(self.weight.chunks_exact(self.inputs)) {
            *o = row.iter().zip(h).fold(T::zero(), |acc, (&w, &x)| acc + w * x);
        }
    }

    fn mul_transpose(&self, d: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (row, &dk) in self.weight.chunks_exact(self.inputs).zip(d) {
            for (o, &w) in out.iter_mut().zip(row) {
                *o = *o + w * dk;
            }
        }
    }

    /// Power iteration from the stored vectors: at least `min_iters`
    /// iterations, continued until the estimate settles.
    fn power_iteration(&mut self, min_iters: usize) -> T {
        let mut wv = vec![T::zero(); self.outputs];
        let mut wtu = vec![T::zero(); self.inputs];
        let normalize = |x: &mut [T]| -> T {
            let n = x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
            if n > T::zero() {
                x.iter_mut().for_each(|v| *v = *v / n);
            }
            n
        };
        let mut prev = T::zero();
        let mut sigma = T::zero();
        for it in 0..500 {
            self.mul_transpose(&self.u.clone(), &mut wtu);
            if normalize(&mut wtu) == T::zero() {
                self.sigma = T::zero();
                return T::zero();
            }
            self.v.copy_from_slice(&wtu);
            self.mul(&self.v.clone(), &mut wv);
            sigma = normalize(&mut wv);
            self.u.copy_from_slice(&wv);
            if it + 1 >= min_iters && (sigma - prev).abs() <= T::c(1e-9).max(T::eps() * T::c(16.0)) * sigma {
                break;
            }
            prev = sigma;
        }
        self.sigma = sigma;
        sigma
    }
}

/// Scalar potential `x ↦ L · (W_k σ(… σ(W_1 x + b_1) …) + b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzNet<T> {
    pub layers: Vec<Layer<T>>,
    pub activation: Activation,
    pub lipschitz: T,
    pub mode: LipschitzMode,
}

/// Per-sample buffers for forward and backward passes.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    /// Layer inputs: `acts[0] = x`, `acts[k+1] = σ(pre[k])`.
    acts: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    delta: Vec<T>,
    back: Vec<T>,
}

impl<T: Scalar> LipschitzNet<T> {
    /// Random network with the given hidden widths. Weights start Gaussian
    /// with variance `1/fan_in` and are then spectrally normalized.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        lipschitz: T,
        mode: LipschitzMode,
        seed: u64,
    ) -> Result<Self> {
        Self::check_shape(input_dim, hidden, lipschitz)?;
        let mut rng = stream_rng(seed, 0x6e6e);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden.iter().chain(std::iter::once(&1)) {
            let mut w = vec![0.0; width * fan_in];
            fill_normal(&mut rng, &mut w);
            let s = 1.0 / (fan_in as f64).sqrt();
            let weight = w.into_iter().map(|x| T::c(x * s)).collect();
            let mut b = vec![0.0; width];
            fill_normal(&mut rng, &mut b);
            let bias = b.into_iter().map(|x| T::c(0.1 * x)).collect();
            layers.push(Layer::new(fan_in, width, weight, bias, &mut rng));
            fan_in = width;
        }
        let mut net = LipschitzNet { layers, activation, lipschitz, mode };
        // Every mode starts from the same normalized weights, so constrained
        // and unconstrained runs differ only in how training proceeds.
        net.spectral_normalize(1)?;
        Ok(net)
    }

    /// Network with all weights and biases zero.
    pub fn zeros(input_dim: usize, hidden: &[usize], activation: Activation, lipschitz: T) -> Result<Self> {
        let mut net = Self::new(input_dim, hidden, activation, lipschitz, LipschitzMode::Spectral, 0)?;
        for l in &mut net.layers {
            l.weight.iter_mut().for_each(|w| *w = T::zero());
            l.bias.iter_mut().for_each(|b| *b = T::zero());
        }
        Ok(net)
    }

    /// Network from explicit `(weight, bias)` pairs, each weight row-major
    /// `outputs × inputs`. The last layer must have one output.
    pub fn from_layers(
        input_dim: usize,
        params: Vec<(Vec<T>, Vec<T>)>,
        activation: Activation,
        lipschitz: T,
        mode: LipschitzMode,
    ) -> Result<Self> {
        let mut rng = stream_rng(0, 0x6e6e);
        let mut layers = Vec::with_capacity(params.len());
        let mut fan_in = input_dim;
        for (w, b) in params {
            let out = b.len();
            if out == 0 || w.len() != out * fan_in {
                return Err(Error::DimensionMismatch { expected: out * fan_in, got: w.len() });
            }
            layers.push(Layer::new(fan_in, out, w, b, &mut rng));
            fan_in = out;
        }
        if fan_in != 1 || layers.is_empty() {
            return invalid("the last layer must have exactly one output");
        }
        if !(lipschitz > T::zero()) {
            return invalid("Lipschitz budget must be positive");
        }
        Ok(LipschitzNet { layers, activation, lipschitz, mode })
    }

    fn check_shape(input_dim: usize, hidden: &[usize], l: T) -> Result<()> {
        if input_dim == 0 || hidden.contains(&0) {
            return invalid("layer widths must be positive");
        }
        if !(l > T::zero()) || !l.is_finite() {
            return invalid(format!("Lipschitz budget must be positive, got {l}"));
        }
        Ok(())
    }

    /// Sets the last layer to zero so that `γ ≡ 0`.
    pub fn zero_output_layer(&mut self) {
        if let Some(l) = self.layers.last_mut() {
            l.weight.iter_mut().for_each(|w| *w = T::zero());
            l.bias.iter_mut().for_each(|b| *b = T::zero());
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: params.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&params[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    pub fn workspace(&self) -> Workspace<T> {
        let mut acts = vec![vec![T::zero(); self.input_dim()]];
        let mut pre = Vec::new();
        for l in &self.layers {
            pre.push(vec![T::zero(); l.outputs]);
            acts.push(vec![T::zero(); l.outputs]);
        }
        let widest = self.layers.iter().map(|l| l.inputs.max(l.outputs)).max().unwrap_or(1);
        Workspace { acts, pre, delta: vec![T::zero(); widest], back: vec![T::zero(); widest] }
    }

    /// `γ(x)`.
    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut ws = self.workspace();
        Ok(self.forward_ws(x, &mut ws))
    }

    /// Forward pass that keeps intermediate values in `ws`.
    pub fn forward_ws(&self, x: &[T], ws: &mut Workspace<T>) -> T {
        ws.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(k + 1);
            let pre = &mut ws.pre[k];
            layer.mul(&head[k], pre);
            for (z, &b) in pre.iter_mut().zip(&layer.bias) {
                *z = *z + b;
            }
            let out = &mut tail[0];
            if k == last {
                out.copy_from_slice(pre);
            } else {
                for (o, &z) in out.iter_mut().zip(pre.iter()) {
                    *o = self.activation.apply(z);
                }
            }
        }
        self.lipschitz * ws.acts[last + 1][0]
    }

    /// Reverse pass after [`forward_ws`](Self::forward_ws): adds
    /// `upstream · ∂γ/∂θ` into `grad` (if given) and writes `∂γ/∂x` scaled by
    /// `upstream` into `input_grad` (if given).
    pub fn backward_ws(
        &self,
        ws: &mut Workspace<T>,
        upstream: T,
        mut grad: Option<&mut [T]>,
        input_grad: Option<&mut [T]>,
    ) {
        let Workspace { acts, pre, delta, back } = ws;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut k0 = 0;
        for l in &self.layers {
            offsets.push(k0);
            k0 += l.weight.len() + l.bias.len();
        }
        delta[0] = upstream * self.lipschitz;
        let mut width = 1;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if let Some(g) = grad.as_deref_mut() {
                let off = offsets[k];
                let h = &acts[k];
                for (r, &dr) in delta[..width].iter().enumerate() {
                    let row = &mut g[off + r * layer.inputs..off + (r + 1) * layer.inputs];
                    for (gw, &hv) in row.iter_mut().zip(h) {
                        *gw = *gw + dr * hv;
                    }
                }
                let boff = off + layer.weight.len();
                for (gb, &dr) in g[boff..boff + width].iter_mut().zip(&delta[..width]) {
                    *gb = *gb + dr;
                }
            }
            layer.mul_transpose(&delta[..width], &mut back[..layer.inputs]);
            if k > 0 {
                for (i, b) in back[..layer.inputs].iter().enumerate() {
                    delta[i] = *b * self.activation.slope(pre[k - 1][i]);
                }
                width = layer.inputs;
            }
        }
        if let Some(ig) = input_grad {
            ig.copy_from_slice(&back[..self.input_dim()]);
        }
    }

    /// Gradients of `γ(x)` with respect to the flattened parameters and to `x`.
    pub fn gradients(&self, x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut ws = self.workspace();
        self.forward_ws(x, &mut ws);
        let mut g = vec![T::zero(); self.num_params()];
        let mut ig = vec![T::zero(); self.input_dim()];
        self.backward_ws(&mut ws, T::one(), Some(&mut g), Some(&mut ig));
        Ok((g, ig))
    }

    /// `∇_x γ(x)`.
    pub fn input_gradient(&self, x: &[T], ws: &mut Workspace<T>, out: &mut [T]) {
        self.forward_ws(x, ws);
        self.backward_ws(ws, T::one(), None, Some(out));
    }

    /// Divides every weight matrix by `max(1, σ̂)`, with `σ̂` from persistent
    /// power iteration (at least `power_iters` steps, continued to
    /// convergence so the bound is not an underestimate).
    pub fn spectral_normalize(&mut self, power_iters: usize) -> Result<()> {
        if power_iters == 0 {
            return invalid("power_iters must be at least 1");
        }
        for l in &mut self.layers {
            let s = l.power_iteration(power_iters);
            if s > T::one() {
                l.weight.iter_mut().for_each(|w| *w = *w / s);
                l.sigma = T::one();
            }
        }
        Ok(())
    }

    /// Power-iteration norms of all layers (refreshing the stored vectors).
    pub fn layer_norms(&mut self) -> Vec<T> {
        self.layers.iter_mut().map(|l| l.power_iteration(1)).collect()
    }

    const MAGIC: [u8; 8] = *b"WPXNET01";

    /// Flat binary record: magic, shape, activation and mode codes, then
    /// little-endian `f64` values (`L`, then every layer's weights and biases).
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&Self::MAGIC)?;
        out.write_all(&(self.input_dim() as u32).to_le_bytes())?;
        out.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            out.write_all(&(l.outputs as u32).to_le_bytes())?;
        }
        out.write_all(&[self.activation.code()])?;
        let (code, weight) = match self.mode {
            LipschitzMode::Spectral => (0u8, 0.0),
            LipschitzMode::Penalty { weight } => (1, weight),
            LipschitzMode::Unconstrained => (2, 0.0),
        };
        out.write_all(&[code])?;
        out.write_all(&weight.to_le_bytes())?;
        out.write_all(&self.lipschitz.to_f64_lossy().to_le_bytes())?;
        for p in self.params() {
            out.write_all(&p.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| Error::Model("truncated header".into()))?;
        if magic != Self::MAGIC {
            return Err(Error::Model("bad magic bytes".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |input: &mut R| -> Result<usize> {
            input.read_exact(&mut u32buf).map_err(|_| Error::Model("truncated header".into()))?;
            Ok(u32::from_le_bytes(u32buf) as usize)
        };
        let input_dim = read_u32(&mut input)?;
        let n_layers = read_u32(&mut input)?;
        if input_dim == 0 || n_layers == 0 || n_layers > 1024 {
            return Err(Error::Model(format!("implausible shape: input {input_dim}, {n_layers} layers")));
        }
        let widths = (0..n_layers).map(|_| read_u32(&mut input)).collect::<Result<Vec<_>>>()?;
        let mut byte = [0u8; 1];
        input.read_exact(&mut byte).map_err(|_| Error::Model("truncated header".into()))?;
        let activation = Activation::from_code(byte[0])?;
        input.read_exact(&mut byte).map_err(|_| Error::Model("truncated header".into()))?;
        let mut f = [0u8; 8];
        let mut read_f64 = |input: &mut R| -> Result<f64> {
            input.read_exact(&mut f).map_err(|_| Error::Model("truncated parameter block".into()))?;
            Ok(f64::from_le_bytes(f))
        };
        let weight = read_f64(&mut input)?;
        let mode = match byte[0] {
            0 => LipschitzMode::Spectral,
            1 => LipschitzMode::Penalty { weight },
            2 => LipschitzMode::Unconstrained,
            c => return Err(Error::Model(format!("unknown mode code {c}"))),
        };
        let l = read_f64(&mut input)?;
        let mut params = Vec::new();
        let mut fan_in = input_dim;
        for &w in &widths {
            let weights = (0..w * fan_in).map(|_| read_f64(&mut input).map(T::c)).collect::<Result<Vec<_>>>()?;
            let biases = (0..w).map(|_| read_f64(&mut input).map(T::c)).collect::<Result<Vec<_>>>()?;
            params.push((weights, biases));
            fan_in = w;
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Model(format!("{} trailing bytes", rest.len())));
        }
        Self::from_layers(input_dim, params, activation, T::c(l), mode)
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub mode: LipschitzMode,
    pub batch_p: usize,
    pub batch_q: usize,
    pub iterations: usize,
    /// Initial Adam step, decayed by a cosine schedule to zero.
    pub learning_rate: f64,
    pub power_iters: usize,
    pub seed: u64,
    /// The estimate averages the full-sample objective over this many final iterations.
    pub eval_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 64],
            activation: Activation::LeakyErf,
            mode: LipschitzMode::Spectral,
            batch_p: 512,
            batch_q: 512,
            iterations: 5000,
            learning_rate: 1e-3,
            power_iters: 1,
            seed: 0,
            eval_window: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_p == 0 || self.batch_q == 0 || self.iterations == 0 || self.power_iters == 0 {
            return invalid("batch sizes, iteration count and power_iters must be positive");
        }
        if self.eval_window == 0 || self.eval_window > self.iterations {
            return invalid("eval_window must lie in 1..=iterations");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return invalid("learning rate must be positive");
        }
        if self.hidden.contains(&0) {
            return invalid("hidden widths must be positive");
        }
        if let LipschitzMode::Penalty { weight } = self.mode {
            if !(weight > 0.0) {
                return invalid("penalty weight must be positive");
            }
        }
        Ok(())
    }

    /// Learning rate at iteration `k` of the cosine schedule.
    pub fn rate_at(&self, k: usize) -> f64 {
        let frac = k as f64 / self.iterations as f64;
        self.learning_rate * 0.5 * (1.0 + (PI * frac).cos())
    }
}

/// Adam state for gradient ascent.
#[derive(Debug, Clone)]
struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Adam { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn ascend(&mut self, params: &mut [T], grad: &[T], lr: T) {
        let (b1, b2, eps) = (T::c(0.9), T::c(0.999), T::c(1e-8));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * grad[i] * grad[i];
            params[i] = params[i] + lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

/// Full-sample dual objective `E_P γ − Λ_Q[γ]` and its optimal shift.
pub fn dual_objective<T: Scalar>(net: &LipschitzNet<T>, p: &SampleSet<T>, q: &SampleSet<T>, a: Alpha<T>) -> Result<(T, T)> {
    let mut ws = net.workspace();
    let gp: Vec<T> = p.iter().map(|(x, w)| w * net.forward_ws(x, &mut ws)).collect();
    let gq: Vec<T> = q.iter().map(|(x, _)| net.forward_ws(x, &mut ws)).collect();
    if gp.iter().chain(&gq).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output".into()));
    }
    let s = shift_functional(&gq, q.weights(), a, T::c(SHIFT_TOLERANCE))?;
    Ok((pairwise_sum(&gp) - s.lambda_value, s.nu_star))
}

/// Index sampler for a (possibly weighted) sample set.
struct Picker<T> {
    cumulative: Vec<T>,
}

impl<T: Scalar> Picker<T> {
    fn new(s: &SampleSet<T>) -> Self {
        let mut acc = T::zero();
        let cumulative = s
            .weights()
            .iter()
            .map(|&w| {
                acc = acc + w;
                acc
            })
            .collect();
        Picker { cumulative }
    }

    /// `batch` indices: every index once when the batch covers the set,
    /// otherwise independent draws.
    fn pick(&self, rng: &mut SeededRng, batch: usize, out: &mut Vec<usize>) {
        out.clear();
        let n = self.cumulative.len();
        if batch >= n {
            out.extend(0..n);
            return;
        }
        let total = self.cumulative[n - 1];
        for _ in 0..batch {
            let u = T::c(uniform(rng)) * total;
            let k = self.cumulative.partition_point(|&c| c <= u).min(n - 1);
            out.push(k);
        }
    }

    fn covers(&self, batch: usize) -> bool {
        batch >= self.cumulative.len()
    }
}

/// Stateful dual ascent: the network, its optimizer state and the minibatch
/// stream. Kept alive across calls so a discriminator can be warm-started.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub net: LipschitzNet<T>,
    pub cfg: TrainConfig,
    pub alpha: Alpha<T>,
    adam: Adam<T>,
    rng: SeededRng,
    steps: usize,
    ws: Vec<Workspace<T>>,
    grad: Vec<T>,
    idx_p: Vec<usize>,
    idx_q: Vec<usize>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(input_dim: usize, a: Alpha<T>, l: T, cfg: TrainConfig) -> Result<Self> {
        a.ensure_at_least_one()?;
        cfg.validate()?;
        let mut net = LipschitzNet::new(input_dim, &cfg.hidden, cfg.activation, l, cfg.mode, cfg.seed)?;
        // Start from γ ≡ 0: symmetric instances then stay at the exact optimum.
        net.zero_output_layer();
        let n = net.num_params();
        Ok(Trainer {
            adam: Adam::new(n),
            rng: stream_rng(cfg.seed, 0x7472),
            steps: 0,
            ws: Vec::new(),
            grad: vec![T::zero(); n],
            idx_p: Vec::new(),
            idx_q: Vec::new(),
            net,
            cfg,
            alpha: a,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One ascent step at learning rate `lr`; returns the minibatch objective
    /// `mean_P γ − Λ_batch[γ]` before the update.
    pub fn step(&mut self, p: &SampleSet<T>, q: &SampleSet<T>, lr: f64) -> Result<T> {
        if p.dim() != self.net.input_dim() || q.dim() != self.net.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.net.input_dim(), got: p.dim().max(q.dim()) });
        }
        let (pp, pq) = (Picker::new(p), Picker::new(q));
        let mut idx_p = std::mem::take(&mut self.idx_p);
        let mut idx_q = std::mem::take(&mut self.idx_q);
        pp.pick(&mut self.rng, self.cfg.batch_p, &mut idx_p);
        pq.pick(&mut self.rng, self.cfg.batch_q, &mut idx_q);
        // Full coverage keeps the sample weights; random draws are already weighted.
        let wp: Vec<T> = if pp.covers(self.cfg.batch_p) {
            p.weights().to_vec()
        } else {
            vec![T::one() / T::from_count(idx_p.len()); idx_p.len()]
        };
        let wq: Vec<T> = if pq.covers(self.cfg.batch_q) {
            q.weights().to_vec()
        } else {
            vec![T::one() / T::from_count(idx_q.len()); idx_q.len()]
        };
        let (np, nq) = (idx_p.len(), idx_q.len());
        while self.ws.len() < np + nq {
            self.ws.push(self.net.workspace());
        }
        let mut gp = Vec::with_capacity(np);
        for (k, &i) in idx_p.iter().enumerate() {
            gp.push(self.net.forward_ws(p.point(i), &mut self.ws[k]));
        }
        let mut gq = Vec::with_capacity(nq);
        for (k, &j) in idx_q.iter().enumerate() {
            gq.push(self.net.forward_ws(q.point(j), &mut self.ws[np + k]));
        }
        if gp.iter().chain(&gq).any(|v| !v.is_finite()) {
            self.idx_p = idx_p;
            self.idx_q = idx_q;
            return Err(Error::NonFinite("network output".into()));
        }
        let shift = shift_functional(&gq, &wq, self.alpha, T::c(SHIFT_TOLERANCE))?;
        let linear = pairwise_sum(&gp.iter().zip(&wp).map(|(g, w)| *g * *w).collect::<Vec<_>>());
        let objective = linear - shift.lambda_value;

        self.grad.iter_mut().for_each(|g| *g = T::zero());
        for k in 0..np {
            self.net.backward_ws(&mut self.ws[k], wp[k], Some(&mut self.grad), None);
        }
        // At the exact shift these weights sum to one; normalizing removes the
        // bisection residual, which Adam would otherwise amplify.
        let mut tilt: Vec<T> = (0..nq).map(|k| wq[k] * star_prime_unchecked(gq[k] - shift.nu_star, self.alpha)).collect();
        let total = pairwise_sum(&tilt);
        if total > T::zero() && total.is_finite() {
            tilt.iter_mut().for_each(|t| *t = *t / total);
        }
        for (k, &t) in tilt.iter().enumerate() {
            self.net.backward_ws(&mut self.ws[np + k], -t, Some(&mut self.grad), None);
        }
        if let LipschitzMode::Penalty { weight } = self.cfg.mode {
            self.add_penalty_gradient(p, q, &idx_p, &idx_q, &gp, &gq, T::c(weight));
        }
        let mut params = self.net.params();
        self.adam.ascend(&mut params, &self.grad, T::c(lr));
        self.net.set_params(&params)?;
        if self.cfg.mode == LipschitzMode::Spectral {
            self.net.spectral_normalize(self.cfg.power_iters)?;
        }
        self.steps += 1;
        self.idx_p = idx_p;
        self.idx_q = idx_q;
        Ok(objective)
    }

    /// Gradient of `−w · mean_i max(0, |γ(x_i) − γ(y_i)|/‖x_i − y_i‖ − L)²`
    /// over paired minibatch points.
    #[allow(clippy::too_many_arguments)]
    fn add_penalty_gradient(
        &mut self,
        p: &SampleSet<T>,
        q: &SampleSet<T>,
        idx_p: &[usize],
        idx_q: &[usize],
        gp: &[T],
        gq: &[T],
        weight: T,
    ) {
        let np = idx_p.len();
        let pairs = np.min(idx_q.len());
        if pairs == 0 {
            return;
        }
        let scale = weight / T::from_count(pairs);
        for k in 0..pairs {
            let dist = euclidean(p.point(idx_p[k]), q.point(idx_q[k]));
            if !(dist > T::zero()) {
                continue;
            }
            let diff = gp[k] - gq[k];
            let excess = diff.abs() / dist - self.net.lipschitz;
            if excess > T::zero() {
                let coef = -scale * T::c(2.0) * excess * diff.signum() / dist;
                // Workspaces still hold the forward pass of both points.
                self.net.backward_ws(&mut self.ws[k], coef, Some(&mut self.grad), None);
                self.net.backward_ws(&mut self.ws[np + k], -coef, Some(&mut self.grad), None);
            }
        }
    }
}

/// Result of [`estimate_dual`].
#[derive(Debug, Clone)]
pub struct NeuralEstimate<T> {
    /// Mean full-sample objective over the evaluation window.
    pub estimate: T,
    /// Minibatch objective per iteration.
    pub trace: Vec<T>,
    /// Full-sample objective per iteration of the evaluation window.
    pub eval_trace: Vec<T>,
    pub nu: T,
    pub net: LipschitzNet<T>,
}

/// Trains a network potential on `(p, q)` and reports the dual estimate.
pub fn estimate_dual<T: Scalar>(
    p: &SampleSet<T>,
    q: &SampleSet<T>,
    a: Alpha<T>,
    l: T,
    cfg: &TrainConfig,
) -> Result<NeuralEstimate<T>> {
    if p.is_empty() || q.is_empty() {
        return invalid("estimate_dual needs nonempty sample sets");
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let mut tr = Trainer::new(p.dim(), a, l, cfg.clone())?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut eval_trace = Vec::with_capacity(cfg.eval_window);
    let mut nu = T::zero();
    let to_f64 = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
    for k in 0..cfg.iterations {
        let obj = match tr.step(p, q, cfg.rate_at(k)) {
            Ok(v) if v.is_finite() => v,
            _ => return Err(Error::Diverged { iteration: k, trace: to_f64(&trace) }),
        };
        trace.push(obj);
        if k + cfg.eval_window >= cfg.iterations {
            let (full, shift) = dual_objective(&tr.net, p, q, a)
                .map_err(|_| Error::Diverged { iteration: k, trace: to_f64(&trace) })?;
            eval_trace.push(full);
            nu = shift;
        }
    }
    let estimate = pairwise_sum(&eval_trace) / T::from_count(eval_trace.len());
    Ok(NeuralEstimate { estimate, trace, eval_trace, nu, net: tr.net })
}
