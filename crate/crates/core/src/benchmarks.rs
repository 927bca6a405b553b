//! Analytical multi-fidelity test problems with synthetic Gaussian noise.
//!
//! | problem | base function | domain | D | optimum |
//! |---|---|---|---|---|
//! | P1 | Forrester | `[0, 1]` | 1 | `x = 0.7572`, `f = −6.0207` |
//! | P2 | Griewank | `[−6, 5]^D` | 2 | `0`, `f = 0` |
//! | P3 | Rosenbrock | `[−2, 2]^D` | 2, 5, 10 | `1`, `f = 0` |
//! | P4 | shifted-rotated Rastrigin | `[−0.1, 0.2]^D` | 2, 5, 10 | `0.1`, `f = 0` |
//!
//! Each problem defines three functions `f_1` (high) to `f_3` (low). A stack
//! with one level uses `f_1`, two levels use `(f_1, f_3)`, three use all.
//! Level `l` is observed as `f_l(x) + η`, `η ~ N(0, σ_l)`, where the draw is
//! keyed by `(seed, l, eval_index)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::ReferenceOptimum;
use crate::objective::{Objective, Truth};
use crate::sampling::{full_factorial, hammersley};

/// Rotation angle of P4.
pub const P4_THETA: f64 = 0.2;
/// P4 fidelity parameters φ for `f_1..f_3`.
pub const P4_PHI: [f64; 3] = [10000.0, 5000.0, 2500.0];
/// Default noise as a fraction of the high-fidelity range, for `f_1..f_3`.
pub const NOISE_FRACTIONS: [f64; 3] = [0.025, 0.05, 0.10];
/// P3's range is shrunk by this factor before the noise levels are set.
pub const P3_RANGE_REDUCTION: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem {
    P1,
    P2,
    P3,
    P4,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::P1, Problem::P2, Problem::P3, Problem::P4];

    pub fn name(self) -> &'static str {
        match self {
            Problem::P1 => "P1",
            Problem::P2 => "P2",
            Problem::P3 => "P3",
            Problem::P4 => "P4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Problem::P1 => "Forrester",
            Problem::P2 => "Griewank",
            Problem::P3 => "Rosenbrock",
            Problem::P4 => "shifted-rotated Rastrigin",
        }
    }

    pub fn parse(s: &str) -> Result<Problem> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem `{s}`")))
    }

    pub fn supported_dims(self) -> &'static [usize] {
        match self {
            Problem::P1 => &[1],
            Problem::P2 => &[2],
            Problem::P3 | Problem::P4 => &[2, 5, 10],
        }
    }

    pub fn max_levels(self) -> usize {
        3
    }

    /// Physical bounds, identical along every axis.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Problem::P1 => (0.0, 1.0),
            Problem::P2 => (-6.0, 5.0),
            Problem::P3 => (-2.0, 2.0),
            Problem::P4 => (-0.1, 0.2),
        }
    }

    /// Known global optimum `(x̌, f(x̌))` in physical coordinates.
    pub fn optimum(self, dim: usize) -> (Vec<f64>, f64) {
        match self {
            Problem::P1 => (vec![0.7572], -6.0207),
            Problem::P2 => (vec![0.0; dim], 0.0),
            Problem::P3 => (vec![1.0; dim], 0.0),
            Problem::P4 => (vec![0.1; dim], 0.0),
        }
    }

    /// Table indices (1..=3) of the functions used by an `n_levels` stack.
    pub fn level_functions(n_levels: usize) -> Result<Vec<usize>> {
        match n_levels {
            1 => Ok(vec![1]),
            2 => Ok(vec![1, 3]),
            3 => Ok(vec![1, 2, 3]),
            n => invalid(format!("analytical problems support 1..=3 levels, got {n}")),
        }
    }
}

/// Noiseless `f_index` (1..=3) of a problem at a physical point.
///
/// `rotation` is only read by P4.
pub fn table_function(problem: Problem, index: usize, x: &[f64], rotation: &[Vec<f64>]) -> f64 {
    match problem {
        Problem::P1 => {
            let t = x[0];
            let f1 = (6.0 * t - 2.0).powi(2) * (12.0 * t - 4.0).sin();
            match index {
                1 => f1,
                2 => 0.75 * f1 + 5.0 * (t - 0.5) - 2.0,
                _ => 0.5 * f1 + 10.0 * (t - 0.5) - 5.0,
            }
        }
        Problem::P2 => {
            let sq: f64 = x.iter().map(|v| v * v).sum();
            let shift = if index == 3 { 1.0 } else { 0.0 };
            let prod: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| (v / ((j + 1) as f64 + shift).sqrt()).cos())
                .product();
            match index {
                1 => sq / 25.0 - prod + 1.0,
                2 => -prod + 1.0,
                _ => sq / 20.0 - prod - 1.0,
            }
        }
        Problem::P3 => {
            let rosen = |a: f64, b: f64| -> f64 {
                x.windows(2).map(|w| a * (w[1] - w[0] * w[0]).powi(2) + (b - w[0]).powi(2)).sum()
            };
            let lin: f64 = x.iter().map(|v| 0.5 * v).sum();
            match index {
                1 => rosen(100.0, 1.0),
                2 => rosen(50.0, -2.0) - lin,
                _ => {
                    let quarter: f64 = x.iter().map(|v| 0.25 * v).sum();
                    (rosen(100.0, 1.0) - 4.0 - lin) / (10.0 + quarter)
                }
            }
        }
        Problem::P4 => {
            let z = rotate_shifted(rotation, x, 0.1);
            let base: f64 = z.iter().map(|v| v * v + 1.0 - (10.0 * PI * v).cos()).sum();
            base + p4_resolution_error(&z, P4_PHI[index - 1])
        }
    }
}

/// `e_r(z, φ) = Σ_j a cos²(ω z_j + b + π)` with `Θ = 1 − 1e-4 φ`,
/// `a = Θ`, `ω = 10πΘ`, `b = 0.5πΘ`.
pub fn p4_resolution_error(z: &[f64], phi: f64) -> f64 {
    let theta = 1.0 - 0.0001 * phi;
    let (a, omega, b) = (theta, 10.0 * PI * theta, 0.5 * PI * theta);
    z.iter().map(|&zj| a * (omega * zj + b + PI).cos().powi(2)).sum()
}

fn rotate_shifted(rotation: &[Vec<f64>], x: &[f64], shift: f64) -> Vec<f64> {
    rotation
        .iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * (v - shift)).sum())
        .collect()
}

/// Composition of Givens rotations by `theta` in the planes (1,2), (2,3), …,
/// (D−1,D), the (1,2) rotation applied first. Identity for `D = 1`.
pub fn rotation_matrix(dim: usize, theta: f64) -> Vec<Vec<f64>> {
    let mut r: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let (s, c) = theta.sin_cos();
    for k in 0..dim.saturating_sub(1) {
        // R <- G_k R: only rows k and k+1 change.
        for col in 0..dim {
            let a = r[k][col];
            let b = r[k + 1][col];
            r[k][col] = c * a - s * b;
            r[k + 1][col] = s * a + c * b;
        }
    }
    r
}

/// Face-centered central composite design without factorial points: the
/// center followed by the two face centers of each axis.
pub fn initial_design(dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.5; dim]];
    for k in 0..dim {
        for v in [0.0, 1.0] {
            let mut p = vec![0.5; dim];
            p[k] = v;
            pts.push(p);
        }
    }
    pts
}

/// Synthetic cost ratios of the analytical campaigns.
pub fn default_costs(n_levels: usize) -> Result<Vec<f64>> {
    match n_levels {
        1 => Ok(vec![1.0]),
        2 => Ok(vec![1.0, 0.1]),
        3 => Ok(vec![1.0, 0.2, 0.1]),
        n => invalid(format!("no default costs for {n} levels; give them explicitly")),
    }
}

/// Range (max − min) of `f` over a dense deterministic sample of `[0,1]^dim`:
/// a 1001-point grid for `dim = 1`, 2^16 Hammersley points otherwise.
pub fn scan_range(dim: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let pts = if dim == 1 { full_factorial(1001, 1) } else { hammersley(1 << 16, dim) };
    let (lo, hi) = pts.iter().map(|p| f(p)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// Noise standard deviation as a fraction of R₁, for table functions 1..=3.
    pub fractions: [f64; 3],
    /// Absolute per-level standard deviations; overrides `fractions`.
    pub sigmas: Option<Vec<f64>>,
    /// Keep P4's highest fidelity noiseless.
    pub p4_noiseless_hf: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self { fractions: NOISE_FRACTIONS, sigmas: None, p4_noiseless_hf: false }
    }
}

impl NoiseSettings {
    pub fn noiseless() -> Self {
        Self { fractions: [0.0; 3], ..Self::default() }
    }
}

/// An analytical problem instantiated with a dimension, a number of levels and
/// a noise seed.
#[derive(Clone, Debug)]
pub struct FidelityStack {
    problem: Problem,
    dim: usize,
    functions: Vec<usize>,
    sigmas: Vec<f64>,
    seed: u64,
    r1_noise: f64,
    rotation: Vec<Vec<f64>>,
}

impl FidelityStack {
    pub fn new(problem: Problem, dim: usize, n_levels: usize, seed: u64, noise: &NoiseSettings) -> Result<Self> {
        if !problem.supported_dims().contains(&dim) {
            return invalid(format!(
                "{} supports D in {:?}, got {dim}",
                problem.name(),
                problem.supported_dims()
            ));
        }
        let functions = Problem::level_functions(n_levels)?;
        let rotation = rotation_matrix(dim, P4_THETA);
        let mut stack = FidelityStack { problem, dim, functions, sigmas: vec![0.0; n_levels], seed, r1_noise: 0.0, rotation };
        let raw = scan_range(dim, |u| stack.noiseless_normalized(1, u));
        stack.r1_noise = if problem == Problem::P3 { raw / P3_RANGE_REDUCTION } else { raw };
        stack.sigmas = match &noise.sigmas {
            Some(s) if s.len() != n_levels => {
                return invalid(format!("{} noise sigmas given for {n_levels} levels", s.len()));
            }
            Some(s) if s.iter().any(|v| !(*v >= 0.0)) => return invalid("noise sigmas must be >= 0"),
            Some(s) => s.clone(),
            None => stack.functions.iter().map(|&f| noise.fractions[f - 1] * stack.r1_noise).collect(),
        };
        if problem == Problem::P4 && noise.p4_noiseless_hf {
            stack.sigmas[0] = 0.0;
        }
        Ok(stack)
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn n_levels(&self) -> usize {
        self.functions.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Table function index (1..=3) behind each level.
    pub fn level_functions(&self) -> &[usize] {
        &self.functions
    }

    /// Range of the noiseless highest fidelity used to scale the noise (already
    /// reduced for P3).
    pub fn function_range_r1(&self) -> f64 {
        self.r1_noise
    }

    pub fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.problem.domain();
        // Points of the unit cube must not round past the domain bounds.
        u.iter()
            .map(|&v| {
                let x = lo + (hi - lo) * v;
                if (0.0..=1.0).contains(&v) {
                    x.clamp(lo, hi)
                } else {
                    x
                }
            })
            .collect()
    }

    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.problem.domain();
        x.iter().map(|v| (v - lo) / (hi - lo)).collect()
    }

    fn check_physical(&self, x: &[f64]) -> Result<()> {
        let (lo, hi) = self.problem.domain();
        if x.len() != self.dim {
            return invalid(format!("point has dimension {}, expected {}", x.len(), self.dim));
        }
        if x.iter().any(|v| !(lo..=hi).contains(v)) {
            return invalid(format!("{x:?} lies outside [{lo}, {hi}]^{}", self.dim));
        }
        Ok(())
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level < 1 || level > self.n_levels() {
            return invalid(format!("level {level} outside 1..={}", self.n_levels()));
        }
        Ok(())
    }

    fn noiseless_normalized(&self, level: usize, u: &[f64]) -> f64 {
        table_function(self.problem, self.functions[level - 1], &self.to_physical(u), &self.rotation)
    }

    /// Noiseless `f_l` at a physical point.
    pub fn noiseless(&self, level: usize, x: &[f64]) -> Result<f64> {
        self.check_level(level)?;
        self.check_physical(x)?;
        Ok(table_function(self.problem, self.functions[level - 1], x, &self.rotation))
    }

    /// Observation `s_l(x) = f_l(x) + η` at a physical point.
    pub fn evaluate(&self, level: usize, x: &[f64], eval_index: u64) -> Result<f64> {
        let f = self.noiseless(level, x)?;
        Ok(f + self.sigmas[level - 1] * self.standard_normal(level, eval_index))
    }

    /// Noiseless `f_1` at a physical point.
    pub fn true_high_fidelity(&self, x: &[f64]) -> Result<f64> {
        self.noiseless(1, x)
    }

    fn standard_normal(&self, level: usize, eval_index: u64) -> f64 {
        let key = splitmix(splitmix(splitmix(self.seed) ^ level as u64) ^ eval_index);
        StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(key))
    }

    /// Reference optimum for the error metrics: `x̌` normalized, `f(x̌)`, and
    /// the range of noiseless `f_1` over the initial design.
    pub fn reference_optimum(&self) -> ReferenceOptimum {
        let (x, f) = self.problem.optimum(self.dim);
        let vals: Vec<f64> = initial_design(self.dim).iter().map(|u| self.noiseless_normalized(1, u)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ReferenceOptimum { x_check: self.to_normalized(&x), f_check: f, r1_metric: hi - lo }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Objective for FidelityStack {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_levels(&self) -> usize {
        self.functions.len()
    }

    fn evaluate(&self, level: usize, x: &[f64], eval_index: u64) -> Result<f64> {
        FidelityStack::evaluate(self, level, &self.to_physical(x), eval_index)
    }
}

impl Truth for FidelityStack {
    fn truth(&self, x: &[f64]) -> Result<f64> {
        self.true_high_fidelity(&self.to_physical(x))
    }
}
