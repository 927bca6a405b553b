//! Deterministic synchronous particle swarm optimization.
//!
//! Particles start on a Hammersley set with zero velocity and follow the
//! constriction-factor update without random multipliers:
//!
//! ```text
//! v ← χ [v + c₁ (p − x) + c₂ (g − x)]
//! x ← x + v
//! ```
//!
//! A component leaving the box is clamped to the bound and its velocity
//! zeroed.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::hammersley;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    #[default]
    HammersleyGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    /// Swarm size; `None` means `4·D`.
    pub n_particles: Option<usize>,
    pub n_iterations: usize,
    pub chi: f64,
    pub c_cognitive: f64,
    pub c_social: f64,
    pub init_scheme: InitScheme,
    /// Stop once every particle sits within this distance (max-norm) of the
    /// global best with velocities below it.
    pub stall_tol: f64,
    /// Box bounds; unit hypercube when absent.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: None,
            n_iterations: 200,
            chi: 0.721,
            c_cognitive: 1.655,
            c_social: 1.655,
            init_scheme: InitScheme::HammersleyGrid,
            stall_tol: 1e-12,
            lower: None,
            upper: None,
        }
    }
}

impl PsoConfig {
    pub fn particles(&self, dim: usize) -> usize {
        self.n_particles.unwrap_or(4 * dim)
    }

    fn bounds(&self, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let lo = self.lower.clone().unwrap_or_else(|| vec![0.0; dim]);
        let hi = self.upper.clone().unwrap_or_else(|| vec![1.0; dim]);
        if lo.len() != dim || hi.len() != dim || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return invalid("PSO bounds must match the dimension with lower <= upper");
        }
        Ok((lo, hi))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return invalid("PSO needs D >= 1");
        }
        if self.particles(dim) < 2 {
            return invalid("PSO needs at least 2 particles");
        }
        if self.n_iterations == 0 {
            return invalid("PSO needs at least one iteration");
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return invalid(format!("constriction factor must lie in (0,1), got {}", self.chi));
        }
        if !(self.c_cognitive > 0.0 && self.c_social > 0.0) {
            return invalid("PSO coefficients must be positive");
        }
        self.bounds(dim).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

/// Initial positions (Hammersley set mapped to the box) and zero velocities.
pub fn init_swarm(config: &PsoConfig, dim: usize) -> Result<Swarm> {
    config.validate(dim)?;
    let (lo, hi) = config.bounds(dim)?;
    let n = config.particles(dim);
    let positions = hammersley(n, dim)
        .into_iter()
        .map(|u| u.iter().enumerate().map(|(k, v)| lo[k] + (hi[k] - lo[k]) * v).collect())
        .collect();
    Ok(Swarm { positions, velocities: vec![vec![0.0; dim]; n] })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsoResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Evaluations that returned a non-finite value (treated as +∞).
    pub non_finite: usize,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Minimizes `objective` over the configured box.
pub fn minimize(objective: impl Fn(&[f64]) -> f64, dim: usize, config: &PsoConfig) -> Result<PsoResult> {
    let Swarm { mut positions, mut velocities } = init_swarm(config, dim)?;
    let (lo, hi) = config.bounds(dim)?;
    let n = positions.len();
    let mut best_x = positions.clone();
    let mut best_f = vec![f64::INFINITY; n];
    let mut g = 0usize;
    let mut evaluations = 0;
    let mut non_finite = 0;
    let mut history = Vec::with_capacity(config.n_iterations);
    let mut values = vec![0.0; n];

    for iter in 0..config.n_iterations {
        // Synchronous: evaluate the whole swarm before any update.
        for (v, x) in values.iter_mut().zip(&positions) {
            let f = objective(x);
            evaluations += 1;
            *v = if f.is_finite() {
                f
            } else {
                non_finite += 1;
                f64::INFINITY
            };
        }
        for i in 0..n {
            if values[i] < best_f[i] {
                best_f[i] = values[i];
                best_x[i].clone_from(&positions[i]);
            }
        }
        for i in 0..n {
            if best_f[i] < best_f[g] {
                g = i;
            }
        }
        history.push(best_f[g]);
        if iter + 1 == config.n_iterations {
            break;
        }
        let gx = best_x[g].clone();
        let mut spread: f64 = 0.0;
        for i in 0..n {
            for k in 0..dim {
                let x = positions[i][k];
                let mut v = config.chi
                    * (velocities[i][k] + config.c_cognitive * (best_x[i][k] - x) + config.c_social * (gx[k] - x));
                let mut nx = x + v;
                if nx < lo[k] {
                    nx = lo[k];
                    v = 0.0;
                } else if nx > hi[k] {
                    nx = hi[k];
                    v = 0.0;
                }
                positions[i][k] = nx;
                velocities[i][k] = v;
                spread = spread.max(v.abs()).max((nx - gx[k]).abs());
            }
        }
        if spread < config.stall_tol {
            break;
        }
    }
    if non_finite == evaluations {
        return Err(Error::Optimizer("every objective evaluation was non-finite".into()));
    }
    if non_finite > 0 {
        log::debug!("PSO: {non_finite}/{evaluations} non-finite evaluations");
    }
    Ok(PsoResult { x: best_x[g].clone(), value: best_f[g], evaluations, non_finite, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::sync::Mutex;

    #[test]
    fn init_is_deterministic_and_in_box() {
        let c = PsoConfig { n_particles: Some(2), ..PsoConfig::default() };
        let s = init_swarm(&c, 1).unwrap();
        assert_eq!(s.positions, vec![vec![0.25], vec![0.75]]);
        assert_eq!(s.velocities, vec![vec![0.0], vec![0.0]]);
        let c3 = PsoConfig::default();
        let a = init_swarm(&c3, 3).unwrap();
        assert_eq!(a, init_swarm(&c3, 3).unwrap());
        assert_eq!(a.positions.len(), 12);
        assert!(a.positions.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sphere() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
        let r = minimize(f, 2, &PsoConfig::default()).unwrap();
        let err = ((r.x[0] - 0.3).powi(2) + (r.x[1] - 0.3).powi(2)).sqrt();
        assert!(err <= 1e-3, "{:?}", r.x);
    }

    #[test]
    fn constant_objective() {
        let r = minimize(|_| 7.5, 3, &PsoConfig::default()).unwrap();
        assert_eq!(r.value, 7.5);
    }

    fn bimodal(x: f64) -> f64 {
        -(-((x - 0.2) / 0.08).powi(2)).exp() - 1.5 * (-((x - 0.7) / 0.08).powi(2)).exp()
    }

    #[test]
    fn bimodal_deeper_basin() {
        // Oracle: dense grid scan.
        let grid_best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .min_by(|a, b| bimodal(*a).total_cmp(&bimodal(*b)))
            .unwrap();
        let r = minimize(|x| bimodal(x[0]), 1, &PsoConfig::default()).unwrap();
        assert!((r.x[0] - grid_best).abs() < 0.05, "{} vs {}", r.x[0], grid_best);
        assert!(r.value <= bimodal(grid_best) + 1e-6);
    }

    #[test]
    fn bit_identical_reruns() {
        let f = |x: &[f64]| (5.0 * x[0]).sin() * (3.0 * x[1]).cos() + x[2];
        let a = minimize(f, 3, &PsoConfig::default()).unwrap();
        let b = minimize(f, 3, &PsoConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_evaluation_in_box_and_history_monotone() {
        let seen = Mutex::new(Vec::new());
        let f = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            (x[0] - 1.3).powi(2) + (x[1] + 0.2).powi(2)
        };
        let r = minimize(f, 2, &PsoConfig::default()).unwrap();
        assert!(seen.lock().unwrap().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.x, vec![1.0, 0.0]);
    }

    #[test]
    fn non_finite_handling() {
        let calls = RefCell::new(0usize);
        let f = |x: &[f64]| {
            *calls.borrow_mut() += 1;
            if x[0] < 0.5 { f64::NAN } else { x[0] }
        };
        let r = minimize(f, 1, &PsoConfig::default()).unwrap();
        assert!(r.non_finite > 0);
        assert!(r.value.is_finite());
        assert!(matches!(minimize(|_| f64::NAN, 1, &PsoConfig::default()), Err(Error::Optimizer(_))));
    }

    #[test]
    fn invalid_configs() {
        assert!(PsoConfig { chi: 1.2, ..PsoConfig::default() }.validate(2).is_err());
        assert!(PsoConfig { n_particles: Some(1), ..PsoConfig::default() }.validate(2).is_err());
        assert!(PsoConfig { c_social: 0.0, ..PsoConfig::default() }.validate(2).is_err());
    }
}
