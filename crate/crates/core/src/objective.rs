use crate::error::Result;

/// An `N`-level noisy objective evaluated in the normalized design space.
///
/// Level 1 is the highest fidelity, level `N` the cheapest. `eval_index`
/// identifies the evaluation within its level so stochastic evaluators can be
/// made reproducible.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn n_levels(&self) -> usize;

    fn evaluate(&self, level: usize, x: &[f64], eval_index: u64) -> Result<f64>;
}

/// Noiseless (or freshly evaluated) highest-fidelity response used by metrics.
pub trait Truth {
    fn truth(&self, x: &[f64]) -> Result<f64>;
}
