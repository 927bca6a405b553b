//! Penalized lower-confidence-bound active learning over a fidelity hierarchy.
//!
//! Each iteration minimizes
//!
//! ```text
//! ψ(x) = w_f f̂(x) − w_U U_f̂(x) + P(x),   P = (d₀ − d) / (ε d₀) for d < d₀
//! ```
//!
//! picks the level maximizing `U_l(x*) / β_l`, evaluates `x*` there and at
//! every cheaper level, and refits. The loop runs while the spent cost is
//! below the budget, so the last addition may overshoot it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::multifidelity::{add_observation, fit_hierarchy, BudgetLedger, FidelityLevels, MfSurrogate};
use crate::objective::Objective;
use crate::pso::{minimize, PsoConfig};
use crate::srbf::{SrbfConfig, TrainingSet};

/// Relative slack below `d0` before a proposal counts as stagnant. The
/// acquisition minimizer routinely settles on the rim of a penalty ball,
/// a hair inside `d0`.
pub const STAGNATION_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Minimum acceptable distance to existing samples (normalized units).
    pub d0: f64,
    /// Penalty coefficient `ε`.
    pub eps_pen: f64,
    /// Weights `(w_f, w_U)` of the mean and the uncertainty.
    pub lcb_weights: (f64, f64),
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { d0: 5e-3, eps_pen: 0.1, lcb_weights: (1.0, 1.0) }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0) || !(self.eps_pen > 0.0) {
            return invalid("d0 and eps_pen must be positive");
        }
        if !(self.lcb_weights.0 >= 0.0 && self.lcb_weights.1 >= 0.0) {
            return invalid("LCB weights must be non-negative");
        }
        Ok(())
    }
}

/// How the reported optimum is obtained once the loop ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalOptimum {
    /// PSO on the multi-fidelity mean alone.
    #[default]
    MeanPso,
    /// The last acquisition minimizer.
    LastAcquisition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub srbf: SrbfConfig,
    pub acquisition: AcquisitionConfig,
    /// Swarm used to minimize the acquisition.
    pub pso: PsoConfig,
    /// Swarm used for the final surrogate minimization.
    pub final_pso: PsoConfig,
    /// Consecutive proposals within `d0` of a same-level sample before giving up;
    /// 0 disables the rule.
    pub stagnation_patience: usize,
    pub final_optimum: FinalOptimum,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            srbf: SrbfConfig::default(),
            acquisition: AcquisitionConfig::default(),
            pso: PsoConfig::default(),
            final_pso: PsoConfig::default(),
            stagnation_patience: 5,
            final_optimum: FinalOptimum::MeanPso,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.srbf.validate()?;
        self.acquisition.validate()?;
        self.pso.validate(dim)?;
        self.final_pso.validate(dim)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    Budget,
    Stagnation,
    EvaluationFailure,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Budget => "budget",
            TerminationReason::Stagnation => "stagnation",
            TerminationReason::EvaluationFailure => "evaluation-failure",
        }
    }
}

/// One addition to the training sets. Initial-design rows carry iteration 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub level: usize,
    /// Observed value per level; `None` above `level`.
    pub observed: Vec<Option<f64>>,
    pub cc_after: f64,
    /// `K*` per surrogate after the refit (empty on all but the last seed row).
    pub kstars: Vec<usize>,
    /// Acquisition value at `x` (absent for seed rows).
    pub acquisition: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub seed_rows: Vec<IterationRecord>,
    pub iterations: Vec<IterationRecord>,
    pub final_x_star: Vec<f64>,
    pub final_surrogate_min: f64,
    pub termination_reason: TerminationReason,
    pub failure: Option<String>,
    pub final_cc: f64,
    /// `J_l` per level.
    pub counts: Vec<usize>,
    pub model: MfSurrogate,
}

impl CampaignRecord {
    /// Seed rows followed by the adaptive iterations.
    pub fn history(&self) -> impl Iterator<Item = &IterationRecord> {
        self.seed_rows.iter().chain(&self.iterations)
    }
}

/// Distance penalty: `(d₀ − d)/(ε d₀)` when the nearest sample is closer than `d₀`.
pub fn penalty(x: &[f64], all_points: &[Vec<f64>], config: &AcquisitionConfig) -> f64 {
    let d = nearest_distance(x, all_points);
    penalty_at_distance(d, config)
}

pub fn penalty_at_distance(d: f64, config: &AcquisitionConfig) -> f64 {
    if d < config.d0 {
        (config.d0 - d) / config.d0 / config.eps_pen
    } else {
        0.0
    }
}

fn nearest_distance(x: &[f64], points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// `ψ = w_f·mean − w_U·U + P` from an already computed prediction.
pub fn lcb(mean: f64, uncertainty: f64, penalty: f64, config: &AcquisitionConfig) -> f64 {
    config.lcb_weights.0 * mean - config.lcb_weights.1 * uncertainty + penalty
}

pub fn acquisition(model: &MfSurrogate, x: &[f64], all_points: &[Vec<f64>], config: &AcquisitionConfig) -> f64 {
    let p = model.predict_mf(x);
    lcb(p.mean, p.uncertainty, penalty(x, all_points, config), config)
}

/// Minimizes `psi` over the unit cube; returns the minimizer and its value.
pub fn propose_with(psi: impl Fn(&[f64]) -> f64, dim: usize, pso: &PsoConfig) -> Result<(Vec<f64>, f64)> {
    let r = minimize(psi, dim, pso)?;
    Ok((r.x, r.value))
}

pub fn propose_point(model: &MfSurrogate, config: &AcquisitionConfig, pso: &PsoConfig) -> Result<(Vec<f64>, f64)> {
    let points = model.all_points();
    propose_with(|x| acquisition(model, x, points, config), model.dim(), pso)
}

/// Index (1-based) of the largest `U_l/β_l`; ties go to the cheaper level.
pub fn select_fidelity_from(uncertainties: &[f64], betas: &[f64]) -> usize {
    let mut best = 0;
    let mut best_phi = f64::NEG_INFINITY;
    for (l, (u, b)) in uncertainties.iter().zip(betas).enumerate() {
        let phi = u / b;
        if phi >= best_phi {
            best = l;
            best_phi = phi;
        }
    }
    best + 1
}

pub fn select_fidelity(model: &MfSurrogate, x_star: &[f64], levels: &FidelityLevels) -> usize {
    let u: Vec<f64> = model.component_predictions(x_star).iter().map(|p| p.uncertainty).collect();
    select_fidelity_from(&u, levels.betas())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(TerminationReason),
}

pub fn should_stop(ledger: &BudgetLedger, stagnation: usize, patience: usize, failed: bool) -> StopDecision {
    if failed {
        StopDecision::Stop(TerminationReason::EvaluationFailure)
    } else if ledger.exhausted() {
        StopDecision::Stop(TerminationReason::Budget)
    } else if patience > 0 && stagnation >= patience {
        StopDecision::Stop(TerminationReason::Stagnation)
    } else {
        StopDecision::Continue
    }
}

/// Evaluates the initial design at every level and fits the first hierarchy.
fn seed(
    objective: &dyn Objective,
    design: &[Vec<f64>],
    levels: &FidelityLevels,
    budget: f64,
    config: &CampaignConfig,
) -> Result<(MfSurrogate, BudgetLedger, Vec<IterationRecord>)> {
    let n = levels.n_levels();
    let dim = objective.dim();
    let tol = config.srbf.duplicate_tol;
    let mut training = vec![TrainingSet::new(dim); n];
    let mut ledger = BudgetLedger::new(levels, budget);
    let mut rows = Vec::with_capacity(design.len());
    for x in design {
        let mut observed = Vec::with_capacity(n);
        for (l, set) in training.iter_mut().enumerate() {
            let v = objective.evaluate(l + 1, x, set.len() as u64)?;
            if !v.is_finite() {
                return Err(Error::Evaluation { level: l + 1, message: format!("non-finite value {v}") });
            }
            set.push(x.clone(), v, tol)?;
            observed.push(Some(v));
        }
        ledger.record_addition(1);
        rows.push(IterationRecord {
            iteration: 0,
            x: x.clone(),
            level: 1,
            observed,
            cc_after: ledger.cc(),
            kstars: Vec::new(),
            acquisition: None,
        });
    }
    let model = fit_hierarchy(training, levels.clone(), None, &config.srbf)?;
    if let Some(last) = rows.last_mut() {
        last.kstars = model.kstars().to_vec();
    }
    Ok((model, ledger, rows))
}

/// Runs a budgeted campaign. `observer` sees every row as soon as it exists.
pub fn run_campaign(
    objective: &dyn Objective,
    initial_design: &[Vec<f64>],
    levels: &FidelityLevels,
    budget: f64,
    config: &CampaignConfig,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<CampaignRecord> {
    let dim = objective.dim();
    let n = levels.n_levels();
    if objective.n_levels() < n {
        return invalid(format!("objective has {} levels, {n} requested", objective.n_levels()));
    }
    config.validate(dim)?;
    if initial_design.is_empty() || initial_design.iter().any(|x| x.len() != dim) {
        return invalid("initial design must be non-empty and match the dimension");
    }
    let seed_cost = initial_design.len() as f64 * levels.addition_cost(1);
    if budget < seed_cost {
        return invalid(format!("budget {budget} is below the initial design cost {seed_cost}"));
    }

    let (mut model, mut ledger, seed_rows) = seed(objective, initial_design, levels, budget, config)?;
    seed_rows.iter().for_each(|r| observer(r));

    let tol = config.srbf.duplicate_tol;
    let mut iterations = Vec::new();
    let mut stagnation = 0;
    let mut failure = None;
    let mut last_proposal = None;
    let reason = loop {
        if let StopDecision::Stop(r) =
            should_stop(&ledger, stagnation, config.stagnation_patience, failure.is_some())
        {
            break r;
        }
        let (x, psi) = propose_point(&model, &config.acquisition, &config.pso)?;
        let l_star = select_fidelity(&model, &x, levels);
        last_proposal = Some(x.clone());

        let near = model.training()[l_star - 1].nearest_distance(&x).unwrap_or(f64::INFINITY);
        if model.training()[l_star - 1].contains(&x, tol) {
            stagnation += 1;
            log::debug!("proposal {x:?} duplicates a level-{l_star} sample; skipped");
            continue;
        }
        if near < config.acquisition.d0 * (1.0 - STAGNATION_SLACK) {
            stagnation += 1;
        } else {
            stagnation = 0;
        }

        match add_observation(&model, &ledger, &x, l_star, objective, &config.srbf) {
            Ok(add) => {
                model = add.model;
                ledger = add.ledger;
                let row = IterationRecord {
                    iteration: iterations.len() + 1,
                    x,
                    level: l_star,
                    observed: add.observed,
                    cc_after: ledger.cc(),
                    kstars: model.kstars().to_vec(),
                    acquisition: Some(psi),
                };
                observer(&row);
                iterations.push(row);
            }
            Err(e @ Error::Evaluation { .. }) => {
                log::warn!("evaluation failed: {e}");
                failure = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
    };

    let (final_x_star, final_surrogate_min) = match (config.final_optimum, last_proposal) {
        (FinalOptimum::LastAcquisition, Some(x)) => {
            let v = model.predict_mf_mean(&x);
            (x, v)
        }
        _ => {
            let r = minimize(|x| model.predict_mf_mean(x), dim, &config.final_pso)?;
            (r.x, r.value)
        }
    };

    Ok(CampaignRecord {
        seed_rows,
        iterations,
        final_x_star,
        final_surrogate_min,
        termination_reason: reason,
        failure,
        final_cc: ledger.cc(),
        counts: ledger.counts().to_vec(),
        model,
    })
}
