//! Hierarchical multi-fidelity surrogate.
//!
//! With `N` levels (1 = highest fidelity) the prediction is
//!
//! ```text
//! f̂(x) = f̃_N(x) + Σ_{l=1}^{N−1} ε̃_l(x)
//! ```
//!
//! where `f̃_N` is fitted to the lowest-fidelity data and each `ε̃_l` to the
//! inter-level errors `s_l(x_j) − f̂_{l+1}(x_j)` at the points of level `l`.
//! Fitting therefore runs bottom-up. Component uncertainties are combined by
//! root-sum-square.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::Objective;
use crate::srbf::{fit_auto, Prediction, RbfEnsemble, SrbfConfig, TrainingSet};

/// Cost ratios `β_l = c_l / c_1` of the fidelity levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityLevels {
    beta: Vec<f64>,
}

impl FidelityLevels {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return invalid("at least one fidelity level is required");
        }
        if beta[0] != 1.0 {
            return invalid(format!("the highest fidelity must have β = 1, got {}", beta[0]));
        }
        if beta.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return invalid(format!("cost ratios must lie in (0, 1], got {beta:?}"));
        }
        if beta.windows(2).any(|w| w[1] > w[0]) {
            log::warn!("cost ratios {beta:?} increase towards lower fidelity");
        }
        Ok(Self { beta })
    }

    /// Levels from absolute per-evaluation costs `c_l`.
    pub fn from_costs(costs: &[f64]) -> Result<Self> {
        match costs.first() {
            Some(&c1) if c1 > 0.0 => Self::new(costs.iter().map(|c| c / c1).collect()),
            _ => invalid("the highest-fidelity cost must be positive"),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.beta.len()
    }

    /// `β_l` for 1-based `level`.
    pub fn beta(&self, level: usize) -> f64 {
        self.beta[level - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    /// Cost of one addition at `level`: `Σ_{i ≥ level} β_i`.
    pub fn addition_cost(&self, level: usize) -> f64 {
        self.beta[level - 1..].iter().sum()
    }
}

/// Running computational cost `CC = Σ β_l J_l`, in units of one
/// highest-fidelity evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    beta: Vec<f64>,
    counts: Vec<usize>,
    cc: f64,
    // Neumaier compensation term of the running sum.
    carry: f64,
    budget: f64,
}

impl BudgetLedger {
    pub fn new(levels: &FidelityLevels, budget: f64) -> Self {
        Self { beta: levels.betas().to_vec(), counts: vec![0; levels.n_levels()], cc: 0.0, carry: 0.0, budget }
    }

    /// One evaluation at `level`.
    pub fn record_evaluation(&mut self, level: usize) {
        self.counts[level - 1] += 1;
        let x = self.beta[level - 1];
        let t = self.cc + x;
        self.carry += if self.cc.abs() >= x.abs() { (self.cc - t) + x } else { (x - t) + self.cc };
        self.cc = t;
    }

    /// A new point at `l_star`, evaluated at `l_star` and every cheaper level.
    pub fn record_addition(&mut self, l_star: usize) {
        for l in l_star..=self.beta.len() {
            self.record_evaluation(l);
        }
    }

    pub fn cc(&self) -> f64 {
        self.cc + self.carry
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn exhausted(&self) -> bool {
        self.cc() >= self.budget
    }
}

/// `Σ β_l J_l` recomputed from the counters.
pub fn computational_cost(ledger: &BudgetLedger) -> f64 {
    ledger.beta.iter().zip(&ledger.counts).map(|(b, &j)| b * j as f64).sum()
}

/// Fitted multi-fidelity surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfSurrogate {
    levels: FidelityLevels,
    training: Vec<TrainingSet>,
    lowest: RbfEnsemble,
    /// `errors[l-1]` models `ε_l`.
    errors: Vec<RbfEnsemble>,
    /// `K*` of the surrogate owned by each level (`N` is the lowest model).
    kstars: Vec<usize>,
    /// Levels whose `K*` came from the small-sample bootstrap rule.
    degenerate: Vec<bool>,
}

impl MfSurrogate {
    pub fn levels(&self) -> &FidelityLevels {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.n_levels()
    }

    pub fn dim(&self) -> usize {
        self.lowest.dim()
    }

    pub fn training(&self) -> &[TrainingSet] {
        &self.training
    }

    pub fn lowest_model(&self) -> &RbfEnsemble {
        &self.lowest
    }

    pub fn error_models(&self) -> &[RbfEnsemble] {
        &self.errors
    }

    pub fn kstars(&self) -> &[usize] {
        &self.kstars
    }

    pub fn degenerate_levels(&self) -> &[bool] {
        &self.degenerate
    }

    /// Surrogate owned by `level`: `ε̃_level` for `level < N`, `f̃_N` otherwise.
    pub fn component(&self, level: usize) -> &RbfEnsemble {
        if level == self.n_levels() {
            &self.lowest
        } else {
            &self.errors[level - 1]
        }
    }

    /// Predictions of every component, indexed like [`Self::component`].
    pub fn component_predictions(&self, x: &[f64]) -> Vec<Prediction> {
        (1..=self.n_levels()).map(|l| self.component(l).predict(x)).collect()
    }

    /// Partial surrogate `f̂_l = f̃_N + Σ_{i=l}^{N−1} ε̃_i`.
    pub fn predict_level(&self, level: usize, x: &[f64]) -> Result<Prediction> {
        let n = self.n_levels();
        if level < 1 || level > n {
            return invalid(format!("level {level} outside 1..={n}"));
        }
        Ok(combine((level..=n).map(|l| self.component(l).predict(x))))
    }

    /// Full multi-fidelity prediction.
    pub fn predict_mf(&self, x: &[f64]) -> Prediction {
        combine((1..=self.n_levels()).map(|l| self.component(l).predict(x)))
    }

    /// Mean of the full prediction only.
    pub fn predict_mf_mean(&self, x: &[f64]) -> f64 {
        (1..=self.n_levels()).map(|l| self.component(l).predict_mean(x)).sum()
    }

    /// Distinct training locations over all levels (the lowest level holds
    /// them all when nesting holds).
    pub fn all_points(&self) -> &[Vec<f64>] {
        self.training[self.n_levels() - 1].points()
    }
}

/// Sums means and root-sum-squares uncertainties.
pub fn combine(parts: impl IntoIterator<Item = Prediction>) -> Prediction {
    let (mean, var) = parts
        .into_iter()
        .fold((0.0, 0.0), |(m, v), p| (m + p.mean, v + p.uncertainty * p.uncertainty));
    Prediction { mean, uncertainty: var.sqrt() }
}

/// Checks that every point of level `l` also appears at level `l+1`.
pub fn check_nesting(training: &[TrainingSet], tol: f64) -> Result<()> {
    for l in 0..training.len().saturating_sub(1) {
        if let Some(p) = training[l].points().iter().find(|p| !training[l + 1].contains(p, tol)) {
            return Err(Error::InvalidState(format!(
                "nesting violated: {p:?} is at level {} but not at level {}",
                l + 1,
                l + 2
            )));
        }
    }
    Ok(())
}

/// Bottom-up fitter exposing the intermediate inter-level error sets.
pub struct HierarchyBuilder<'a> {
    training: &'a [TrainingSet],
    config: &'a SrbfConfig,
    // Index l-1 holds the component of level l once fitted.
    components: Vec<Option<RbfEnsemble>>,
    kstars: Vec<usize>,
    degenerate: Vec<bool>,
}

impl<'a> HierarchyBuilder<'a> {
    pub fn new(training: &'a [TrainingSet], config: &'a SrbfConfig) -> Result<Self> {
        let n = training.len();
        if n == 0 {
            return invalid("no training sets");
        }
        if training.iter().any(|t| t.is_empty()) {
            return invalid("every fidelity level needs at least one sample");
        }
        Ok(Self { training, config, components: vec![None; n], kstars: vec![0; n], degenerate: vec![false; n] })
    }

    fn n(&self) -> usize {
        self.training.len()
    }

    /// Lowest level not fitted yet, or 0 when the hierarchy is complete.
    pub fn next_level(&self) -> usize {
        (1..=self.n()).rev().find(|&l| self.components[l - 1].is_none()).unwrap_or(0)
    }

    /// Mean of `f̂_level`; needs levels `level..=N` fitted.
    fn partial_mean(&self, level: usize, x: &[f64]) -> f64 {
        (level..=self.n()).map(|l| self.components[l - 1].as_ref().expect("fitted").predict_mean(x)).sum()
    }

    /// Inter-level error set `{(x_j, s_l(x_j) − f̂_{l+1}(x_j))}` of level `l < N`.
    pub fn inter_level_errors(&self, level: usize) -> Result<TrainingSet> {
        let n = self.n();
        if level < 1 || level >= n {
            return invalid(format!("inter-level errors exist for levels 1..{n}, got {level}"));
        }
        if self.next_level() != level {
            return Err(Error::InvalidState(format!(
                "inter-level errors of level {level} requested while level {} is next to fit",
                self.next_level()
            )));
        }
        let t = &self.training[level - 1];
        let values = t.points().iter().zip(t.values()).map(|(p, s)| s - self.partial_mean(level + 1, p)).collect();
        TrainingSet::from_samples(t.points().to_vec(), values, self.config.duplicate_tol)
    }

    /// Fits the next component (lowest model first, then `ε̃_{N−1}` … `ε̃_1`).
    pub fn fit_next(&mut self, prev_kstar: Option<usize>) -> Result<usize> {
        let level = self.next_level();
        if level == 0 {
            return Err(Error::InvalidState("hierarchy already complete".into()));
        }
        let data = if level == self.n() { self.training[level - 1].clone() } else { self.inter_level_errors(level)? };
        let (model, sel) = fit_auto(&data, prev_kstar, self.config)?;
        if sel.degenerate {
            log::debug!("level {level}: {} samples, bootstrap K* = {}", data.len(), sel.kstar);
        }
        self.kstars[level - 1] = sel.kstar;
        self.degenerate[level - 1] = sel.degenerate;
        self.components[level - 1] = Some(model);
        Ok(level)
    }

    pub fn finish(self, levels: FidelityLevels) -> Result<MfSurrogate> {
        if self.next_level() != 0 {
            return Err(Error::InvalidState("hierarchy not fully fitted".into()));
        }
        let mut comps: Vec<RbfEnsemble> = self.components.into_iter().map(|c| c.expect("fitted")).collect();
        let lowest = comps.pop().expect("at least one level");
        Ok(MfSurrogate {
            levels,
            training: self.training.to_vec(),
            lowest,
            errors: comps,
            kstars: self.kstars,
            degenerate: self.degenerate,
        })
    }
}

/// Fits the whole hierarchy bottom-up. `prev_kstars` (one per level)
/// constrains each surrogate's center search around its previous value.
pub fn fit_hierarchy(
    training: Vec<TrainingSet>,
    levels: FidelityLevels,
    prev_kstars: Option<&[usize]>,
    config: &SrbfConfig,
) -> Result<MfSurrogate> {
    let n = levels.n_levels();
    if training.len() != n {
        return invalid(format!("{} training sets for {n} levels", training.len()));
    }
    if training[n - 1].len() < 3 {
        return invalid(format!("the lowest level needs at least 3 samples, has {}", training[n - 1].len()));
    }
    if let Some(p) = prev_kstars {
        if p.len() != n {
            return invalid("one previous K* per level expected");
        }
    }
    check_nesting(&training, config.duplicate_tol)?;
    let mut builder = HierarchyBuilder::new(&training, config)?;
    while builder.next_level() != 0 {
        let l = builder.next_level();
        builder.fit_next(prev_kstars.map(|p| p[l - 1]))?;
    }
    builder.finish(levels)
}

/// State after a successful [`add_observation`].
#[derive(Clone, Debug)]
pub struct Addition {
    pub model: MfSurrogate,
    pub ledger: BudgetLedger,
    /// Observed value per level (`None` for levels above `l_star`).
    pub observed: Vec<Option<f64>>,
}

/// Evaluates `x` at `l_star` and every cheaper level, appends the samples and
/// refits. Levels already holding `x` (by nesting, a tail `m..=N`) are not
/// evaluated again. Nothing is modified when any evaluation fails.
pub fn add_observation(
    model: &MfSurrogate,
    ledger: &BudgetLedger,
    x: &[f64],
    l_star: usize,
    objective: &dyn Objective,
    config: &SrbfConfig,
) -> Result<Addition> {
    let n = model.n_levels();
    if l_star < 1 || l_star > n {
        return invalid(format!("level {l_star} outside 1..={n}"));
    }
    let tol = config.duplicate_tol;
    if model.training[l_star - 1].contains(x, tol) {
        return invalid(format!("{x:?} duplicates a training point of level {l_star}"));
    }
    let stop = (l_star..=n).find(|&l| model.training[l - 1].contains(x, tol)).unwrap_or(n + 1);
    let mut observed = vec![None; n];
    for l in l_star..stop {
        let idx = model.training[l - 1].len() as u64;
        let v = objective.evaluate(l, x, idx).map_err(|e| match e {
            Error::Evaluation { .. } => e,
            other => Error::Evaluation { level: l, message: other.to_string() },
        })?;
        if !v.is_finite() {
            return Err(Error::Evaluation { level: l, message: format!("non-finite value {v}") });
        }
        observed[l - 1] = Some(v);
    }
    let mut training = model.training.clone();
    let mut ledger = ledger.clone();
    for l in l_star..stop {
        training[l - 1].push(x.to_vec(), observed[l - 1].expect("evaluated"), tol)?;
        ledger.record_evaluation(l);
    }
    let model = fit_hierarchy(training, model.levels.clone(), Some(&model.kstars), config)?;
    Ok(Addition { model, ledger, observed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[f64], f: impl Fn(f64) -> f64) -> TrainingSet {
        TrainingSet::from_samples(xs.iter().map(|&x| vec![x]).collect(), xs.iter().map(|&x| f(x)).collect(), 1e-12)
            .unwrap()
    }

    #[test]
    fn levels_validation() {
        assert!(FidelityLevels::new(vec![1.0, 0.2, 0.1]).is_ok());
        assert!(FidelityLevels::new(vec![0.5]).is_err());
        assert!(FidelityLevels::new(vec![1.0, 0.0]).is_err());
        assert!(FidelityLevels::new(vec![1.0, 1.5]).is_err());
        // Increasing but valid ratios only warn.
        assert!(FidelityLevels::new(vec![1.0, 0.1, 0.2]).is_ok());
    }

    #[test]
    fn cost_ratios_are_scale_free() {
        let a = FidelityLevels::from_costs(&[10.0, 2.0, 1.0]).unwrap();
        let b = FidelityLevels::from_costs(&[1000.0, 200.0, 100.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.betas(), &[1.0, 0.2, 0.1]);
    }

    #[test]
    fn rss_combination() {
        let p = |u| Prediction { mean: 0.0, uncertainty: u };
        assert_eq!(combine([p(3.0), p(4.0)]).uncertainty, 5.0);
        assert_eq!(combine([p(0.0), p(0.0)]).uncertainty, 0.0);
        assert!((combine([p(1.0), p(1.0), p(1.0)]).uncertainty - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn ledger_arithmetic() {
        let levels = FidelityLevels::new(vec![1.0, 0.2, 0.1]).unwrap();
        let mut l = BudgetLedger::new(&levels, 45.0);
        l.record_addition(3);
        assert!((l.cc() - 0.1).abs() < 1e-15);
        let before = l.cc();
        l.record_addition(1);
        assert!((l.cc() - before - 1.3).abs() < 1e-12);

        let mut t = BudgetLedger::new(&levels, 45.0);
        for (lvl, n) in [(1, 10), (2, 85), (3, 182)] {
            for _ in 0..n {
                t.record_evaluation(lvl);
            }
        }
        assert!((computational_cost(&t) - 45.2).abs() < 1e-12);
        assert!((t.cc() - computational_cost(&t)).abs() < 1e-12);

        let dtmb = FidelityLevels::new(vec![1.0, 0.06]).unwrap();
        let mut d = BudgetLedger::new(&dtmb, 20.5);
        (0..7).for_each(|_| d.record_evaluation(1));
        (0..225).for_each(|_| d.record_evaluation(2));
        assert!((computational_cost(&d) - 20.5).abs() < 1e-12);

        let single = FidelityLevels::new(vec![1.0]).unwrap();
        let mut s = BudgetLedger::new(&single, 45.0);
        assert_eq!(computational_cost(&s), 0.0);
        (0..45).for_each(|_| s.record_addition(1));
        assert_eq!(computational_cost(&s), 45.0);
        assert_eq!(s.cc(), 45.0);
    }

    #[test]
    fn toy_inter_level_errors() {
        // s_2(x) = x on three points; s_1 = s_2 + 1 at two of them. With the
        // lowest model forced to interpolate, f̂_2 reproduces s_2 there.
        let low = set(&[0.0, 0.5, 1.0], |x| x);
        let high = set(&[0.0, 1.0], |x| x + 1.0);
        let training = vec![high, low];
        let cfg = SrbfConfig { k_min: 3, ..SrbfConfig::default() };
        let mut b = HierarchyBuilder::new(&training, &cfg).unwrap();
        assert!(matches!(b.inter_level_errors(1), Err(Error::InvalidState(_))));
        // K = J interpolation of the lowest level.
        let model = crate::srbf::fit_ensemble(&training[1], 3, &cfg).unwrap();
        b.components[1] = Some(model);
        let e = b.inter_level_errors(1).unwrap();
        for v in e.values() {
            assert!((v - 1.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn single_level_matches_plain_srbf() {
        let t = set(&[0.0, 0.2, 0.45, 0.7, 1.0], |x| (4.0 * x).sin());
        let cfg = SrbfConfig::default();
        let levels = FidelityLevels::new(vec![1.0]).unwrap();
        let mf = fit_hierarchy(vec![t.clone()], levels, None, &cfg).unwrap();
        let (plain, _) = fit_auto(&t, None, &cfg).unwrap();
        for x in [0.1, 0.33, 0.9] {
            assert_eq!(mf.predict_mf(&[x]), plain.predict(&[x]));
        }
        assert!(mf.error_models().is_empty());
    }

    #[test]
    fn partial_sums() {
        let lo = set(&[0.0, 0.3, 0.6, 1.0], |x| x);
        let mid = set(&[0.0, 0.6, 1.0], |x| x + 0.2);
        let hi = set(&[0.0, 1.0], |x| x + 0.7);
        let levels = FidelityLevels::new(vec![1.0, 0.2, 0.1]).unwrap();
        let m = fit_hierarchy(vec![hi, mid, lo], levels, None, &SrbfConfig::default()).unwrap();
        let x = [0.42];
        let c = m.component_predictions(&x);
        let l3 = m.predict_level(3, &x).unwrap();
        assert_eq!(l3, c[2]);
        let l2 = m.predict_level(2, &x).unwrap();
        assert!((l2.mean - (c[2].mean + c[1].mean)).abs() < 1e-14);
        assert_eq!(m.predict_level(1, &x).unwrap(), m.predict_mf(&x));
        assert!(m.predict_level(0, &x).is_err() && m.predict_level(4, &x).is_err());
        let u = m.predict_mf(&x).uncertainty;
        assert!(c.iter().all(|p| u >= p.uncertainty));
        assert!(m.degenerate_levels()[0]);
    }

    #[test]
    fn nesting_is_enforced() {
        let lo = set(&[0.0, 0.5, 1.0], |x| x);
        let hi = set(&[0.25], |x| x);
        let levels = FidelityLevels::new(vec![1.0, 0.1]).unwrap();
        assert!(matches!(
            fit_hierarchy(vec![hi, lo], levels, None, &SrbfConfig::default()),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn refit_is_deterministic() {
        let lo = set(&[0.0, 0.2, 0.5, 0.8, 1.0], |x| x * x);
        let hi = set(&[0.0, 0.5, 1.0], |x| x * x + x);
        let levels = FidelityLevels::new(vec![1.0, 0.1]).unwrap();
        let cfg = SrbfConfig::default();
        let a = fit_hierarchy(vec![hi.clone(), lo.clone()], levels.clone(), Some(&[2, 3]), &cfg).unwrap();
        let b = fit_hierarchy(vec![hi, lo], levels, Some(&[2, 3]), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
