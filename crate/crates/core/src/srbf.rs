//! Stochastic radial basis function (SRBF) regression.
//!
//! A fitted [`RbfEnsemble`] holds one least-squares weight vector per kernel
//! exponent `τ` of a stratified grid over `[τ_min, τ_max]`. Each member is
//!
//! ```text
//! g(x, τ) = Σ_j w_j(τ) ‖x − c_j‖^τ
//! ```
//!
//! with centers `c_j` from k-means. The prediction is the ensemble mean and the
//! uncertainty is half the spread between the 2.5th and 97.5th percentiles of
//! the member values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans_centers, lex_order, sq_dist};
use crate::lstsq::{solve_min_norm, solve_with_leverage, DEFAULT_RCOND};

/// Leverages closer to one than this are handled by an explicit refit.
const LEVERAGE_GUARD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrbfConfig {
    /// Ensemble size used by the final fit.
    pub n_tau: usize,
    /// Ensemble size used inside leave-one-out cross-validation.
    pub n_tau_loocv: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Smallest number of centers considered by the LOOCV search.
    pub k_min: usize,
    /// Relative singular-value cutoff of the least-squares solves.
    pub rcond: f64,
    /// Two training points closer than this are duplicates.
    pub duplicate_tol: f64,
    /// Restrict each refit's search to the previous `K*` ± 1.
    pub constrain_search: bool,
    pub loocv: LoocvMode,
}

/// How leave-one-out folds are refitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoocvMode {
    /// Each fold reruns k-means and the least-squares solves without the
    /// held-out point.
    Refit,
    /// Centers from the full set are kept for every fold and the held-out
    /// residuals come from the hat matrix.
    #[default]
    FixedCenters,
}

impl Default for SrbfConfig {
    fn default() -> Self {
        Self {
            n_tau: 100,
            n_tau_loocv: 5,
            tau_min: 1.0,
            tau_max: 3.0,
            k_min: 2,
            rcond: DEFAULT_RCOND,
            duplicate_tol: 1e-12,
            constrain_search: true,
            loocv: LoocvMode::FixedCenters,
        }
    }
}

impl SrbfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tau == 0 || self.n_tau_loocv == 0 {
            return invalid("tau ensemble sizes must be positive");
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max) {
            return invalid("tau range must satisfy 0 < tau_min <= tau_max");
        }
        if !(self.rcond >= 0.0 && self.duplicate_tol >= 0.0) {
            return invalid("rcond and duplicate_tol must be non-negative");
        }
        Ok(())
    }
}

/// Training data of one surrogate, in the normalized design space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TrainingSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, points: Vec::new(), values: Vec::new() }
    }

    pub fn from_samples(points: Vec<Vec<f64>>, values: Vec<f64>, duplicate_tol: f64) -> Result<Self> {
        if points.len() != values.len() {
            return invalid(format!("{} points but {} values", points.len(), values.len()));
        }
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return invalid("cannot infer dimension from an empty sample"),
        };
        let mut set = Self::new(dim);
        for (p, v) in points.into_iter().zip(values) {
            set.push(p, v, duplicate_tol)?;
        }
        Ok(set)
    }

    /// Appends a sample, enforcing the unit-cube and duplicate invariants.
    pub fn push(&mut self, point: Vec<f64>, value: f64, duplicate_tol: f64) -> Result<()> {
        if point.len() != self.dim {
            return invalid(format!("point has dimension {}, expected {}", point.len(), self.dim));
        }
        if point.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid(format!("point {point:?} lies outside the unit hypercube"));
        }
        if self.contains(&point, duplicate_tol) {
            return invalid(format!("point {point:?} duplicates an existing training point"));
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when some stored point lies within `tol` of `x`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let tol2 = tol * tol;
        self.points.iter().any(|p| sq_dist(p, x) <= tol2)
    }

    /// Index of a stored point within `tol` of `x`.
    pub fn position(&self, x: &[f64], tol: f64) -> Option<usize> {
        let tol2 = tol * tol;
        self.points.iter().position(|p| sq_dist(p, x) <= tol2)
    }

    pub fn nearest_distance(&self, x: &[f64]) -> Option<f64> {
        self.points.iter().map(|p| sq_dist(p, x)).min_by(f64::total_cmp).map(f64::sqrt)
    }

    /// Copy with the samples in lexicographic point order.
    pub fn canonical(&self) -> TrainingSet {
        let order = lex_order(&self.points);
        TrainingSet {
            dim: self.dim,
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
            values: order.iter().map(|&i| self.values[i]).collect(),
        }
    }

    /// Order-independent hash of the data (FNV-1a over the canonical order).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.len() as u64);
        for &i in &lex_order(&self.points) {
            self.points[i].iter().for_each(|v| eat(v.to_bits()));
            eat(self.values[i].to_bits());
        }
        h
    }

    pub(crate) fn without(&self, skip: usize) -> TrainingSet {
        let mut out = self.clone();
        out.points.remove(skip);
        out.values.remove(skip);
        out
    }
}

/// Stratified grid of kernel exponents: `τ_m = start + m·step`, `m < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl TauGrid {
    /// Midpoints of `count` equal strata of `[lo, hi]`.
    pub fn stratified(lo: f64, hi: f64, count: usize) -> Self {
        let step = (hi - lo) / count as f64;
        Self { start: lo + 0.5 * step, step, count }
    }

    pub fn value(&self, m: usize) -> f64 {
        self.start + self.step * m as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|m| self.value(m)).collect()
    }

    /// Writes `d^{τ_m}` for every member into `out`.
    fn powers(&self, d: f64, out: &mut [f64]) {
        if d == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let mut p = d.powf(self.start);
        let ratio = d.powf(self.step);
        for o in out.iter_mut() {
            *o = p;
            p *= ratio;
        }
    }
}

/// Mean prediction and half-width of its 95% band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub uncertainty: f64,
}

impl Prediction {
    pub const ZERO: Prediction = Prediction { mean: 0.0, uncertainty: 0.0 };
}

/// Linear-interpolation percentile of sorted data, position `p·(n−1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of empty data");
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean and 95%-band half-width of a sample of member values.
pub fn summarize_members(values: &mut [f64]) -> Prediction {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_unstable_by(f64::total_cmp);
    let spread = percentile_sorted(values, 0.975) - percentile_sorted(values, 0.025);
    Prediction { mean, uncertainty: (0.5 * spread).max(0.0) }
}

/// Result of a single least-squares weight fit.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    /// The singular-value cutoff removed part of the column space.
    pub truncated: bool,
}

/// Minimum-norm least-squares weights for one kernel exponent.
pub fn fit_weights(train: &TrainingSet, centers: &[Vec<f64>], tau: f64) -> Result<WeightFit> {
    fit_weights_with(train, centers, tau, DEFAULT_RCOND)
}

pub fn fit_weights_with(train: &TrainingSet, centers: &[Vec<f64>], tau: f64, rcond: f64) -> Result<WeightFit> {
    if !(tau > 0.0) {
        return invalid(format!("kernel exponent must be positive, got {tau}"));
    }
    if centers.is_empty() || centers.len() > train.len() {
        return invalid(format!("need 1..={} centers, got {}", train.len(), centers.len()));
    }
    let a = DMatrix::from_fn(train.len(), centers.len(), |i, j| {
        sq_dist(&train.points()[i], &centers[j]).sqrt().powf(tau)
    });
    let s = solve_min_norm(&a, &DVector::from_column_slice(train.values()), rcond);
    Ok(WeightFit { weights: s.x.iter().copied().collect(), truncated: s.truncated })
}

fn log_distances(points: &[Vec<f64>], centers: &[Vec<f64>]) -> DMatrix<f64> {
    // ln 0 = -inf so that exp(τ ln d) = 0 at a center.
    DMatrix::from_fn(points.len(), centers.len(), |i, j| 0.5 * sq_dist(&points[i], &centers[j]).ln())
}

fn design_from_logs(log_d: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    log_d.map(|l| (tau * l).exp())
}

/// Fitted stochastic RBF regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "EnsembleRepr", try_from = "EnsembleRepr")]
pub struct RbfEnsemble {
    dim: usize,
    centers: Vec<Vec<f64>>,
    taus: TauGrid,
    // coef[j * M + m] = weight of center j in member m.
    coef: Vec<f64>,
    training_size: usize,
    training_fingerprint: u64,
    truncated_members: usize,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    dim: usize,
    kstar: usize,
    tau_grid: TauGrid,
    centers: Vec<Vec<f64>>,
    /// One weight vector per τ member.
    weights: Vec<Vec<f64>>,
    training_size: usize,
    training_fingerprint: u64,
    truncated_members: usize,
}

impl From<RbfEnsemble> for EnsembleRepr {
    fn from(e: RbfEnsemble) -> Self {
        EnsembleRepr {
            dim: e.dim,
            kstar: e.kstar(),
            tau_grid: e.taus,
            weights: e.weights(),
            centers: e.centers,
            training_size: e.training_size,
            training_fingerprint: e.training_fingerprint,
            truncated_members: e.truncated_members,
        }
    }
}

impl TryFrom<EnsembleRepr> for RbfEnsemble {
    type Error = String;

    fn try_from(r: EnsembleRepr) -> std::result::Result<Self, String> {
        let k = r.centers.len();
        let m = r.tau_grid.count;
        if r.kstar != k || r.weights.len() != m || r.weights.iter().any(|w| w.len() != k) {
            return Err("inconsistent ensemble shape".into());
        }
        let mut coef = vec![0.0; k * m];
        for (mi, w) in r.weights.iter().enumerate() {
            for (j, &v) in w.iter().enumerate() {
                coef[j * m + mi] = v;
            }
        }
        Ok(RbfEnsemble {
            dim: r.dim,
            centers: r.centers,
            taus: r.tau_grid,
            coef,
            training_size: r.training_size,
            training_fingerprint: r.training_fingerprint,
            truncated_members: r.truncated_members,
        })
    }
}

impl RbfEnsemble {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kstar(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn tau_grid(&self) -> TauGrid {
        self.taus
    }

    pub fn tau_samples(&self) -> Vec<f64> {
        self.taus.values()
    }

    /// Weight vectors, one per ensemble member.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        let m = self.taus.count;
        (0..m)
            .map(|mi| (0..self.kstar()).map(|j| self.coef[j * m + mi]).collect())
            .collect()
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn training_fingerprint(&self) -> u64 {
        self.training_fingerprint
    }

    /// Number of members whose solve hit the singular-value cutoff.
    pub fn truncated_members(&self) -> usize {
        self.truncated_members
    }

    /// Value of every ensemble member at `x`.
    pub fn member_values(&self, x: &[f64]) -> Vec<f64> {
        let m = self.taus.count;
        let mut out = vec![0.0; m];
        let mut pw = vec![0.0; m];
        for (j, c) in self.centers.iter().enumerate() {
            let d = sq_dist(x, c).sqrt();
            if d == 0.0 {
                continue;
            }
            self.taus.powers(d, &mut pw);
            let w = &self.coef[j * m..(j + 1) * m];
            for ((o, p), wj) in out.iter_mut().zip(&pw).zip(w) {
                *o += wj * p;
            }
        }
        out
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut values = self.member_values(x);
        summarize_members(&mut values)
    }

    /// Ensemble mean only (skips the percentile computation).
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let values = self.member_values(x);
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Fits an ensemble with `k` k-means centers and the configured τ grid.
pub fn fit_ensemble(train: &TrainingSet, k: usize, config: &SrbfConfig) -> Result<RbfEnsemble> {
    if train.is_empty() {
        return invalid("cannot fit a surrogate to an empty training set");
    }
    let canon = train.canonical();
    let centers = kmeans_centers(canon.points(), k)?;
    let taus = TauGrid::stratified(config.tau_min, config.tau_max, config.n_tau);
    fit_ensemble_with_centers(&canon, centers, taus, config.rcond, train.fingerprint())
}

fn fit_ensemble_with_centers(
    canon: &TrainingSet,
    centers: Vec<Vec<f64>>,
    taus: TauGrid,
    rcond: f64,
    fingerprint: u64,
) -> Result<RbfEnsemble> {
    let k = centers.len();
    let m = taus.count;
    let log_d = log_distances(canon.points(), &centers);
    let s = DVector::from_column_slice(canon.values());
    let mut coef = vec![0.0; k * m];
    let mut truncated_members = 0;
    for mi in 0..m {
        let a = design_from_logs(&log_d, taus.value(mi));
        let sol = solve_min_norm(&a, &s, rcond);
        if sol.truncated {
            truncated_members += 1;
        }
        for j in 0..k {
            coef[j * m + mi] = sol.x[j];
        }
    }
    if truncated_members > 0 {
        log::debug!("{truncated_members}/{m} ensemble members truncated at rcond {rcond:e}");
    }
    Ok(RbfEnsemble {
        dim: canon.dim(),
        centers,
        taus,
        coef,
        training_size: canon.len(),
        training_fingerprint: fingerprint,
        truncated_members,
    })
}

/// Leave-one-out RMSE of the reduced ensemble with `k` centers. The fold
/// prediction is the mean over the reduced τ grid.
pub fn loocv_rmse(train: &TrainingSet, k: usize, config: &SrbfConfig) -> Result<f64> {
    let j = train.len();
    if j < 3 {
        return invalid(format!("LOOCV needs at least 3 samples, got {j}"));
    }
    if k < 1 || k > j - 1 {
        return invalid(format!("LOOCV needs 1 <= K <= J-1 = {}, got {k}", j - 1));
    }
    let canon = train.canonical();
    let taus = TauGrid::stratified(config.tau_min, config.tau_max, config.n_tau_loocv).values();
    loocv_canonical(&canon, k, &taus, config)
}

fn loocv_canonical(canon: &TrainingSet, k: usize, taus: &[f64], config: &SrbfConfig) -> Result<f64> {
    match config.loocv {
        LoocvMode::Refit => loocv_rmse_refit(canon, k, taus, config.rcond),
        LoocvMode::FixedCenters => {
            let centers = kmeans_centers(canon.points(), k)?;
            Ok(loocv_rmse_with_centers(canon, &centers, taus, config.rcond))
        }
    }
}

/// LOOCV RMSE with k-means and weights recomputed in every fold.
pub fn loocv_rmse_refit(train: &TrainingSet, k: usize, taus: &[f64], rcond: f64) -> Result<f64> {
    let j = train.len();
    let mut sse = 0.0;
    for i in 0..j {
        let fold = train.without(i);
        let centers = kmeans_centers(fold.points(), k)?;
        let log_d = log_distances(fold.points(), &centers);
        let s = DVector::from_column_slice(fold.values());
        let xi = &train.points()[i];
        let mut pred = 0.0;
        for &tau in taus {
            let w = solve_min_norm(&design_from_logs(&log_d, tau), &s, rcond).x;
            pred += centers.iter().zip(w.iter()).map(|(c, wj)| wj * sq_dist(xi, c).sqrt().powf(tau)).sum::<f64>();
        }
        let e = train.values()[i] - pred / taus.len() as f64;
        sse += e * e;
    }
    Ok((sse / j as f64).sqrt())
}

/// LOOCV RMSE for explicitly given centers and exponents.
pub fn loocv_rmse_with_centers(train: &TrainingSet, centers: &[Vec<f64>], taus: &[f64], rcond: f64) -> f64 {
    let j = train.len();
    let log_d = log_distances(train.points(), centers);
    let s = DVector::from_column_slice(train.values());
    let mut loo = vec![0.0; j];
    for &tau in taus {
        let a = design_from_logs(&log_d, tau);
        let fit = solve_with_leverage(&a, &s, rcond);
        for i in 0..j {
            let slack = 1.0 - fit.leverage[i];
            let e = if slack > LEVERAGE_GUARD {
                fit.residuals[i] / slack
            } else {
                held_out_residual(&a, &s, i, rcond)
            };
            loo[i] += e / taus.len() as f64;
        }
    }
    (loo.iter().map(|e| e * e).sum::<f64>() / j as f64).sqrt()
}

fn held_out_residual(a: &DMatrix<f64>, s: &DVector<f64>, i: usize, rcond: f64) -> f64 {
    let a_fold = a.clone().remove_row(i);
    let s_fold = s.clone().remove_row(i);
    let w = solve_min_norm(&a_fold, &s_fold, rcond).x;
    s[i] - (a.row(i) * w)[0]
}

/// Outcome of the search for the number of centers.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSelection {
    pub kstar: usize,
    /// LOOCV RMSE at `kstar`; absent for the degenerate bootstrap rule.
    pub rmse: Option<f64>,
    /// Too few samples for LOOCV; `kstar = max(1, J−1)` was used.
    pub degenerate: bool,
}

/// Chooses the number of centers minimising the LOOCV RMSE.
///
/// Without a previous value every `K` in `[k_min, J−1]` is tried; otherwise
/// only `prev−1..=prev+1` within that range. Ties go to the smaller `K`.
pub fn select_num_centers(train: &TrainingSet, prev_kstar: Option<usize>, config: &SrbfConfig) -> Result<CenterSelection> {
    let j = train.len();
    if j == 0 {
        return invalid("cannot select centers for an empty training set");
    }
    if j < 3 {
        log::debug!("{j} samples: bootstrap rule K* = {}", (j - 1).max(1));
        return Ok(CenterSelection { kstar: (j - 1).max(1), rmse: None, degenerate: true });
    }
    let k_max = j - 1;
    let k_min = config.k_min.clamp(1, k_max);
    let candidates: Vec<usize> = match prev_kstar.filter(|_| config.constrain_search) {
        None => (k_min..=k_max).collect(),
        Some(p) => {
            let c: Vec<usize> = (p.saturating_sub(1)..=p + 1).filter(|k| (k_min..=k_max).contains(k)).collect();
            if c.is_empty() {
                vec![p.clamp(k_min, k_max)]
            } else {
                c
            }
        }
    };
    let canon = train.canonical();
    let taus = TauGrid::stratified(config.tau_min, config.tau_max, config.n_tau_loocv).values();
    let mut best: Option<(usize, f64)> = None;
    for k in candidates {
        let mut rmse = loocv_canonical(&canon, k, &taus, config)?;
        if rmse.is_nan() {
            rmse = f64::INFINITY;
        }
        if best.map_or(true, |(_, b)| rmse < b) {
            best = Some((k, rmse));
        }
    }
    let (kstar, rmse) = best.ok_or_else(|| Error::InvalidState("no center candidates".into()))?;
    Ok(CenterSelection { kstar, rmse: Some(rmse), degenerate: false })
}

/// Selects `K*` and fits the final ensemble.
pub fn fit_auto(train: &TrainingSet, prev_kstar: Option<usize>, config: &SrbfConfig) -> Result<(RbfEnsemble, CenterSelection)> {
    let sel = select_num_centers(train, prev_kstar, config)?;
    let model = fit_ensemble(train, sel.kstar, config)?;
    Ok((model, sel))
}
