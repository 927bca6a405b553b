//! Error and improvement metrics of a finished campaign, and box-plot
//! statistics over repetitions.
//!
//! Distances in the design space are measured in the normalized unit cube and
//! divided by `√D`, so a corner-to-corner miss scores 1.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::Truth;
use crate::srbf::percentile_sorted;

/// Known optimum of an analytical problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    /// `x̌` in normalized coordinates.
    pub x_check: Vec<f64>,
    pub f_check: f64,
    /// Range of the noiseless highest fidelity over the initial training set.
    pub r1_metric: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub e_x: f64,
    pub e_f: f64,
    pub e_t: f64,
}

fn normalized_distance(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (d2 / a.len() as f64).sqrt()
}

/// `E_t = sqrt((E_x² + E_f²) / 2)`.
pub fn total_error(e_x: f64, e_f: f64) -> f64 {
    (0.5 * (e_x * e_x + e_f * e_f)).sqrt()
}

/// `(E_x, E_f, E_t)` of a reported optimum `x_star` (normalized).
pub fn reference_errors(x_star: &[f64], reference: &ReferenceOptimum, truth: &dyn Truth) -> Result<ErrorMetrics> {
    if reference.r1_metric == 0.0 {
        return Err(Error::UndefinedMetric("E_f needs a non-zero reference range".into()));
    }
    if x_star.len() != reference.x_check.len() {
        return invalid("x* and the reference optimum differ in dimension");
    }
    let e_x = normalized_distance(x_star, &reference.x_check);
    let e_f = (truth.truth(x_star)? - reference.f_check) / reference.r1_metric;
    Ok(ErrorMetrics { e_x, e_f, e_t: total_error(e_x, e_f) })
}

/// `(Δ_x, Δ_f)` of `x_star` relative to the original design `x0`.
pub fn relative_improvements(x_star: &[f64], x0: &[f64], truth: &dyn Truth) -> Result<(f64, f64)> {
    let f0 = truth.truth(x0)?;
    if f0 == 0.0 {
        return Err(Error::UndefinedMetric("Δ_f is undefined when f(x0) = 0".into()));
    }
    let delta_x = normalized_distance(x_star, x0);
    Ok((delta_x, (truth.truth(x_star)? - f0) / f0))
}

/// Signed `E_p = (f̂(x*) − f(x*)) / R₁`.
pub fn prediction_error(surrogate_min: f64, x_star: &[f64], reference: &ReferenceOptimum, truth: &dyn Truth) -> Result<f64> {
    if reference.r1_metric == 0.0 {
        return Err(Error::UndefinedMetric("E_p needs a non-zero reference range".into()));
    }
    Ok((surrogate_min - truth.truth(x_star)?) / reference.r1_metric)
}

/// Quartiles, whiskers and 1.5·IQR outliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    /// Outlying values in ascending order.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn median(&self) -> f64 {
        self.q2
    }
}

/// Box-plot statistics with linearly interpolated quartiles (position
/// `p·(n−1)` in the sorted sample).
pub fn aggregate_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return invalid("box statistics need at least one value");
    }
    if values.iter().any(|v| v.is_nan()) {
        return invalid("box statistics of NaN values");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(&sorted, 0.25);
    let q2 = percentile_sorted(&sorted, 0.5);
    let q3 = percentile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence).collect();
    let outliers = sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect();
    // The fences bracket [q1, q3], which always holds a sample, so `inside`
    // is never empty.
    Ok(BoxStats {
        n: sorted.len(),
        q1,
        q2,
        q3,
        whisker_lo: inside[0],
        whisker_hi: inside[inside.len() - 1],
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Quadratic;
    impl Truth for Quadratic {
        fn truth(&self, x: &[f64]) -> Result<f64> {
            Ok(1.0 + x.iter().map(|v| (v - 0.25) * (v - 0.25)).sum::<f64>())
        }
    }

    fn reference(dim: usize) -> ReferenceOptimum {
        ReferenceOptimum { x_check: vec![0.25; dim], f_check: 1.0, r1_metric: 2.0 }
    }

    #[test]
    fn exact_hit_is_zero() {
        let m = reference_errors(&[0.25, 0.25], &reference(2), &Quadratic).unwrap();
        assert_eq!((m.e_x, m.e_f, m.e_t), (0.0, 0.0, 0.0));
    }

    #[test]
    fn total_error_identity() {
        assert!((total_error(0.6, 0.8) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn corner_to_corner_distance_is_one() {
        let r = ReferenceOptimum { x_check: vec![0.0, 0.0], f_check: 0.0, r1_metric: 1.0 };
        let m = reference_errors(&[1.0, 1.0], &r, &Quadratic).unwrap();
        assert!((m.e_x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_range_is_undefined() {
        let r = ReferenceOptimum { r1_metric: 0.0, ..reference(1) };
        assert!(matches!(reference_errors(&[0.1], &r, &Quadratic), Err(Error::UndefinedMetric(_))));
        assert!(prediction_error(1.0, &[0.1], &r, &Quadratic).is_err());
    }

    struct Scaled(f64);
    impl Truth for Scaled {
        fn truth(&self, x: &[f64]) -> Result<f64> {
            Ok(if x[0] == 0.0 { 10.0 } else { 10.0 * self.0 })
        }
    }

    #[test]
    fn improvements() {
        assert_eq!(relative_improvements(&[0.0], &[0.0], &Scaled(1.0)).unwrap(), (0.0, 0.0));
        let (_, df) = relative_improvements(&[0.5], &[0.0], &Scaled(0.873)).unwrap();
        assert!((df + 0.127).abs() < 1e-12);
        assert!(df < 0.0);
    }

    #[test]
    fn zero_baseline_is_undefined() {
        struct Zero;
        impl Truth for Zero {
            fn truth(&self, _: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
        }
        assert!(relative_improvements(&[0.5], &[0.0], &Zero).is_err());
    }

    #[test]
    fn prediction_error_sign() {
        let r = reference(1);
        let f = Quadratic.truth(&[0.5]).unwrap();
        assert_eq!(prediction_error(f, &[0.5], &r, &Quadratic).unwrap(), 0.0);
        assert!((prediction_error(f + 0.1 * 2.0, &[0.5], &r, &Quadratic).unwrap() - 0.1).abs() < 1e-15);
        assert!(prediction_error(f - 0.5, &[0.5], &r, &Quadratic).unwrap() < 0.0);
    }

    #[test]
    fn quartiles_of_five() {
        let b = aggregate_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.q2, b.q3), (2.0, 3.0, 4.0));
        assert!(b.outliers.is_empty());
        assert_eq!((b.whisker_lo, b.whisker_hi), (1.0, 5.0));
    }

    #[test]
    fn far_value_is_outlier() {
        // q1 = 2, q3 = 4, IQR = 2, upper fence 7.
        let b = aggregate_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_hi, 4.0);
    }

    #[test]
    fn constant_sample() {
        let b = aggregate_stats(&[2.5; 7]).unwrap();
        assert_eq!((b.q1, b.q2, b.q3, b.iqr()), (2.5, 2.5, 2.5, 0.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn empty_rejected() {
        assert!(aggregate_stats(&[]).is_err());
    }

    proptest! {
        #[test]
        fn stats_are_order_free_and_consistent(mut v in prop::collection::vec(-100.0f64..100.0, 1..40)) {
            let a = aggregate_stats(&v).unwrap();
            v.reverse();
            prop_assert_eq!(&aggregate_stats(&v).unwrap(), &a);
            prop_assert!(a.q1 <= a.q2 && a.q2 <= a.q3);
            let iqr = a.iqr();
            let expected: Vec<f64> = {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                s.into_iter().filter(|x| *x > a.q3 + 1.5 * iqr || *x < a.q1 - 1.5 * iqr).collect()
            };
            prop_assert_eq!(a.outliers, expected);
        }

        #[test]
        fn total_error_squares(ex in 0.0f64..2.0, ef in -2.0f64..2.0) {
            let et = total_error(ex, ef);
            prop_assert!(et >= 0.0);
            prop_assert!((et * et - 0.5 * (ex * ex + ef * ef)).abs() < 1e-12);
        }
    }
}
