//! Minimum-norm least squares through a rank-revealing SVD.
//!
//! Tall systems are first reduced with a Householder QR, so the SVD only runs
//! on the square triangular factor.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used by the surrogate fits.
pub const DEFAULT_RCOND: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    pub rank: usize,
    /// True when the cutoff discarded at least one singular value.
    pub truncated: bool,
}

/// Least-squares fit together with its in-sample residuals and leverages
/// (diagonal of the hat matrix).
#[derive(Clone, Debug)]
pub struct HatFit {
    pub solution: LstsqSolution,
    pub residuals: DVector<f64>,
    pub leverage: DVector<f64>,
}

struct Factored {
    // Orthonormal basis of the numerical column space (rows x rank).
    basis: DMatrix<f64>,
    // x = map * (basis^T b)
    map: DMatrix<f64>,
    cols: usize,
}

fn factor(a: &DMatrix<f64>, rcond: f64) -> Factored {
    let (rows, cols) = a.shape();
    let (left, reduced) = if rows > cols {
        let qr = a.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, a.clone())
    };
    let svd = reduced.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = if smax > 0.0 && smax.is_finite() {
        (0..sigma.len()).filter(|&i| sigma[i] > rcond * smax).collect()
    } else {
        Vec::new()
    };
    let r = keep.len();
    let u_full = match &left {
        Some(q) => q * &u,
        None => u,
    };
    let mut basis = DMatrix::zeros(rows, r);
    let mut map = DMatrix::zeros(cols, r);
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &u_full.column(i));
        let vi = v_t.row(i).transpose() / sigma[i];
        map.set_column(c, &vi);
    }
    Factored { basis, map, cols }
}

/// Minimum-norm solution of `a x ≈ b`; singular values at or below
/// `rcond * σ_max` are treated as zero.
pub fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> LstsqSolution {
    let (rows, cols) = a.shape();
    let (reduced, rhs) = if rows > cols {
        let qr = a.clone().qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        (qr.r(), qtb.rows(0, cols).into_owned())
    } else {
        (a.clone(), b.clone())
    };
    let svd = reduced.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let mut x = DVector::zeros(cols);
    let mut rank = 0;
    if smax > 0.0 && smax.is_finite() {
        for i in 0..sigma.len() {
            if sigma[i] > rcond * smax {
                rank += 1;
                let coef = u.column(i).dot(&rhs) / sigma[i];
                x.axpy(coef, &v_t.row(i).transpose(), 1.0);
            }
        }
    }
    LstsqSolution { x, rank, truncated: rank < cols }
}

/// Like [`solve_min_norm`], also returning residuals `b - a x` and leverages.
pub fn solve_with_leverage(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> HatFit {
    let f = factor(a, rcond);
    let proj = f.basis.tr_mul(b);
    let x = &f.map * &proj;
    let rank = f.basis.ncols();
    let residuals = b - &f.basis * &proj;
    let leverage = DVector::from_iterator(
        a.nrows(),
        f.basis.row_iter().map(|row| row.iter().map(|v| v * v).sum::<f64>()),
    );
    HatFit {
        solution: LstsqSolution { x, rank, truncated: rank < f.cols },
        residuals,
        leverage,
    }
}
