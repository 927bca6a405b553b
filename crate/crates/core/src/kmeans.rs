//! Deterministic k-means used to place RBF centers.
//!
//! Points are first put in lexicographic order so the result does not depend
//! on the order the caller supplies them in. Seeding is greedy farthest-point
//! (k-center) starting from the point closest to the centroid, followed by
//! Lloyd iterations.

use std::cmp::Ordering;

use crate::error::{invalid, Result};

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-10;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Index permutation that puts `points` in lexicographic order.
pub(crate) fn lex_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| lex_cmp(&points[i], &points[j]).then(i.cmp(&j)));
    idx
}

/// Returns `k` cluster centers of `points`.
///
/// With `k == points.len()` the points themselves are returned (in
/// lexicographic order).
pub fn kmeans_centers(points: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    if k < 1 || k > n {
        return invalid(format!("k-means needs 1 <= K <= {n}, got K = {k}"));
    }
    let sorted: Vec<&[f64]> = lex_order(points).into_iter().map(|i| points[i].as_slice()).collect();
    if k == n {
        return Ok(sorted.iter().map(|p| p.to_vec()).collect());
    }
    let dim = sorted[0].len();
    let flat: Vec<f64> = sorted.iter().flat_map(|p| p.iter().copied()).collect();
    let point = |i: usize| &flat[i * dim..(i + 1) * dim];

    // Seeding.
    let mut centroid = vec![0.0; dim];
    for i in 0..n {
        for (c, v) in centroid.iter_mut().zip(point(i)) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let first = argmin_by((0..n).map(|i| sq_dist(point(i), &centroid)));
    let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
    centers.extend_from_slice(point(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centers[..dim])).collect();
    for _ in 1..k {
        let next = argmax_by(nearest.iter().copied());
        let c = point(next).to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), &c));
        }
        centers.extend_from_slice(&c);
    }

    // Lloyd iterations.
    let mut assign = vec![usize::MAX; n];
    let mut prev_inertia = f64::INFINITY;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for _ in 0..MAX_ITER {
        let mut inertia = 0.0;
        let mut changed = false;
        for i in 0..n {
            let p = point(i);
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(p, &centers[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            inertia += best_d;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        sums.iter_mut().for_each(|v| *v = 0.0);
        counts.iter_mut().for_each(|v| *v = 0);
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            // Empty clusters keep their previous location.
            if counts[c] > 0 {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
        let rel_change = (prev_inertia - inertia).abs() / prev_inertia.max(f64::MIN_POSITIVE);
        if !changed || rel_change <= REL_TOL {
            break;
        }
        prev_inertia = inertia;
    }
    Ok(centers.chunks(dim).map(|c| c.to_vec()).collect())
}

// First index attaining the minimum.
fn argmin_by(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn argmax_by(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
