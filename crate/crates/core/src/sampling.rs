//! Deterministic low-discrepancy point sets.

/// Van der Corput radical inverse of `index` in the given `base`.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    value
}

/// The first `n` primes.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Hammersley set of `n` points in `[0,1]^dim`.
///
/// Point `i` (0-based) has first coordinate `(i + 0.5) / n` and coordinate
/// `k >= 1` equal to the radical inverse of `i` in the `k`-th prime base
/// (2, 3, 5, ...).
pub fn hammersley(n: usize, dim: usize) -> Vec<Vec<f64>> {
    let bases = first_primes(dim.saturating_sub(1));
    (0..n)
        .map(|i| {
            let mut p = Vec::with_capacity(dim);
            if dim > 0 {
                p.push((i as f64 + 0.5) / n as f64);
            }
            p.extend(bases.iter().map(|&b| radical_inverse(b, i as u64)));
            p
        })
        .collect()
}

/// Full-factorial grid with `per_axis` equally spaced levels (endpoints
/// included) in `[0,1]^dim`, last coordinate varying fastest.
pub fn full_factorial(per_axis: usize, dim: usize) -> Vec<Vec<f64>> {
    let total = per_axis.pow(dim as u32);
    let step = if per_axis > 1 { 1.0 / (per_axis - 1) as f64 } else { 0.0 };
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dim];
            for k in (0..dim).rev() {
                p[k] = if per_axis > 1 { (idx % per_axis) as f64 * step } else { 0.5 };
                idx /= per_axis;
            }
            p
        })
        .collect()
}
