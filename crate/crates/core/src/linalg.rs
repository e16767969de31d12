//! Small dense-vector kernels used throughout the solvers.
//!
//! Everything operates on plain `&[f64]` slices; the heavy lifting elsewhere
//! is sparse-row arithmetic, so nothing fancier is warranted here.

/// Dot product. Panics if lengths differ.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Max-magnitude norm.
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `a - b` as a new vector.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub: length mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `w + alpha * p` as a new vector.
pub fn add_scaled(w: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), p.len(), "add_scaled: length mismatch");
    w.iter().zip(p).map(|(wi, pi)| wi + alpha * pi).collect()
}

/// True if every component is finite.
pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Distance between two doubles in units-in-the-last-place.
///
/// Counts the number of representable doubles strictly between `a` and `b`
/// plus one, i.e. adjacent values are 1 ulp apart and equal values are 0.
/// Values of opposite sign are measured through zero (±0 count as equal).
/// Any NaN yields `u64::MAX`.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    // Map the ordered doubles onto an ordered integer line: non-negative
    // floats keep their bit pattern, negative floats are mirrored below zero.
    fn key(x: f64) -> i128 {
        let bits = x.to_bits();
        if bits >> 63 == 0 {
            bits as i128
        } else {
            -((bits & 0x7fff_ffff_ffff_ffff) as i128)
        }
    }
    key(a).abs_diff(key(b)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_axpy_basics() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, -5.0, 6.0];
        assert_eq!(dot(&a, &b), 4.0 - 10.0 + 18.0);
        let mut y = b;
        axpy(2.0, &a, &mut y);
        assert_eq!(y, [6.0, -1.0, 12.0]);
    }

    #[test]
    fn norms() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm_inf(&[-7.0, 2.0]), 7.0);
        assert_eq!(norm_inf(&[]), 0.0);
    }

    #[test]
    fn ulp_distance_cases() {
        assert_eq!(ulp_distance(1.0, 1.0), 0);
        assert_eq!(ulp_distance(1.0, f64::from_bits(1.0f64.to_bits() + 1)), 1);
        assert_eq!(ulp_distance(0.0, -0.0), 0);
        // One step either side of zero.
        assert!(ulp_distance(f64::MIN_POSITIVE, 0.0) > 0);
        assert_eq!(
            ulp_distance(5e-324, -5e-324), // smallest subnormals, through zero
            2
        );
        assert_eq!(ulp_distance(f64::NAN, 1.0), u64::MAX);
        // Distance is symmetric.
        assert_eq!(ulp_distance(2.0, 1.0), ulp_distance(1.0, 2.0));
    }
}
