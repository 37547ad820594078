//! Bracketed root finding for real functions of one variable.

use crate::scalar::Scalar;

/// Sign-change brackets of `f` on `[a, b]` found by a uniform scan.
///
/// A sample that is exactly zero produces a degenerate bracket `(x, x)`.
pub fn scan_brackets<T, F>(f: F, a: T, b: T, step: T) -> Vec<(T, T)>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    assert!(step > T::zero(), "scan step must be positive");
    let count = ((b - a) / step).ceil().to_usize().unwrap_or(0).max(1);
    let dx = (b - a) / T::from_count(count);
    let mut out = Vec::new();
    let mut x0 = a;
    let mut f0 = f(x0);
    if f0 == T::zero() {
        out.push((x0, x0));
    }
    for i in 1..=count {
        let x1 = if i == count { b } else { a + dx * T::from_count(i) };
        let f1 = f(x1);
        if f1 == T::zero() {
            out.push((x1, x1));
        } else if f0 != T::zero() && (f0 < T::zero()) != (f1 < T::zero()) {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Bisection on a sign-change bracket until the bracket is narrower than
/// `tol * max(1, |x|)`. Returns `None` when `[a, b]` does not bracket a root.
pub fn bisect<T, F>(f: F, a: T, b: T, tol: T, max_iter: usize) -> Option<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Some(lo);
    }
    if fhi == T::zero() {
        return Some(hi);
    }
    if (flo < T::zero()) == (fhi < T::zero()) {
        return None;
    }
    let two = T::lit(2.0);
    for _ in 0..max_iter {
        let mid = lo + (hi - lo) / two;
        if hi - lo <= tol * T::one().max(mid.abs()) || mid <= lo || mid >= hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Some(mid);
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(lo + (hi - lo) / two)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_all_sine_zeros() {
        let br = scan_brackets(|x: f64| x.sin(), 0.5, 10.0, 0.01);
        assert_eq!(br.len(), 3);
        let roots: Vec<f64> = br
            .iter()
            .map(|&(a, b)| bisect(|x: f64| x.sin(), a, b, 1e-14, 200).unwrap())
            .collect();
        for (k, r) in roots.iter().enumerate() {
            assert!((r - (k as f64 + 1.0) * std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn bisect_f32() {
        let r = bisect(|x: f32| x * x - 2.0, 0.0, 2.0, 1e-6, 100).unwrap();
        assert!((r - 2.0_f32.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn exact_zero_sample_is_reported() {
        let br = scan_brackets(|x: f64| x - 1.0, 0.0, 2.0, 0.5);
        assert_eq!(br, vec![(1.0, 1.0)]);
    }
}
