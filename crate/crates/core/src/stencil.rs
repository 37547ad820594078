//! Finite-difference weights on arbitrary node sets (Fornberg's recursion).

use crate::scalar::Scalar;

/// Weights `c_k` such that `f^(m)(z) ~ sum_k c_k f(x_k)`.
///
/// Panics if `m >= xs.len()`.
pub fn fd_weights<T: Scalar>(z: T, xs: &[T], m: usize) -> Vec<T> {
    let n = xs.len();
    assert!(m < n, "need more nodes than the derivative order");
    // c[j][k]: weight of node j for the k-th derivative
    let mut c = vec![vec![T::zero(); m + 1]; n];
    let mut c1 = T::one();
    let mut c4 = xs[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kk = T::from_count(k);
                    c[i][k] = c1 * (kk * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                let kk = T::from_count(k);
                c[j][k] = (c4 * c[j][k] - kk * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Weights for the `m`-th derivative at integer offset 0 using integer
/// offsets `offsets` on a grid of spacing `h`.
pub fn offset_weights<T: Scalar>(offsets: &[i64], m: usize, h: T) -> Vec<T> {
    let xs: Vec<T> = offsets
        .iter()
        .map(|&o| T::from_i64(o).expect("offset representable"))
        .collect();
    let scale = h.powi(m as i32);
    fd_weights(T::zero(), &xs, m)
        .into_iter()
        .map(|w| w / scale)
        .collect()
}
