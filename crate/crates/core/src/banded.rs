//! Banded matrices and their LU factorization with partial pivoting.
//!
//! Storage follows the usual band layout: row `i` of the factor keeps columns
//! `i - kl ..= i + kl + ku`, which leaves room for the fill produced by row
//! interchanges.

use crate::scalar::Field;

#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Field> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[s] += v;
    }

    /// Replaces row `i` by the unit row `e_i`.
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, if j == i { T::one() } else { T::zero() });
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                let mut acc = T::zero();
                for (j, &xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += self.get(i, j) * xj;
                }
                acc
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu<T>, SingularPivot> {
        BandedLu::new(self)
    }
}

/// Zero or non-finite pivot encountered at the given elimination step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot(pub usize);

#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    upper: Vec<T>,
    lower: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Field> BandedLu<T> {
    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    fn new(a: &BandedMatrix<T>) -> Result<Self, SingularPivot> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = Self {
            n,
            kl,
            ku,
            upper: vec![T::zero(); n * (2 * kl + ku + 1)],
            lower: vec![T::zero(); n * kl.max(1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                let s = lu.at(i, j);
                lu.upper[s] = a.get(i, j);
            }
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.upper[lu.at(k, k)].modulus();
            for r in k + 1..=last_row {
                let m = lu.upper[lu.at(r, k)].modulus();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if best == <T::Real as num_traits::Zero>::zero() || !num_traits::Float::is_finite(best) {
                return Err(SingularPivot(k));
            }
            lu.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (sk, sp) = (lu.at(k, j), lu.at(p, j));
                    lu.upper.swap(sk, sp);
                }
            }
            let pivot = lu.upper[lu.at(k, k)];
            for r in k + 1..=last_row {
                let srk = lu.at(r, k);
                let l = lu.upper[srk] / pivot;
                lu.upper[srk] = T::zero();
                lu.lower[k * kl + (r - k - 1)] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let skj = lu.at(k, j);
                    let srj = lu.at(r, j);
                    let v = lu.upper[skj];
                    lu.upper[srj] -= l * v;
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                b[r] -= self.lower[k * self.kl + (r - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s -= self.upper[self.at(i, j)] * b[j];
            }
            b[i] = s / self.upper[self.at(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn random_banded(n: usize, kl: usize, ku: usize, vals: &[f64]) -> BandedMatrix<f64> {
        let mut a = BandedMatrix::zeros(n, kl, ku);
        let mut it = vals.iter().cycle();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.set(i, j, *it.next().unwrap());
            }
        }
        a
    }

    #[test]
    fn needs_pivoting() {
        // zero diagonal forces a row interchange
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 3.0);
        a.set(2, 2, 1.0);
        let x = [1.0_f64, -2.0, 0.5];
        let b = a.matvec(&x);
        let sol = a.factor().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_reported() {
        let a = BandedMatrix::<f64>::zeros(4, 1, 1);
        assert_eq!(a.factor().unwrap_err(), SingularPivot(0));
    }

    #[test]
    fn complex_system() {
        let n = 6;
        let mut a = BandedMatrix::<Complex64>::zeros(n, 2, 1);
        for i in 0..n {
            a.set(i, i, Complex64::new(0.1, 1.0 + i as f64));
            if i + 1 < n {
                a.set(i, i + 1, Complex64::new(2.0, -1.0));
            }
            if i >= 2 {
                a.set(i, i - 2, Complex64::new(-3.0, 0.5));
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let b = a.matvec(&x);
        let sol = a.factor().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn solve_inverts_matvec(
            n in 3usize..40,
            kl in 0usize..4,
            ku in 0usize..4,
            vals in proptest::collection::vec(-2.0f64..2.0, 16..64),
            shift in 5.0f64..20.0,
        ) {
            let mut a = random_banded(n, kl, ku, &vals);
            // keep the matrix comfortably nonsingular
            for i in 0..n {
                a.add(i, i, if i % 2 == 0 { shift } else { -shift });
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.matvec(&x);
            let sol = a.factor().unwrap().solve(&b);
            for (s, e) in sol.iter().zip(&x) {
                prop_assert!((s - e).abs() < 1e-10);
            }
        }
    }
}
