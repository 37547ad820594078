//! Uniform discretization of `[0, L]` with composite Simpson weights.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid `x_i = i L / n`, `i = 0..=n`, with `n` even.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid<T> {
    length: T,
    intervals: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> UniformGrid<T> {
    pub fn new(length: T, intervals: usize) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if intervals < 2 || intervals % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "Simpson quadrature needs an even interval count >= 2, got {intervals}"
            )));
        }
        let n = intervals;
        let h = length / T::from_count(n);
        let mut nodes: Vec<T> = (0..=n).map(|i| T::from_count(i) * length / T::from_count(n)).collect();
        nodes[0] = T::zero();
        nodes[n] = length;

        let third = h / T::lit(3.0);
        let weights = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    third
                } else if i % 2 == 1 {
                    T::lit(4.0) * third
                } else {
                    T::lit(2.0) * third
                }
            })
            .collect();
        Ok(Self {
            length,
            intervals,
            nodes,
            weights,
        })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> T {
        self.length / T::from_count(self.intervals)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.len(),
                actual: len,
            })
        }
    }

    pub fn integrate(&self, f: &[T]) -> T {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(&w, &v)| w * v).sum()
    }

    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&w, (&x, &y))| w * x * y)
            .sum()
    }

    /// Quadrature `L^2(0, L)` norm.
    pub fn norm(&self, a: &[T]) -> T {
        self.inner(a, a).max(T::zero()).sqrt()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Double integral over the square for row-major samples `f[i * len + m]`.
    pub fn integrate_square(&self, f: &[T]) -> T {
        let len = self.len();
        debug_assert_eq!(f.len(), len * len);
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &wi)| {
                let row = &f[i * len..(i + 1) * len];
                wi * self.integrate(row)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_weight_sum() {
        let g = UniformGrid::new(3.0_f64, 16).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[16], 3.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
        let total: f64 = g.weights().iter().sum();
        assert!((total - 3.0).abs() <= 1e-12 * 3.0);
    }

    #[test]
    fn rejects_odd_or_degenerate() {
        assert!(UniformGrid::new(1.0_f64, 7).is_err());
        assert!(UniformGrid::new(1.0_f64, 0).is_err());
        assert!(UniformGrid::new(-1.0_f64, 8).is_err());
        assert!(UniformGrid::new(f64::NAN, 8).is_err());
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let g = UniformGrid::new(2.0_f64, 4).unwrap();
        let f = g.sample(|x| x * x * x - x + 1.0);
        // int_0^2 (x^3 - x + 1) dx = 4 - 2 + 2
        assert!((g.integrate(&f) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn single_precision_grid() {
        let g = UniformGrid::new(1.0_f32, 64).unwrap();
        let s = g.sample(|x| (std::f32::consts::PI * x).sin());
        let n = g.norm(&s);
        assert!((n - (0.5_f32).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn square_integral_separable() {
        let g = UniformGrid::new(1.0_f64, 32).unwrap();
        let len = g.len();
        let mut f = vec![0.0; len * len];
        for i in 0..len {
            for m in 0..len {
                f[i * len + m] = g.nodes()[i] * g.nodes()[m] * g.nodes()[m];
            }
        }
        assert!((g.integrate_square(&f) - 1.0 / 6.0).abs() < 1e-13);
    }
}
