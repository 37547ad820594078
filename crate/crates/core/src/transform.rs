//! Quadrature realization of `(K v)(x) = int k(x, y) v(y) dy` and of the
//! change of variables `w = (I - K) v`.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelField;
use crate::Grid;

/// `K_d = k diag(w)` together with a factorization of `I - K_d`.
#[derive(Debug, Clone)]
pub struct TransformOperator {
    grid: Grid,
    fingerprint: [u8; 32],
    matrix: DMatrix<f64>,
    adjoint: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Operator norms in the quadrature-weighted `L^2` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformNorms {
    /// `||I - K||`
    pub forward: f64,
    /// `||(I - K)^{-1}||`
    pub inverse: f64,
}

impl TransformNorms {
    /// `||I - K|| ||(I - K)^{-1}||`, the constant relating `||v||` decay to
    /// `||w||` decay.
    pub fn condition(&self) -> f64 {
        self.forward * self.inverse
    }
}

impl TransformOperator {
    pub fn new(kernel: &KernelField) -> Result<Self> {
        let grid = kernel.grid().clone();
        let len = grid.len();
        let w = grid.weights();
        let matrix = DMatrix::from_fn(len, len, |i, m| kernel.at(i, m) * w[m]);
        // k*(x, y) = k(y, x)
        let adjoint = DMatrix::from_fn(len, len, |i, m| kernel.at(m, i) * w[m]);
        let lu = (DMatrix::identity(len, len) - &matrix).lu();
        if !lu.is_invertible() {
            return Err(Error::SingularTransform);
        }
        Ok(Self {
            grid,
            fingerprint: kernel.fingerprint(),
            matrix,
            adjoint,
            lu,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Fails with [`Error::FactorizationStale`] when `kernel` is not the one
    /// this operator was factored from.
    pub fn ensure_current(&self, kernel: &KernelField) -> Result<()> {
        if kernel.fingerprint() == self.fingerprint {
            Ok(())
        } else {
            Err(Error::FactorizationStale)
        }
    }

    /// Refactors when `kernel` differs from the cached one; returns whether
    /// anything was recomputed.
    pub fn refresh(&mut self, kernel: &KernelField) -> Result<bool> {
        if self.ensure_current(kernel).is_ok() {
            return Ok(false);
        }
        *self = Self::new(kernel)?;
        Ok(true)
    }

    fn mul(&self, a: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(v.len())?;
        let x = DVector::from_column_slice(v);
        Ok((a * x).iter().copied().collect())
    }

    pub fn apply_k(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.mul(&self.matrix, v)
    }

    /// Application of `K*` with kernel `k(y, x)`.
    pub fn apply_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.mul(&self.adjoint, u)
    }

    /// `w = v - K v`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        let kv = self.apply_k(v)?;
        Ok(v.iter().zip(kv).map(|(a, b)| a - b).collect())
    }

    /// Solves `(I - K) v = w`.
    pub fn inverse(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(w.len())?;
        let rhs = DVector::from_column_slice(w);
        let v = self.lu.solve(&rhs).ok_or(Error::SingularTransform)?;
        Ok(v.iter().copied().collect())
    }

    /// `max |eig(K_d)|`, by a dense Schur decomposition up to 2048 nodes and
    /// power iteration above that.
    pub fn spectral_radius(&self) -> f64 {
        let len = self.matrix.nrows();
        if self.matrix.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        if len <= 2049 {
            self.matrix
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|z: &Complex64| z.norm())
                .fold(0.0, f64::max)
        } else {
            power_radius(&self.matrix, 500, 17)
        }
    }

    /// Weighted operator norms of `I - K` and its inverse from the singular
    /// values of `W^{1/2} (I - K_d) W^{-1/2}`.
    pub fn norms(&self) -> TransformNorms {
        let len = self.matrix.nrows();
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        let a = DMatrix::from_fn(len, len, |i, m| {
            let id = if i == m { 1.0 } else { 0.0 };
            sw[i] * (id - self.matrix[(i, m)]) / sw[m]
        });
        let s = a.singular_values();
        let max = s.iter().copied().fold(0.0, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        TransformNorms {
            forward: max,
            inverse: if min > 0.0 { 1.0 / min } else { f64::INFINITY },
        }
    }

    /// Largest `||(I-K)^{-1}(I-K) v - v|| / ||v||` over `trials` random
    /// vectors.
    pub fn roundtrip_error(&self, trials: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let v: Vec<f64> = (0..self.grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = self.inverse(&self.forward(&v)?)?;
            let err: Vec<f64> = back.iter().zip(&v).map(|(a, b)| a - b).collect();
            worst = worst.max(self.grid.norm(&err) / self.grid.norm(&v));
        }
        Ok(worst)
    }
}

/// Power-iteration estimate of the spectral radius from the growth of
/// `||A^k x||`.
fn power_radius(a: &DMatrix<f64>, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(a.nrows(), |_, _| rng.gen_range(-1.0..1.0));
    x /= x.norm();
    let mut log_growth = 0.0;
    let burn = iters / 2;
    for k in 0..iters {
        x = a * &x;
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        x /= n;
        if k >= burn {
            log_growth += n.ln();
        }
    }
    (log_growth / (iters - burn) as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{synthesize, GainCoefficients};
    use crate::spectral::Tolerances;

    fn op() -> (KernelField, TransformOperator) {
        let (_, k) = synthesize(3.0, 1.0, 6, 128, &Tolerances::for_synthesis()).unwrap();
        let t = TransformOperator::new(&k).unwrap();
        (k, t)
    }

    #[test]
    fn zero_maps_to_zero_and_linearity() {
        let (_, t) = op();
        let z = t.apply_k(&[0.0; 129]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let v: Vec<f64> = (0..129).map(|i| (i as f64 * 0.3).sin()).collect();
        let kv = t.apply_k(&v).unwrap();
        let v2: Vec<f64> = v.iter().map(|x| 2.5 * x).collect();
        let kv2 = t.apply_k(&v2).unwrap();
        for (a, b) in kv.iter().zip(&kv2) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
        assert!(matches!(t.apply_k(&[0.0; 5]), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn roundtrip() {
        let (_, t) = op();
        assert!(t.roundtrip_error(5, 3).unwrap() < 1e-10);
    }

    #[test]
    fn zero_kernel_is_identity() {
        let g = Grid::new(3.0, 64).unwrap();
        let k = KernelField::zero(g, 1.0);
        let t = TransformOperator::new(&k).unwrap();
        let v: Vec<f64> = (0..65).map(|i| (i as f64).cos()).collect();
        assert_eq!(t.forward(&v).unwrap(), v);
        assert_eq!(t.spectral_radius(), 0.0);
    }

    #[test]
    fn stale_factorization_detected() {
        let (k, mut t) = op();
        t.ensure_current(&k).unwrap();
        let mut vals = k.values().to_vec();
        vals[129 * 5 + 7] += 1e-3;
        let k2 = KernelField::from_parts(
            k.grid().clone(),
            1.0,
            vals,
            k.gain().to_vec(),
            GainCoefficients {
                lambda: 1.0,
                values: Vec::new(),
                condition: 0.0,
                residual: 0.0,
            },
        )
        .unwrap();
        assert!(matches!(t.ensure_current(&k2), Err(Error::FactorizationStale)));
        assert!(t.refresh(&k2).unwrap());
        assert!(!t.refresh(&k2).unwrap());
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let (_, t) = op();
        let dense = t.spectral_radius();
        let power = power_radius(t.matrix(), 2000, 5);
        assert!(dense < 1.0);
        assert!((dense - power).abs() < 0.2 * dense, "{dense} vs {power}");
    }

    #[test]
    fn norms_are_consistent() {
        let (_, t) = op();
        let n = t.norms();
        assert!(n.forward >= 1.0 && n.inverse >= 1.0);
        assert!(n.condition() < 10.0);
    }
}
