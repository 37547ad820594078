//! Finite-difference eigenvalues of `A phi = -phi''' - phi'` with
//! `phi(0) = phi(L) = 0`, `phi'(0) = phi'(L)`, independent of the
//! characteristic equation.
//!
//! The discrete problem is the pencil `B phi = z C phi` over all nodes
//! `0..=n`: rows `0` and `n` hold the Dirichlet conditions, row `1` holds
//! `phi'(0) - phi'(L) = 0` (one-sided fourth-order stencils) and rows
//! `2..n-1` hold fourth-order differences of `-phi''' - phi'`; `C` is the
//! identity on those rows and zero on the constraint rows. A dense solve on a
//! coarse grid supplies starting shifts that Rayleigh quotient iteration
//! then refines on the fine grid.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::stencil::offset_weights;

/// Fourth-order stencil for `-d^3/dx^3 - d/dx` at node `i`, as
/// `(node, weight)` pairs.
fn operator_row(i: usize, n: usize, h: f64) -> Vec<(usize, f64)> {
    let window = |half: usize| -> Vec<i64> {
        let width = 2 * half + 1;
        let start = i.saturating_sub(half).min(n + 1 - width);
        (start..start + width).map(|j| j as i64 - i as i64).collect()
    };
    let o3 = window(3);
    let o1 = window(2);
    let w3 = offset_weights::<f64>(&o3, 3, h);
    let w1 = offset_weights::<f64>(&o1, 1, h);
    let mut row: Vec<(usize, f64)> = Vec::new();
    let mut push = |node: usize, w: f64| match row.iter_mut().find(|(j, _)| *j == node) {
        Some(e) => e.1 += w,
        None => row.push((node, w)),
    };
    for (o, w) in o3.iter().zip(&w3) {
        push((i as i64 + o) as usize, -w);
    }
    for (o, w) in o1.iter().zip(&w1) {
        push((i as i64 + o) as usize, -w);
    }
    row
}

/// `phi'(0) - phi'(L)` with 5-point one-sided stencils.
fn constraint_row(n: usize, h: f64) -> Vec<(usize, f64)> {
    let left = offset_weights::<f64>(&[0, 1, 2, 3, 4], 1, h);
    let right = offset_weights::<f64>(&[-4, -3, -2, -1, 0], 1, h);
    let mut row: Vec<(usize, f64)> = left.iter().enumerate().map(|(k, &w)| (k, w)).collect();
    row.extend(right.iter().enumerate().map(|(k, &w)| (n - 4 + k, -w)));
    row
}

/// Eigenvalues of the pencil on `n` intervals by dense elimination of the
/// constraint rows. Returns the `count` smallest positive `mu = Im z` among
/// eigenvalues with `|Re z| < 0.01 |z|`.
pub fn dense_mus(length: f64, n: usize, count: usize) -> Result<Vec<f64>> {
    if n < 12 {
        return Err(Error::InvalidGrid("oracle needs at least 12 intervals".into()));
    }
    let h = length / n as f64;
    // phi_1 = sum_k e_k phi_k from the constraint row
    let cons = constraint_row(n, h);
    let a1 = cons.iter().find(|(j, _)| *j == 1).map(|e| e.1).unwrap_or(0.0);
    let mut elim = vec![0.0; n + 1];
    for &(j, w) in &cons {
        if j != 1 {
            elim[j] -= w / a1;
        }
    }
    // unknowns phi_2..phi_{n-1}
    let m = n - 2;
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for i in 2..n {
        for (j, w) in operator_row(i, n, h) {
            match j {
                0 => {}
                1 => {
                    for (k, e) in elim.iter().enumerate().take(n).skip(2) {
                        mat[(i - 2, k - 2)] += w * e;
                    }
                }
                j if j == n => {}
                j => mat[(i - 2, j - 2)] += w,
            }
        }
    }
    let mut mus: Vec<f64> = mat
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0 && z.re.abs() < 0.01 * z.norm())
        .map(|z| z.im)
        .collect();
    mus.sort_by(f64::total_cmp);
    mus.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    if mus.len() < count {
        return Err(Error::RootCountMismatch {
            requested: count,
            found: mus.len(),
        });
    }
    mus.truncate(count);
    Ok(mus)
}

/// Folded node ordering that keeps the wrap-around constraint row banded.
fn fold(i: usize, n: usize) -> usize {
    if i <= n / 2 {
        2 * i
    } else {
        2 * (n - i) + 1
    }
}

const BAND: usize = 14;

struct Pencil {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Pencil {
    fn new(length: f64, n: usize) -> Self {
        let h = length / n as f64;
        let mut rows = vec![Vec::new(); n + 1];
        rows[0] = vec![(0, 1.0)];
        rows[n] = vec![(n, 1.0)];
        rows[1] = constraint_row(n, h);
        for (i, row) in rows.iter_mut().enumerate().take(n).skip(2) {
            *row = operator_row(i, n, h);
        }
        Self { n, rows }
    }

    fn is_constraint(&self, i: usize) -> bool {
        i <= 1 || i == self.n
    }

    /// Factors `B - shift C` in folded ordering.
    fn shifted(&self, shift: Complex64) -> Result<crate::banded::BandedLu<Complex64>> {
        let n = self.n;
        let mut m = BandedMatrix::<Complex64>::zeros(n + 1, BAND, BAND);
        for (i, row) in self.rows.iter().enumerate() {
            let r = fold(i, n);
            for &(j, w) in row {
                m.add(r, fold(j, n), Complex64::new(w, 0.0));
            }
            if !self.is_constraint(i) {
                m.add(r, r, -shift);
            }
        }
        m.factor()
            .map_err(|p| Error::SingularStepMatrix { row: p.0 })
    }

    fn apply_b(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| x[j] * w).sum())
            .collect()
    }

    /// `x^H B x / x^H C x`.
    fn rayleigh(&self, x: &[Complex64]) -> Complex64 {
        let bx = self.apply_b(x);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for i in 0..=self.n {
            if self.is_constraint(i) {
                continue;
            }
            num += x[i].conj() * bx[i];
            den += x[i].conj() * x[i];
        }
        num / den
    }
}

/// Refines an eigenvalue near `i mu0` on `n` intervals by shift-and-invert
/// followed by Rayleigh quotient iteration.
pub fn refine_mu(length: f64, n: usize, mu0: f64) -> Result<f64> {
    let pencil = Pencil::new(length, n);
    let mut shift = Complex64::new(0.0, mu0 * (1.0 + 1e-7));
    let mut x: Vec<Complex64> = (0..=n)
        .map(|i| Complex64::new(((i * 7919) % 13) as f64 - 6.0, ((i * 104_729) % 11) as f64 - 5.0))
        .collect();
    let mut z = shift;
    for it in 0..12 {
        let lu = pencil.shifted(shift)?;
        let mut rhs: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n + 1];
        for i in 0..=n {
            if !pencil.is_constraint(i) {
                rhs[fold(i, n)] = x[i];
            }
        }
        lu.solve_in_place(&mut rhs);
        let mut y = vec![Complex64::new(0.0, 0.0); n + 1];
        for i in 0..=n {
            y[i] = rhs[fold(i, n)];
        }
        let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        for v in &mut y {
            *v /= norm;
        }
        x = y;
        let next = pencil.rayleigh(&x);
        let done = (next - z).norm() <= 1e-13 * next.norm();
        z = next;
        // plain inverse iteration first, so the vector settles on the
        // eigenvalue nearest the coarse estimate
        if it >= 2 {
            shift = z;
        }
        if done && it >= 3 {
            break;
        }
    }
    Ok(z.im)
}

/// First `count` positive `mu`: dense on `coarse` intervals, refined on
/// `fine` intervals.
pub fn fd_mus(length: f64, count: usize, coarse: usize, fine: usize) -> Result<Vec<f64>> {
    dense_mus(length, coarse, count)?
        .into_iter()
        .map(|mu| refine_mu(length, fine, mu))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_bijective() {
        let n = 10;
        let mut seen: Vec<usize> = (0..=n).map(|i| fold(i, n)).collect();
        seen.sort();
        assert_eq!(seen, (0..=n).collect::<Vec<_>>());
    }

    #[test]
    fn operator_row_exact_on_cubics() {
        // -(p''' + p') for p = x^3 is -(6 + 3 x^2)
        let n = 40;
        let h = 0.1;
        for i in [2usize, 3, 20, 38, 39] {
            let v: f64 = operator_row(i, n, h)
                .iter()
                .map(|&(j, w)| w * (j as f64 * h).powi(3))
                .sum();
            let x = i as f64 * h;
            assert!((v + 6.0 + 3.0 * x * x).abs() < 1e-8, "row {i}: {v}");
        }
    }

    #[test]
    fn refinement_improves_dense_estimate() {
        let coarse = dense_mus(3.0, 200, 3).unwrap();
        let fine = refine_mu(3.0, 1024, coarse[0]).unwrap();
        assert!((fine - coarse[0]).abs() < 1e-3 * fine);
        // first eigenvalue for L = 3, from the characteristic equation
        assert!((fine - 4.084_417_8).abs() < 1e-5, "{fine}");
    }
}
