//! Spectral synthesis of the transform kernel and the feedback gain.
//!
//! With `a_{jk} = 1 / (i mu_j - i mu_k + lambda)` the coefficients solve
//! `c_j + lambda sum_{k != j} a_{jk} c_k = 1`, the perturbed modes are
//!
//! ```text
//! varphi_j = conj(phi_j)
//!          + sum_{k != j} lambda phi_k'(0) / (phi_j'(0) (i mu_k - i mu_j + lambda)) conj(phi_k)
//! ```
//!
//! and the kernel is `k(x, y) = sum_j [conj(phi_j(x)) - c_j varphi_j(x)] phi_j(y)`.
//!
//! Sums over modes run in ascending `|j|`, with the index of the same sign as
//! the target first. Because negative modes are exact conjugates, every
//! conjugate pair of terms then cancels its imaginary part exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{build_basis, EigenMode, SpectralBasis, Tolerances};
use crate::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Solution `c_j` of the coefficient system, stored in basis order
/// `j = -N..-1, 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCoefficients {
    pub lambda: f64,
    pub values: Vec<Complex64>,
    /// 1-norm condition estimate of the coupling matrix (0 when unknown).
    pub condition: f64,
    /// `max |M c - 1|` before symmetrization.
    pub residual: f64,
}

impl GainCoefficients {
    pub fn count(&self) -> usize {
        self.values.len() / 2
    }

    pub fn get(&self, j: i32) -> Complex64 {
        let n = self.count() as i32;
        assert!(j != 0 && j.abs() <= n, "coefficient index {j} out of range");
        let p = if j < 0 { j + n } else { j + n - 1 };
        self.values[p as usize]
    }
}

/// `M_{jj} = 1`, `M_{jk} = lambda / (i mu_j - i mu_k + lambda)`.
pub fn coupling_matrix(basis: &SpectralBasis, lambda: f64) -> Result<DMatrix<Complex64>> {
    let mus: Vec<f64> = basis.modes().iter().map(|m| m.mu).collect();
    coupling_from_mus(&mus, lambda)
}

/// [`coupling_matrix`] from the eigenvalues alone, in the order given.
pub fn coupling_from_mus(mus: &[f64], lambda: f64) -> Result<DMatrix<Complex64>> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let n = mus.len();
    let mut m = DMatrix::from_element(n, n, ZERO);
    for a in 0..n {
        m[(a, a)] = Complex64::new(1.0, 0.0);
        for b in 0..n {
            if a == b {
                continue;
            }
            let denom = Complex64::new(lambda, mus[a] - mus[b]);
            if denom.norm() < 1e-14 {
                return Err(Error::SingularEntry {
                    row: a,
                    col: b,
                    magnitude: denom.norm(),
                });
            }
            m[(a, b)] = lambda / denom;
        }
    }
    Ok(m)
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `M c = 1` by LU. Assumes the basis ordering, so that row `p` and
/// row `2N - 1 - p` belong to conjugate modes.
pub fn solve_gain_coefficients(m: &DMatrix<Complex64>, lambda: f64) -> Result<GainCoefficients> {
    let n = m.nrows();
    if n != m.ncols() || n % 2 != 0 {
        return Err(Error::Config(format!(
            "coupling matrix must be square of even order, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let lu = m.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(m) * one_norm(&inverse);
    if !(condition <= 1e12) {
        return Err(Error::IllConditioned { condition });
    }
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let c = lu.solve(&ones).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let residual = (m * &c - &ones).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let c_max = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > 1e-10 * c_max.max(1.0) {
        return Err(Error::SolveInaccurate(format!(
            "residual {residual:e} for |c| = {c_max:e}"
        )));
    }
    let mut values: Vec<Complex64> = c.iter().copied().collect();
    for p in n / 2..n {
        let q = n - 1 - p;
        let gap = (values[q] - values[p].conj()).norm();
        if gap > 1e-10 * c_max.max(1.0) {
            return Err(Error::SolveInaccurate(format!(
                "c_-j differs from conj(c_j) by {gap:e}"
            )));
        }
        values[q] = values[p].conj();
    }
    Ok(GainCoefficients {
        lambda,
        values,
        condition,
        residual,
    })
}

/// Perturbed mode `varphi_j` with analytic derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedMode {
    pub index: i32,
    pub values: Vec<Complex64>,
    pub derivatives: Vec<Complex64>,
    pub dphi0: Complex64,
    pub dphi_l: Complex64,
}

/// Summation order for mode `target`: ascending `|k|`, same sign first.
fn mirrored_order(basis: &SpectralBasis, target: i32) -> Vec<usize> {
    let n = basis.count() as i32;
    let s = target.signum();
    (1..=n)
        .flat_map(|k| [basis.position(s * k), basis.position(-s * k)])
        .collect()
}

pub fn perturbed_mode(basis: &SpectralBasis, lambda: f64, j: i32) -> Result<PerturbedMode> {
    let modes = basis.modes();
    let target = basis.mode(j);
    if target.dphi0.norm() == 0.0 {
        return Err(Error::DivideByZero { index: j });
    }
    let conj = |v: &[Complex64]| -> Vec<Complex64> { v.iter().map(|z| z.conj()).collect() };
    let mut values = conj(&target.values);
    let mut derivatives = conj(&target.derivatives);
    let mut dphi0 = target.dphi0.conj();
    let mut dphi_l = target.dphi_l.conj();
    for p in mirrored_order(basis, j) {
        let other: &EigenMode = &modes[p];
        if other.index == j {
            continue;
        }
        let denom = target.dphi0 * Complex64::new(lambda, other.mu - target.mu);
        let weight = lambda * other.dphi0 / denom;
        for (acc, z) in values.iter_mut().zip(&other.values) {
            *acc += weight * z.conj();
        }
        for (acc, z) in derivatives.iter_mut().zip(&other.derivatives) {
            *acc += weight * z.conj();
        }
        dphi0 += weight * other.dphi0.conj();
        dphi_l += weight * other.dphi_l.conj();
    }
    let last = values.len() - 1;
    values[0] = ZERO;
    values[last] = ZERO;
    Ok(PerturbedMode {
        index: j,
        values,
        derivatives,
        dphi0,
        dphi_l,
    })
}

/// Norms entering the nonlinear energy estimate and boundary diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelDiagnostics {
    pub max_imag: f64,
    pub max_real: f64,
    pub gain_max_imag: f64,
    /// `L^2` norm over `x` of `k_y(x, 0)`.
    pub ky_edge_left: f64,
    /// `L^2` norm over `x` of `k_y(x, L)`.
    pub ky_edge_right: f64,
    /// `L^2` norm of `k_y` on the square.
    pub ky_norm: f64,
    /// `sup_x int |k_x(x, y)|^2 dy`.
    pub kx_row_sup: f64,
    /// `sup_y (int |k_y(x, y)|^2 dx)^{1/2}`.
    pub ky_col_sup: f64,
    /// `L^2` norm of `k` on the square.
    pub k_norm: f64,
}

impl KernelDiagnostics {
    /// Constant of the cubic term in the nonlinear energy inequality, given
    /// an estimate of `||(I - K)^{-1}||`.
    pub fn c_hat(&self, inverse_norm: f64) -> f64 {
        inverse_norm.powi(3)
            * (0.5 * self.kx_row_sup + self.ky_col_sup + self.ky_col_sup * self.k_norm)
    }
}

/// Assembly thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Relative bound on `Im k` against `1 + max |Re k|`.
    pub realness: f64,
    /// Relative bound on the `k_y` edge norms against `||k_y||`.
    pub ky_edge: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            realness: 1e-9,
            ky_edge: 1e-3,
        }
    }
}

/// Real kernel samples `k(x_i, y_m)` (row-major in `i`), gain samples
/// `g(y_m) = k_x(L, y_m)` and the coefficients they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    grid: Grid,
    lambda: f64,
    values: Vec<f64>,
    gain: Vec<f64>,
    coefficients: GainCoefficients,
    diagnostics: Option<KernelDiagnostics>,
}

impl KernelField {
    /// Wraps precomputed samples (for instance from a cache file).
    pub fn from_parts(
        grid: Grid,
        lambda: f64,
        values: Vec<f64>,
        gain: Vec<f64>,
        coefficients: GainCoefficients,
    ) -> Result<Self> {
        let len = grid.len();
        if values.len() != len * len {
            return Err(Error::GridMismatch {
                expected: len * len,
                actual: values.len(),
            });
        }
        grid.check_len(gain.len())?;
        Ok(Self {
            grid,
            lambda,
            values,
            gain,
            coefficients,
            diagnostics: None,
        })
    }

    pub fn with_diagnostics(mut self, diagnostics: KernelDiagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }

    /// `k = 0`, `g = 0`: the open-loop system.
    pub fn zero(grid: Grid, lambda: f64) -> Self {
        let len = grid.len();
        Self {
            values: vec![0.0; len * len],
            gain: vec![0.0; len],
            coefficients: GainCoefficients {
                lambda,
                values: Vec::new(),
                condition: 1.0,
                residual: 0.0,
            },
            diagnostics: None,
            grid,
            lambda,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn length(&self) -> f64 {
        self.grid.length()
    }

    pub fn modes(&self) -> usize {
        self.coefficients.count()
    }

    /// Row-major samples, `values()[i * len + m] = k(x_i, y_m)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.values[i * self.grid.len() + m]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[i * len..(i + 1) * len]
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn coefficients(&self) -> &GainCoefficients {
        &self.coefficients
    }

    pub fn diagnostics(&self) -> Option<&KernelDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// Content hash over the grid, samples and gain.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.grid.length().to_le_bytes());
        h.update((self.grid.intervals() as u64).to_le_bytes());
        h.update(self.lambda.to_le_bytes());
        for v in self.values.iter().chain(&self.gain) {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    /// `int g(y) v(y) dy`.
    pub fn feedback(&self, v: &[f64]) -> Result<f64> {
        self.grid.check_len(v.len())?;
        Ok(self.grid.inner(&self.gain, v))
    }
}

/// `conj(phi_j) - c_j varphi_j` and its derivative, per mode.
struct Profiles {
    values: Vec<Vec<Complex64>>,
    derivatives: Vec<Vec<Complex64>>,
    /// `conj(phi_j'(L)) - c_j varphi_j'(L)`
    end_slopes: Vec<Complex64>,
}

fn profiles(basis: &SpectralBasis, coefficients: &GainCoefficients) -> Result<Profiles> {
    let lambda = coefficients.lambda;
    let perturbed: Vec<PerturbedMode> = basis
        .modes()
        .par_iter()
        .map(|m| perturbed_mode(basis, lambda, m.index))
        .collect::<Result<_>>()?;
    let mut out = Profiles {
        values: Vec::with_capacity(perturbed.len()),
        derivatives: Vec::with_capacity(perturbed.len()),
        end_slopes: Vec::with_capacity(perturbed.len()),
    };
    for ((mode, pm), &c) in basis.modes().iter().zip(&perturbed).zip(&coefficients.values) {
        let combine = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x.conj() - c * y).collect()
        };
        out.values.push(combine(&mode.values, &pm.values));
        out.derivatives.push(combine(&mode.derivatives, &pm.derivatives));
        out.end_slopes.push(mode.dphi_l.conj() - c * pm.dphi_l);
    }
    Ok(out)
}

/// `sum_j left_j(x_i) right_j(y_m)` over the summation order.
fn series_field(
    order: &[usize],
    left: &[Vec<Complex64>],
    right: &[Vec<Complex64>],
    len: usize,
) -> Vec<Complex64> {
    let mut out = vec![ZERO; len * len];
    out.par_chunks_mut(len).enumerate().for_each(|(i, row)| {
        for (m, slot) in row.iter_mut().enumerate() {
            let mut acc = ZERO;
            for &p in order {
                acc += left[p][i] * right[p][m];
            }
            *slot = acc;
        }
    });
    out
}

fn gain_series(order: &[usize], basis: &SpectralBasis, end_slopes: &[Complex64]) -> Vec<Complex64> {
    let len = basis.grid().len();
    (0..len)
        .map(|m| {
            let mut acc = ZERO;
            for &p in order {
                acc += end_slopes[p] * basis.modes()[p].values[m];
            }
            acc
        })
        .collect()
}

fn max_parts(v: &[Complex64]) -> (f64, f64) {
    v.iter().fold((0.0f64, 0.0f64), |(r, i), z| {
        (r.max(z.re.abs()), i.max(z.im.abs()))
    })
}

/// `g(y) = sum_j [conj(phi_j'(L)) - c_j varphi_j'(L)] phi_j(y)`.
pub fn feedback_gain(basis: &SpectralBasis, coefficients: &GainCoefficients) -> Result<Vec<f64>> {
    let prof = profiles(basis, coefficients)?;
    let g = gain_series(&basis.summation_order(), basis, &prof.end_slopes);
    let (re, im) = max_parts(&g);
    if im > 1e-9 * (1.0 + re) {
        return Err(Error::RealnessViolation {
            max_imag: im,
            max_real: re,
        });
    }
    Ok(g.into_iter().map(|z| z.re).collect())
}

/// Sums the kernel series on the basis grid and checks realness, the edge
/// values and the `k_y` edge traces.
pub fn assemble_kernel(
    basis: &SpectralBasis,
    coefficients: &GainCoefficients,
    opts: &KernelOptions,
) -> Result<KernelField> {
    if coefficients.values.len() != basis.modes().len() {
        return Err(Error::Config(format!(
            "{} coefficients for {} modes",
            coefficients.values.len(),
            basis.modes().len()
        )));
    }
    let grid = basis.grid();
    let len = grid.len();
    let n = grid.intervals();
    let order = basis.summation_order();
    let prof = profiles(basis, coefficients)?;
    let phis: Vec<Vec<Complex64>> = basis.modes().iter().map(|m| m.values.clone()).collect();
    let dphis: Vec<Vec<Complex64>> = basis.modes().iter().map(|m| m.derivatives.clone()).collect();

    let k = series_field(&order, &prof.values, &phis, len);
    let (max_real, max_imag) = max_parts(&k);
    if max_imag > opts.realness * (1.0 + max_real) {
        return Err(Error::RealnessViolation { max_imag, max_real });
    }
    let values: Vec<f64> = k.iter().map(|z| z.re).collect();
    let edge = (0..len)
        .flat_map(|t| [values[t], values[n * len + t], values[t * len], values[t * len + n]])
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if edge != 0.0 {
        return Err(Error::BoundaryViolation { max_edge: edge });
    }

    let g = gain_series(&order, basis, &prof.end_slopes);
    let (g_re, g_im) = max_parts(&g);
    if g_im > opts.realness * (1.0 + g_re) {
        return Err(Error::RealnessViolation {
            max_imag: g_im,
            max_real: g_re,
        });
    }
    let gain: Vec<f64> = g.iter().map(|z| z.re).collect();

    let kx = series_field(&order, &prof.derivatives, &phis, len);
    let ky = series_field(&order, &prof.values, &dphis, len);
    let re = |v: &[Complex64]| -> Vec<f64> { v.iter().map(|z| z.re).collect() };
    let (kx, ky) = (re(&kx), re(&ky));
    let edge_trace = |m: usize| -> f64 {
        let col: Vec<f64> = (0..len).map(|i| ky[i * len + m]).collect();
        grid.norm(&col)
    };
    let sq: Vec<f64> = ky.iter().map(|v| v * v).collect();
    let ky_norm = grid.integrate_square(&sq).sqrt();
    let kx_row_sup = (0..len)
        .map(|i| {
            let row = &kx[i * len..(i + 1) * len];
            grid.inner(row, row)
        })
        .fold(0.0, f64::max);
    let ky_col_sup = (0..len).map(edge_trace).fold(0.0, f64::max);
    let ksq: Vec<f64> = values.iter().map(|v| v * v).collect();
    let diagnostics = KernelDiagnostics {
        max_imag,
        max_real,
        gain_max_imag: g_im,
        ky_edge_left: edge_trace(0),
        ky_edge_right: edge_trace(n),
        ky_norm,
        kx_row_sup,
        ky_col_sup,
        k_norm: grid.integrate_square(&ksq).sqrt(),
    };
    let ky_edge = diagnostics.ky_edge_left.max(diagnostics.ky_edge_right);
    if ky_edge > opts.ky_edge * ky_norm {
        return Err(Error::BoundaryViolation { max_edge: ky_edge });
    }

    Ok(KernelField {
        grid: grid.clone(),
        lambda: coefficients.lambda,
        values,
        gain,
        coefficients: coefficients.clone(),
        diagnostics: Some(diagnostics),
    })
}

/// Basis, coefficients and kernel in one call.
pub fn synthesize(
    length: f64,
    lambda: f64,
    modes: usize,
    intervals: usize,
    tol: &Tolerances,
) -> Result<(SpectralBasis, KernelField)> {
    let grid = Grid::new(length, intervals)?;
    let basis = build_basis(length, lambda, modes, &grid, tol)?;
    let m = coupling_matrix(&basis, lambda)?;
    let c = solve_gain_coefficients(&m, lambda)?;
    let kernel = assemble_kernel(&basis, &c, &KernelOptions::default())?;
    Ok((basis, kernel))
}

type Profile = fn(f64, f64) -> [f64; 4];

/// Separable test function `rho(x, y) = a(x) b(y)`; each factor returns its
/// value and first three derivatives at `(t, L)`.
#[derive(Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    a: Profile,
    b: Profile,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

fn sin2(t: f64, l: f64, freq: f64) -> [f64; 4] {
    let w = freq * std::f64::consts::PI / l;
    let (s2, c2) = (2.0 * w * t).sin_cos();
    let s = (w * t).sin();
    [s * s, w * s2, 2.0 * w * w * c2, -4.0 * w.powi(3) * s2]
}

fn sin1(t: f64, l: f64) -> [f64; 4] {
    let w = std::f64::consts::PI / l;
    let (s, c) = (w * t).sin_cos();
    [s, w * c, -w * w * s, -w.powi(3) * c]
}

impl TestFunction {
    pub fn new(name: &'static str, a: Profile, b: Profile) -> Self {
        Self { name, a, b }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| [0.0; 4], |_, _| [0.0; 4])
    }

    /// The three admissible functions used by the diagnostics.
    pub fn canned() -> [TestFunction; 3] {
        [
            Self::new("sin2_sin2", |t, l| sin2(t, l, 1.0), |t, l| sin2(t, l, 1.0)),
            Self::new("sin2x2_siny", |t, l| sin2(t, l, 2.0), sin1),
            Self::new(
                "poly",
                |t, l| {
                    let u = l - t;
                    [
                        t * t * u * u,
                        2.0 * t * u * (l - 2.0 * t),
                        12.0 * t * t - 12.0 * l * t + 2.0 * l * l,
                        24.0 * t - 12.0 * l,
                    ]
                },
                |t, l| [t * (l - t), l - 2.0 * t, -2.0, 0.0],
            ),
        ]
    }

    pub fn eval(&self, x: f64, y: f64, l: f64) -> f64 {
        (self.a)(x, l)[0] * (self.b)(y, l)[0]
    }

    /// Edge values and `x`-derivative on both `x` edges must vanish.
    pub fn check_admissible(&self, grid: &Grid) -> Result<()> {
        let l = grid.length();
        let scale = 1.0
            + grid
                .nodes()
                .iter()
                .map(|&t| (self.a)(t, l)[0].abs())
                .fold(0.0, f64::max)
                * grid
                    .nodes()
                    .iter()
                    .map(|&t| (self.b)(t, l)[0].abs())
                    .fold(0.0, f64::max);
        let tol = 1e-10 * scale;
        let (a0, al) = ((self.a)(0.0, l), (self.a)(l, l));
        let (b0, bl) = ((self.b)(0.0, l), (self.b)(l, l));
        for &t in grid.nodes() {
            let (at, bt) = ((self.a)(t, l), (self.b)(t, l));
            let checks = [
                ("rho(0, y)", a0[0] * bt[0]),
                ("rho(L, y)", al[0] * bt[0]),
                ("rho(x, 0)", at[0] * b0[0]),
                ("rho(x, L)", at[0] * bl[0]),
                ("rho_x(0, y)", a0[1] * bt[0]),
                ("rho_x(L, y)", al[1] * bt[0]),
            ];
            for (what, v) in checks {
                if v.abs() > tol {
                    return Err(Error::InadmissibleTestFunction(format!(
                        "{}: {what} = {v:e} at {t}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `| iint (rho_yyy + rho_y + rho_xxx + rho_x - lambda rho) k dx dy + lambda int rho(x, x) dx |`.
pub fn transposition_residual(kernel: &KernelField, rho: &TestFunction) -> Result<f64> {
    let grid = kernel.grid();
    rho.check_admissible(grid)?;
    let l = grid.length();
    let lambda = kernel.lambda();
    let len = grid.len();
    let a: Vec<[f64; 4]> = grid.nodes().iter().map(|&t| (rho.a)(t, l)).collect();
    let b: Vec<[f64; 4]> = grid.nodes().iter().map(|&t| (rho.b)(t, l)).collect();
    let mut f = vec![0.0; len * len];
    for i in 0..len {
        for m in 0..len {
            let (ax, by) = (a[i], b[m]);
            let op = ax[0] * (by[3] + by[1]) + (ax[3] + ax[1]) * by[0] - lambda * ax[0] * by[0];
            f[i * len + m] = op * kernel.at(i, m);
        }
    }
    let diag: Vec<f64> = (0..len).map(|i| a[i][0] * b[i][0]).collect();
    Ok((grid.integrate_square(&f) + lambda * grid.integrate(&diag)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, nx: usize) -> SpectralBasis {
        let g = Grid::new(3.0, nx).unwrap();
        build_basis(3.0, 1.0, n, &g, &Tolerances::for_synthesis()).unwrap()
    }

    #[test]
    fn coupling_is_hermitian_with_unit_diagonal() {
        let b = basis(4, 256);
        let m = coupling_matrix(&b, 1.0).unwrap();
        for a in 0..8 {
            assert_eq!(m[(a, a)], Complex64::new(1.0, 0.0));
            for c in 0..8 {
                assert!((m[(a, c)] - m[(c, a)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_pair_entries() {
        let b = basis(1, 128);
        let m = coupling_matrix(&b, 0.7).unwrap();
        let mu = b.mode(1).mu;
        let expect = 0.7 / Complex64::new(0.7, -2.0 * mu);
        assert!((m[(0, 1)] - expect).norm() < 1e-15);
    }

    #[test]
    fn tiny_lambda_gives_unit_coefficients() {
        let b = basis(5, 256);
        let m = coupling_matrix(&b, 1e-8).unwrap();
        let c = solve_gain_coefficients(&m, 1e-8).unwrap();
        assert!(c.values.iter().all(|z| (z - 1.0).norm() < 1e-6));
        let p = perturbed_mode(&b, 1e-8, 2).unwrap();
        let gap = p
            .values
            .iter()
            .zip(&b.mode(2).values)
            .map(|(a, z)| (a - z.conj()).norm())
            .fold(0.0, f64::max);
        assert!(gap < 1e-6);
    }

    #[test]
    fn coefficients_pair_exactly() {
        let b = basis(6, 256);
        let m = coupling_matrix(&b, 1.0).unwrap();
        let c = solve_gain_coefficients(&m, 1.0).unwrap();
        for j in 1..=6 {
            assert_eq!(c.get(-j), c.get(j).conj());
        }
        assert!(c.condition.is_finite() && c.condition >= 1.0);
    }

    #[test]
    fn perturbed_modes_conjugate_exactly() {
        let b = basis(5, 128);
        let p = perturbed_mode(&b, 1.0, 3).unwrap();
        let q = perturbed_mode(&b, 1.0, -3).unwrap();
        for (a, z) in p.values.iter().zip(&q.values) {
            assert_eq!(*z, a.conj());
        }
        assert_eq!(q.dphi_l, p.dphi_l.conj());
    }

    #[test]
    fn kernel_is_real_and_vanishes_on_edges() {
        let b = basis(8, 256);
        let m = coupling_matrix(&b, 1.0).unwrap();
        let c = solve_gain_coefficients(&m, 1.0).unwrap();
        let k = assemble_kernel(&b, &c, &KernelOptions::default()).unwrap();
        let d = k.diagnostics().unwrap();
        assert!(d.max_imag <= 1e-9 * d.max_real);
        assert!(d.max_real > 0.0);
        assert_eq!(k.feedback(&vec![0.0; 257]).unwrap(), 0.0);
        assert!(k.feedback(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_test_function_has_zero_residual() {
        let b = basis(4, 128);
        let m = coupling_matrix(&b, 1.0).unwrap();
        let c = solve_gain_coefficients(&m, 1.0).unwrap();
        let k = assemble_kernel(&b, &c, &KernelOptions::default()).unwrap();
        assert_eq!(transposition_residual(&k, &TestFunction::zero()).unwrap(), 0.0);
    }

    #[test]
    fn canned_test_functions_admissible() {
        let g = Grid::new(3.0, 64).unwrap();
        for t in TestFunction::canned() {
            t.check_admissible(&g).unwrap();
        }
        let bad = TestFunction::new("bad", sin1, sin1);
        assert!(matches!(
            bad.check_admissible(&g),
            Err(Error::InadmissibleTestFunction(_))
        ));
    }

    #[test]
    fn canned_derivatives_match_differences() {
        let l = 3.0;
        let h = 1e-4;
        for t in TestFunction::canned() {
            for f in [t.a, t.b] {
                for &x in &[0.4, 1.3, 2.2] {
                    let d = (f(x + h, l)[0] - f(x - h, l)[0]) / (2.0 * h);
                    let d3 = (f(x + h, l)[2] - f(x - h, l)[2]) / (2.0 * h);
                    assert!((d - f(x, l)[1]).abs() < 1e-6);
                    assert!((d3 - f(x, l)[3]).abs() < 1e-5);
                }
            }
        }
    }
}
