//! Spectrum of `A = -d^3/dx^3 - d/dx` on `(0, L)` with `phi(0) = phi(L) = 0`
//! and `phi'(0) = phi'(L)`.
//!
//! Each eigenvalue `i mu` is parametrized by a real `tau` with
//! `mu = 2 tau (4 tau^2 - 1)`. With `s = sqrt(3 tau^2 - 1)` the eigenfunction
//! is
//!
//! ```text
//! phi(x) = alpha { e^{-i tau x} [S1(x) + e^{3 i tau L} S2(x)] - e^{2 i tau x} }
//! S1(x) = sinh(s (L - x)) / sinh(s L),   S2(x) = sinh(s x) / sinh(s L)
//! ```
//!
//! and `tau` is a root of
//! `s cos(2 tau L) - 3 tau sin(tau L) sinh(s L) - s cos(tau L) cosh(s L)`.
//! For large `s L` the hyperbolic ratios are evaluated through decaying
//! exponentials only, so nothing overflows for high modes. Modes with
//! negative index are the complex conjugates of the positive ones.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stencil::offset_weights;
use crate::{roots, Grid};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Validation thresholds for modes and bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative bound on `|phi'(0) - phi'(L)|`.
    pub bc: f64,
    /// Bound on `| ||phi||_2 - 1 |`.
    pub norm: f64,
    /// Max-norm bound on `G - I` for the quadrature Gram matrix.
    pub gram: f64,
    /// Relative bisection width for `tau`.
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bc: 1e-8,
            norm: 1e-10,
            gram: 1e-6,
            root: 1e-12,
        }
    }
}

impl Tolerances {
    /// Gram tolerance suited to the coarser grids used for kernel synthesis,
    /// where Simpson's rule on the `e^{-s x}` boundary layers of the highest
    /// modes limits orthogonality to roughly `1e-5`.
    pub fn for_synthesis() -> Self {
        Self {
            gram: 1e-4,
            ..Self::default()
        }
    }
}

/// Lengths `2 pi sqrt((l^2 + l j + j^2) / 3)` for `1 <= l <= l_max`,
/// `1 <= j <= j_max`, sorted and deduplicated.
pub fn critical_lengths(l_max: usize, j_max: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=l_max)
        .flat_map(|l| {
            (1..=j_max).map(move |j| {
                let (l, j) = (l as f64, j as f64);
                2.0 * PI * ((l * l + l * j + j * j) / 3.0).sqrt()
            })
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    out
}

/// Whether `length` stays more than `tol` away from every enumerated
/// critical length. Fails when the enumeration does not reach past `length`.
pub fn is_noncritical(length: f64, l_max: usize, j_max: usize, tol: f64) -> Result<bool> {
    Ok(critical_distance_in(length, l_max, j_max)? > tol)
}

fn critical_distance_in(length: f64, l_max: usize, j_max: usize) -> Result<f64> {
    let insufficient = Error::RangeInsufficient {
        length,
        l_max,
        j_max,
    };
    if l_max == 0 || j_max == 0 {
        return Err(insufficient);
    }
    // smallest value on the outer edge of the index rectangle
    let edge = |l: f64, j: f64| 2.0 * PI * ((l * l + l * j + j * j) / 3.0).sqrt();
    let boundary_min = edge(l_max as f64, 1.0).min(edge(1.0, j_max as f64));
    if boundary_min <= length {
        return Err(insufficient);
    }
    Ok(critical_lengths(l_max, j_max)
        .into_iter()
        .map(|c| (c - length).abs())
        .fold(f64::INFINITY, f64::min))
}

/// Distance from `length` to the critical set, enumerating far enough to
/// bracket it.
pub fn critical_distance(length: f64) -> f64 {
    let m = (length * 3f64.sqrt() / (2.0 * PI)).ceil() as usize + 2;
    critical_distance_in(length, m, m).expect("range chosen to bracket the length")
}

/// Fails with [`Error::CriticalLength`] when `length` is within `tol` of the
/// critical set.
pub fn ensure_noncritical(length: f64, tol: f64) -> Result<()> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Config(format!("length must be positive, got {length}")));
    }
    let distance = critical_distance(length);
    if distance > tol {
        Ok(())
    } else {
        Err(Error::CriticalLength { length, distance })
    }
}

pub fn mu_of_tau(tau: f64) -> f64 {
    2.0 * tau * (4.0 * tau * tau - 1.0)
}

/// Residual of the characteristic equation, rescaled so it stays finite.
///
/// For `3 tau^2 > 1` the equation is divided by `s cosh(s L)`; for
/// `3 tau^2 <= 1` it is continued through `s = i sigma` and divided by `s`.
/// The division by `s` removes the spurious zero at `3 tau^2 = 1`; the two
/// branches agree there.
pub fn char_residual(tau: f64, length: f64) -> f64 {
    let l = length;
    let s2 = 3.0 * tau * tau - 1.0;
    if s2 > 0.0 {
        let s = s2.sqrt();
        let e = (-2.0 * s * l).exp();
        let sech = 2.0 * (-s * l).exp() / (1.0 + e);
        // tanh(sL) / s, accurate as s -> 0
        let tanh_over_s = if s * l < 1e-6 {
            l * (1.0 - (s * l).powi(2) / 3.0)
        } else {
            (-(-2.0 * s * l).exp_m1()) / (1.0 + e) / s
        };
        (2.0 * tau * l).cos() * sech - 3.0 * tau * (tau * l).sin() * tanh_over_s - (tau * l).cos()
    } else {
        let sigma = (-s2).sqrt();
        let sin_over_sigma = if sigma * l < 1e-6 {
            l * (1.0 - (sigma * l).powi(2) / 6.0)
        } else {
            (sigma * l).sin() / sigma
        };
        (2.0 * tau * l).cos()
            - 3.0 * tau * (tau * l).sin() * sin_over_sigma
            - (tau * l).cos() * (sigma * l).cos()
    }
}

/// One located root of the characteristic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRoot {
    pub tau: f64,
    pub mu: f64,
    /// `floor(tau L / pi)`: the interval `[b pi/L, (b+1) pi/L)` holding `tau`.
    pub bracket: i64,
    /// The root sat within `1e-10` of a double root of `s^3 + s + i mu` and
    /// was nudged off it.
    pub perturbed: bool,
}

const DEGENERATE_TAUS: [f64; 2] = [0.577_350_269_189_625_8, 0.288_675_134_594_812_9];

/// First `count` roots `tau > 0` with distinct positive `mu`, sorted by `mu`.
pub fn locate_roots(length: f64, count: usize, tol: &Tolerances) -> Result<Vec<TauRoot>> {
    ensure_noncritical(length, 1e-9)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let step = PI / (100.0 * length);
    let mut upper = (count as f64 + 2.0) * PI / length;
    let mut found: Vec<TauRoot> = Vec::new();
    for _ in 0..4 {
        found.clear();
        for (a, b) in roots::scan_brackets(|t| char_residual(t, length), 0.0, upper, step) {
            let Some(mut tau) = roots::bisect(|t| char_residual(t, length), a, b, tol.root, 400)
            else {
                continue;
            };
            let mut perturbed = false;
            for d in DEGENERATE_TAUS {
                if (tau.abs() - d).abs() < 1e-10 {
                    tau += 2e-10 * if tau.abs() >= d { 1.0 } else { -1.0 } * tau.signum();
                    perturbed = true;
                }
            }
            let mu = mu_of_tau(tau);
            if tau <= 0.0 || mu <= 0.0 {
                continue;
            }
            found.push(TauRoot {
                tau,
                mu,
                bracket: (tau * length / PI).floor() as i64,
                perturbed,
            });
        }
        found.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        found.dedup_by(|a, b| (a.mu - b.mu).abs() <= 1e-9 * b.mu.abs());
        if found.len() >= count {
            break;
        }
        upper *= 2.0;
    }
    if found.len() < count {
        return Err(Error::RootCountMismatch {
            requested: count,
            found: found.len(),
        });
    }
    found.truncate(count);
    for root in &found {
        let (_, d0) = ModeShape::new(root.tau, length).eval(0.0)?;
        if d0.norm() <= 1e-8 * (1.0 + root.tau.abs()) {
            return Err(Error::CriticalLength {
                length,
                distance: critical_distance(length),
            });
        }
    }
    Ok(found)
}

/// Positive `tau` roots only; see [`locate_roots`].
pub fn locate_taus(length: f64, count: usize) -> Result<Vec<f64>> {
    Ok(locate_roots(length, count, &Tolerances::default())?
        .into_iter()
        .map(|r| r.tau)
        .collect())
}

/// Unnormalized eigenfunction profile for a given `tau`.
#[derive(Debug, Clone, Copy)]
struct ModeShape {
    tau: f64,
    length: f64,
    kind: ShapeKind,
    /// `e^{3 i tau L}`
    phase: Complex64,
}

#[derive(Debug, Clone, Copy)]
enum ShapeKind {
    Hyperbolic { s: f64, denom: f64 },
    Trigonometric { sigma: f64, sin_l: f64 },
    Linear,
}

impl ModeShape {
    fn new(tau: f64, length: f64) -> Self {
        let s2 = 3.0 * tau * tau - 1.0;
        let kind = if s2 > 0.0 {
            let s = s2.sqrt();
            ShapeKind::Hyperbolic {
                s,
                denom: -(-2.0 * s * length).exp_m1(),
            }
        } else if s2 < 0.0 {
            let sigma = (-s2).sqrt();
            ShapeKind::Trigonometric {
                sigma,
                sin_l: (sigma * length).sin(),
            }
        } else {
            ShapeKind::Linear
        };
        Self {
            tau,
            length,
            kind,
            phase: (I * (3.0 * tau * length)).exp(),
        }
    }

    /// `(phi(x), phi'(x))` before normalization.
    fn eval(&self, x: f64) -> Result<(Complex64, Complex64)> {
        let l = self.length;
        // (S1, S2, s C1, s C2): sinh/cosh ratios over sinh(sL)
        let (s1, s2, sc1, sc2) = match self.kind {
            ShapeKind::Hyperbolic { s, denom } => {
                let dl = l - x;
                let a = (-s * x).exp();
                let b = (-s * dl).exp();
                let ea = -(-2.0 * s * dl).exp_m1();
                let eb = -(-2.0 * s * x).exp_m1();
                let ca = 1.0 + (-2.0 * s * dl).exp();
                let cb = 1.0 + (-2.0 * s * x).exp();
                (
                    a * ea / denom,
                    b * eb / denom,
                    s * a * ca / denom,
                    s * b * cb / denom,
                )
            }
            ShapeKind::Trigonometric { sigma, sin_l } => {
                if sin_l.abs() < 1e-12 {
                    return Err(Error::DegenerateMode {
                        index: 0,
                        reason: format!("sin(sigma L) vanishes for tau = {}", self.tau),
                    });
                }
                (
                    (sigma * (l - x)).sin() / sin_l,
                    (sigma * x).sin() / sin_l,
                    sigma * (sigma * (l - x)).cos() / sin_l,
                    sigma * (sigma * x).cos() / sin_l,
                )
            }
            ShapeKind::Linear => ((l - x) / l, x / l, 1.0 / l, 1.0 / l),
        };
        let tau = self.tau;
        let back = (-I * (tau * x)).exp();
        let fwd = (I * (2.0 * tau * x)).exp();
        let p = s1 + self.phase * s2;
        let dp = -sc1 + self.phase * sc2;
        let value = back * p - fwd;
        let deriv = back * (-I * tau * p + dp) - 2.0 * I * tau * fwd;
        Ok((value, deriv))
    }
}

/// One normalized eigenpair `(i mu, phi)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub index: i32,
    pub tau: f64,
    pub mu: f64,
    pub alpha: f64,
    pub values: Vec<Complex64>,
    /// Analytic `phi'` at the grid nodes.
    pub derivatives: Vec<Complex64>,
    pub dphi0: Complex64,
    pub dphi_l: Complex64,
    pub perturbed: bool,
}

impl EigenMode {
    /// The conjugate mode: index `-j`, eigenvalue `-i mu`, samples conjugated.
    pub fn conjugate(&self) -> EigenMode {
        EigenMode {
            index: -self.index,
            tau: -self.tau,
            mu: -self.mu,
            alpha: self.alpha,
            values: self.values.iter().map(|z| z.conj()).collect(),
            derivatives: self.derivatives.iter().map(|z| z.conj()).collect(),
            dphi0: self.dphi0.conj(),
            dphi_l: self.dphi_l.conj(),
            perturbed: self.perturbed,
        }
    }

    pub fn bc_residual(&self) -> f64 {
        (self.dphi0 - self.dphi_l).norm()
    }

    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        complex_norm(grid, &self.values)
    }
}

pub(crate) fn complex_norm(grid: &Grid, v: &[Complex64]) -> f64 {
    grid.weights()
        .iter()
        .zip(v)
        .map(|(w, z)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Evaluates the `j`-th eigenfunction (`j > 0`) for root `tau` on `grid` and
/// normalizes it in the quadrature `L^2` norm.
pub fn build_mode(index: i32, tau: f64, grid: &Grid) -> Result<EigenMode> {
    let shape = ModeShape::new(tau, grid.length());
    let degenerate = |reason: String| Error::DegenerateMode { index, reason };
    let mut values = Vec::with_capacity(grid.len());
    let mut derivatives = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        let (v, d) = shape.eval(x).map_err(|e| match e {
            Error::DegenerateMode { reason, .. } => degenerate(reason),
            other => other,
        })?;
        values.push(v);
        derivatives.push(d);
    }
    let n = grid.intervals();
    values[0] = Complex64::new(0.0, 0.0);
    values[n] = Complex64::new(0.0, 0.0);

    let norm = complex_norm(grid, &values);
    if !(norm > 1e-150) || !norm.is_finite() {
        return Err(degenerate(format!("norm {norm:e} before scaling")));
    }
    let alpha = 1.0 / norm;
    for z in values.iter_mut().chain(derivatives.iter_mut()) {
        *z *= alpha;
    }
    let (dphi0, dphi_l) = (derivatives[0], derivatives[n]);
    Ok(EigenMode {
        index,
        tau,
        mu: mu_of_tau(tau),
        alpha,
        values,
        derivatives,
        dphi0,
        dphi_l,
        perturbed: false,
    })
}

/// Max interior residual of `phi''' + phi' + i mu phi` using fourth-order
/// central differences on the samples.
pub fn eigen_residual(mode: &EigenMode, grid: &Grid) -> f64 {
    let n = grid.intervals();
    if n < 6 {
        return 0.0;
    }
    let h = grid.step();
    let d3 = offset_weights::<f64>(&[-3, -2, -1, 0, 1, 2, 3], 3, h);
    let d1 = offset_weights::<f64>(&[-2, -1, 0, 1, 2], 1, h);
    let v = &mode.values;
    (3..=n - 3)
        .map(|i| {
            let third: Complex64 = (0..7).map(|k| v[i + k - 3] * d3[k]).sum();
            let first: Complex64 = (0..5).map(|k| v[i + k - 2] * d1[k]).sum();
            (third + first + I * mode.mu * v[i]).norm()
        })
        .fold(0.0, f64::max)
}

/// Conjugate-paired eigenbasis for `j = -N..-1, 1..N`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    length: f64,
    lambda: f64,
    grid: Grid,
    modes: Vec<EigenMode>,
    roots: Vec<TauRoot>,
}

/// Builds and validates the basis with `count` positive modes.
pub fn build_basis(
    length: f64,
    lambda: f64,
    count: usize,
    grid: &Grid,
    tol: &Tolerances,
) -> Result<SpectralBasis> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if count == 0 {
        return Err(Error::Config("mode count must be at least 1".into()));
    }
    if (grid.length() - length).abs() > 1e-12 * length {
        return Err(Error::Config(format!(
            "grid length {} does not match L = {length}",
            grid.length()
        )));
    }
    let roots = locate_roots(length, count, tol)?;
    let positive: Vec<EigenMode> = roots
        .par_iter()
        .enumerate()
        .map(|(r, root)| {
            build_mode(r as i32 + 1, root.tau, grid).map(|mut m| {
                m.perturbed = root.perturbed;
                m
            })
        })
        .collect::<Result<_>>()?;

    for m in &positive {
        if m.values[0].norm() != 0.0 || m.values[grid.intervals()].norm() != 0.0 {
            return Err(Error::BasisInvariant {
                index: m.index,
                reason: "boundary values not zero".into(),
            });
        }
        if m.bc_residual() > tol.bc * (1.0 + m.dphi0.norm()) {
            return Err(Error::BasisInvariant {
                index: m.index,
                reason: format!("|phi'(0) - phi'(L)| = {:e}", m.bc_residual()),
            });
        }
        let norm = m.l2_norm(grid);
        if (norm - 1.0).abs() > tol.norm {
            return Err(Error::BasisInvariant {
                index: m.index,
                reason: format!("quadrature norm {norm}"),
            });
        }
    }
    if positive.windows(2).any(|w| w[1].mu <= w[0].mu) {
        return Err(Error::BasisInvariant {
            index: 0,
            reason: "mu not strictly increasing".into(),
        });
    }

    let mut modes: Vec<EigenMode> = positive.iter().rev().map(EigenMode::conjugate).collect();
    modes.extend(positive);
    let basis = SpectralBasis {
        length,
        lambda,
        grid: grid.clone(),
        modes,
        roots,
    };
    let deviation = basis.gram_deviation();
    if deviation > tol.gram {
        return Err(Error::GramFailure {
            deviation,
            tolerance: tol.gram,
        });
    }
    Ok(basis)
}

impl SpectralBasis {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of positive modes `N`.
    pub fn count(&self) -> usize {
        self.modes.len() / 2
    }

    /// All modes, ordered `j = -N..-1, 1..N`.
    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn roots(&self) -> &[TauRoot] {
        &self.roots
    }

    /// Storage position of signed index `j`.
    pub fn position(&self, j: i32) -> usize {
        let n = self.count() as i32;
        assert!(j != 0 && j.abs() <= n, "mode index {j} out of range");
        if j < 0 {
            (j + n) as usize
        } else {
            (j + n - 1) as usize
        }
    }

    pub fn mode(&self, j: i32) -> &EigenMode {
        &self.modes[self.position(j)]
    }

    pub fn positive_modes(&self) -> &[EigenMode] {
        &self.modes[self.count()..]
    }

    /// Positions in summation order: ascending `|j|`, positive before
    /// negative.
    pub fn summation_order(&self) -> Vec<usize> {
        let n = self.count() as i32;
        (1..=n)
            .flat_map(|j| [self.position(j), self.position(-j)])
            .collect()
    }

    /// `G_{jk} = sum_m w_m phi_j(x_m) conj(phi_k(x_m))` in storage order.
    pub fn gram_matrix(&self) -> DMatrix<Complex64> {
        let len = self.modes.len();
        let w = self.grid.weights();
        let mut g = DMatrix::zeros(len, len);
        for a in 0..len {
            for b in a..len {
                let va = &self.modes[a].values;
                let vb = &self.modes[b].values;
                let s: Complex64 = w
                    .iter()
                    .zip(va.iter().zip(vb))
                    .map(|(&wm, (x, y))| x * y.conj() * wm)
                    .sum();
                g[(a, b)] = s;
                g[(b, a)] = s.conj();
            }
        }
        g
    }

    /// `max |G - I|`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.gram_matrix();
        let mut dev: f64 = 0.0;
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let target = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((g[(a, b)] - target).norm());
            }
        }
        dev
    }

    /// Copy with every index relabeled `j -> -j` (so slot `j` holds the
    /// former conjugate mode).
    pub fn reflected(&self) -> SpectralBasis {
        let mut modes: Vec<EigenMode> = self.modes.iter().rev().cloned().collect();
        for m in &mut modes {
            m.index = -m.index;
        }
        SpectralBasis {
            modes,
            ..self.clone()
        }
    }
}
