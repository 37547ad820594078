//! Verification suites. Each suite checks one group of invariants and
//! reports PASS, FAIL or SKIP with a one-line detail; `criterion` ties it to
//! the numbered acceptance list (0 for supporting checks).

pub mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{
    coupling_from_mus, coupling_matrix, solve_gain_coefficients, synthesize, transposition_residual,
    KernelField, TestFunction,
};
use crate::report::{parse_kernel, render_kernel, RunConfig};
use crate::sim::{
    contraction_guard_dt, linear_w_inequality_check, nonlinear_w_inequality_check,
    simulate, simulate_closed_loop, simulate_linear_closed_loop, Dynamics, InequalityReport,
    SimConfig, SimulationTrace, GUARD_CONSTANT, ROUNDOFF_FLOOR,
};
use crate::spectral::{
    build_basis, build_mode, eigen_residual, locate_roots, SpectralBasis, Tolerances,
};
use crate::transform::{TransformNorms, TransformOperator};
use crate::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub criterion: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl SuiteResult {
    fn new(criterion: u8, name: &'static str, pass: bool, detail: String) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Self {
            criterion,
            name,
            status,
            detail,
        }
    }

    fn skip(criterion: u8, name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            criterion,
            name,
            status: Status::Skip,
            detail: detail.into(),
        }
    }

    fn error(criterion: u8, name: &'static str, e: Error) -> Self {
        Self {
            criterion,
            name,
            status: Status::Fail,
            detail: format!("error: {e}"),
        }
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}: {}", self.status, self.criterion, self.name, self.detail)
    }
}

fn run(criterion: u8, name: &'static str, f: impl FnOnce() -> Result<SuiteResult>) -> SuiteResult {
    f().unwrap_or_else(|e| SuiteResult::error(criterion, name, e))
}

/// Shared inputs of the suites: the kernel, transform and nonlinear closed
/// loop at the configured parameters.
pub struct Reference {
    pub config: RunConfig,
    pub basis: SpectralBasis,
    pub kernel: KernelField,
    pub transform: TransformOperator,
    pub norms: TransformNorms,
    pub c_hat: f64,
    pub v0: Vec<f64>,
    pub trace: SimulationTrace,
}

/// `amplitude sin(pi x / L)`.
pub fn reference_initial(grid: &Grid, amplitude: f64) -> Vec<f64> {
    let l = grid.length();
    let mut v = grid.sample(|x| amplitude * (PI * x / l).sin());
    let last = v.len() - 1;
    v[last] = 0.0;
    v
}

pub fn sim_config(config: &RunConfig, grid: Grid) -> SimConfig {
    let mut s = SimConfig::new(grid, config.dt, config.t_final);
    s.theta = config.theta;
    s
}

impl Reference {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate_noncritical()?;
        let (basis, kernel) = synthesize(
            config.length,
            config.lambda,
            config.modes,
            config.nx,
            &Tolerances::for_synthesis(),
        )?;
        let transform = TransformOperator::new(&kernel)?;
        let norms = transform.norms();
        let c_hat = kernel
            .diagnostics()
            .map_or(f64::NAN, |d| d.c_hat(norms.inverse));
        let v0 = reference_initial(kernel.grid(), config.amplitude);
        let sim = sim_config(config, kernel.grid().clone());
        let trace = simulate_closed_loop(&v0, &sim, &kernel, &transform)?;
        Ok(Self {
            config: config.clone(),
            basis,
            kernel,
            transform,
            norms,
            c_hat,
            v0,
            trace,
        })
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Envelope `|tau - (b pi / L + 5 pi / (6 L))| * rank` per located root,
/// with `b` the root's bracket index.
pub fn tau_envelope(length: f64, count: usize) -> Result<Vec<f64>> {
    let roots = locate_roots(length, count, &Tolerances::default())?;
    Ok(roots
        .iter()
        .enumerate()
        .map(|(r, root)| {
            let b = root.bracket as f64;
            (root.tau - b * PI / length - 5.0 * PI / (6.0 * length)).abs() * (r + 1) as f64
        })
        .collect())
}

fn window_max(v: &[f64], lo: usize, hi: usize) -> f64 {
    v[lo..hi].iter().copied().fold(0.0, f64::max)
}

pub fn spectrum_oracle(config: &RunConfig) -> SuiteResult {
    run(1, "spectrum-oracle", || {
        let count = config.modes.min(10);
        let roots = locate_roots(config.length, count, &Tolerances::default())?;
        let fd = oracle::fd_mus(config.length, count, 400, 4096)?;
        let worst = roots
            .iter()
            .zip(&fd)
            .map(|(r, &m)| rel(r.mu, m))
            .fold(0.0, f64::max);
        Ok(SuiteResult::new(
            1,
            "spectrum-oracle",
            worst <= 1e-4,
            format!("first {count} mu vs finite differences (4096 intervals): max rel {worst:.2e} (<= 1e-4)"),
        ))
    })
}

pub fn spectrum_envelope(config: &RunConfig) -> SuiteResult {
    const NAME: &str = "tau-envelope";
    if config.modes < 10 {
        return SuiteResult::skip(1, NAME, format!("N = {} < 10: too few modes for envelope fits", config.modes));
    }
    run(1, NAME, || {
        let env = tau_envelope(config.length, 40)?;
        let e20 = window_max(&env, 10, 20);
        let e40 = window_max(&env, 20, 40);
        Ok(SuiteResult::new(
            1,
            NAME,
            e20.is_finite() && e40 <= e20,
            format!("max |tau_j - j pi/L - 5 pi/(6L)| j: ranks 11-20 {e20:.3e}, ranks 21-40 {e40:.3e} (non-growing)"),
        ))
    })
}

pub fn basis_quality(config: &RunConfig) -> SuiteResult {
    run(2, "basis-quality", || {
        let n = config.modes.min(10);
        let nx = config.nx.max(2048);
        let grid = Grid::new(config.length, nx)?;
        let basis = build_basis(config.length, config.lambda, n, &grid, &Tolerances::default())?;
        let gram = basis.gram_deviation();
        let bc = basis
            .modes()
            .iter()
            .map(|m| m.bc_residual() / m.dphi0.norm().max(m.dphi_l.norm()))
            .fold(0.0, f64::max);
        Ok(SuiteResult::new(
            2,
            "basis-quality",
            gram <= 1e-6 && bc <= 1e-8,
            format!("N = {n}, nx = {nx}: Gram deviation {gram:.2e} (<= 1e-6), relative phi'(0) - phi'(L) {bc:.2e} (<= 1e-8)"),
        ))
    })
}

/// Observed order of the eigen-ODE residual on 256, 512 and 1024 intervals
/// for the modes `{5, 10}` that exist, keeping only refinements whose finer residual
/// stays above `1e-5` (below that roundoff in the third difference takes
/// over).
pub fn residual_order(config: &RunConfig) -> SuiteResult {
    const NAME: &str = "eigen-residual-order";
    run(2, NAME, || {
        let modes: Vec<usize> = [5usize, 10].into_iter().filter(|&j| j <= config.modes).collect();
        if modes.is_empty() {
            return Ok(SuiteResult::skip(2, NAME, "needs N >= 5 for a resolvable residual"));
        }
        let roots = locate_roots(config.length, *modes.last().unwrap_or(&1), &Tolerances::default())?;
        let mut orders = Vec::new();
        for &j in &modes {
            let mut prev: Option<f64> = None;
            for nx in [256usize, 512, 1024] {
                let grid = Grid::new(config.length, nx)?;
                let res = eigen_residual(&build_mode(j as i32, roots[j - 1].tau, &grid)?, &grid);
                if let Some(p) = prev {
                    if res > 1e-5 {
                        orders.push((j, nx, (p / res).log2()));
                    }
                }
                prev = Some(res);
            }
        }
        if orders.is_empty() {
            return Ok(SuiteResult::skip(2, NAME, "all residuals at roundoff level"));
        }
        let min = orders.iter().map(|o| o.2).fold(f64::INFINITY, f64::min);
        let list: Vec<String> = orders.iter().map(|(j, nx, o)| format!("j={j}@{nx}:{o:.2}")).collect();
        Ok(SuiteResult::new(
            2,
            NAME,
            min >= 3.5,
            format!("observed orders {} (stencil order 4, need >= 3.5)", list.join(" ")),
        ))
    })
}

pub fn coefficient_system(basis: &SpectralBasis, kernel: &KernelField) -> SuiteResult {
    run(3, "coefficient-system", || {
        let m = coupling_matrix(basis, kernel.lambda())?;
        let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let n = m.nrows();
        let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
        let raw = m.lu().solve(&ones).ok_or(Error::SingularTransform)?;
        let c_max = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pairing = (0..n / 2)
            .map(|q| (raw[q] - raw[n - 1 - q].conj()).norm())
            .fold(0.0, f64::max)
            / c_max;
        let stored = &kernel.coefficients().values;
        let stored_pairing = (0..n / 2)
            .map(|q| (stored[q] - stored[n - 1 - q].conj()).norm())
            .fold(0.0, f64::max);
        Ok(SuiteResult::new(
            3,
            "coefficient-system",
            herm == 0.0 && pairing <= 1e-12 && stored_pairing == 0.0,
            format!(
                "max |M - M^H| = {herm:.1e}, raw solve |c_-j - conj c_j| / max|c| = {pairing:.2e} (<= 1e-12), stored pairing exact"
            ),
        ))
    })
}

/// `j^2 |c_j - 1| / ln(2 + j)` for `j = 1..=n`, from a solve with `n` mode
/// pairs.
pub fn coefficient_envelope_sequence(length: f64, lambda: f64, n: usize) -> Result<Vec<f64>> {
    let roots = locate_roots(length, n, &Tolerances::default())?;
    let mus: Vec<f64> = roots
        .iter()
        .rev()
        .map(|r| -r.mu)
        .chain(roots.iter().map(|r| r.mu))
        .collect();
    let c = solve_gain_coefficients(&coupling_from_mus(&mus, lambda)?, lambda)?;
    Ok((1..=n)
        .map(|j| (c.get(j as i32) - 1.0).norm() * (j * j) as f64 / (2.0 + j as f64).ln())
        .collect())
}

/// Doubling test on `j^2 |c_j - 1| / ln(2 + j)`: its maximum may grow by at
/// most a factor 2 when `N` doubles.
pub fn coefficient_envelope(config: &RunConfig) -> SuiteResult {
    const NAME: &str = "coefficient-envelope";
    let n = config.modes;
    if n < 8 {
        return SuiteResult::skip(3, NAME, format!("N = {n} < 8: too few modes for envelope fits"));
    }
    run(3, NAME, || {
        let lo = coefficient_envelope_sequence(config.length, config.lambda, n)?;
        let hi = coefficient_envelope_sequence(config.length, config.lambda, 2 * n)?;
        let (m1, m2) = (window_max(&lo, 0, n), window_max(&hi, 0, 2 * n));
        let (t1, t2) = (window_max(&lo, n / 2, n), window_max(&hi, n, 2 * n));
        Ok(SuiteResult::new(
            3,
            NAME,
            m1.is_finite() && m2 <= 2.0 * m1,
            format!(
                "max j^2 |c_j - 1| / ln(2 + j): N = {n} {m1:.3e}, 2N {m2:.3e} (factor {:.3} <= 2); upper-half maxima {t1:.3e}, {t2:.3e}",
                m2 / m1
            ),
        ))
    })
}

pub fn kernel_validity(kernel: &KernelField) -> SuiteResult {
    run(4, "kernel-validity", || {
        let k = kernel;
        let d = k
            .diagnostics()
            .ok_or_else(|| Error::Config("kernel carries no diagnostics".into()))?;
        let n = k.grid().intervals();
        let len = k.grid().len();
        let edge = (0..len)
            .flat_map(|t| [k.at(0, t), k.at(n, t), k.at(t, 0), k.at(t, n)])
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let ky_edge = d.ky_edge_left.max(d.ky_edge_right) / d.ky_norm;
        let imag = d.max_imag / d.max_real;
        Ok(SuiteResult::new(
            4,
            "kernel-validity",
            imag <= 1e-9 && edge == 0.0 && ky_edge < 1e-3,
            format!(
                "max|Im k|/max|Re k| = {imag:.1e} (<= 1e-9), edge max {edge:.1e} (exact 0), k_y edge/||k_y|| = {ky_edge:.2e} (< 1e-3)"
            ),
        ))
    })
}

pub const TRANSPOSITION_LADDER: [(usize, usize); 3] = [(10, 256), (20, 512), (40, 1024)];

pub fn transposition_ladder(config: &RunConfig) -> SuiteResult {
    const NAME: &str = "transposition-ladder";
    run(4, NAME, || {
        let fields: Vec<Result<KernelField>> = TRANSPOSITION_LADDER
            .par_iter()
            .map(|&(n, nx)| {
                synthesize(config.length, config.lambda, n, nx, &Tolerances::for_synthesis()).map(|r| r.1)
            })
            .collect();
        let fields: Vec<KernelField> = fields.into_iter().collect::<Result<_>>()?;
        let mut ok = true;
        let mut parts = Vec::new();
        for rho in TestFunction::canned() {
            let r: Vec<f64> = fields
                .iter()
                .map(|k| transposition_residual(k, &rho))
                .collect::<Result<_>>()?;
            ok &= r.windows(2).all(|w| w[1] < w[0]);
            parts.push(format!("{} {:.1e}>{:.1e}>{:.1e}", rho.name, r[0], r[1], r[2]));
        }
        Ok(SuiteResult::new(
            4,
            NAME,
            ok,
            format!("(N, nx) = (10,256),(20,512),(40,1024): {}", parts.join(", ")),
        ))
    })
}

/// Spectral radii below this are treated as zero.
pub const RADIUS_NOISE: f64 = 1e-6;

pub fn transform_invertibility(reference: &Reference) -> SuiteResult {
    const NAME: &str = "transform-invertibility";
    run(5, NAME, || {
        let cfg = &reference.config;
        let (_, fine) = synthesize(cfg.length, cfg.lambda, cfg.modes, 2 * cfg.nx, &Tolerances::for_synthesis())?;
        let fine = TransformOperator::new(&fine)?;
        let (r1, r2) = (reference.transform.spectral_radius(), fine.spectral_radius());
        let (c1, c2) = (reference.norms.condition(), fine.norms().condition());
        let roundtrip = reference.transform.roundtrip_error(5, cfg.seed)?;
        let grid = reference.kernel.grid();
        let u = grid.sample(|x| (2.0 * x).sin() + 0.3 * x);
        let v = grid.sample(|x| x * (grid.length() - x));
        let lhs = grid.inner(&reference.transform.apply_k(&v)?, &u);
        let rhs = grid.inner(&v, &reference.transform.apply_adjoint(&u)?);
        let adjoint = rel(lhs, rhs);
        // below RADIUS_NOISE the eigensolver cannot resolve the radius of a
        // nearly nilpotent matrix, so only growth above that level counts
        let stable = r2 <= 1.1 * r1 || r1.max(r2) < RADIUS_NOISE;
        let pass = r1 < 1.0
            && c1 < 1e6
            && stable
            && rel(c2, c1) <= 0.1
            && roundtrip <= 1e-10
            && adjoint <= 1e-10;
        Ok(SuiteResult::new(
            5,
            NAME,
            pass,
            format!(
                "rho(K_d) {r1:.3e} -> {r2:.3e} at 2nx (< 1, not growing past 10%), cond {c1:.6} -> {c2:.6} (< 1e6, within 10%), roundtrip {roundtrip:.1e}, adjoint {adjoint:.1e}"
            ),
        ))
    })
}

fn report_text(r: &InequalityReport) -> String {
    format!(
        "{}/{} violations ({:.2}%), {} rows under floor",
        r.violations,
        r.checked,
        100.0 * r.violation_fraction(),
        r.below_floor
    )
}

/// Steps skipped at the start of the inequality checks.
pub const TRANSIENT_STEPS: usize = 10;

pub fn linear_inequality(reference: &Reference) -> SuiteResult {
    const NAME: &str = "linear-inequality";
    run(6, NAME, || {
        let cfg = &reference.config;
        let base = sim_config(cfg, reference.kernel.grid().clone());
        let mut half = base.clone();
        half.dt /= 2.0;
        let mut damped = base.clone();
        damped.theta = 0.55;
        let runs: Vec<Result<SimulationTrace>> = [&base, &half, &damped]
            .par_iter()
            .map(|c| simulate_linear_closed_loop(&reference.v0, c, &reference.kernel, &reference.transform))
            .collect();
        let runs: Vec<SimulationTrace> = runs.into_iter().collect::<Result<_>>()?;
        let l = cfg.lambda;
        let a = linear_w_inequality_check(&runs[0], l, TRANSIENT_STEPS, ROUNDOFF_FLOOR);
        let b = linear_w_inequality_check(&runs[1], l, TRANSIENT_STEPS, ROUNDOFF_FLOOR);
        let c = linear_w_inequality_check(&runs[2], l, TRANSIENT_STEPS, 0.0);
        let pass = a.violation_fraction() <= 0.05
            && b.violation_fraction() <= a.violation_fraction()
            && c.violation_fraction() <= 0.05;
        Ok(SuiteResult::new(
            6,
            NAME,
            pass,
            format!(
                "dt: {}; dt/2: {}; theta 0.55, no floor: {}",
                report_text(&a),
                report_text(&b),
                report_text(&c)
            ),
        ))
    })
}

pub fn nonlinear_decay(reference: &Reference) -> SuiteResult {
    const NAME: &str = "nonlinear-decay";
    run(7, NAME, || {
        let cfg = &reference.config;
        let target = 0.85 * cfg.lambda / 2.0;
        let window = (2.0, cfg.t_final);
        let rate = reference.trace.fit_w_rate(window)?;
        let c = reference.norms.condition();
        let v0 = reference.trace.rows[0].norm_v;
        let bound_ok = reference
            .trace
            .rows
            .iter()
            .all(|r| r.norm_v <= c * (-target * r.t).exp() * v0);

        let lambda2 = 2.0 * cfg.lambda;
        let (_, k2) = synthesize(cfg.length, lambda2, cfg.modes, cfg.nx, &Tolerances::for_synthesis())?;
        let t2 = TransformOperator::new(&k2)?;
        let trace2 = simulate_closed_loop(&reference.v0, &sim_config(cfg, k2.grid().clone()), &k2, &t2)?;
        let rate2 = trace2.fit_w_rate(window)?;
        let target2 = 0.85 * lambda2 / 2.0;
        Ok(SuiteResult::new(
            7,
            NAME,
            rate >= target && bound_ok && rate2 >= target2,
            format!(
                "lambda {}: ||w|| rate {rate:.3} (>= {target:.3}), ||v|| <= {c:.4} e^(-{target:.3} t) ||v0|| {}; lambda {lambda2}: rate {rate2:.3} (>= {target2:.3}), ratio {:.2}",
                cfg.lambda,
                if bound_ok { "holds" } else { "violated" },
                rate2 / rate
            ),
        ))
    })
}

pub fn nonlinear_inequality(reference: &Reference) -> SuiteResult {
    const NAME: &str = "nonlinear-inequality";
    run(8, NAME, || {
        let cfg = &reference.config;
        let a = nonlinear_w_inequality_check(&reference.trace, cfg.lambda, reference.c_hat, TRANSIENT_STEPS, ROUNDOFF_FLOOR);
        let mut damped = sim_config(cfg, reference.kernel.grid().clone());
        damped.theta = 0.55;
        let trace = simulate_closed_loop(&reference.v0, &damped, &reference.kernel, &reference.transform)?;
        let b = nonlinear_w_inequality_check(&trace, cfg.lambda, reference.c_hat, TRANSIENT_STEPS, 0.0);
        Ok(SuiteResult::new(
            8,
            NAME,
            a.violation_fraction() < 0.05 && b.violation_fraction() < 0.05,
            format!(
                "C_hat = {:.4}: {}; theta 0.55, no floor: {}",
                reference.c_hat,
                report_text(&a),
                report_text(&b)
            ),
        ))
    })
}

/// `amplitude (1 - cos x)` on `[0, 2 pi]`, a stationary solution of the
/// linear open loop.
pub fn stationary_initial(grid: &Grid, amplitude: f64) -> Vec<f64> {
    let mut v = grid.sample(|x| amplitude * (1.0 - x.cos()));
    let last = v.len() - 1;
    v[0] = 0.0;
    v[last] = 0.0;
    v
}

pub fn critical_contrast(reference: &Reference) -> SuiteResult {
    const NAME: &str = "critical-length-contrast";
    run(9, NAME, || {
        let cfg = &reference.config;
        let grid = Grid::new(2.0 * PI, cfg.nx)?;
        let v0 = stationary_initial(&grid, cfg.amplitude);
        let mut sim = sim_config(cfg, grid);
        sim.t_final = 5.0;
        let trace = simulate(&v0, &sim, Dynamics::Linear, None)?;
        let e0 = trace.rows[0].norm_v.powi(2);
        let drift = trace
            .rows
            .iter()
            .map(|r| (r.norm_v.powi(2) / e0 - 1.0).abs())
            .fold(0.0, f64::max);
        let rows = &reference.trace.rows;
        let t_end = cfg.t_final.min(10.0);
        let end = rows
            .iter()
            .rev()
            .find(|r| r.t <= t_end + 1e-9)
            .unwrap_or(&rows[0]);
        let reduction = 1.0 - (end.norm_v / rows[0].norm_v).powi(2);
        Ok(SuiteResult::new(
            9,
            NAME,
            drift < 0.05 && reduction > 0.8,
            format!(
                "L = 2 pi open loop: energy drift {drift:.2e} on [0, 5] (< 5%); closed loop at L = {}: energy reduction {:.4}% by t = {t_end} (> 80%)",
                cfg.length,
                100.0 * reduction
            ),
        ))
    })
}

pub fn picard_contraction(reference: &Reference) -> SuiteResult {
    const NAME: &str = "fixed-point-contraction";
    run(10, NAME, || {
        let cfg = &reference.config;
        let grid = reference.kernel.grid();
        let gain_norm = grid.norm(reference.kernel.gain());
        let dt = contraction_guard_dt(gain_norm, GUARD_CONSTANT);
        let mut sim = sim_config(cfg, grid.clone());
        sim.dt = dt;
        let guarded = simulate_closed_loop(&reference.v0, &sim, &reference.kernel, &reference.transform)?;
        let q = guarded.max_contraction();
        let iters = reference.trace.max_iterations();
        Ok(SuiteResult::new(
            10,
            NAME,
            q <= std::f64::consts::FRAC_1_SQRT_2 && iters <= 10,
            format!(
                "guard dt {dt:.4}: max contraction {q:.3} (<= 0.707), {} iterations; reference run max iterations {iters} (<= 10), contraction {:.2e}",
                guarded.max_iterations(),
                reference.trace.max_contraction()
            ),
        ))
    })
}

pub fn cache_integrity(reference: &Reference) -> SuiteResult {
    const NAME: &str = "cache-integrity";
    run(0, NAME, || {
        let text = render_kernel(&reference.kernel);
        let (_, back) = parse_kernel(&text, Path::new("<memory>"))?;
        let exact = back.values() == reference.kernel.values() && back.gain() == reference.kernel.gain();
        let tampered = text.replacen("[gain]\n", "[gain]\n-", 1);
        let caught = matches!(
            parse_kernel(&tampered, Path::new("<memory>")),
            Err(Error::ChecksumMismatch { .. })
        );
        Ok(SuiteResult::new(
            0,
            NAME,
            exact && caught,
            format!(
                "round trip {}, tampering {}",
                if exact { "exact" } else { "inexact" },
                if caught { "detected" } else { "missed" }
            ),
        ))
    })
}

/// Runs every suite for `config`. Suites that need the reference run fail
/// together when it cannot be built.
pub fn run_all(config: &RunConfig) -> Vec<SuiteResult> {
    type Suite<'a> = Box<dyn Fn() -> SuiteResult + Send + Sync + 'a>;
    let (reference, standalone) = rayon::join(
        || Reference::build(config),
        || {
            let suites: [fn(&RunConfig) -> SuiteResult; 6] = [
                spectrum_oracle,
                spectrum_envelope,
                basis_quality,
                residual_order,
                coefficient_envelope,
                transposition_ladder,
            ];
            suites.par_iter().map(|s| s(config)).collect::<Vec<_>>()
        },
    );
    let mut out = standalone;
    match reference {
        Ok(r) => {
            let suites: Vec<Suite> = vec![
                Box::new(|| coefficient_system(&r.basis, &r.kernel)),
                Box::new(|| kernel_validity(&r.kernel)),
                Box::new(|| transform_invertibility(&r)),
                Box::new(|| linear_inequality(&r)),
                Box::new(|| nonlinear_decay(&r)),
                Box::new(|| nonlinear_inequality(&r)),
                Box::new(|| critical_contrast(&r)),
                Box::new(|| picard_contraction(&r)),
                Box::new(|| cache_integrity(&r)),
            ];
            out.extend(suites.par_iter().map(|s| s()).collect::<Vec<_>>());
        }
        Err(e) => {
            for (c, name) in [
                (3, "coefficient-system"),
                (4, "kernel-validity"),
                (5, "transform-invertibility"),
                (6, "linear-inequality"),
                (7, "nonlinear-decay"),
                (8, "nonlinear-inequality"),
                (9, "critical-length-contrast"),
                (10, "fixed-point-contraction"),
            ] {
                out.push(SuiteResult {
                    criterion: c,
                    name,
                    status: Status::Fail,
                    detail: format!("reference run failed: {e}"),
                });
            }
        }
    }
    out.sort_by_key(|r| r.criterion);
    out
}

/// Combined status of the suites belonging to `criterion`: FAIL if any
/// failed, SKIP if all skipped, PASS otherwise.
pub fn criterion_status(results: &[SuiteResult], criterion: u8) -> Status {
    let mine: Vec<&SuiteResult> = results.iter().filter(|r| r.criterion == criterion).collect();
    if mine.is_empty() || mine.iter().any(|r| r.status == Status::Fail) {
        Status::Fail
    } else if mine.iter().all(|r| r.status == Status::Skip) {
        Status::Skip
    } else {
        Status::Pass
    }
}
