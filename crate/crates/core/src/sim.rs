//! Finite-difference integration of
//!
//! ```text
//! v_t + v_x + v_xxx + v v_x = 0,   v(t, 0) = v(t, L) = 0,   v_x(t, L) = f(t)
//! ```
//!
//! with the feedback `f(t) = int g(y) v(t, y) dy`.
//!
//! Space: centered differences, the 5-point stencil for `v_xxx` and a
//! one-sided stencil on the first interior row. The Neumann value enters
//! through the ghost node `v_{n+1} = v_{n-1} + 2 h f`. Time: the theta
//! scheme, started with a few backward Euler steps so that the grid-scale
//! modes that Crank-Nicolson leaves undamped are removed. The nonlinearity
//! (in skew-symmetric form) and the boundary feedback are resolved inside
//! each step by fixed-point iteration.

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::kernel::KernelField;
use crate::scalar::Scalar;
use crate::stencil::offset_weights;
use crate::transform::TransformOperator;
use crate::{BandedMatrix, Grid};

/// Source of the Neumann value at `x = L`.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// `v_x(t, L) = 0`.
    None,
    /// `v_x(t, L) = int g(y) v(t, y) dy` with the given gain samples.
    LinearFeedback(Vec<f64>),
    /// Prescribed values at the step times `t_k = k dt`; the last value is
    /// held beyond the end.
    Frozen(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub controller: Controller,
    /// Backward Euler steps before switching to `theta`.
    pub startup_steps: usize,
    /// Record a trace row every this many steps.
    pub record_stride: usize,
    /// Keep a state snapshot every this many steps (0: none).
    pub snapshot_stride: usize,
}

impl SimConfig {
    pub fn new(grid: Grid, dt: f64, t_final: f64) -> Self {
        Self {
            grid,
            dt,
            t_final,
            theta: 0.5,
            picard_tol: 1e-10,
            picard_max: 50,
            controller: Controller::None,
            startup_steps: 4,
            record_stride: 1,
            snapshot_stride: 0,
        }
    }

    pub fn with_controller(mut self, controller: Controller) -> Self {
        self.controller = controller;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [1/2, 1], got {}", self.theta));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return bad("picard tolerance and iteration cap must be positive".into());
        }
        if self.record_stride == 0 {
            return bad("record stride must be at least 1".into());
        }
        if self.grid.intervals() < 6 {
            return bad("need at least 6 intervals".into());
        }
        if let Controller::LinearFeedback(g) = &self.controller {
            self.grid.check_len(g.len())?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Largest step allowed by the contraction guard `dt <= c / (1 + ||g||^2)`.
pub fn contraction_guard_dt(gain_norm: f64, c: f64) -> f64 {
    c / (1.0 + gain_norm * gain_norm)
}

/// Calibrated constant of the contraction guard.
pub const GUARD_CONSTANT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub v: Vec<f64>,
    /// Neumann value `v_x(t, L)` used at time `t`.
    pub neumann: f64,
}

/// Per-step fixed-point statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub iterations: usize,
    /// Largest ratio of successive iterate gaps (0 when fewer than three
    /// iterates were formed).
    pub contraction: f64,
}

/// Discrete spatial operator and cached step factorizations.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    dt: f64,
    theta: f64,
    /// `A` with `-A u - b f` approximating `-(u_xxx + u_x)`.
    operator: BandedMatrix,
    /// Weight of the Neumann value in row `n - 1`.
    neumann_weight: f64,
    lu_theta: BandedLu<f64>,
    lu_euler: BandedLu<f64>,
}

const KL: usize = 2;
const KU: usize = 3;

impl Stepper {
    pub fn new(grid: &Grid, dt: f64, theta: f64) -> Result<Self> {
        let n = grid.intervals();
        if n < 6 {
            return Err(Error::InvalidGrid("need at least 6 intervals".into()));
        }
        let h = grid.step();
        let mut a = BandedMatrix::zeros(n + 1, KL, KU);
        let d1 = [-0.5 / h, 0.0, 0.5 / h];
        let d3 = offset_weights::<f64>(&[-2, -1, 0, 1, 2], 3, h);
        let d3_first = offset_weights::<f64>(&[-1, 0, 1, 2, 3], 3, h);
        for i in 1..n {
            if i == 1 {
                for (k, w) in d3_first.iter().enumerate() {
                    a.add(1, k, *w);
                }
            } else {
                for (k, w) in d3.iter().enumerate() {
                    let j = i + k;
                    if j < 2 {
                        continue;
                    }
                    let col = j - 2;
                    if col == n + 1 {
                        // ghost node folded back onto n - 1
                        a.add(i, n - 1, *w);
                    } else {
                        a.add(i, col, *w);
                    }
                }
            }
            a.add(i, i - 1, d1[0]);
            a.add(i, i + 1, d1[2]);
        }
        let neumann_weight = d3[4] * 2.0 * h;
        let factor = |th: f64| -> Result<BandedLu<f64>> {
            let mut m = BandedMatrix::zeros(n + 1, KL, KU);
            for i in 1..n {
                for j in i.saturating_sub(KL)..=(i + KU).min(n) {
                    let v = a.get(i, j) * th * dt;
                    m.set(i, j, if i == j { 1.0 + v } else { v });
                }
            }
            m.set_identity_row(0);
            m.set_identity_row(n);
            m.factor()
                .map_err(|p| Error::SingularStepMatrix { row: p.0 })
        };
        Ok(Self {
            grid: grid.clone(),
            dt,
            theta,
            lu_theta: factor(theta)?,
            lu_euler: factor(1.0)?,
            operator: a,
            neumann_weight,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Semi-discrete right-hand side `-A u - b f + s` (zero on boundary rows).
    pub fn rhs(&self, u: &[f64], neumann: f64, source: &[f64]) -> Vec<f64> {
        let n = self.grid.intervals();
        let mut out = self.operator.matvec(u);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if i == 0 || i == n { 0.0 } else { -*o + source[i] };
        }
        out[n - 1] -= self.neumann_weight * neumann;
        out
    }

    /// One theta step with an explicit combined source
    /// `theta s_new + (1 - theta) s_old` on the interior rows.
    fn advance(
        &self,
        u: &[f64],
        theta: f64,
        f_old: f64,
        f_new: f64,
        source: &[f64],
    ) -> Vec<f64> {
        let n = self.grid.intervals();
        let dt = self.dt;
        let au = self.operator.matvec(u);
        let mut rhs = vec![0.0; n + 1];
        for i in 1..n {
            rhs[i] = u[i] - (1.0 - theta) * dt * au[i] + dt * source[i];
        }
        rhs[n - 1] -= dt * self.neumann_weight * (theta * f_new + (1.0 - theta) * f_old);
        let lu = if theta == 1.0 {
            &self.lu_euler
        } else {
            &self.lu_theta
        };
        debug_assert!(theta == 1.0 || theta == self.theta);
        lu.solve_in_place(&mut rhs);
        rhs[0] = 0.0;
        rhs[n] = 0.0;
        rhs
    }
}

/// `(u u_x + (u^2)_x) / 3` with centered differences, zero on the boundary.
pub fn convection(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let mut out = vec![0.0; n + 1];
    for i in 1..n {
        let (l, r) = (u[i - 1], u[i + 1]);
        out[i] = (u[i] * (r - l) + (r * r - l * l)) / (6.0 * h);
    }
    out
}

/// `int g v` by quadrature.
pub fn feedback_eval(grid: &Grid, gain: &[f64], v: &[f64]) -> Result<f64> {
    grid.check_len(gain.len())?;
    grid.check_len(v.len())?;
    Ok(grid.inner(gain, v))
}

fn controller_value(c: &Controller, grid: &Grid, v: &[f64], step: usize) -> f64 {
    match c {
        Controller::None => 0.0,
        Controller::LinearFeedback(g) => grid.inner(g, v),
        Controller::Frozen(vals) => vals
            .get(step)
            .or(vals.last())
            .copied()
            .unwrap_or(0.0),
    }
}

fn step_theta(config: &SimConfig, step: usize) -> f64 {
    if step < config.startup_steps {
        1.0
    } else {
        config.theta
    }
}

/// One theta step of `u_t + u_xxx + u_x = forcing` with `u_x(L)` moving
/// from `state.neumann` to `neumann_value`.
pub fn linear_step(
    stepper: &Stepper,
    state: &SimState,
    config: &SimConfig,
    forcing: &[f64],
    neumann_value: f64,
) -> Result<SimState> {
    config.grid.check_len(state.v.len())?;
    config.grid.check_len(forcing.len())?;
    let theta = step_theta(config, state.step);
    let v = stepper.advance(&state.v, theta, state.neumann, neumann_value, forcing);
    Ok(SimState {
        t: state.t + config.dt,
        step: state.step + 1,
        v,
        neumann: neumann_value,
    })
}

/// One implicit step with the controller evaluated on the new state,
/// resolved by fixed-point iteration. `nonlinear` toggles the `v v_x` term.
pub fn nonlinear_step(
    stepper: &Stepper,
    state: &SimState,
    config: &SimConfig,
    nonlinear: bool,
) -> Result<(SimState, StepStats)> {
    let grid = &config.grid;
    grid.check_len(state.v.len())?;
    let h = grid.step();
    let theta = step_theta(config, state.step);
    let new_step = state.step + 1;
    let len = grid.len();

    let source_old: Vec<f64> = if nonlinear {
        convection(&state.v, h).into_iter().map(|c| -(1.0 - theta) * c).collect()
    } else {
        vec![0.0; len]
    };
    let depends_on_state = nonlinear || matches!(config.controller, Controller::LinearFeedback(_));

    let mut iterate = state.v.clone();
    let mut gaps: Vec<f64> = Vec::new();
    let mut stats = StepStats::default();
    let mut growth = 0;
    let mut f_new = controller_value(&config.controller, grid, &iterate, new_step);
    loop {
        let source: Vec<f64> = if nonlinear {
            let c = convection(&iterate, h);
            source_old.iter().zip(c).map(|(s, c)| s - theta * c).collect()
        } else {
            source_old.clone()
        };
        let next = stepper.advance(&state.v, theta, state.neumann, f_new, &source);
        stats.iterations += 1;
        if !depends_on_state {
            iterate = next;
            break;
        }
        let diff: Vec<f64> = next.iter().zip(&iterate).map(|(a, b)| a - b).collect();
        let scale = grid.norm(&next);
        let gap = if scale > 0.0 { grid.norm(&diff) / scale } else { grid.norm(&diff) };
        iterate = next;
        f_new = controller_value(&config.controller, grid, &iterate, new_step);
        if let Some(&prev) = gaps.last() {
            if gaps.len() >= 2 && prev > 1e-13 {
                stats.contraction = stats.contraction.max(gap / prev);
            }
            if gap > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        gaps.push(gap);
        if !gap.is_finite() || growth >= 3 {
            return Err(Error::PicardDiverged {
                time: state.t + config.dt,
                iterations: stats.iterations,
                gap,
            });
        }
        if gap <= config.picard_tol {
            break;
        }
        if stats.iterations >= config.picard_max {
            return Err(Error::PicardDiverged {
                time: state.t + config.dt,
                iterations: stats.iterations,
                gap,
            });
        }
    }
    Ok((
        SimState {
            t: state.t + config.dt,
            step: new_step,
            v: iterate,
            neumann: f_new,
        },
        stats,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub norm_v: f64,
    pub norm_w: f64,
    pub control: f64,
    pub iterations: usize,
    pub contraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SimulationTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn norms_v(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm_v).collect()
    }

    pub fn norms_w(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm_w).collect()
    }

    /// Centered differences of `||w||^2`; entry `i` belongs to row `i + 1`.
    pub fn w_energy_rates(&self) -> Vec<f64> {
        self.rows
            .windows(3)
            .map(|w| (w[2].norm_w.powi(2) - w[0].norm_w.powi(2)) / (w[2].t - w[0].t))
            .collect()
    }

    pub fn max_iterations(&self) -> usize {
        self.rows.iter().skip(1).map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn max_contraction(&self) -> f64 {
        self.rows.iter().map(|r| r.contraction).fold(0.0, f64::max)
    }

    /// Rows whose `||w||` is under [`ROUNDOFF_FLOOR`] times `||w(0)||`.
    pub fn below_floor(&self, row: usize) -> bool {
        let w0 = self.rows.first().map_or(0.0, |r| r.norm_w);
        self.rows[row].norm_w <= w0 * ROUNDOFF_FLOOR
    }

    fn fit(&self, window: (f64, f64), pick: impl Fn(&TraceRow) -> f64) -> Result<f64> {
        let (t, y): (Vec<f64>, Vec<f64>) = (0..self.rows.len())
            .filter(|&r| !self.below_floor(r))
            .map(|r| (self.rows[r].t, pick(&self.rows[r])))
            .unzip();
        fit_decay_rate(&t, &y, window)
    }

    /// Decay rate of `||w||` on `window`, leaving out rows under the
    /// roundoff floor.
    pub fn fit_w_rate(&self, window: (f64, f64)) -> Result<f64> {
        self.fit(window, |r| r.norm_w)
    }

    /// Decay rate of `||v||` on `window`, same row selection as
    /// [`Self::fit_w_rate`].
    pub fn fit_v_rate(&self, window: (f64, f64)) -> Result<f64> {
        self.fit(window, |r| r.norm_v)
    }
}

/// Which dynamics to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Linear,
    Nonlinear,
}

/// Checks `v0(0) = v0(L) = 0`; values below `1e-12 max |v0|` count as zero
/// and are snapped.
pub fn conforming_initial(v0: &[f64]) -> Result<Vec<f64>> {
    let scale = v0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (left, right) = (v0[0].abs(), v0[v0.len() - 1].abs());
    if left > 1e-12 * scale || right > 1e-12 * scale {
        return Err(Error::NonConformingInitialData { left, right });
    }
    let mut v = v0.to_vec();
    let last = v.len() - 1;
    v[0] = 0.0;
    v[last] = 0.0;
    Ok(v)
}

/// Sets the boundary values to zero.
pub fn project_initial(v0: &[f64]) -> Vec<f64> {
    let mut v = v0.to_vec();
    let last = v.len() - 1;
    v[0] = 0.0;
    v[last] = 0.0;
    v
}

/// Integrates from `v0` with the configured controller. `||w||` is computed
/// through `transform` when given and equals `||v||` otherwise.
pub fn simulate(
    v0: &[f64],
    config: &SimConfig,
    dynamics: Dynamics,
    transform: Option<&TransformOperator>,
) -> Result<SimulationTrace> {
    config.validate()?;
    config.grid.check_len(v0.len())?;
    let v0 = conforming_initial(v0)?;
    let stepper = Stepper::new(&config.grid, config.dt, config.theta)?;
    let grid = &config.grid;
    let norm_w = |v: &[f64]| -> Result<f64> {
        match transform {
            Some(op) => Ok(grid.norm(&op.forward(v)?)),
            None => Ok(grid.norm(v)),
        }
    };
    let mut state = SimState {
        t: 0.0,
        step: 0,
        neumann: controller_value(&config.controller, grid, &v0, 0),
        v: v0,
    };
    let mut trace = SimulationTrace::default();
    let record = |trace: &mut SimulationTrace, s: &SimState, stats: StepStats| -> Result<()> {
        trace.rows.push(TraceRow {
            t: s.t,
            norm_v: grid.norm(&s.v),
            norm_w: norm_w(&s.v)?,
            control: s.neumann,
            iterations: stats.iterations,
            contraction: stats.contraction,
        });
        Ok(())
    };
    record(&mut trace, &state, StepStats::default())?;
    if config.snapshot_stride > 0 {
        trace.snapshots.push((0.0, state.v.clone()));
    }
    let steps = config.steps();
    for k in 1..=steps {
        let (next, stats) = nonlinear_step(&stepper, &state, config, dynamics == Dynamics::Nonlinear)?;
        state = next;
        state.t = k as f64 * config.dt;
        if k % config.record_stride == 0 || k == steps {
            record(&mut trace, &state, stats)?;
        }
        if config.snapshot_stride > 0 && (k % config.snapshot_stride == 0 || k == steps) {
            trace.snapshots.push((state.t, state.v.clone()));
        }
    }
    Ok(trace)
}

fn feedback_config(config: &SimConfig, kernel: &KernelField, transform: &TransformOperator) -> Result<SimConfig> {
    transform.ensure_current(kernel)?;
    if kernel.grid() != &config.grid {
        return Err(Error::GridMismatch {
            expected: config.grid.len(),
            actual: kernel.grid().len(),
        });
    }
    Ok(config
        .clone()
        .with_controller(Controller::LinearFeedback(kernel.gain().to_vec())))
}

/// Nonlinear closed loop with the kernel's feedback (the configured
/// controller is replaced).
pub fn simulate_closed_loop(
    v0: &[f64],
    config: &SimConfig,
    kernel: &KernelField,
    transform: &TransformOperator,
) -> Result<SimulationTrace> {
    let cfg = feedback_config(config, kernel, transform)?;
    simulate(v0, &cfg, Dynamics::Nonlinear, Some(transform))
}

/// Linear closed loop with the kernel's feedback.
pub fn simulate_linear_closed_loop(
    v0: &[f64],
    config: &SimConfig,
    kernel: &KernelField,
    transform: &TransformOperator,
) -> Result<SimulationTrace> {
    let cfg = feedback_config(config, kernel, transform)?;
    simulate(v0, &cfg, Dynamics::Linear, Some(transform))
}

/// Decay rate `-slope` of the least-squares line through `(t, ln y)` over
/// samples with `t` in `window`.
pub fn fit_decay_rate<T: Scalar>(t: &[T], y: &[T], window: (T, T)) -> Result<T> {
    let pts: Vec<(T, T)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= window.0 && ti <= window.1)
        .map(|(&ti, &yi)| (ti, yi))
        .collect();
    if pts.len() < 5 {
        return Err(Error::DegenerateWindow(format!(
            "{} samples in window, need 5",
            pts.len()
        )));
    }
    if pts.iter().any(|&(_, yi)| !(yi > T::zero())) {
        return Err(Error::DegenerateWindow("nonpositive norm in window".into()));
    }
    let n = T::from_count(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(ti, yi) in &pts {
        let dt = ti - mt;
        sxy += dt * (yi.ln() - ml);
        sxx += dt * dt;
    }
    if sxx == T::zero() {
        return Err(Error::DegenerateWindow("all samples at one time".into()));
    }
    Ok(-(sxy / sxx))
}

/// Rows whose `||w||` has dropped below this fraction of `||w(0)||` are
/// left out of the inequality checks. At that level the trace is dominated
/// by roundoff-seeded grid modes that the trapezoidal rule barely damps.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Outcome of a pointwise differential-inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InequalityReport {
    pub checked: usize,
    pub violations: usize,
    /// Rows skipped because `||w||` was under the roundoff floor.
    pub below_floor: usize,
    /// Largest `(rate - bound) / ||w||^2` among violations.
    pub worst_excess: f64,
}

impl InequalityReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        }
    }
}

fn inequality_check(
    trace: &SimulationTrace,
    skip: usize,
    floor: f64,
    bound: impl Fn(f64) -> f64,
) -> InequalityReport {
    let rates = trace.w_energy_rates();
    let mut report = InequalityReport::default();
    let floor = trace.rows.first().map_or(0.0, |r| r.norm_w) * floor;
    for (k, rate) in rates.iter().enumerate() {
        let row = k + 1;
        if row <= skip {
            continue;
        }
        let w = trace.rows[row].norm_w;
        if w == 0.0 {
            continue;
        }
        if w <= floor {
            report.below_floor += 1;
            continue;
        }
        report.checked += 1;
        let b = bound(w);
        if *rate > b {
            report.violations += 1;
            report.worst_excess = report.worst_excess.max((rate - b) / (w * w));
        }
    }
    report
}

/// `d/dt ||w||^2 <= -lambda ||w||^2` after the first `skip` rows. Rows with
/// `||w|| <= floor ||w(0)||` are counted in `below_floor` instead; pass
/// [`ROUNDOFF_FLOOR`] normally and 0 to check every row.
pub fn linear_w_inequality_check(
    trace: &SimulationTrace,
    lambda: f64,
    skip: usize,
    floor: f64,
) -> InequalityReport {
    inequality_check(trace, skip, floor, |w| -lambda * w * w)
}

/// `d/dt ||w||^2 <= -2 lambda ||w||^2 + c_hat ||w||^3`, rows selected as in
/// [`linear_w_inequality_check`].
pub fn nonlinear_w_inequality_check(
    trace: &SimulationTrace,
    lambda: f64,
    c_hat: f64,
    skip: usize,
    floor: f64,
) -> InequalityReport {
    inequality_check(trace, skip, floor, |w| -2.0 * lambda * w * w + c_hat * w.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(3.0, n).unwrap()
    }

    fn bump(g: &Grid, amp: f64) -> Vec<f64> {
        g.sample(|x| amp * (PI * x / 3.0).sin().powi(2))
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid(64);
        let cfg = SimConfig::new(g.clone(), 1e-2, 0.1);
        let s = Stepper::new(&g, 1e-2, 0.5).unwrap();
        let st = SimState {
            t: 0.0,
            step: 0,
            v: vec![0.0; 65],
            neumann: 0.0,
        };
        let next = linear_step(&s, &st, &cfg, &vec![0.0; 65], 0.0).unwrap();
        assert!(next.v.iter().all(|&v| v == 0.0));
        let cfg = cfg.with_controller(Controller::LinearFeedback(vec![1.0; 65]));
        let (next, stats) = nonlinear_step(&s, &st, &cfg, true).unwrap();
        assert!(next.v.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn open_loop_energy_nonincreasing() {
        let g = grid(128);
        let cfg = SimConfig::new(g.clone(), 1e-3, 0.5);
        let tr = simulate(&bump(&g, 1.0), &cfg, Dynamics::Linear, None).unwrap();
        for w in tr.rows.windows(2) {
            assert!(w[1].norm_v <= w[0].norm_v * (1.0 + 1e-12));
        }
    }

    #[test]
    fn convection_is_energy_neutral() {
        let g = grid(64);
        let u = g.sample(|x| (x * (3.0 - x)).powi(2) * (1.0 + x));
        let c = convection(&u, g.step());
        let s: f64 = u.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn dirichlet_rows_exact() {
        let g = grid(64);
        let cfg = SimConfig::new(g.clone(), 1e-3, 0.05)
            .with_controller(Controller::Frozen(vec![0.1; 100]));
        let tr = simulate(&bump(&g, 0.1), &SimConfig { snapshot_stride: 1, ..cfg }, Dynamics::Nonlinear, None).unwrap();
        for (_, v) in &tr.snapshots {
            assert_eq!(v[0], 0.0);
            assert_eq!(v[64], 0.0);
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        // u = e^{-t} sin^2(pi x / L) (1 + x), u_x(L) nonzero
        let l = 3.0;
        let w = PI / l;
        let exact = |t: f64, x: f64| (-t).exp() * (w * x).sin().powi(2) * (1.0 + x);
        let derivs = |x: f64| {
            let s = (w * x).sin();
            let c = (w * x).cos();
            let p = s * s; // sin^2
            let p1 = 2.0 * w * s * c;
            let p2 = 2.0 * w * w * (c * c - s * s);
            let p3 = -8.0 * w.powi(3) * s * c;
            let q = 1.0 + x;
            (p * q, p1 * q + p, p3 * q + 3.0 * p2)
        };
        let forcing = |t: f64, x: f64| {
            let (u, ux, uxxx) = derivs(x);
            (-t).exp() * (-u + uxxx + ux)
        };
        let neumann = |t: f64| (-t).exp() * derivs(l).1;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = Grid::new(l, n).unwrap();
            let dt = 1e-4;
            let cfg = SimConfig {
                startup_steps: 0,
                ..SimConfig::new(g.clone(), dt, 0.05)
            };
            let s = Stepper::new(&g, dt, 0.5).unwrap();
            let mut st = SimState {
                t: 0.0,
                step: 0,
                v: g.sample(|x| exact(0.0, x)),
                neumann: neumann(0.0),
            };
            for _ in 0..cfg.steps() {
                let f: Vec<f64> = g
                    .sample(|x| 0.5 * (forcing(st.t, x) + forcing(st.t + dt, x)));
                st = linear_step(&s, &st, &cfg, &f, neumann(st.t + dt)).unwrap();
            }
            let e: Vec<f64> = g
                .nodes()
                .iter()
                .zip(&st.v)
                .map(|(&x, v)| v - exact(st.t, x))
                .collect();
            errs.push(g.norm(&e));
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
        assert!(errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn fit_examples() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        assert!((fit_decay_rate(&t, &e, (0.0, 5.0)).unwrap() - 1.0).abs() < 1e-10);
        let c = vec![2.0; 50];
        assert!(fit_decay_rate(&t, &c, (0.0, 5.0)).unwrap().abs() < 1e-14);
        let n: Vec<f64> = t
            .iter()
            .map(|t| 3.0 * (-0.5 * t).exp() * (1.0 + 0.01 * t.sin()))
            .collect();
        assert!((fit_decay_rate(&t, &n, (0.0, 5.0)).unwrap() - 0.5).abs() < 0.02);
        assert!(matches!(
            fit_decay_rate(&t, &e, (0.0, 0.3)),
            Err(Error::DegenerateWindow(_))
        ));
        let mut z = e.clone();
        z[3] = 0.0;
        assert!(fit_decay_rate(&t, &z, (0.0, 5.0)).is_err());
        let t32: Vec<f32> = (0..20).map(|i| i as f32 * 0.1).collect();
        let e32: Vec<f32> = t32.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!((fit_decay_rate(&t32, &e32, (0.0, 2.0)).unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn feedback_eval_properties() {
        let g = grid(64);
        let gain = g.sample(|x| x.cos());
        assert_eq!(feedback_eval(&g, &gain, &vec![0.0; 65]).unwrap(), 0.0);
        let v = g.sample(|x| x.sin());
        let a = feedback_eval(&g, &gain, &v).unwrap();
        let v3: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
        assert!((feedback_eval(&g, &gain, &v3).unwrap() - 3.0 * a).abs() < 1e-12);
        assert!(a.abs() <= g.norm(&gain) * g.norm(&v));
        assert!(feedback_eval(&g, &gain, &[1.0]).is_err());
    }

    #[test]
    fn nonconforming_rejected() {
        let g = grid(16);
        let cfg = SimConfig::new(g.clone(), 1e-2, 0.1);
        let v = vec![1.0; 17];
        assert!(matches!(
            simulate(&v, &cfg, Dynamics::Linear, None),
            Err(Error::NonConformingInitialData { .. })
        ));
        let p = project_initial(&v);
        assert!(simulate(&p, &cfg, Dynamics::Linear, None).is_ok());
    }

    #[test]
    fn large_data_diverges() {
        let g = grid(64);
        let cfg = SimConfig {
            picard_max: 8,
            startup_steps: 0,
            ..SimConfig::new(g.clone(), 0.05, 0.5)
        };
        let r = simulate(&bump(&g, 400.0), &cfg, Dynamics::Nonlinear, None);
        assert!(matches!(r, Err(Error::PicardDiverged { .. })), "{r:?}");
    }

    #[test]
    fn config_validation() {
        let g = grid(16);
        let mut c = SimConfig::new(g, 1e-2, 1.0);
        c.theta = 0.3;
        assert!(c.validate().is_err());
        c.theta = 0.5;
        c.dt = 0.0;
        assert!(c.validate().is_err());
        assert_eq!(SimConfig::new(grid(16), 1e-3, 10.0).steps(), 10000);
    }
}
