use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use kdv_stab::kernel::{synthesize, transposition_residual, KernelField, TestFunction};
use kdv_stab::report::{load_kernel, plot_script, save_kernel, write_csv, Cell, RunConfig};
use kdv_stab::sim::{
    conforming_initial, fit_decay_rate, project_initial, simulate, Controller, Dynamics, SimulationTrace,
    ROUNDOFF_FLOOR,
};
use kdv_stab::spectral::{build_basis, eigen_residual, Tolerances};
use kdv_stab::transform::TransformOperator;
use kdv_stab::verify::{self, Status};
use kdv_stab::{Error, Grid, Result};

#[derive(Parser)]
#[command(
    name = "kdvstab",
    version,
    about = "Boundary feedback for the linearized and nonlinear KdV equation on [0, L]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and eigenfunction diagnostics as CSV.
    Spectrum(Common),
    /// Synthesize the kernel, write the cache and a diagnostics CSV.
    Kernel(Common),
    /// Integrate the closed (or open) loop and write trace, snapshots and a
    /// plot script.
    Simulate(SimulateArgs),
    /// Run every verification suite and report PASS/FAIL/SKIP.
    Verify(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Initial {
    /// amplitude sin(pi x / L)
    Sine,
    /// amplitude (1 - cos(2 pi x / L)), stationary for L = 2 pi
    Stationary,
    /// amplitude x / L, needs --project
    Ramp,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Linearized dynamics.
    #[arg(long, conflicts_with = "nonlinear")]
    linear: bool,
    /// Full nonlinear dynamics (default).
    #[arg(long)]
    nonlinear: bool,
    /// No feedback: v_x(t, L) = 0.
    #[arg(long)]
    open_loop: bool,
    /// Zero the boundary values of nonconforming initial data.
    #[arg(long)]
    project: bool,
    #[arg(long, value_enum, default_value = "sine")]
    initial: Initial,
    /// Parallel runs over a lambda list, e.g. lambda=0.5,1,2.
    #[arg(long)]
    sweep: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_text(&std::fs::read_to_string(p)?)?;
        }
        let mut set = |k: &str, v: Option<String>| -> Result<()> {
            match v {
                Some(v) => c.set(k, &v),
                None => Ok(()),
            }
        };
        set("length", self.length.map(|v| v.to_string()))?;
        set("lambda", self.lambda.map(|v| v.to_string()))?;
        set("modes", self.modes.map(|v| v.to_string()))?;
        set("nx", self.nx.map(|v| v.to_string()))?;
        set("dt", self.dt.map(|v| v.to_string()))?;
        set("tfinal", self.tfinal.map(|v| v.to_string()))?;
        set("theta", self.theta.map(|v| v.to_string()))?;
        set("amplitude", self.amplitude.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        set("cache", self.cache.as_ref().map(|p| p.display().to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Spectrum(c) => cmd_spectrum(&c.resolve()?),
        Command::Kernel(c) => cmd_kernel(&c.resolve()?),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(c) => cmd_verify(&c.resolve()?),
    }
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<i32> {
    cfg.validate_noncritical()?;
    let grid = Grid::new(cfg.length, cfg.nx)?;
    let basis = build_basis(cfg.length, cfg.lambda, cfg.modes, &grid, &Tolerances::for_synthesis())?;
    let rows: Vec<Vec<Cell>> = basis
        .modes()
        .iter()
        .map(|m| {
            vec![
                Cell::Int(m.index as i64),
                m.tau.into(),
                m.mu.into(),
                m.alpha.into(),
                m.dphi0.norm().into(),
                m.bc_residual().into(),
                eigen_residual(m, &grid).into(),
            ]
        })
        .collect();
    let path = cfg.out.join("spectrum.csv");
    write_csv(
        &path,
        &["j", "tau", "mu", "alpha", "abs_dphi0", "bc_residual", "ode_residual"],
        &rows,
    )?;
    println!("{} modes, Gram deviation {:.3e}", rows.len(), basis.gram_deviation());
    println!("wrote {}", path.display());
    Ok(0)
}

fn cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.cache.clone().unwrap_or_else(|| cfg.out.join("kernel.cache"))
}

fn cmd_kernel(cfg: &RunConfig) -> Result<i32> {
    cfg.validate_noncritical()?;
    let (_, kernel) = synthesize(cfg.length, cfg.lambda, cfg.modes, cfg.nx, &Tolerances::for_synthesis())?;
    let transform = TransformOperator::new(&kernel)?;
    let norms = transform.norms();
    let radius = transform.spectral_radius();
    let cache = cache_path(cfg);
    save_kernel(&cache, &kernel)?;

    let n = cfg.modes as i32;
    let coeffs: Vec<Vec<Cell>> = (-n..0)
        .chain(1..=n)
        .map(|j| {
            let c = kernel.coefficients().get(j);
            vec![Cell::Int(j as i64), c.re.into(), c.im.into(), (c - 1.0).norm().into()]
        })
        .collect();
    write_csv(&cfg.out.join("coefficients.csv"), &["j", "re_c", "im_c", "abs_c_minus_1"], &coeffs)?;

    let mut diag: Vec<(String, f64)> = Vec::new();
    if let Some(d) = kernel.diagnostics() {
        diag.extend([
            ("max_imag_k".into(), d.max_imag),
            ("max_real_k".into(), d.max_real),
            ("gain_max_imag".into(), d.gain_max_imag),
            ("ky_edge_left".into(), d.ky_edge_left),
            ("ky_edge_right".into(), d.ky_edge_right),
            ("ky_norm".into(), d.ky_norm),
            ("c_hat".into(), d.c_hat(norms.inverse)),
        ]);
    }
    let len = kernel.grid().len();
    let last = len - 1;
    let edge = (0..len)
        .flat_map(|t| [kernel.at(0, t), kernel.at(last, t), kernel.at(t, 0), kernel.at(t, last)])
        .fold(0.0f64, |a, v| a.max(v.abs()));
    diag.push(("edge_max_abs_k".into(), edge));
    for rho in TestFunction::canned() {
        diag.push((format!("transposition_{}", rho.name), transposition_residual(&kernel, &rho)?));
    }
    diag.extend([
        ("spectral_radius_kd".into(), radius),
        ("norm_i_minus_k".into(), norms.forward),
        ("norm_inverse".into(), norms.inverse),
        ("cond_i_minus_k".into(), norms.condition()),
        ("coefficient_condition".into(), kernel.coefficients().condition),
        ("coefficient_residual".into(), kernel.coefficients().residual),
    ]);
    let rows: Vec<Vec<Cell>> = diag
        .iter()
        .map(|(k, v)| vec![Cell::Text(k.clone()), (*v).into()])
        .collect();
    write_csv(&cfg.out.join("kernel_diagnostics.csv"), &["quantity", "value"], &rows)?;
    println!(
        "spectral radius {radius:.3e}, cond(I - K) {:.6}, gain norm {:.4}",
        norms.condition(),
        kernel.grid().norm(kernel.gain())
    );
    println!("wrote {}", cache.display());
    Ok(0)
}

/// Kernel from `cfg.cache` when that file exists and matches `cfg`,
/// otherwise synthesized (and saved when a cache path was given).
fn obtain_kernel(cfg: &RunConfig) -> Result<KernelField> {
    if let Some(path) = &cfg.cache {
        if path.exists() {
            let (h, k) = load_kernel(path)?;
            if h.length != cfg.length || h.lambda != cfg.lambda || h.modes != cfg.modes || h.nx != cfg.nx {
                return Err(Error::Config(format!(
                    "cache {} holds L = {}, lambda = {}, N = {}, nx = {}; configuration differs",
                    path.display(),
                    h.length,
                    h.lambda,
                    h.modes,
                    h.nx
                )));
            }
            return Ok(k);
        }
    }
    let (_, k) = synthesize(cfg.length, cfg.lambda, cfg.modes, cfg.nx, &Tolerances::for_synthesis())?;
    if let Some(path) = &cfg.cache {
        save_kernel(path, &k)?;
    }
    Ok(k)
}

fn initial_data(kind: Initial, grid: &Grid, amplitude: f64) -> Vec<f64> {
    let l = grid.length();
    let mut v = match kind {
        Initial::Sine => grid.sample(|x| amplitude * (PI * x / l).sin()),
        Initial::Stationary => grid.sample(|x| amplitude * (1.0 - (2.0 * PI * x / l).cos())),
        Initial::Ramp => grid.sample(|x| amplitude * x / l),
    };
    // sin(pi) and 1 - cos(2 pi) are roundoff, not data
    if !matches!(kind, Initial::Ramp) {
        v[0] = 0.0;
        let last = v.len() - 1;
        v[last] = 0.0;
    }
    v
}

struct RunSummary {
    lambda: f64,
    rate: Option<f64>,
    /// `max |E(t) / E(0) - 1|` with `E = ||v||^2`.
    drift: f64,
    checked: usize,
    violations: usize,
    out: PathBuf,
}

fn run_simulation(cfg: &RunConfig, args: &SimulateArgs) -> Result<RunSummary> {
    let dynamics = if args.linear { Dynamics::Linear } else { Dynamics::Nonlinear };
    let grid = Grid::new(cfg.length, cfg.nx)?;
    let mut v0 = initial_data(args.initial, &grid, cfg.amplitude);
    v0 = if args.project {
        project_initial(&v0)
    } else {
        conforming_initial(&v0)?
    };
    let (kernel, transform) = if args.open_loop {
        (None, None)
    } else {
        cfg.validate_noncritical()?;
        let k = obtain_kernel(cfg)?;
        let t = TransformOperator::new(&k)?;
        (Some(k), Some(t))
    };
    let mut sim = verify::sim_config(cfg, grid.clone());
    sim.snapshot_stride = (sim.steps() / 50).max(1);
    if let Some(k) = &kernel {
        sim.controller = Controller::LinearFeedback(k.gain().to_vec());
    }
    let trace = simulate(&v0, &sim, dynamics, transform.as_ref())?;

    let c_hat = match (&kernel, &transform) {
        (Some(k), Some(t)) => k.diagnostics().map(|d| d.c_hat(t.norms().inverse)),
        _ => None,
    };
    let bound = |w: f64| -> Option<f64> {
        if args.open_loop {
            return None;
        }
        match dynamics {
            Dynamics::Linear => Some(-cfg.lambda * w * w),
            Dynamics::Nonlinear => c_hat.map(|c| -2.0 * cfg.lambda * w * w + c * w.powi(3)),
        }
    };
    let (rows, checked, violations) = trace_rows(&trace, bound);
    std::fs::create_dir_all(&cfg.out)?;
    let trace_path = cfg.out.join("trace.csv");
    write_csv(
        &trace_path,
        &[
            "t", "norm_v", "norm_w", "control", "iters", "contraction", "d_dt_norm_w_sq", "bound",
            "inequality_ok",
        ],
        &rows,
    )?;
    let snaps: Vec<Vec<Cell>> = trace
        .snapshots
        .iter()
        .flat_map(|(t, v)| {
            grid.nodes()
                .iter()
                .zip(v)
                .map(move |(&x, &u)| vec![Cell::Real(*t), x.into(), u.into()])
        })
        .collect();
    write_csv(&cfg.out.join("snapshots.csv"), &["t", "x", "v"], &snaps)?;
    std::fs::write(cfg.out.join("plot_trace.py"), plot_script("trace.csv", cfg.lambda))?;

    let window = if cfg.t_final > 2.0 { (2.0, cfg.t_final) } else { (0.0, cfg.t_final) };
    let rate = if args.open_loop {
        fit_decay_rate(&trace.times(), &trace.norms_v(), window).ok()
    } else {
        trace.fit_w_rate(window).ok()
    };
    let e0 = trace.rows[0].norm_v.powi(2);
    let drift = trace
        .rows
        .iter()
        .map(|r| (r.norm_v.powi(2) / e0 - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(RunSummary {
        lambda: cfg.lambda,
        rate,
        drift,
        checked,
        violations,
        out: cfg.out.clone(),
    })
}

/// CSV rows of `trace` with the centered energy rate and the inequality
/// verdict (blank where no check applies).
fn trace_rows(trace: &SimulationTrace, bound: impl Fn(f64) -> Option<f64>) -> (Vec<Vec<Cell>>, usize, usize) {
    let rates = trace.w_energy_rates();
    let blank = || Cell::Text(String::new());
    let (mut checked, mut violations) = (0, 0);
    let rows = trace
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![
                Cell::Real(r.t),
                r.norm_v.into(),
                r.norm_w.into(),
                r.control.into(),
                r.iterations.into(),
                r.contraction.into(),
            ];
            let rate = (i >= 1).then(|| rates.get(i - 1)).flatten();
            match (rate, bound(r.norm_w)) {
                (Some(&rate), Some(b)) => {
                    row.push(rate.into());
                    row.push(b.into());
                    if i > verify::TRANSIENT_STEPS && !trace.below_floor(i) && r.norm_w > 0.0 {
                        checked += 1;
                        let ok = rate <= b;
                        if !ok {
                            violations += 1;
                        }
                        row.push(Cell::Int(ok as i64));
                    } else {
                        row.push(blank());
                    }
                }
                (Some(&rate), None) => row.extend([rate.into(), blank(), blank()]),
                _ => row.extend([blank(), blank(), blank()]),
            }
            row
        })
        .collect();
    (rows, checked, violations)
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let list = text.strip_prefix("lambda=").unwrap_or(text);
    let values: Vec<f64> = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value {s:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    Ok(values)
}

fn print_summary(s: &RunSummary) {
    let rate = s.rate.map_or("n/a".to_string(), |r| format!("{r:.4}"));
    println!(
        "lambda {}: fitted decay rate {rate}, max energy drift {:.3e}, inequality violations {}/{} (floor {ROUNDOFF_FLOOR:e}), output in {}",
        s.lambda,
        s.drift,
        s.violations,
        s.checked,
        s.out.display()
    );
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let cfg = args.common.resolve()?;
    let Some(text) = &args.sweep else {
        print_summary(&run_simulation(&cfg, args)?);
        return Ok(0);
    };
    if cfg.cache.is_some() {
        return Err(Error::Config("--cache cannot be combined with --sweep".into()));
    }
    let configs: Vec<RunConfig> = parse_sweep(text)?
        .into_iter()
        .map(|lambda| {
            let mut c = cfg.clone();
            c.lambda = lambda;
            c.out = cfg.out.join(format!("lambda_{lambda}"));
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<RunSummary>> = configs.par_iter().map(|c| run_simulation(c, args)).collect();
    for r in results {
        print_summary(&r?);
    }
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    if let Some(path) = &cfg.cache {
        let (h, _) = load_kernel(path)?;
        println!(
            "cache {}: checksum ok (L = {}, lambda = {}, N = {}, nx = {})",
            path.display(),
            h.length,
            h.lambda,
            h.modes,
            h.nx
        );
    }
    cfg.validate_noncritical()?;
    let results = verify::run_all(cfg);
    for r in &results {
        println!("{r}");
    }
    let rows: Vec<Vec<Cell>> = results
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.criterion as i64),
                Cell::from(r.name),
                Cell::Text(r.status.to_string()),
                Cell::Text(r.detail.clone()),
            ]
        })
        .collect();
    let path = cfg.out.join("verify.csv");
    write_csv(&path, &["criterion", "suite", "status", "detail"], &rows)?;
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    println!("{failed} failed; wrote {}", path.display());
    Ok(if failed == 0 { 0 } else { 2 })
}
