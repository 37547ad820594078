use std::path::Path;
use std::process::{Command, Output};

fn kdvstab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvstab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn floats(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn critical_length_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(&["spectrum", "--length", "6.283185307179586"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("critical length"));
}

#[test]
fn spectrum_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(&["spectrum", "--modes", "10", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s/spectrum.csv")).unwrap();
    let mu = floats(&csv, "mu");
    assert_eq!(mu.len(), 20);
    for k in 0..10 {
        assert_eq!(mu[k], -mu[19 - k]);
    }
    let alpha = floats(&csv, "alpha");
    let target = 1.0 / 3f64.sqrt();
    assert!((alpha[19] - target).abs() < 0.02 * target, "{}", alpha[19]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# small run\nmodes = 4\nnx = 256\nout = from_file\n").unwrap();
    let o = kdvstab(&["spectrum", "--config", "run.cfg", "--modes", "6"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("from_file/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kdvstab(&["spectrum", "--bogus"], dir.path())), 1);
    assert_eq!(code(&kdvstab(&["spectrum", "--nx", "7"], dir.path())), 1);
    assert_eq!(code(&kdvstab(&["simulate", "--linear", "--nonlinear"], dir.path())), 1);
    assert_eq!(code(&kdvstab(&["--help"], dir.path())), 0);
}

#[test]
fn kernel_cache_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["kernel", "--modes", "10", "--nx", "256"];
    for out in ["a", "b"] {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        assert_eq!(code(&kdvstab(&a, dir.path())), 0);
    }
    let a = std::fs::read(dir.path().join("a/kernel.cache")).unwrap();
    let b = std::fs::read(dir.path().join("b/kernel.cache")).unwrap();
    assert_eq!(a, b);
    let diag = std::fs::read_to_string(dir.path().join("a/kernel_diagnostics.csv")).unwrap();
    let radius = diag
        .lines()
        .find_map(|l| l.strip_prefix("spectral_radius_kd,"))
        .unwrap()
        .parse::<f64>()
        .unwrap();
    assert!(radius < 1.0);
    assert!(diag.contains("cond_i_minus_k,"));
}

#[test]
fn corrupted_cache_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--modes", "4", "--nx", "128", "--cache", "k.cache"];
    let mut a = vec!["kernel"];
    a.extend(small);
    assert_eq!(code(&kdvstab(&a, dir.path())), 0);
    let path = dir.path().join("k.cache");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("[kernel]\n0", "[kernel]\n1", 1)).unwrap();
    for cmd in ["verify", "simulate"] {
        let mut a = vec![cmd];
        a.extend(small);
        let o = kdvstab(&a, dir.path());
        assert_eq!(code(&o), 3, "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
    }
}

#[test]
fn verify_single_mode_skips_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(
        &["verify", "--modes", "1", "--nx", "128", "--tfinal", "4", "--dt", "2e-3", "--out", "v"],
        dir.path(),
    );
    let text = stdout(&o);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("SKIP [1] tau-envelope"));
    assert!(text.contains("SKIP [3] coefficient-envelope"));
    assert!(!text.contains("FAIL"));
    let csv = std::fs::read_to_string(dir.path().join("v/verify.csv")).unwrap();
    assert!(csv.starts_with("criterion,suite,status,detail\n"));
    assert!(column(&csv, "status").iter().all(|s| s == "PASS" || s == "SKIP"));
}

#[test]
fn nonconforming_data_needs_projection() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["simulate", "--modes", "4", "--nx", "256", "--tfinal", "0.1", "--dt", "1e-2", "--initial", "ramp"];
    assert_eq!(code(&kdvstab(&base, dir.path())), 1);
    let mut a = base.to_vec();
    a.push("--project");
    assert_eq!(code(&kdvstab(&a, dir.path())), 0);
}

#[test]
fn open_loop_at_critical_length_keeps_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(
        &[
            "simulate", "--length", "6.283185307179586", "--open-loop", "--linear", "--initial",
            "stationary", "--nx", "256", "--tfinal", "5", "--dt", "2e-3", "--out", "c",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("c/trace.csv")).unwrap();
    let v = floats(&csv, "norm_v");
    let drift = v.iter().map(|x| (x * x / (v[0] * v[0]) - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift < 0.05, "{drift}");
}

#[test]
fn linear_run_reports_inequality_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(
        &["simulate", "--linear", "--modes", "10", "--nx", "256", "--tfinal", "4", "--dt", "2e-3", "--out", "l"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("l/trace.csv")).unwrap();
    let flags: Vec<String> = column(&csv, "inequality_ok").into_iter().filter(|s| !s.is_empty()).collect();
    assert!(flags.len() > 100);
    let bad = flags.iter().filter(|s| *s == "0").count();
    assert!(bad as f64 <= 0.05 * flags.len() as f64, "{bad}/{}", flags.len());
    assert!(dir.path().join("l/snapshots.csv").exists());
    let plot = std::fs::read_to_string(dir.path().join("l/plot_trace.py")).unwrap();
    assert!(plot.contains("semilogy"));
}

#[test]
fn sweep_writes_one_directory_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvstab(
        &[
            "simulate", "--linear", "--modes", "6", "--nx", "128", "--tfinal", "3", "--dt", "5e-3",
            "--sweep", "lambda=0.5,2", "--out", "sw",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("sw/lambda_0.5/trace.csv").exists());
    assert!(dir.path().join("sw/lambda_2/trace.csv").exists());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("lambda ")).count(), 2);
}
