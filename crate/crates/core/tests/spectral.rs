use std::f64::consts::PI;

use kdv_stab::spectral::{
    build_basis, build_mode, eigen_residual, locate_roots, locate_taus, Tolerances,
};
use kdv_stab::verify::oracle::fd_mus;
use kdv_stab::verify::tau_envelope;
use kdv_stab::{Error, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

/// Determinant of the boundary conditions for `phi = sum a_k e^{r_k x}`,
/// with `r = 2 i tau, -i tau +- s`, divided by `s e^{sL}`. Real for
/// `3 tau^2 > 1`.
fn boundary_determinant(tau: f64, l: f64) -> f64 {
    let s = (3.0 * tau * tau - 1.0).sqrt();
    let r = [
        Complex64::new(0.0, 2.0 * tau),
        Complex64::new(s, -tau),
        Complex64::new(-s, -tau),
    ];
    let e: Vec<Complex64> = r.iter().map(|&z| (z * l).exp() / (s * l).exp()).collect();
    let scale = Complex64::new((-s * l).exp(), 0.0);
    // rows: phi(0), phi(L), phi'(0) - phi'(L), each scaled by e^{-sL}
    let m = [
        [scale; 3],
        [e[0], e[1], e[2]],
        [r[0] * (scale - e[0]), r[1] * (scale - e[1]), r[2] * (scale - e[2])],
    ];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (det / s).re
}

#[test]
fn eleventh_root_matches_determinant_scan() {
    let l = 3.0;
    let target = 10.0 * PI / l + 5.0 * PI / (6.0 * l);
    let f = |t: f64| boundary_determinant(t, l);
    let (lo, hi) = (10.0 * PI / l, 11.0 * PI / l);
    let steps = ((hi - lo) / 1e-4) as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..steps {
        let (a, b) = (lo + k as f64 * 1e-4, lo + (k + 1) as f64 * 1e-4);
        if f(a).signum() != f(b).signum() {
            let closer = best.map_or(true, |(p, _)| (a - target).abs() < (p - target).abs());
            if closer {
                best = Some((a, b));
            }
        }
    }
    let (mut a, mut b) = best.expect("sign change near the asymptote");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a).signum() == f(m).signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let oracle = 0.5 * (a + b);
    let taus = locate_taus(l, 11).unwrap();
    assert!((taus[10] - oracle).abs() < 1e-10, "{} vs {oracle}", taus[10]);
}

#[test]
fn finite_difference_oracle() {
    let roots = locate_roots(3.0, 6, &Tolerances::default()).unwrap();
    let fd = fd_mus(3.0, 6, 400, 4096).unwrap();
    for (r, m) in roots.iter().zip(&fd) {
        assert!((r.mu - m).abs() <= 1e-4 * r.mu, "{} vs {m}", r.mu);
    }
}

#[test]
fn tau_envelope_shrinks() {
    let e = tau_envelope(3.0, 60).unwrap();
    let max = |a: usize, b: usize| e[a..b].iter().copied().fold(0.0, f64::max);
    assert!(max(30, 60) <= max(15, 30));
    assert!(max(15, 30) <= max(0, 15));
}

#[test]
fn cubic_growth() {
    let roots = locate_roots(3.0, 40, &Tolerances::default()).unwrap();
    let ratio = |j: usize| roots[j - 1].mu / (2.0 * j as f64 * PI / 3.0).powi(3);
    assert!((ratio(40) - 1.0).abs() < 0.02, "{}", ratio(40));
    assert!((ratio(40) - 1.0).abs() < (ratio(10) - 1.0).abs());
}

#[test]
fn critical_lengths_rejected() {
    for l in [2.0 * PI, 2.0 * PI * (7.0f64 / 3.0).sqrt()] {
        assert!(matches!(
            locate_roots(l, 5, &Tolerances::default()),
            Err(Error::CriticalLength { .. })
        ));
    }
}

#[test]
fn gram_at_fine_grid() {
    let grid = Grid::new(3.0, 2048).unwrap();
    let basis = build_basis(3.0, 1.0, 10, &grid, &Tolerances::default()).unwrap();
    assert!(basis.gram_deviation() <= 1e-6);
    let m3 = basis.mode(3);
    let c3 = basis.mode(-3);
    assert_eq!(c3.mu, -m3.mu);
    for (a, b) in c3.values.iter().zip(&m3.values) {
        assert_eq!(*a, b.conj());
    }
}

#[test]
fn first_mode_residual_on_fine_grid() {
    let grid = Grid::new(3.0, 4096).unwrap();
    let tau = locate_taus(3.0, 1).unwrap()[0];
    let mode = build_mode(1, tau, &grid).unwrap();
    assert!(eigen_residual(&mode, &grid) < 1e-4 * mode.mu.abs());
}

#[test]
fn derivative_growth_is_linear() {
    let grid = Grid::new(3.0, 2048).unwrap();
    let basis = build_basis(3.0, 1.0, 40, &grid, &Tolerances::for_synthesis()).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in 5..=40 {
        let m = basis.mode(j);
        let slope = m.dphi0.norm() / j as f64;
        let sup = m.derivatives.iter().map(|z| z.norm()).fold(0.0, f64::max) / j as f64;
        lo = lo.min(slope);
        hi = hi.max(slope).max(sup);
    }
    assert!(lo > 1.5 && hi < 6.0, "{lo} {hi}");
    let alpha = basis.mode(40).alpha;
    let target = 1.0 / 3f64.sqrt();
    assert!((alpha - target).abs() < 0.02 * target, "{alpha}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn roots_ordered_one_per_bracket(l in 0.7f64..6.2) {
        let roots = locate_roots(l, 20, &Tolerances::default()).unwrap();
        for (rank, r) in roots.iter().enumerate() {
            prop_assert_eq!(r.bracket, rank as i64);
            if rank > 0 {
                prop_assert!(r.mu > roots[rank - 1].mu);
            }
        }
    }
}
