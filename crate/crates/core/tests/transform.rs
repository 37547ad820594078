use kdv_stab::kernel::synthesize;
use kdv_stab::sim::{simulate_closed_loop, SimConfig};
use kdv_stab::spectral::Tolerances;
use kdv_stab::transform::TransformOperator;
use kdv_stab::{Error, Grid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operator(n: usize, nx: usize) -> TransformOperator {
    let (_, k) = synthesize(3.0, 1.0, n, nx, &Tolerances::for_synthesis()).unwrap();
    TransformOperator::new(&k).unwrap()
}

fn random(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `||(I - K)^{-1}||` in the weighted norm by power iteration on
/// `A* A`, with `A` applied through the operator's factorization and `A*`
/// through a transposed solve.
fn inverse_norm_by_power(t: &TransformOperator) -> f64 {
    let grid = t.grid();
    let w = grid.weights();
    let len = grid.len();
    let bt = (DMatrix::identity(len, len) - t.matrix()).transpose().lu();
    let mut x = random(len, &mut ChaCha8Rng::seed_from_u64(3));
    let mut est = 0.0;
    for _ in 0..200 {
        let n = grid.norm(&x);
        x.iter_mut().for_each(|v| *v /= n);
        let ax = t.inverse(&x).unwrap();
        est = grid.norm(&ax);
        // weighted adjoint: W^{-1} B^{-T} W
        let rhs = DVector::from_iterator(len, ax.iter().zip(w).map(|(a, w)| a * w));
        let y = bt.solve(&rhs).unwrap();
        x = y.iter().zip(w).map(|(a, w)| a / w).collect();
    }
    est
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let t = operator(10, 256);
    let grid = t.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let (v, u) = (random(grid.len(), &mut rng), random(grid.len(), &mut rng));
        let lhs = grid.inner(&t.apply_k(&v).unwrap(), &u);
        let rhs = grid.inner(&v, &t.apply_adjoint(&u).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * grid.norm(&v) * grid.norm(&u));
    }
}

#[test]
fn inverse_norm_stable_under_refinement() {
    let coarse = operator(10, 256);
    let fine = operator(10, 512);
    let (p1, p2) = (inverse_norm_by_power(&coarse), inverse_norm_by_power(&fine));
    assert!((p1 / coarse.norms().inverse - 1.0).abs() < 1e-6);
    assert!((p2 / fine.norms().inverse - 1.0).abs() < 1e-6);
    assert!((p2 / p1 - 1.0).abs() < 0.1, "{p1} {p2}");
    assert!(p1.is_finite() && p1 < 1e6);

    let (r1, r2) = (coarse.spectral_radius(), fine.spectral_radius());
    assert!(r1 < 1.0 && r2 <= 1.1 * r1, "{r1} {r2}");
}

#[test]
fn mismatched_factorization_is_refused() {
    let (_, k) = synthesize(3.0, 1.0, 6, 128, &Tolerances::for_synthesis()).unwrap();
    let (_, other) = synthesize(3.0, 2.0, 6, 128, &Tolerances::for_synthesis()).unwrap();
    let stale = TransformOperator::new(&other).unwrap();
    let grid = Grid::new(3.0, 128).unwrap();
    let v0 = grid.sample(|x| 0.01 * (std::f64::consts::PI * x / 3.0).sin());
    let cfg = SimConfig::new(grid, 1e-2, 0.1);
    assert!(matches!(
        simulate_closed_loop(&v0, &cfg, &k, &stale),
        Err(Error::FactorizationStale)
    ));
}
