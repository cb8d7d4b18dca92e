mod common;

use std::f64::consts::TAU;

use birkhoff_core::integrator::*;
use birkhoff_core::problems::DampedWaveProblem;
use birkhoff_core::Error;
use common::{dense_box_step, max_abs_diff, preissman_step, random_level, undamped_string_matrices};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_with_ratio(nx: usize, ratio: f64, nt: usize) -> Grid {
    Grid::periodic(nx, ratio * TAU / nx as f64, nt).unwrap()
}

#[test]
fn zero_level_stays_zero() {
    let grid = grid_with_ratio(12, 0.5, 6);
    let levels = run_simulation(&SchemeConfig::default(), &grid, &StateLevel::zeros(0, 12)).unwrap();
    assert_eq!(levels.len(), 7);
    assert!(levels.iter().all(|l| l.z.iter().flatten().all(|&v| v == 0.0)));
}

#[test]
fn raw_step_matrix_is_singular_exactly_for_even_nx() {
    for ratio in [0.25, 0.5, 1.0, 2.0] {
        for nx in [3usize, 4, 5, 8, 9, 16] {
            let grid = grid_with_ratio(nx, ratio, 1);
            let (a, _) = assemble_step_system(&SchemeConfig::default(), &grid, &StateLevel::zeros(0, nx)).unwrap();
            let sv = a.to_dense().singular_values();
            let smin = sv.min() / sv.max();
            if nx % 2 == 0 {
                assert!(smin < 1e-14, "nx = {nx}, ratio = {ratio}: {smin}");
            } else {
                assert!(smin > 1e-6, "nx = {nx}, ratio = {ratio}: {smin}");
            }
            // The gauge-fixed factorization exists in both cases.
            assert!(BoxStepper::forward(&SchemeConfig::default(), &grid).is_ok());
        }
    }
}

#[test]
fn checkerboard_spans_the_kernel() {
    let nx = 8;
    let grid = grid_with_ratio(nx, 0.5, 1);
    let (a, _) = assemble_step_system(&SchemeConfig::default(), &grid, &StateLevel::zeros(0, nx)).unwrap();
    let z: Vec<Node> = (0..nx).map(|i| [0.0, if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0]).collect();
    assert!(a.apply(&z).iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn step_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for nx in [2usize, 3, 4, 7, 10] {
        for (alpha, beta) in [(2.0, 0.0), (0.5, 0.3), (0.0, 0.0)] {
            let cfg = SchemeConfig::boxed(alpha, beta);
            let grid = grid_with_ratio(nx, 0.5, 1);
            let z0 = random_level(&mut rng, 0, nx);
            let ours = step_box(&cfg, &grid, &z0).unwrap();
            let oracle = dense_box_step(alpha, beta, &grid, &z0);
            assert!(max_abs_diff(&ours, &oracle) < 1e-12, "nx = {nx}, alpha = {alpha}, beta = {beta}");
        }
    }
}

#[test]
fn assembled_system_reproduces_the_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SchemeConfig::boxed(2.0, 0.3);
    for nx in [5usize, 6] {
        let grid = grid_with_ratio(nx, 0.5, 1);
        let z0 = random_level(&mut rng, 0, nx);
        let z1 = step_box(&cfg, &grid, &z0).unwrap();
        let (a, b) = assemble_step_system(&cfg, &grid, &z0).unwrap();
        let r = a.apply(&z1.z);
        let err = r.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-12, "{err}");
    }
}

#[test]
fn undamped_step_is_a_preissman_step() {
    let (m, k, l) = undamped_string_matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for nx in [9usize, 12] {
        let grid = grid_with_ratio(nx, 0.5, 1);
        let z0 = random_level(&mut rng, 0, nx);
        let ours = step_box(&SchemeConfig::boxed(0.0, 0.0), &grid, &z0).unwrap();
        let oracle = preissman_step(&m, &k, &l, &grid, &z0);
        assert!(max_abs_diff(&ours, &oracle) < 1e-12);
    }
}

#[test]
fn backward_step_undoes_forward_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SchemeConfig::boxed(2.0, 0.3);
    for nx in [7usize, 8] {
        let grid = grid_with_ratio(nx, 0.5, 3);
        let fwd = BoxStepper::forward(&cfg, &grid).unwrap();
        let bwd = BoxStepper::backward(&cfg, &grid).unwrap();
        let z0 = random_level(&mut rng, 0, nx);
        let z1 = fwd.step(&z0).unwrap();
        let back = bwd.step(&z1).unwrap();
        assert_eq!(back.j, 0);
        assert!(max_abs_diff(&back, &z0) < 1e-10);
        assert!(matches!(bwd.step(&z0), Err(Error::Usage(_))));
    }
}

#[test]
fn runs_are_deterministic() {
    let prob = DampedWaveProblem::default();
    let grid = grid_with_ratio(32, 0.5, 16);
    for cfg in [SchemeConfig::default(), SchemeConfig::leapfrog(2.0, 0.0)] {
        let a = run_simulation(&cfg, &grid, &prob.initial_level(&grid).unwrap()).unwrap();
        let b = run_simulation(&cfg, &grid, &prob.initial_level(&grid).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn decay_envelope_follows_exact_solution() {
    let prob = DampedWaveProblem::default();
    let dt = 1.0 / 64.0;
    let grid = Grid::periodic(128, dt, 64).unwrap();
    let levels = run_simulation(&prob.scheme_config(), &grid, &prob.initial_level(&grid).unwrap()).unwrap();
    for l in &levels {
        let t = grid.t(l.j);
        let envelope = (-t).exp();
        let numeric = l.z.iter().fold(0.0_f64, |m, n| m.max(n[U].abs()));
        let exact = envelope * t.cos().abs();
        assert!((numeric - exact).abs() <= 0.1 * envelope, "t = {t}: {numeric} vs {exact}");
    }
}

#[test]
fn leapfrog_start_is_second_order() {
    // One Taylor step against the exact solution: local error O(dt^3) in u.
    let prob = DampedWaveProblem::default();
    let cfg = SchemeConfig::leapfrog(2.0, 0.0);
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let grid = Grid::periodic(2048, dt, 1).unwrap();
            let l1 = leapfrog_start(&cfg, &grid, &prob.initial_level(&grid).unwrap()).unwrap();
            let ex = prob.level_at(&grid, 1).unwrap();
            l1.z.iter().zip(&ex.z).fold(0.0_f64, |m, (a, b)| m.max((a[U] - b[U]).abs()))
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 2.7, "{errs:?}");
    }
}

#[test]
fn leapfrog_warns_but_runs_past_cfl() {
    let grid = Grid::periodic(8, 0.1, 3).unwrap();
    assert!(cfl_warning(&grid).is_none());
    let grid = Grid::periodic(8, 1.0, 3).unwrap();
    assert!(cfl_warning(&grid).unwrap().contains("CFL"));
    let prob = DampedWaveProblem::default();
    let levels = run_simulation(&SchemeConfig::leapfrog(2.0, 0.0), &grid, &prob.initial_level(&grid).unwrap()).unwrap();
    assert_eq!(levels.len(), 4);
}

#[test]
fn step_errors() {
    let grid = grid_with_ratio(6, 0.5, 2);
    let cfg = SchemeConfig::default();
    assert!(matches!(step_box(&cfg, &grid, &StateLevel::zeros(0, 5)), Err(Error::Usage(_))));
    assert!(matches!(step_box(&cfg, &grid, &StateLevel::zeros(2, 6)), Err(Error::Usage(_))));
    let mut bad = StateLevel::zeros(0, 6);
    bad.z[2][1] = f64::NAN;
    assert!(matches!(step_box(&cfg, &grid, &bad), Err(Error::Divergence)));
    let neg = SchemeConfig { alpha: -1.0, ..cfg };
    assert!(matches!(run_simulation(&neg, &grid, &StateLevel::zeros(0, 6)), Err(Error::Usage(_))));
    let lf = SchemeConfig::leapfrog(2.0, 0.0);
    let l0 = StateLevel::zeros(0, 6);
    assert!(matches!(step_leapfrog(&lf, &grid, (&l0, &l0)), Err(Error::Usage(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_step_is_linear(seed in any::<u64>(), nx in 3usize..12, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SchemeConfig::boxed(1.0, 0.2);
        let grid = grid_with_ratio(nx, 0.5, 1);
        let (x, y) = (random_level(&mut rng, 0, nx), random_level(&mut rng, 0, nx));
        let lhs = step_box(&cfg, &grid, &x.combine(a, &y, b)).unwrap();
        let rhs = step_box(&cfg, &grid, &x).unwrap().combine(a, &step_box(&cfg, &grid, &y).unwrap(), b);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-11);
    }

    #[test]
    fn cell_equations_hold_to_rounding(seed in any::<u64>(), nx in 2usize..20, ratio in prop::sample::select(vec![0.25, 0.5, 1.0]),
                                        alpha in 0.0f64..3.0, beta in -0.5f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SchemeConfig::boxed(alpha, beta);
        let grid = grid_with_ratio(nx, ratio, 1);
        let z0 = random_level(&mut rng, 0, nx);
        let z1 = step_box(&cfg, &grid, &z0).unwrap();
        let r = BoxOperator::new(&cfg, &grid).residual(&z0, &z1);
        prop_assert!(r.iter().all(|v| v.abs() < 1e-11 * (1.0 / grid.dt).max(1.0 / grid.dx())));
    }
}
