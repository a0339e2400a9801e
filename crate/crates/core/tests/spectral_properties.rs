mod common;

use aacontrol::expm::matrix_exponential;
use aacontrol::lyapunov::{solve_sylvester_kronecker, solve_sylvester_schur};
use aacontrol::matrix::spectral_norm;
use aacontrol::spectral::{controllability_gramian, hyperbolic_splitting, spectral_abscissa};
use aacontrol::StateSpace;
use common::{random_matrix, random_system, simpson, well_conditioned};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `S D S⁻¹` with `D` block diagonal: real eigenvalues and rotation blocks,
/// half of them in each half-plane.
fn random_hyperbolic(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (l, pi_s, _) = random_hyperbolic_with_basis(rng, n);
    (l, pi_s)
}

fn random_hyperbolic_with_basis(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut d = DMatrix::zeros(n, n);
    let mut stable_mask = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let re = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        if i + 1 < n && rng.gen_bool(0.4) {
            let im = rng.gen_range(0.2..2.0);
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            if re < 0.0 {
                stable_mask[(i, i)] = 1.0;
                stable_mask[(i + 1, i + 1)] = 1.0;
            }
            i += 2;
        } else {
            d[(i, i)] = re;
            if re < 0.0 {
                stable_mask[(i, i)] = 1.0;
            }
            i += 1;
        }
    }
    let s = well_conditioned(rng, n);
    let s_inv = s.clone().try_inverse().unwrap();
    (&s * &d * &s_inv, &s * stable_mask * &s_inv, s)
}

#[test]
fn projector_algebra_on_random_hyperbolic_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..200 {
        let n = 1 + trial % 8;
        let (l, expected_pi_s) = random_hyperbolic(&mut rng, n);
        let split = hyperbolic_splitting(&l).unwrap();
        let eye = DMatrix::<f64>::identity(n, n);
        assert!((&split.pi_s * &split.pi_s - &split.pi_s).norm() <= 1e-10);
        assert!((&split.pi_u * &split.pi_u - &split.pi_u).norm() <= 1e-10);
        assert!((&split.pi_s + &split.pi_u - &eye).norm() <= 1e-10);
        assert!((&split.pi_s * &l - &l * &split.pi_s).norm() <= 1e-10);
        assert!((&split.pi_s - &expected_pi_s).norm() <= 1e-10, "trial {trial}");
        assert_eq!(split.stable_dim, expected_pi_s.trace().round() as usize);
    }
}

// Rotation blocks in a skewed basis make |e^{tL}Π_s| oscillate, so a constant
// fitted at a single time does not bound later times. The basis condition
// number κ(S) does: e^{tL}Π_s = S e^{tD_s} S⁻¹ with D_s normal.
#[test]
fn stable_part_decays_exponentially() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..50 {
        let n = 2 + trial % 5;
        let (l, _, s) = random_hyperbolic_with_basis(&mut rng, n);
        let kappa = spectral_norm(&s) * spectral_norm(&s.clone().try_inverse().unwrap());
        let split = hyperbolic_splitting(&l).unwrap();
        let forward = |t: f64| spectral_norm(&(matrix_exponential(&l, t).unwrap() * &split.pi_s));
        let backward = |t: f64| spectral_norm(&(matrix_exponential(&l, -t).unwrap() * &split.pi_u));
        let fitted = forward(0.5) * (split.delta / 4.0).exp();
        assert!(fitted <= kappa * (1.0 + 1e-10));
        for t in [0.5, 1.0, 2.0, 5.0] {
            let bound = kappa * (-split.delta * t).exp() * (1.0 + 1e-10) + 1e-14;
            assert!(forward(t) <= bound, "trial {trial}, t = {t}");
            assert!(backward(t) <= bound, "trial {trial}, t = {t}");
        }
    }
}

#[test]
fn scalar_gramian_matches_brute_force_quadrature() {
    // ∫₀^10 16 e^{-6t} dt with step 1e-4
    let q = simpson(0.0, 10.0, 100_000, |t| DMatrix::from_element(1, 1, 16.0 * (-6.0 * t).exp()));
    let g = controllability_gramian(&StateSpace::reference_example()).unwrap();
    assert!((q[(0, 0)] - g.w[(0, 0)]).abs() < 1e-10);
    assert!((g.w[(0, 0)] - 8.0 / 3.0).abs() < 1e-14);
}

#[test]
fn gramian_matches_defining_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..40 {
        let n = 1 + trial % 4;
        let m = 1 + trial % 3;
        let sys = random_system(&mut rng, n, m);
        let g = controllability_gramian(&sys).unwrap();
        let bb = sys.input_gram();
        assert!(g.lyapunov_residual <= 1e-10 * (1.0 + bb.norm()));
        assert!(g.beta >= 0.0);
        assert!((&g.w - g.w.transpose()).norm() <= 1e-12 * g.w.norm());

        let delta = -spectral_abscissa(&(-sys.a())).unwrap();
        let horizon = 40.0 / delta;
        let intervals = 8000;
        let h = horizon / intervals as f64;
        let step = matrix_exponential(&(-sys.a()), h).unwrap();
        // walk the flow e^{-kh A} node by node
        let mut flows = vec![DMatrix::<f64>::identity(n, n)];
        for _ in 0..intervals {
            let next = flows.last().unwrap() * &step;
            flows.push(next);
        }
        let quad = simpson(0.0, horizon, intervals, |t| {
            let e = &flows[(t / h).round() as usize];
            e * &bb * e.transpose()
        });
        assert!((&quad - &g.w).norm() <= 1e-6 * (1.0 + g.w.norm()), "trial {trial}");
    }
}

#[test]
fn exponential_semigroup_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let mut a = random_matrix(&mut rng, n, n);
        let scale = rng.gen_range(0.1..10.0) / spectral_norm(&a).max(1e-12);
        a *= scale;
        let s = rng.gen_range(0.0..5.0);
        let t = rng.gen_range(0.0..5.0);
        let lhs = matrix_exponential(&a, s + t).unwrap();
        let rhs = matrix_exponential(&a, s).unwrap() * matrix_exponential(&a, t).unwrap();
        assert!((&lhs - &rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }
}

#[test]
fn lyapunov_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 1..=20 {
        let sys = random_system(&mut rng, n.min(12), 2.min(n));
        let a = sys.a();
        let q = sys.input_gram();
        let k = solve_sylvester_kronecker(a, &a.transpose(), &q).unwrap();
        let s = solve_sylvester_schur(a, &a.transpose(), &q).unwrap();
        assert!((&k - &s).norm() <= 1e-10 * (1.0 + k.norm()), "n = {n}");
    }
}

#[test]
fn splitting_of_purely_unstable_generator() {
    let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.5]));
    let split = hyperbolic_splitting(&l).unwrap();
    assert_eq!(split.stable_dim, 0);
    assert!(split.pi_s.norm() < 1e-14);
}
