#![allow(dead_code)]

use aacontrol::signals::HarmonicTerm;
use aacontrol::{StateSpace, TrigPolynomial};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `S` with singular values kept away from zero.
pub fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let s = DMatrix::identity(n, n) + random_matrix(rng, n, n) * 0.4;
        let sv = s.singular_values();
        if sv.min() > 0.3 {
            return s;
        }
    }
}

/// `A = S diag(λ) S⁻¹` with real `λ ∈ [0.5, 3]`, `B` random full column rank,
/// `M` random.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> StateSpace {
    let s = well_conditioned(rng, n);
    let lambda = DVector::from_fn(n, |_, _| rng.gen_range(0.5..3.0));
    let a = &s * DMatrix::from_diagonal(&lambda) * s.clone().try_inverse().unwrap();
    let b = loop {
        let b = random_matrix(rng, n, m);
        if b.rank(1e-8) == m.min(n) {
            break b;
        }
    };
    let p = rng.gen_range(1..=n);
    let mm = random_matrix(rng, p, n);
    StateSpace::new(a, b, mm).unwrap()
}

/// Condition number of the controllability Gramian, the quantity that bounds
/// how well any method can resolve `P = W⁻¹`.
pub fn gramian_condition(sys: &StateSpace) -> f64 {
    let w = aacontrol::spectral::controllability_gramian(sys).unwrap().w;
    let e = nalgebra::SymmetricEigen::new(w).eigenvalues;
    if e.min() <= 0.0 {
        return f64::INFINITY;
    }
    e.max() / e.min()
}

/// Draws [`random_system`] instances until one is controllable with
/// `κ(W) ≤ max_condition`; returns the instance and the number of draws rejected.
///
/// Single-input systems of order five or more almost never meet a moderate
/// bound, so the input count is raised to at least `⌈n/3⌉`.
pub fn random_system_conditioned(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    max_condition: f64,
) -> (StateSpace, usize) {
    let m = m.max(n.div_ceil(3));
    let mut rejected = 0;
    loop {
        let sys = random_system(rng, n, m);
        let controllable = aacontrol::spectral::check_hypotheses(&sys).is_ok_and(|h| h.holds());
        if controllable && gramian_condition(&sys) <= max_condition {
            return (sys, rejected);
        }
        rejected += 1;
    }
}

pub fn random_trig(rng: &mut ChaCha8Rng, dimension: usize, harmonics: usize, omega: (f64, f64)) -> TrigPolynomial {
    let terms = (0..harmonics)
        .map(|_| {
            let w = rng.gen_range(omega.0..omega.1);
            HarmonicTerm::new(
                w,
                DVector::from_fn(dimension, |_, _| rng.gen_range(-1.0..1.0)),
                DVector::from_fn(dimension, |_, _| rng.gen_range(-1.0..1.0)),
            )
            .unwrap()
        })
        .collect();
    TrigPolynomial::new(dimension, terms).unwrap()
}

/// Composite Simpson rule on `[a, b]` with an even number of intervals.
pub fn simpson<F>(a: f64, b: f64, intervals: usize, mut f: F) -> DMatrix<f64>
where
    F: FnMut(f64) -> DMatrix<f64>,
{
    let intervals = intervals + intervals % 2;
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Series-free matrix exponential for diagonalizable test generators:
/// `e^{tG} = S e^{tΛ} S⁻¹` is not available in general, so oracles that need
/// `e^{tG}` step it with a fine RK4 flow instead.
pub fn flow_rk4(g: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
    let n = g.nrows();
    let h = t / steps as f64;
    let mut x = DMatrix::<f64>::identity(n, n);
    for _ in 0..steps {
        let k1 = g * &x;
        let k2 = g * (&x + &k1 * (0.5 * h));
        let k3 = g * (&x + &k2 * (0.5 * h));
        let k4 = g * (&x + &k3 * h);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}
