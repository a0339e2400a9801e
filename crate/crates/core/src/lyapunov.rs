//! Sylvester and Lyapunov equation solvers.
//!
//! Two independent routes solve `A X + X B = C`: dense Kronecker
//! vectorization (the reference, O(n^6)) and a complex-Schur back
//! substitution in the style of Bartels and Stewart.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ensure_square, to_complex};

/// Largest order solved by Kronecker vectorization in [`solve_sylvester`].
pub const KRONECKER_MAX_ORDER: usize = 20;

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<(usize, usize)> {
    let n = ensure_square(a, "Sylvester left coefficient")?;
    let m = ensure_square(b, "Sylvester right coefficient")?;
    if c.shape() != (n, m) {
        return Err(Error::DimensionMismatch {
            context: "Sylvester right-hand side",
            expected: n * m,
            found: c.nrows() * c.ncols(),
        });
    }
    Ok((n, m))
}

/// Solves `A X + X B = C` through `(I ⊗ A + Bᵀ ⊗ I) vec X = vec C`.
pub fn solve_sylvester_kronecker(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n, m) = check_shapes(a, b, c)?;
    let eye_n = DMatrix::<f64>::identity(n, n);
    let eye_m = DMatrix::<f64>::identity(m, m);
    let system = eye_m.kronecker(a) + b.transpose().kronecker(&eye_n);
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Kronecker Sylvester system"))?;
    Ok(DMatrix::from_column_slice(n, m, x.as_slice()))
}

fn complex_schur(m: &DMatrix<f64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let schur = to_complex(m)
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailure(m.nrows()))?;
    Ok(schur.unpack())
}

/// Solves `A X + X B = C` by triangularizing both coefficients.
pub fn solve_sylvester_schur(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n, m) = check_shapes(a, b, c)?;
    let (u, s) = complex_schur(a)?;
    let (v, r) = complex_schur(b)?;
    // S Y + Y R = F with Y = U* X V, F = U* C V; S, R upper triangular.
    let f = u.adjoint() * to_complex(c) * &v;
    let mut y = DMatrix::<Complex64>::zeros(n, m);
    let scale = s.norm().max(r.norm()).max(1.0);
    for j in 0..m {
        for i in (0..n).rev() {
            let mut acc = f[(i, j)];
            for k in i + 1..n {
                acc -= s[(i, k)] * y[(k, j)];
            }
            for k in 0..j {
                acc -= y[(i, k)] * r[(k, j)];
            }
            let pivot = s[(i, i)] + r[(j, j)];
            if pivot.norm() <= f64::EPSILON * scale {
                return Err(Error::Singular("Schur Sylvester back substitution"));
            }
            y[(i, j)] = acc / pivot;
        }
    }
    let x = &u * y * v.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves `A X + X B = C`, choosing the route by problem size.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows().max(b.nrows()) <= KRONECKER_MAX_ORDER {
        solve_sylvester_kronecker(a, b, c)
    } else {
        solve_sylvester_schur(a, b, c)
    }
}

/// Solves the continuous Lyapunov equation `A X + X Aᵀ = Q`.
pub fn solve_continuous_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_sylvester(a, &a.transpose(), q)
}
