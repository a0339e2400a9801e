//! Spectral tests, controllability, the controllability Gramian and
//! dichotomy splittings of hyperbolic generators.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::lyapunov::solve_continuous_lyapunov;
use crate::matrix::{self, ensure_square, symmetrize};

/// The system `y' = A y + B u + f` with output weight `M` in the cost `|My|² + |u|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceRepr", into = "StateSpaceRepr")]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    m: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpaceRepr {
    #[serde(rename = "A", with = "matrix::rows")]
    a: DMatrix<f64>,
    #[serde(rename = "B", with = "matrix::rows")]
    b: DMatrix<f64>,
    #[serde(rename = "M", with = "matrix::rows")]
    m: DMatrix<f64>,
}

impl TryFrom<StateSpaceRepr> for StateSpace {
    type Error = Error;

    fn try_from(r: StateSpaceRepr) -> Result<Self> {
        StateSpace::new(r.a, r.b, r.m)
    }
}

impl From<StateSpace> for StateSpaceRepr {
    fn from(s: StateSpace) -> Self {
        StateSpaceRepr {
            a: s.a,
            b: s.b,
            m: s.m,
        }
    }
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, m: DMatrix<f64>) -> Result<Self> {
        let n = ensure_square(&a, "drift matrix A")?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "rows of input matrix B",
                expected: n,
                found: b.nrows(),
            });
        }
        if b.ncols() == 0 {
            return Err(Error::InvalidArgument("input matrix B has no columns".into()));
        }
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "columns of output weight M",
                expected: n,
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("output weight M has no rows".into()));
        }
        if a.iter().chain(b.iter()).chain(m.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("system matrices must be finite".into()));
        }
        Ok(Self { a, b, m })
    }

    /// Scalar system `y' = a y + b u + f` with weight `m`.
    pub fn scalar(a: f64, b: f64, m: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, m),
        )
    }

    /// The system of the worked scalar example: `A = 3`, `B = 4`, `M = 1`.
    pub fn reference_example() -> Self {
        Self::scalar(3.0, 4.0, 1.0).expect("valid scalar system")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `B Bᵀ`.
    pub fn input_gram(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }

    /// `Mᵀ M`.
    pub fn output_gram(&self) -> DMatrix<f64> {
        self.m.transpose() * &self.m
    }

    pub fn with_output_weight(&self, m: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), m)
    }
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = ensure_square(a, "eigenvalue problem")?;
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailure(n))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `[B, AB, …, A^{n-1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.columns_mut(k * m, m).copy_from(&block);
        block = a * block;
    }
    out
}

/// Numerical rank of the controllability matrix, thresholded at `rtol · σ_max`.
///
/// `A` and `B` are first scaled to unit 2-norm; the column span is unchanged
/// and the powers `A^k B` no longer grow or shrink geometrically.
pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, rtol: f64) -> usize {
    let unit = |m: &DMatrix<f64>| {
        let norm = matrix::spectral_norm(m);
        if norm > 0.0 {
            m / norm
        } else {
            m.clone()
        }
    };
    let sv = controllability_matrix(&unit(a), &unit(b)).singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Outcome of the standing-assumption checks on a system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `-A` exponentially stable.
    pub minus_a_stable: bool,
    /// `(A, B)` controllable.
    pub exactly_controllable: bool,
    pub minus_a_abscissa: f64,
    pub controllability_rank: usize,
    pub state_dim: usize,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.minus_a_stable && self.exactly_controllable
    }

    /// The first failed hypothesis as an error, if any.
    pub fn require(&self) -> Result<()> {
        if !self.minus_a_stable {
            return Err(Error::HypothesisFailed {
                hypothesis: "stability",
                detail: format!(
                    "-A is not exponentially stable (spectral abscissa of -A = {:e})",
                    self.minus_a_abscissa
                ),
            });
        }
        if !self.exactly_controllable {
            return Err(Error::HypothesisFailed {
                hypothesis: "controllability",
                detail: format!(
                    "(-A, B) is not controllable (Kalman rank {} < {})",
                    self.controllability_rank, self.state_dim
                ),
            });
        }
        Ok(())
    }
}

pub fn check_hypotheses(sys: &StateSpace) -> Result<HypothesisReport> {
    check_hypotheses_with(sys, &Tolerances::default())
}

pub fn check_hypotheses_with(sys: &StateSpace, tol: &Tolerances) -> Result<HypothesisReport> {
    let minus_a_abscissa = spectral_abscissa(&(-sys.a()))?;
    let controllability_rank = kalman_rank(sys.a(), sys.b(), tol.controllability_rtol);
    Ok(HypothesisReport {
        minus_a_stable: minus_a_abscissa < -tol.stability_margin,
        exactly_controllable: controllability_rank == sys.state_dim(),
        minus_a_abscissa,
        controllability_rank,
        state_dim: sys.state_dim(),
    })
}

/// The Gramian `W = ∫₀^∞ e^{-tA} B Bᵀ e^{-tAᵀ} dt` and its lower bound `β = λ_min(W)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramianCertificate {
    #[serde(rename = "W", with = "matrix::rows")]
    pub w: DMatrix<f64>,
    pub beta: f64,
    pub lyapunov_residual: f64,
}

pub fn controllability_gramian(sys: &StateSpace) -> Result<GramianCertificate> {
    controllability_gramian_with(sys, &Tolerances::default())
}

/// Solves `A W + W Aᵀ = B Bᵀ`, the Lyapunov form of the Gramian integral.
pub fn controllability_gramian_with(sys: &StateSpace, tol: &Tolerances) -> Result<GramianCertificate> {
    let abscissa = spectral_abscissa(&(-sys.a()))?;
    if abscissa >= -tol.stability_margin {
        return Err(Error::NotStable { abscissa });
    }
    let bb = sys.input_gram();
    let w = symmetrize(&solve_continuous_lyapunov(sys.a(), &bb)?);
    let lyapunov_residual = (sys.a() * &w + &w * sys.a().transpose() - &bb).norm();
    // Rounding can leave a tiny negative eigenvalue on an exactly singular Gramian.
    let beta = min_symmetric_eigenvalue(&w).max(0.0);
    Ok(GramianCertificate {
        w,
        beta,
        lyapunov_residual,
    })
}

/// Complementary spectral projectors of a hyperbolic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomySplitting {
    #[serde(with = "matrix::rows")]
    pub pi_s: DMatrix<f64>,
    #[serde(with = "matrix::rows")]
    pub pi_u: DMatrix<f64>,
    /// Distance of the spectrum from the imaginary axis.
    pub delta: f64,
    pub stable_dim: usize,
}

pub fn hyperbolic_splitting(l: &DMatrix<f64>) -> Result<DichotomySplitting> {
    hyperbolic_splitting_with(l, &Tolerances::default())
}

/// Splits `R^n` into the stable and unstable invariant subspaces of `l`.
///
/// The projectors come from the matrix sign function,
/// `Π_s = (I - sign(L)) / 2`, computed by the scaled Newton iteration.
pub fn hyperbolic_splitting_with(l: &DMatrix<f64>, tol: &Tolerances) -> Result<DichotomySplitting> {
    let n = ensure_square(l, "hyperbolic generator")?;
    let spectrum = eigenvalues(l)?;
    let mut delta = f64::INFINITY;
    for z in &spectrum {
        if z.re.abs() <= tol.hyperbolicity_margin {
            return Err(Error::NotHyperbolic {
                re: z.re,
                im: z.im,
                margin: tol.hyperbolicity_margin,
            });
        }
        delta = delta.min(z.re.abs());
    }
    let stable_dim = spectrum.iter().filter(|z| z.re < 0.0).count();

    let sign = matrix_sign(l)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let pi_s = (&eye - &sign) * 0.5;
    let pi_u = &eye - &pi_s;
    Ok(DichotomySplitting {
        pi_s,
        pi_u,
        delta,
        stable_dim,
    })
}

fn matrix_sign(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    let mut s = l.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or(Error::Singular("matrix sign iteration"))?;
        // Determinant scaling speeds up the early iterations only.
        let mu = if scaling {
            let det = s.determinant().abs();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / n as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&s * mu + inv / mu) * 0.5;
        let change = (&next - &s).norm();
        let size = next.norm();
        s = next;
        if change <= 1e-2 * size {
            scaling = false;
        }
        if change <= 1e-14 * size {
            // One more unscaled step polishes the quadratic convergence.
            let inv = s
                .clone()
                .try_inverse()
                .ok_or(Error::Singular("matrix sign iteration"))?;
            return Ok((&s + inv) * 0.5);
        }
    }
    Err(Error::EigenFailure(n))
}

/// An exponential estimate `|e^{tG} X| ≤ constant · e^{-rate · t}` on sampled times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialBound {
    pub constant: f64,
    pub rate: f64,
}

impl ExponentialBound {
    pub fn at(&self, t: f64) -> f64 {
        self.constant * (-self.rate * t).exp()
    }
}

/// Fits the smallest constant with `|e^{tG} X|₂ ≤ C e^{-rate t}` over `times`.
pub fn fit_exponential_bound(
    generator: &DMatrix<f64>,
    restriction: &DMatrix<f64>,
    rate: f64,
    times: &[f64],
) -> Result<ExponentialBound> {
    let mut constant: f64 = 0.0;
    for &t in times {
        let flow = matrix_exponential(generator, t)? * restriction;
        constant = constant.max(matrix::spectral_norm(&flow) * (rate * t).exp());
    }
    Ok(ExponentialBound { constant, rate })
}
