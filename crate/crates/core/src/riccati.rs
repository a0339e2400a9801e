//! Algebraic Riccati equations.
//!
//! The degenerate equation `AᵀP + PA - PBBᵀP = 0` is solved in closed form
//! as `P = W⁻¹`, with `W` the controllability Gramian of `(-A, B)`: left and
//! right multiplication by `P⁻¹` turns it into `A W + W Aᵀ = BBᵀ`. The
//! standard equation adds `MᵀM` and is solved by Newton–Kleinman iteration,
//! which also serves as the independent check on the degenerate solver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::lyapunov::solve_sylvester;
use crate::matrix::{self, symmetrize};
use crate::spectral::{
    check_hypotheses_with, controllability_gramian_with, eigenvalues, min_symmetric_eigenvalue,
    spectral_abscissa, StateSpace,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `AᵀP + PA - PBBᵀP = 0`
    Degenerate,
    /// `AᵀP + PA - PBBᵀP + MᵀM = 0`
    #[default]
    Standard,
}

impl Variant {
    pub fn includes_output_weight(self) -> bool {
        matches!(self, Variant::Standard)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Degenerate => "degenerate",
            Variant::Standard => "standard",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degenerate" => Ok(Variant::Degenerate),
            "standard" => Ok(Variant::Standard),
            other => Err(Error::InvalidArgument(format!(
                "unknown Riccati variant `{other}` (expected `degenerate` or `standard`)"
            ))),
        }
    }
}

/// A symmetric solution with its certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    #[serde(rename = "P", with = "matrix::rows")]
    pub p: DMatrix<f64>,
    pub variant: Variant,
    /// Frobenius norm of the Riccati residual.
    pub residual_norm: f64,
    /// Spectral abscissa of `A - BBᵀP`.
    pub closed_loop_abscissa: f64,
    pub p_min_eigenvalue: f64,
    /// 2-norm condition number of the Gramian; degenerate variant only.
    pub w_condition: Option<f64>,
}

impl RiccatiSolution {
    /// `K = BᵀP`.
    pub fn gain(&self, sys: &StateSpace) -> DMatrix<f64> {
        sys.b().transpose() * &self.p
    }

    /// `A - BBᵀP`.
    pub fn closed_loop(&self, sys: &StateSpace) -> DMatrix<f64> {
        sys.a() - sys.input_gram() * &self.p
    }

    fn certify(sys: &StateSpace, p: DMatrix<f64>, variant: Variant, w_condition: Option<f64>) -> Result<Self> {
        let p = symmetrize(&p);
        let residual_norm = are_residual(sys, &p, variant.includes_output_weight()).norm();
        let closed_loop_abscissa = spectral_abscissa(&(sys.a() - sys.input_gram() * &p))?;
        let p_min_eigenvalue = min_symmetric_eigenvalue(&p);
        if p_min_eigenvalue < -1e-10 * p.norm() {
            return Err(Error::CertificateFailed(format!(
                "P is not positive semidefinite (λ_min = {p_min_eigenvalue:e})"
            )));
        }
        if variant == Variant::Degenerate && p_min_eigenvalue <= 0.0 {
            return Err(Error::CertificateFailed(format!(
                "P is not invertible (λ_min = {p_min_eigenvalue:e})"
            )));
        }
        if closed_loop_abscissa >= 0.0 {
            return Err(Error::CertificateFailed(format!(
                "A - BBᵀP is not stable (abscissa {closed_loop_abscissa:e})"
            )));
        }
        Ok(Self {
            p,
            variant,
            residual_norm,
            closed_loop_abscissa,
            p_min_eigenvalue,
            w_condition,
        })
    }
}

/// `AᵀP + PA - PBBᵀP (+ MᵀM)`.
pub fn are_residual(sys: &StateSpace, p: &DMatrix<f64>, include_m: bool) -> DMatrix<f64> {
    let a = sys.a();
    let mut r = a.transpose() * p + p * a - p * sys.input_gram() * p;
    if include_m {
        r += sys.output_gram();
    }
    r
}

pub fn solve_degenerate_are(sys: &StateSpace) -> Result<RiccatiSolution> {
    solve_degenerate_are_with(sys, &Tolerances::default())
}

/// The invertible solution `P = W⁻¹` of the degenerate equation.
///
/// The trivial solution `P = 0` is never returned. The result is
/// cross-checked against a Newton–Kleinman run started from `2BᵀP`.
pub fn solve_degenerate_are_with(sys: &StateSpace, tol: &Tolerances) -> Result<RiccatiSolution> {
    check_hypotheses_with(sys, tol)?.require()?;
    let gramian = controllability_gramian_with(sys, tol)?;
    let w_eigen = SymmetricEigen::new(gramian.w.clone()).eigenvalues;
    let (w_min, w_max) = w_eigen
        .iter()
        .fold((f64::INFINITY, 0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let w_condition = if w_min > 0.0 { w_max / w_min } else { f64::INFINITY };
    if w_condition > tol.max_gramian_condition {
        return Err(Error::IllConditionedGramian(w_condition));
    }
    let p = gramian
        .w
        .clone()
        .cholesky()
        .ok_or(Error::IllConditionedGramian(w_condition))?
        .inverse();
    let solution = RiccatiSolution::certify(sys, p, Variant::Degenerate, Some(w_condition))?;

    let k0 = solution.gain(sys) * 2.0;
    let oracle = newton_kleinman_oracle_with(sys, false, &k0, tol)?;
    let discrepancy = (&oracle.p - &solution.p).norm();
    if discrepancy > cross_check_tolerance(w_condition) * (1.0 + solution.p.norm()) {
        return Err(Error::CertificateFailed(format!(
            "inverse-Gramian and Newton solutions differ by {discrepancy:e}"
        )));
    }
    Ok(solution)
}

/// Relative agreement demanded between the inverse-Gramian and Newton
/// solutions: `1e-8`, loosened as `κ(W)² · 1e-18` once the Gramian's
/// conditioning makes that unreachable in double precision.
pub fn cross_check_tolerance(w_condition: f64) -> f64 {
    1e-8f64.max(w_condition * w_condition * 1e-18)
}

pub fn solve_standard_are(sys: &StateSpace) -> Result<RiccatiSolution> {
    solve_standard_are_with(sys, &Tolerances::default())
}

/// The stabilizing solution of `AᵀP + PA - PBBᵀP + MᵀM = 0`, by Newton–Kleinman
/// started from the degenerate solution's gain.
pub fn solve_standard_are_with(sys: &StateSpace, tol: &Tolerances) -> Result<RiccatiSolution> {
    let degenerate = solve_degenerate_are_with(sys, tol)?;
    let k0 = degenerate.gain(sys);
    let newton = newton_kleinman_oracle_with(sys, true, &k0, tol)?;
    RiccatiSolution::certify(sys, newton.p, Variant::Standard, None)
}

pub fn solve_are(sys: &StateSpace, variant: Variant, tol: &Tolerances) -> Result<RiccatiSolution> {
    match variant {
        Variant::Degenerate => solve_degenerate_are_with(sys, tol),
        Variant::Standard => solve_standard_are_with(sys, tol),
    }
}

/// Eigenvalues of `A - BBᵀP`, sorted by real part.
pub fn closed_loop_spectrum(sys: &StateSpace, sol: &RiccatiSolution) -> Result<Vec<num_complex::Complex64>> {
    let mut ev = eigenvalues(&sol.closed_loop(sys))?;
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Fixed point of the Newton–Kleinman iteration with its residual trace.
#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub p: DMatrix<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

pub fn newton_kleinman_oracle(
    sys: &StateSpace,
    include_m: bool,
    k0: &DMatrix<f64>,
) -> Result<NewtonResult> {
    newton_kleinman_oracle_with(sys, include_m, k0, &Tolerances::default())
}

/// Iterates `(A - BK)ᵀP + P(A - BK) = -KᵀK [- MᵀM]`, `K ← BᵀP` from a
/// stabilizing `k0`.
pub fn newton_kleinman_oracle_with(
    sys: &StateSpace,
    include_m: bool,
    k0: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<NewtonResult> {
    if k0.shape() != (sys.input_dim(), sys.state_dim()) {
        return Err(Error::DimensionMismatch {
            context: "initial Newton gain",
            expected: sys.input_dim() * sys.state_dim(),
            found: k0.len(),
        });
    }
    let mm = sys.output_gram();
    let bb = sys.input_gram();
    let mut gain = k0.clone();
    let mut history = Vec::new();
    for step in 0..tol.newton_max_iterations {
        let closed = sys.a() - sys.b() * &gain;
        let abscissa = spectral_abscissa(&closed)?;
        if abscissa >= 0.0 {
            return Err(Error::LostStability { step, abscissa });
        }
        let mut rhs = -(gain.transpose() * &gain);
        if include_m {
            rhs -= &mm;
        }
        let p = symmetrize(&solve_sylvester(&closed.transpose(), &closed, &rhs)?);
        let residual = are_residual(sys, &p, include_m).norm();
        history.push(residual);
        let threshold = tol.newton_rtol
            * (1.0 + if include_m { mm.norm() } else { 0.0 } + p.norm_squared() * bb.norm());
        gain = sys.b().transpose() * &p;
        if residual <= threshold {
            // One polishing step; quadratic convergence makes it nearly free.
            let closed = sys.a() - sys.b() * &gain;
            let mut rhs = -(gain.transpose() * &gain);
            if include_m {
                rhs -= &mm;
            }
            let mut best = (p, residual);
            if spectral_abscissa(&closed)? < 0.0 {
                let polished = symmetrize(&solve_sylvester(&closed.transpose(), &closed, &rhs)?);
                let polished_residual = are_residual(sys, &polished, include_m).norm();
                if polished_residual < residual {
                    history.push(polished_residual);
                    best = (polished, polished_residual);
                }
            }
            return Ok(NewtonResult {
                p: best.0,
                iterations: history.len(),
                residual_history: history,
            });
        }
    }
    Err(Error::NewtonDiverged {
        iterations: tol.newton_max_iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_p(sol: &RiccatiSolution) -> f64 {
        sol.p[(0, 0)]
    }

    #[test]
    fn degenerate_reference_system() {
        let sys = StateSpace::reference_example();
        let sol = solve_degenerate_are(&sys).unwrap();
        assert!((scalar_p(&sol) - 0.375).abs() < 1e-15);
        assert!((sol.closed_loop(&sys)[(0, 0)] + 3.0).abs() < 1e-14);
        assert!(sol.residual_norm < 1e-10 * (1.0 + 0.375 * 16.0));
        assert!(sol.p_min_eigenvalue > 0.0);
        assert!((sol.w_condition.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_identity_system() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let sys = StateSpace::new(eye.clone(), eye.clone(), eye.clone()).unwrap();
        let sol = solve_degenerate_are(&sys).unwrap();
        assert!((&sol.p - eye * 2.0).norm() < 1e-13);
    }

    #[test]
    fn standard_reference_values() {
        let sol = solve_standard_are(&StateSpace::reference_example()).unwrap();
        assert!((scalar_p(&sol) - 0.5).abs() < 1e-14);

        let sol = solve_standard_are(&StateSpace::scalar(3.0, 4.0, 2.0).unwrap()).unwrap();
        let expected = (3.0 + 73f64.sqrt()) / 16.0;
        assert!((scalar_p(&sol) - expected).abs() < 1e-14);
        assert!(sol.residual_norm < 1e-12);

        let sys0 = StateSpace::scalar(3.0, 4.0, 0.0).unwrap();
        let a = solve_standard_are(&sys0).unwrap();
        let b = solve_degenerate_are(&sys0).unwrap();
        assert!((&a.p - &b.p).norm() < 1e-8);
    }

    #[test]
    fn newton_examples() {
        let sys = StateSpace::reference_example();
        let k0 = DMatrix::from_element(1, 1, 2.0);
        let r = newton_kleinman_oracle(&sys, true, &k0).unwrap();
        assert!((r.p[(0, 0)] - 0.5).abs() < 1e-13);
        let k0 = DMatrix::from_element(1, 1, 1.0);
        let r = newton_kleinman_oracle(&sys, false, &k0).unwrap();
        assert!((r.p[(0, 0)] - 0.375).abs() < 1e-13);
        assert!(r.residual_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn newton_rejects_destabilizing_start() {
        let sys = StateSpace::reference_example();
        let k0 = DMatrix::from_element(1, 1, 0.5);
        assert!(matches!(
            newton_kleinman_oracle(&sys, true, &k0),
            Err(Error::LostStability { step: 0, .. })
        ));
    }

    #[test]
    fn newton_iteration_cap() {
        let sys = StateSpace::reference_example();
        let tol = Tolerances {
            newton_max_iterations: 1,
            ..Default::default()
        };
        let k0 = DMatrix::from_element(1, 1, 10.0);
        assert!(matches!(
            newton_kleinman_oracle_with(&sys, true, &k0, &tol),
            Err(Error::NewtonDiverged { iterations: 1, .. })
        ));
    }

    #[test]
    fn hypothesis_failure_is_named() {
        let err = solve_degenerate_are(&StateSpace::scalar(-1.0, 1.0, 1.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("stability"), "{err}");
        let sys = StateSpace::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 2.0])),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let err = solve_standard_are(&sys).unwrap_err();
        assert!(err.to_string().contains("controllability"), "{err}");
    }

    #[test]
    fn ill_conditioned_gramian_rejected() {
        let sys = StateSpace::reference_example();
        let tol = Tolerances {
            max_gramian_condition: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            solve_degenerate_are_with(&sys, &tol),
            Err(Error::IllConditionedGramian(_))
        ));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("degenerate".parse::<Variant>().unwrap(), Variant::Degenerate);
        assert!("other".parse::<Variant>().is_err());
        assert_eq!(Variant::default(), Variant::Standard);
    }
}
