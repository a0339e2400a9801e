//! Averaged-cost optimal feedback for linear systems `y' = Ay + Bu + f`
//! driven by almost-periodic or almost-automorphic forcing.
//!
//! The optimal control minimizing `lim (1/T)∫₀ᵀ |My|² + |u|²` is the
//! feedback `ū = -Bᵀ(P y + r)`, where `P` solves an algebraic Riccati
//! equation and `r` is the bounded adjoint signal driven by `P f`. Its
//! value is `J(ū) = 2⟨r, f⟩_aa - |Bᵀ r|²_aa`.
//!
//! Modules, bottom up:
//! - [`signals`]: trigonometric polynomials, evaluable signals and Bohr means
//! - [`spectral`]: stability, controllability, Gramians and dichotomy projectors
//! - [`riccati`]: degenerate and standard Riccati solvers with a Newton cross-check
//! - [`synthesis`]: adjoint signal, feedback law, closed-loop trajectory and cost
//! - [`simulator`]: RK4 closed-loop integration and empirical average cost

pub mod config;
pub mod error;
pub mod expm;
pub mod lyapunov;
pub mod matrix;
pub mod report;
pub mod riccati;
pub mod signals;
pub mod simulator;
pub mod spectral;
pub mod synthesis;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use riccati::{RiccatiSolution, Variant};
pub use signals::{EvaluableSignal, HarmonicTerm, MeanMethod, Signal, TrigPolynomial};
pub use spectral::{DichotomySplitting, GramianCertificate, StateSpace};
pub use synthesis::{CostReport, FeedbackLaw};
