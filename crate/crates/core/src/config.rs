//! Numerical thresholds shared by every module.
//!
//! All defaults live here; the command-line front end overrides them per run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute and relative thresholds used by the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `-A` is declared stable when its spectral abscissa is below `-stability_margin`.
    pub stability_margin: f64,
    /// Eigenvalues with `|Re λ|` at or below this are treated as lying on the imaginary axis.
    pub hyperbolicity_margin: f64,
    /// Singular values below `controllability_rtol * σ_max` do not count toward the Kalman rank.
    pub controllability_rtol: f64,
    /// The degenerate solver refuses Gramians with a larger 2-norm condition number.
    pub max_gramian_condition: f64,
    pub newton_max_iterations: usize,
    /// Newton stops once the residual is below `newton_rtol * (1 + |M*M| + |P|^2 |BB*|)`.
    pub newton_rtol: f64,
    /// Upper bound on `dt * |A - BK|` for the explicit integrator.
    pub max_step_norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stability_margin: 1e-8,
            hyperbolicity_margin: 1e-8,
            controllability_rtol: 1e-10,
            max_gramian_condition: 1e12,
            newton_max_iterations: 50,
            newton_rtol: 1e-11,
            max_step_norm: 0.1,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stability_margin", self.stability_margin),
            ("hyperbolicity_margin", self.hyperbolicity_margin),
            ("controllability_rtol", self.controllability_rtol),
            ("max_gramian_condition", self.max_gramian_condition),
            ("newton_rtol", self.newton_rtol),
            ("max_step_norm", self.max_step_norm),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "tolerance `{name}` must be positive and finite, got {value}"
                )));
            }
        }
        if self.newton_max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "tolerance `newton_max_iterations` must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Tolerances::default().validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_override() {
        let tol = Tolerances {
            stability_margin: 0.0,
            ..Default::default()
        };
        assert!(tol.validate().is_err());
        let partial: Tolerances = serde_json::from_str(r#"{"newton_rtol": 1e-9}"#).unwrap();
        assert_eq!(partial.newton_rtol, 1e-9);
        assert_eq!(partial.stability_margin, 1e-8);
    }
}
