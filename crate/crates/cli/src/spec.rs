//! The JSON problem file.
//!
//! ```json
//! {
//!   "system": { "A": [[3.0]], "B": [[4.0]], "M": [[1.0]] },
//!   "forcing": { "dimension": 1, "terms": [{ "omega": 1.0, "cos": [0.0], "sin": [1.0] }] },
//!   "options": {
//!     "variant": "standard",
//!     "tolerances": { "newton_rtol": 1e-12 },
//!     "simulation": { "t_end": 200.0, "dt": 0.001 },
//!     "output_dir": "out"
//!   }
//! }
//! ```
//!
//! `forcing` may also name a builtin, `{ "builtin": "aa_sin_reciprocal" }`, and
//! defaults to zero. Every `options` field is optional.

use std::path::{Path, PathBuf};

use aacontrol::riccati::Variant;
use aacontrol::simulator::SimulationSettings;
use aacontrol::{Signal, StateSpace, Tolerances, TrigPolynomial};
use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{CliError, Stage};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub system: StateSpace,
    #[serde(default)]
    pub forcing: Option<Signal>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub variant: Option<Variant>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub simulation: Option<SimulationOptions>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Defaults to the steady state `ȳ(0)` for harmonic forcing and to zero otherwise.
    pub y0: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

impl SimulationOptions {
    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings::new(self.t_end, self.dt).with_stride(self.record_stride)
    }
}

impl ProblemSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(Stage::Input, format!("cannot read {}: {e}", path.display())))?;
        let spec: ProblemSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.system.state_dim();
        if let Some(f) = &self.forcing {
            if f.dimension() != n {
                return Err(CliError::new(
                    Stage::Input,
                    format!("forcing has dimension {}, the state has {n}", f.dimension()),
                ));
            }
        }
        if let Some(sim) = &self.options.simulation {
            if let Some(y0) = &sim.y0 {
                if y0.len() != n {
                    return Err(CliError::new(
                        Stage::Input,
                        format!("y0 has {} entries, the state has {n}", y0.len()),
                    ));
                }
            }
        }
        self.options
            .tolerances
            .validate()
            .map_err(|e| CliError::new(Stage::Input, e.to_string()))
    }

    pub fn forcing(&self) -> Signal {
        self.forcing
            .clone()
            .unwrap_or_else(|| Signal::Trig(TrigPolynomial::zero(self.system.state_dim())))
    }

    pub fn y0(&self) -> Option<DVector<f64>> {
        self.options
            .simulation
            .as_ref()
            .and_then(|s| s.y0.as_ref())
            .map(|v| DVector::from_column_slice(v))
    }
}
