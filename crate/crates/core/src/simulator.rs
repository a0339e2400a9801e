//! Fixed-step RK4 integration of the closed loop and empirical average cost.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::{self, spectral_norm};
use crate::signals::Signal;
use crate::spectral::{spectral_abscissa, StateSpace};
use crate::synthesis::FeedbackLaw;

/// A feedback `u = -gain · y - bias(t)`.
#[derive(Clone, Debug)]
pub struct Controller {
    pub label: String,
    pub gain: DMatrix<f64>,
    pub bias: Signal,
}

impl Controller {
    pub fn new(label: impl Into<String>, gain: DMatrix<f64>, bias: Signal) -> Self {
        Self {
            label: label.into(),
            gain,
            bias,
        }
    }

    pub fn from_law(law: &FeedbackLaw) -> Self {
        Self::new("synthesized", law.gain.clone(), Signal::Trig(law.bias.clone()))
    }

    pub fn control(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        -(&self.gain * y) - self.bias.evaluate(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub t_end: f64,
    pub dt: f64,
    /// Keep every `record_stride`-th step in the trajectory; the cost still
    /// accumulates every step.
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

impl SimulationSettings {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record stride must be positive".into()));
        }
        Ok((self.t_end / self.dt - 1e-9).ceil() as usize)
    }
}

/// Recorded states, controls and the running average cost `J_t`.
///
/// States and controls are stored row-major, one row per recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub input_dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
    pub running_cost: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn control(&self, k: usize) -> &[f64] {
        &self.controls[k * self.input_dim..(k + 1) * self.input_dim]
    }

    /// CSV with columns `t, y_1..y_n, u_1..u_m, running_cost`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.state_dim).map(|i| format!("y_{i}")));
        header.extend((1..=self.input_dim).map(|i| format!("u_{i}")));
        header.push("running_cost".into());
        out.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![crate::report::format_f64(self.times[k])];
            row.extend(self.state(k).iter().map(|&x| crate::report::format_f64(x)));
            row.extend(self.control(k).iter().map(|&x| crate::report::format_f64(x)));
            row.push(crate::report::format_f64(self.running_cost[k]));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn cost_density(sys: &StateSpace, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
    (sys.m() * y).norm_squared() + u.norm_squared()
}

/// Integrates `y' = A y + B u + f` under `u = -K y - b(t)` with classical RK4.
pub fn simulate(
    sys: &StateSpace,
    controller: &Controller,
    f: &Signal,
    y0: &DVector<f64>,
    settings: &SimulationSettings,
) -> Result<Trajectory> {
    simulate_with(sys, controller, f, y0, settings, &Tolerances::default())
}

pub fn simulate_with(
    sys: &StateSpace,
    controller: &Controller,
    f: &Signal,
    y0: &DVector<f64>,
    settings: &SimulationSettings,
    tol: &Tolerances,
) -> Result<Trajectory> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    for (context, expected, found) in [
        ("initial state", n, y0.len()),
        ("forcing dimension", n, f.dimension()),
        ("bias dimension", m, controller.bias.dimension()),
        ("gain rows", m, controller.gain.nrows()),
        ("gain columns", n, controller.gain.ncols()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            });
        }
    }
    let steps = settings.steps()?;
    let dt = settings.dt;
    let closed = sys.a() - sys.b() * &controller.gain;
    let norm = spectral_norm(&closed);
    if dt * norm > tol.max_step_norm {
        return Err(Error::StepTooLarge {
            dt,
            norm,
            suggested: tol.max_step_norm / norm,
        });
    }

    // Forcing and bias are sampled once per distinct time: t, t + dt/2, t + dt.
    let b = sys.b();
    let gain = &controller.gain;
    let sample = |t: f64| {
        let bias = controller.bias.evaluate(t);
        let drive = f.evaluate(t) - b * &bias;
        (bias, drive)
    };

    let stride = settings.record_stride;
    let capacity = steps / stride + 2;
    let mut traj = Trajectory {
        state_dim: n,
        input_dim: m,
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity * n),
        controls: Vec::with_capacity(capacity * m),
        running_cost: Vec::with_capacity(capacity),
    };
    let record = |traj: &mut Trajectory, t: f64, y: &DVector<f64>, u: &DVector<f64>, j: f64| {
        traj.times.push(t);
        traj.states.extend_from_slice(y.as_slice());
        traj.controls.extend_from_slice(u.as_slice());
        traj.running_cost.push(j);
    };

    let mut y = y0.clone();
    let (bias, mut drive) = sample(0.0);
    let mut u = -(gain * &y) - bias;
    let mut density = cost_density(sys, &y, &u);
    let mut integral = 0.0;
    record(&mut traj, 0.0, &y, &u, density);

    for k in 0..steps {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        let (_, drive_mid) = sample(t + 0.5 * dt);
        let (bias_next, drive_next) = sample(t_next);
        let k1 = &closed * &y + &drive;
        let k2 = &closed * (&y + &k1 * (0.5 * dt)) + &drive_mid;
        let k3 = &closed * (&y + &k2 * (0.5 * dt)) + &drive_mid;
        let k4 = &closed * (&y + &k3 * dt) + &drive_next;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("closed-loop state diverged at t = {t_next}")));
        }
        u = -(gain * &y) - bias_next;
        drive = drive_next;
        let next_density = cost_density(sys, &y, &u);
        integral += 0.5 * dt * (density + next_density);
        density = next_density;
        if (k + 1) % stride == 0 || k + 1 == steps {
            record(&mut traj, t_next, &y, &u, integral / t_next);
        }
    }
    Ok(traj)
}

/// RK4 run of the synthesized law with every step recorded.
pub fn integrate_closed_loop(
    sys: &StateSpace,
    law: &FeedbackLaw,
    f: &Signal,
    y0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    simulate(sys, &Controller::from_law(law), f, y0, &SimulationSettings::new(t_end, dt))
}

/// `J_T` at the final recorded time.
pub fn empirical_average_cost(traj: &Trajectory) -> Result<f64> {
    traj.running_cost.last().copied().ok_or(Error::EmptyTrajectory)
}

/// Average cost over `[t0, T]`, where `t0` is the first recorded time at or
/// after `discard`.
pub fn windowed_average_cost(traj: &Trajectory, discard: f64) -> Result<f64> {
    let last = traj.len().checked_sub(1).ok_or(Error::EmptyTrajectory)?;
    let start = traj
        .times
        .iter()
        .position(|&t| t >= discard)
        .filter(|&k| k < last)
        .ok_or_else(|| Error::InvalidArgument(format!("discard window {discard} covers the whole run")))?;
    let (t0, t1) = (traj.times[start], traj.times[last]);
    let cumulative = |k: usize| {
        if traj.times[k] == 0.0 {
            0.0
        } else {
            traj.running_cost[k] * traj.times[k]
        }
    };
    Ok((cumulative(last) - cumulative(start)) / (t1 - t0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Stable,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub label: String,
    #[serde(with = "matrix::rows")]
    pub gain: DMatrix<f64>,
    pub closed_loop_abscissa: f64,
    pub status: RunStatus,
    pub cost: Option<f64>,
    pub synthesized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub rows: Vec<CostRow>,
    /// The synthesized law's cost is within `1e-4` of the best stable row.
    pub optimum_attained: bool,
}

impl CostTable {
    pub fn synthesized_cost(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.synthesized).and_then(|r| r.cost)
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>10}  {:>22}\n", "label", "status", "J");
        for row in &self.rows {
            let cost = row
                .cost
                .map(crate::report::format_f64)
                .unwrap_or_else(|| "-".into());
            let mark = if row.synthesized { " *" } else { "" };
            let status = match row.status {
                RunStatus::Stable => "stable",
                RunStatus::Divergent => "divergent",
            };
            out.push_str(&format!("{:<width$}  {:>10}  {:>22}{mark}\n", row.label, status, cost));
        }
        out
    }
}

pub const OPTIMALITY_TOLERANCE: f64 = 1e-4;

/// Simulates the synthesized law and each alternative from the same initial
/// state and tabulates the empirical average costs.
pub fn compare_controls(
    sys: &StateSpace,
    f: &Signal,
    law: &FeedbackLaw,
    alternatives: &[Controller],
    y0: &DVector<f64>,
    settings: &SimulationSettings,
) -> Result<CostTable> {
    let settings = SimulationSettings {
        record_stride: settings.steps()?.max(1),
        ..*settings
    };
    let mut rows = Vec::with_capacity(alternatives.len() + 1);
    let synthesized = Controller::from_law(law);
    for (controller, is_law) in std::iter::once((&synthesized, true)).chain(alternatives.iter().map(|c| (c, false))) {
        let abscissa = spectral_abscissa(&(sys.a() - sys.b() * &controller.gain))?;
        let (status, cost) = if abscissa < 0.0 {
            let traj = simulate(sys, controller, f, y0, &settings)?;
            (RunStatus::Stable, Some(empirical_average_cost(&traj)?))
        } else {
            (RunStatus::Divergent, None)
        };
        rows.push(CostRow {
            label: controller.label.clone(),
            gain: controller.gain.clone(),
            closed_loop_abscissa: abscissa,
            status,
            cost,
            synthesized: is_law,
        });
    }
    let best = rows.iter().filter_map(|r| r.cost).fold(f64::INFINITY, f64::min);
    let optimum_attained = rows[0]
        .cost
        .is_some_and(|c| c <= best + OPTIMALITY_TOLERANCE);
    Ok(CostTable {
        rows,
        optimum_attained,
    })
}
