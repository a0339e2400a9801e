//! Adjoint signal, optimal feedback law, closed-loop trajectory and the
//! closed-form average cost.
//!
//! The adjoint `r(t) = ∫_t^∞ e^{(s-t)Lᵀ} P f(s) ds`, with `L = A - BBᵀP`,
//! is the bounded solution of `r' = -Lᵀ r - P f`. Per harmonic this is
//! `r̂ = -(Lᵀ + iωI)⁻¹ P f̂`. The optimal control is `ū = -Bᵀ(P y + r)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::matrix::{self, ensure_square, solve_complex, to_complex};
use crate::riccati::{solve_are, RiccatiSolution, Variant};
use crate::signals::{aa_norm_sq_closed, bohr_inner_closed, EvaluableSignal, Signal, TrigPolynomial};
use crate::spectral::{
    check_hypotheses_with, fit_exponential_bound, hyperbolic_splitting_with, spectral_abscissa,
    StateSpace,
};

/// The synthesized control `ū = -gain · y - bias(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLaw {
    pub solution: RiccatiSolution,
    /// Adjoint signal.
    pub r: TrigPolynomial,
    /// `K = BᵀP`.
    #[serde(with = "matrix::rows")]
    pub gain: DMatrix<f64>,
    /// `b(t) = Bᵀ r(t)`.
    pub bias: TrigPolynomial,
    /// `L = A - BBᵀP`.
    #[serde(with = "matrix::rows")]
    pub closed_loop: DMatrix<f64>,
    #[serde(rename = "B", with = "matrix::rows")]
    pub input_matrix: DMatrix<f64>,
}

impl FeedbackLaw {
    pub fn state_dim(&self) -> usize {
        self.gain.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.gain.nrows()
    }

    /// `ū(t)` at a given state.
    pub fn control(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        -(&self.gain * y) - self.bias.evaluate(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    ClosedForm,
    Decomposition,
    Empirical,
}

/// Terms of the average cost `J = |u + Bᵀ(Py + r)|² + 2⟨r,f⟩ - |Bᵀr|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(rename = "J")]
    pub j: f64,
    /// `2⟨r, f⟩_aa`
    pub cross_term: f64,
    /// `|Bᵀ r|²_aa`
    pub penalty_term: f64,
    /// `|u + Bᵀ(P y + r)|²_aa`; zero for the optimal control.
    pub deviation_term: f64,
    pub method: CostMethod,
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_adjoint_inputs(l: &DMatrix<f64>, p: &DMatrix<f64>, dimension: usize) -> Result<usize> {
    let n = ensure_square(l, "closed-loop matrix")?;
    check_len("Riccati matrix order", n, p.nrows())?;
    check_len("Riccati matrix order", n, p.ncols())?;
    check_len("forcing dimension", n, dimension)?;
    Ok(n)
}

/// Anticausal adjoint `r̂ = -(Lᵀ + iωI)⁻¹ P f̂` for a stable closed loop.
pub fn solve_r_harmonic(l: &DMatrix<f64>, p: &DMatrix<f64>, f: &TrigPolynomial) -> Result<TrigPolynomial> {
    let n = check_adjoint_inputs(l, p, f.dimension())?;
    let abscissa = spectral_abscissa(l)?;
    if abscissa >= 0.0 {
        return Err(Error::NotStable { abscissa });
    }
    let lt = to_complex(&l.transpose());
    let pc = to_complex(p);
    f.map_phasors(n, |omega, fhat| {
        let shifted = &lt + DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, omega);
        let rhs = -(&pc * fhat);
        solve_complex(shifted, &rhs, "adjoint resolvent (Lᵀ + iωI)")
    })
}

/// Two-sided adjoint `r̂ = (iωI - Lᵀ)⁻¹ P f̂` from the dichotomy of `Lᵀ`.
///
/// This is the bounded solution of the forward equation `r' = Lᵀ r + P f`,
/// `r(t) = ∫_{-∞}^t e^{(t-s)Lᵀ} Π_s P f ds - ∫_t^∞ e^{(t-s)Lᵀ} Π_u P f ds`.
/// It needs only hyperbolicity of `L`. For stable `L` it differs from
/// [`solve_r_harmonic`], which solves `r' = -Lᵀ r - P f`.
pub fn solve_r_dichotomy(l: &DMatrix<f64>, p: &DMatrix<f64>, f: &TrigPolynomial) -> Result<TrigPolynomial> {
    solve_r_dichotomy_with(l, p, f, &Tolerances::default())
}

pub fn solve_r_dichotomy_with(
    l: &DMatrix<f64>,
    p: &DMatrix<f64>,
    f: &TrigPolynomial,
    tol: &Tolerances,
) -> Result<TrigPolynomial> {
    check_adjoint_inputs(l, p, f.dimension())?;
    let lt = l.transpose();
    hyperbolic_splitting_with(&lt, tol)?;
    let pf = f.map_linear(p)?;
    bounded_response(&lt, &pf)
}

/// The unique bounded solution of `y' = G y + g` for hyperbolic `G`:
/// `ŷ = (iωI - G)⁻¹ ĝ` per harmonic.
pub fn bounded_response(generator: &DMatrix<f64>, g: &TrigPolynomial) -> Result<TrigPolynomial> {
    let n = ensure_square(generator, "generator")?;
    check_len("forcing dimension", n, g.dimension())?;
    let gc = to_complex(generator);
    g.map_phasors(n, |omega, ghat| {
        let shifted = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, omega) - &gc;
        solve_complex(shifted, ghat, "resolvent (iωI - G)")
    })
}

/// Closed-loop trajectory `y' = L y + f - B b(t)` as a trigonometric polynomial.
pub fn closed_loop_trajectory(law: &FeedbackLaw, f: &TrigPolynomial) -> Result<TrigPolynomial> {
    closed_loop_trajectory_with(law, f, &Tolerances::default())
}

pub fn closed_loop_trajectory_with(
    law: &FeedbackLaw,
    f: &TrigPolynomial,
    tol: &Tolerances,
) -> Result<TrigPolynomial> {
    check_len("forcing dimension", law.state_dim(), f.dimension())?;
    hyperbolic_splitting_with(&law.closed_loop, tol)?;
    let g = f.sub(&law.bias.map_linear(&law.input_matrix)?)?;
    bounded_response(&law.closed_loop, &g)
}

/// The bounded trajectory of `y' = A y + B u + f` generated by an open-loop control.
pub fn admissible_trajectory(sys: &StateSpace, u: &TrigPolynomial, f: &TrigPolynomial) -> Result<TrigPolynomial> {
    check_len("control dimension", sys.input_dim(), u.dimension())?;
    check_len("forcing dimension", sys.state_dim(), f.dimension())?;
    hyperbolic_splitting_with(sys.a(), &Tolerances::default())?;
    let g = u.map_linear(sys.b())?.add(f)?;
    bounded_response(sys.a(), &g)
}

/// `ū = -K y - b` along a closed-form trajectory.
pub fn realized_control(law: &FeedbackLaw, y: &TrigPolynomial) -> Result<TrigPolynomial> {
    Ok(law.bias.add(&y.map_linear(&law.gain)?)?.scale(-1.0))
}

pub fn synthesize(sys: &StateSpace, f: &TrigPolynomial, variant: Variant) -> Result<FeedbackLaw> {
    synthesize_with(sys, f, variant, &Tolerances::default())
}

/// Solves the Riccati equation, the adjoint and assembles the feedback law.
pub fn synthesize_with(
    sys: &StateSpace,
    f: &TrigPolynomial,
    variant: Variant,
    tol: &Tolerances,
) -> Result<FeedbackLaw> {
    check_len("forcing dimension", sys.state_dim(), f.dimension())?;
    check_hypotheses_with(sys, tol)?.require()?;
    let solution = solve_are(sys, variant, tol)?;
    law_from_solution(sys, solution, f)
}

/// Assembles a law from an already-certified Riccati solution.
pub fn law_from_solution(sys: &StateSpace, solution: RiccatiSolution, f: &TrigPolynomial) -> Result<FeedbackLaw> {
    let closed_loop = solution.closed_loop(sys);
    let gain = solution.gain(sys);
    let r = solve_r_harmonic(&closed_loop, &solution.p, f)?;
    let bias = r.map_linear(&sys.b().transpose())?;
    Ok(FeedbackLaw {
        solution,
        r,
        gain,
        bias,
        closed_loop,
        input_matrix: sys.b().clone(),
    })
}

/// `J(ū) = 2⟨r, f⟩_aa - |Bᵀ r|²_aa`.
pub fn closed_form_cost(law: &FeedbackLaw, f: &TrigPolynomial) -> Result<CostReport> {
    let cross_term = 2.0 * bohr_inner_closed(&law.r, f)?;
    let penalty_term = aa_norm_sq_closed(&law.bias);
    Ok(CostReport {
        j: cross_term - penalty_term,
        cross_term,
        penalty_term,
        deviation_term: 0.0,
        method: CostMethod::ClosedForm,
    })
}

/// `J(u) = |u + Bᵀ(P y + r)|²_aa + 2⟨r, f⟩_aa - |Bᵀ r|²_aa`.
///
/// `y` must be the bounded trajectory generated by `u` (see
/// [`admissible_trajectory`]); this is not checked.
pub fn cost_decomposition(
    u: &TrigPolynomial,
    y: &TrigPolynomial,
    law: &FeedbackLaw,
    f: &TrigPolynomial,
) -> Result<CostReport> {
    check_len("control dimension", law.input_dim(), u.dimension())?;
    check_len("trajectory dimension", law.state_dim(), y.dimension())?;
    let deviation = u.add(&y.map_linear(&law.gain)?)?.add(&law.bias)?;
    let deviation_term = aa_norm_sq_closed(&deviation);
    let base = closed_form_cost(law, f)?;
    Ok(CostReport {
        j: deviation_term + base.j,
        deviation_term,
        method: CostMethod::Decomposition,
        ..base
    })
}

/// `|M y|²_aa + |u|²_aa` evaluated directly from the harmonics.
pub fn direct_average_cost(sys: &StateSpace, u: &TrigPolynomial, y: &TrigPolynomial) -> Result<f64> {
    let my = y.map_linear(sys.m())?;
    check_len("control dimension", sys.input_dim(), u.dimension())?;
    Ok(aa_norm_sq_closed(&my) + aa_norm_sq_closed(u))
}

/// Truncation horizon and Simpson step for adjoint quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub truncation: f64,
    pub step: f64,
}

impl QuadratureGrid {
    /// Horizon `40/δ`, step `δ/50`, refined so that `step · max(ω, |L|)` stays below 1/50.
    pub fn for_generator(l: &DMatrix<f64>, max_frequency: f64) -> Result<Self> {
        let delta = -spectral_abscissa(l)?;
        if delta <= 0.0 {
            return Err(Error::NotStable { abscissa: -delta });
        }
        let rate = max_frequency.max(matrix::spectral_norm(l)).max(1e-300);
        Ok(Self {
            truncation: 40.0 / delta,
            step: (delta / 50.0).min(1.0 / (50.0 * rate)),
        })
    }
}

/// Evaluates `r(t) = ∫_t^{t+T} e^{(s-t)Lᵀ} P f(s) ds` by composite Simpson
/// quadrature at each requested time.
pub fn quadrature_r(
    l: &DMatrix<f64>,
    p: &DMatrix<f64>,
    f: &Signal,
    times: &[f64],
    truncation: f64,
    step: f64,
) -> Result<Vec<DVector<f64>>> {
    let n = check_adjoint_inputs(l, p, f.dimension())?;
    if !(step > 0.0 && truncation > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs positive truncation and step, got {truncation} and {step}"
        )));
    }
    let abscissa = spectral_abscissa(l)?;
    if abscissa >= -Tolerances::default().stability_margin {
        return Err(Error::NotStable { abscissa });
    }
    let rate = -abscissa;
    // e^{-δ T} <= 1e-12
    let minimum = 12.0 * std::f64::consts::LN_10 / rate;
    if truncation < minimum {
        return Err(Error::InsufficientTruncation {
            given: truncation,
            rate,
            suggested: 40.0 / rate,
        });
    }
    let mut intervals = (truncation / step).ceil() as usize;
    intervals += intervals % 2;
    let h = truncation / intervals as f64;

    // Powers of e^{hLᵀ} drift after many products; re-anchor from a direct
    // exponential every ANCHOR_STRIDE nodes. Neumaier summation keeps the
    // rounding error independent of the node count.
    const ANCHOR_STRIDE: usize = 256;
    let lt = l.transpose();
    let kernel_step = matrix_exponential(&lt, h)?;
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sums = vec![DVector::<f64>::zeros(n); times.len()];
    let mut carries = sums.clone();
    for k in 0..=intervals {
        if k > 0 {
            power = if k % ANCHOR_STRIDE == 0 {
                matrix_exponential(&lt, k as f64 * h)?
            } else {
                &power * &kernel_step
            };
        }
        let weight = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let kernel = &power * p * (weight * h / 3.0);
        for ((&t, sum), carry) in times.iter().zip(&mut sums).zip(&mut carries) {
            let term = &kernel * f.evaluate(t + k as f64 * h);
            for i in 0..n {
                let next = sum[i] + term[i];
                carry[i] += if sum[i].abs() >= term[i].abs() {
                    (sum[i] - next) + term[i]
                } else {
                    (term[i] - next) + sum[i]
                };
                sum[i] = next;
            }
        }
    }
    Ok(sums.into_iter().zip(carries).map(|(s, c)| s + c).collect())
}

/// The adjoint sampled on a uniform grid by a backward RK4 sweep of
/// `r' = -Lᵀ r - P f`, started from `r = 0` at `t_end + padding`.
///
/// The result interpolates linearly between grid points and is exact on
/// them; it is how evaluable forcing reaches the simulator.
pub fn sample_adjoint(
    l: &DMatrix<f64>,
    p: &DMatrix<f64>,
    f: &Signal,
    t_start: f64,
    t_end: f64,
    step: f64,
    padding: f64,
) -> Result<SampledSignal> {
    let n = check_adjoint_inputs(l, p, f.dimension())?;
    if !(step > 0.0 && t_end > t_start && padding >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid adjoint grid: [{t_start}, {t_end}] step {step} padding {padding}"
        )));
    }
    let stored = ((t_end - t_start) / step).ceil() as usize;
    let total = stored + (padding / step).ceil() as usize;
    let lt = l.transpose();
    let rhs = |t: f64, r: &DVector<f64>| -(&lt * r) - p * f.evaluate(t);
    let mut values = vec![DVector::zeros(n); stored + 1];
    let mut r = DVector::zeros(n);
    // Integrate backwards: ds = -step.
    for k in (0..total).rev() {
        let t = t_start + (k + 1) as f64 * step;
        let h = -step;
        let k1 = rhs(t, &r);
        let k2 = rhs(t + 0.5 * h, &(&r + &k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&r + &k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(&r + &k3 * h));
        r += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if k <= stored {
            values[k] = r.clone();
        }
    }
    Ok(SampledSignal {
        t_start,
        step,
        values: Arc::new(values),
    })
}

/// A vector signal stored on a uniform grid.
#[derive(Clone, Debug)]
pub struct SampledSignal {
    pub t_start: f64,
    pub step: f64,
    pub values: Arc<Vec<DVector<f64>>>,
}

impl SampledSignal {
    pub fn dimension(&self) -> usize {
        self.values[0].len()
    }

    /// Linear interpolation, clamped to the grid ends.
    pub fn evaluate(&self, t: f64) -> DVector<f64> {
        let x = (t - self.t_start) / self.step;
        let last = self.values.len() - 1;
        if x <= 0.0 {
            return self.values[0].clone();
        }
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            return self.values[(nearest as usize).min(last)].clone();
        }
        let i = x.floor() as usize;
        if i >= last {
            return self.values[last].clone();
        }
        let w = x - i as f64;
        &self.values[i] * (1.0 - w) + &self.values[i + 1] * w
    }

    /// Applies a linear map to every sample.
    pub fn map_linear(&self, matrix: &DMatrix<f64>) -> SampledSignal {
        SampledSignal {
            t_start: self.t_start,
            step: self.step,
            values: Arc::new(self.values.iter().map(|v| matrix * v).collect()),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn into_signal(self, descriptor: &str) -> Result<Signal> {
        let dimension = self.dimension();
        Ok(Signal::Evaluable(EvaluableSignal::new(dimension, descriptor, move |t| {
            self.evaluate(t)
        })?))
    }
}

/// `C · |P| · sup|f| / rate`, with `|e^{tLᵀ}| ≤ C e^{-rate · t}` fitted on `[0, 40/δ]`.
///
/// Bounds `sup |r|` for the anticausal adjoint.
pub fn adjoint_sup_bound(l: &DMatrix<f64>, p: &DMatrix<f64>, f_sup: f64, rate: f64) -> Result<f64> {
    let n = ensure_square(l, "closed-loop matrix")?;
    let delta = -spectral_abscissa(l)?;
    if delta <= 0.0 || rate <= 0.0 || rate > delta {
        return Err(Error::InvalidArgument(format!(
            "bound rate {rate} must lie in (0, δ = {delta}]"
        )));
    }
    let horizon = 40.0 / delta;
    let times: Vec<f64> = (0..=400).map(|k| horizon * k as f64 / 400.0).collect();
    let bound = fit_exponential_bound(&l.transpose(), &DMatrix::identity(n, n), rate, &times)?;
    Ok(bound.constant * matrix::spectral_norm(p) * f_sup / rate)
}
