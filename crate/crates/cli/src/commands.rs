use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use aacontrol::report::{format_f64, to_json_string};
use aacontrol::riccati::{closed_loop_spectrum, solve_are, RiccatiSolution, Variant};
use aacontrol::signals::{BuiltinKind, BuiltinParams};
use aacontrol::simulator::{empirical_average_cost, simulate_with, Controller, SimulationSettings, Trajectory};
use aacontrol::spectral::{
    check_hypotheses_with, controllability_gramian_with, spectral_abscissa, GramianCertificate, HypothesisReport,
};
use aacontrol::synthesis::{
    adjoint_sup_bound, closed_form_cost, closed_loop_trajectory_with, cost_decomposition, direct_average_cost,
    law_from_solution, realized_control, sample_adjoint, CostReport, FeedbackLaw,
};
use aacontrol::{EvaluableSignal, Signal, StateSpace, Tolerances, TrigPolynomial};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{AtStage, CliError, Stage};
use crate::spec::ProblemSpec;

/// Where results go. Nothing is written unless a directory is given.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub json: bool,
}

impl Sink {
    fn write(&self, name: &str, contents: impl FnOnce(&Path) -> Result<(), CliError>) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        fs::create_dir_all(dir)
            .map_err(|e| CliError::new(Stage::Output, format!("cannot create {}: {e}", dir.display())))?;
        contents(&dir.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |path| {
            let text = to_json_string(value).at(Stage::Output)?;
            fs::write(path, text).map_err(|e| CliError::new(Stage::Output, format!("{}: {e}", path.display())))
        })
    }

    fn write_trajectory(&self, traj: &Trajectory) -> Result<(), CliError> {
        self.write("trajectory.csv", |path| {
            let file = File::create(path)
                .map_err(|e| CliError::new(Stage::Output, format!("{}: {e}", path.display())))?;
            traj.write_csv(BufWriter::new(file)).at(Stage::Output)
        })
    }

    /// Writes `report.json` and prints either the report or the text summary.
    fn finish<T: Serialize>(&self, report: &T, text: &str) -> Result<(), CliError> {
        self.write_json("report.json", report)?;
        if self.json {
            print!("{}", to_json_string(report).at(Stage::Output)?);
        } else {
            print!("{text}");
        }
        Ok(())
    }
}

fn matrix_text(name: &str, m: &DMatrix<f64>) -> String {
    let mut out = format!("{name} =\n");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| format!("{:>24}", format_f64(x))).collect();
        let _ = writeln!(out, "  [{}]", cells.join(","));
    }
    out
}

fn vector_text(v: &DVector<f64>) -> String {
    v.iter().map(|&x| format_f64(x)).collect::<Vec<_>>().join(", ")
}

fn trig_forcing(spec: &ProblemSpec) -> Result<TrigPolynomial, CliError> {
    match spec.forcing() {
        Signal::Trig(f) => Ok(f),
        Signal::Evaluable(e) => Err(CliError::new(
            Stage::Input,
            format!(
                "closed-form results need a trigonometric forcing, got `{}`; use `simulate` instead",
                e.descriptor()
            ),
        )),
    }
}

// ---- check / gramian ----

#[derive(Serialize)]
struct CheckReport {
    command: &'static str,
    passed: bool,
    hypotheses: HypothesisReport,
    gramian: Option<GramianCertificate>,
}

pub fn check(spec: &ProblemSpec, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let sys = &spec.system;
    let hypotheses = check_hypotheses_with(sys, tol).at(Stage::Solver)?;
    let gramian = if hypotheses.minus_a_stable {
        Some(controllability_gramian_with(sys, tol).at(Stage::Solver)?)
    } else {
        None
    };
    let passed = hypotheses.holds();
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut text = format!(
        "stability (-A exponentially stable): {} (spectral abscissa of -A = {})\n",
        verdict(hypotheses.minus_a_stable),
        format_f64(hypotheses.minus_a_abscissa)
    );
    let _ = writeln!(
        text,
        "controllability (Kalman rank): {} (rank {} of {})",
        verdict(hypotheses.exactly_controllable),
        hypotheses.controllability_rank,
        hypotheses.state_dim
    );
    if let Some(g) = &gramian {
        let _ = writeln!(text, "beta = {}", format_f64(g.beta));
    }
    let report = CheckReport {
        command: "check",
        passed,
        hypotheses: hypotheses.clone(),
        gramian,
    };
    sink.finish(&report, &text)?;
    hypotheses.require().at(Stage::Hypothesis)
}

#[derive(Serialize)]
struct GramianReport<'a> {
    command: &'static str,
    gramian: &'a GramianCertificate,
}

pub fn gramian(spec: &ProblemSpec, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let g = controllability_gramian_with(&spec.system, tol).map_err(|e| match e {
        aacontrol::Error::NotStable { .. } => CliError::new(Stage::Hypothesis, e.to_string()),
        other => CliError::new(Stage::Solver, other.to_string()),
    })?;
    let mut text = matrix_text("W", &g.w);
    let _ = writeln!(text, "beta = {}", format_f64(g.beta));
    let _ = writeln!(text, "Lyapunov residual = {}", format_f64(g.lyapunov_residual));
    sink.finish(
        &GramianReport {
            command: "gramian",
            gramian: &g,
        },
        &text,
    )
}

// ---- solve ----

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'static str,
    solution: &'a RiccatiSolution,
    #[serde(with = "aacontrol::matrix::rows")]
    gain: DMatrix<f64>,
    /// `[re, im]` pairs, sorted by real part.
    closed_loop_spectrum: Vec<[f64; 2]>,
}

fn solution_text(sys: &StateSpace, sol: &RiccatiSolution) -> Result<String, CliError> {
    let mut text = format!("variant: {}\n", sol.variant);
    text.push_str(&matrix_text("P", &sol.p));
    let _ = writeln!(text, "residual = {}", format_f64(sol.residual_norm));
    let spectrum = closed_loop_spectrum(sys, sol).at(Stage::Solver)?;
    let eig: Vec<String> = spectrum
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                format_f64(z.re)
            } else {
                format!("{}{:+}i", format_f64(z.re), z.im)
            }
        })
        .collect();
    let _ = writeln!(text, "closed-loop spectrum: {}", eig.join(", "));
    Ok(text)
}

pub fn solve(spec: &ProblemSpec, variant: Variant, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let sys = &spec.system;
    let sol = solve_are(sys, variant, tol).at(Stage::Solver)?;
    let spectrum = closed_loop_spectrum(sys, &sol).at(Stage::Solver)?;
    let report = SolveReport {
        command: "solve",
        solution: &sol,
        gain: sol.gain(sys),
        closed_loop_spectrum: spectrum.iter().map(|z| [z.re, z.im]).collect(),
    };
    sink.finish(&report, &solution_text(sys, &sol)?)
}

// ---- synthesize / cost ----

#[derive(Serialize)]
struct SynthesisReport<'a> {
    command: &'static str,
    variant: Variant,
    #[serde(with = "aacontrol::matrix::rows")]
    gain: DMatrix<f64>,
    bias: &'a TrigPolynomial,
    r: &'a TrigPolynomial,
    cost: CostReport,
}

fn synthesize_law(
    sys: &StateSpace,
    f: &TrigPolynomial,
    variant: Variant,
    tol: &Tolerances,
) -> Result<FeedbackLaw, CliError> {
    let sol = solve_are(sys, variant, tol).at(Stage::Solver)?;
    law_from_solution(sys, sol, f).at(Stage::Solver)
}

fn cost_text(cost: &CostReport) -> String {
    format!(
        "2<r,f> = {}\n|B*r|^2 = {}\nJ = {}\n",
        format_f64(cost.cross_term),
        format_f64(cost.penalty_term),
        format_f64(cost.j)
    )
}

pub fn synthesize(spec: &ProblemSpec, variant: Variant, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let f = trig_forcing(spec)?;
    let law = synthesize_law(&spec.system, &f, variant, tol)?;
    let cost = closed_form_cost(&law, &f).at(Stage::Solver)?;
    let mut text = matrix_text("gain", &law.gain);
    for term in law.bias.terms() {
        let _ = writeln!(
            text,
            "bias at omega = {}: cos [{}], sin [{}]",
            format_f64(term.omega()),
            vector_text(term.cos_coeff()),
            vector_text(term.sin_coeff())
        );
    }
    text.push_str(&cost_text(&cost));
    sink.write_json("law.json", &law)?;
    sink.finish(
        &SynthesisReport {
            command: "synthesize",
            variant,
            gain: law.gain.clone(),
            bias: &law.bias,
            r: &law.r,
            cost,
        },
        &text,
    )
}

#[derive(Serialize)]
struct CostCommandReport {
    command: &'static str,
    closed_form: CostReport,
    decomposition: CostReport,
    /// `|M ȳ|² + |ū|²` from the harmonics of the realized trajectory.
    direct: f64,
}

pub fn cost(spec: &ProblemSpec, law_path: &Path, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let f = trig_forcing(spec)?;
    let text = fs::read_to_string(law_path)
        .map_err(|e| CliError::new(Stage::Input, format!("cannot read {}: {e}", law_path.display())))?;
    let law: FeedbackLaw = serde_json::from_str(&text)
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", law_path.display())))?;
    let sys = &spec.system;
    if law.input_matrix.shape() != sys.b().shape() || law.closed_loop.shape() != sys.a().shape() {
        return Err(CliError::new(Stage::Input, "the stored law does not match the system dimensions"));
    }
    let closed_form = closed_form_cost(&law, &f).at(Stage::Solver)?;
    let y = closed_loop_trajectory_with(&law, &f, tol).at(Stage::Solver)?;
    let u = realized_control(&law, &y).at(Stage::Solver)?;
    let decomposition = cost_decomposition(&u, &y, &law, &f).at(Stage::Solver)?;
    let direct = direct_average_cost(sys, &u, &y).at(Stage::Solver)?;
    let mut text = cost_text(&closed_form);
    let _ = writeln!(text, "deviation term = {}", format_f64(decomposition.deviation_term));
    let _ = writeln!(text, "direct |My|^2 + |u|^2 = {}", format_f64(direct));
    sink.finish(
        &CostCommandReport {
            command: "cost",
            closed_form,
            decomposition,
            direct,
        },
        &text,
    )
}

// ---- simulate ----

/// The synthesized controller for any forcing. Harmonic forcing gets the
/// closed-form law; evaluable forcing gets the adjoint sampled on the half-step
/// grid of the run, so every RK4 stage lands on a stored sample.
struct Synthesized {
    controller: Controller,
    law: Option<FeedbackLaw>,
    default_y0: DVector<f64>,
    adjoint_sup: Option<(f64, f64)>,
}

fn synthesize_controller(
    sys: &StateSpace,
    f: &Signal,
    variant: Variant,
    settings: &SimulationSettings,
    tol: &Tolerances,
) -> Result<Synthesized, CliError> {
    match f {
        Signal::Trig(trig) => {
            let law = synthesize_law(sys, trig, variant, tol)?;
            let y = closed_loop_trajectory_with(&law, trig, tol).at(Stage::Solver)?;
            Ok(Synthesized {
                controller: Controller::from_law(&law),
                default_y0: y.evaluate(0.0),
                law: Some(law),
                adjoint_sup: None,
            })
        }
        Signal::Evaluable(_) => {
            let sol = solve_are(sys, variant, tol).at(Stage::Solver)?;
            let l = sol.closed_loop(sys);
            let delta = -spectral_abscissa(&l).at(Stage::Solver)?;
            let t_end = settings.t_end + settings.dt;
            let r = sample_adjoint(&l, &sol.p, f, 0.0, t_end, 0.5 * settings.dt, 40.0 / delta)
                .at(Stage::Solver)?;
            let f_sup = (0..=((t_end / settings.dt) as usize))
                .map(|k| f.evaluate(k as f64 * settings.dt).norm())
                .fold(0.0, f64::max);
            let bound = adjoint_sup_bound(&l, &sol.p, f_sup, delta).at(Stage::Solver)?;
            let r_sup = r.sup_norm();
            let bias = r.map_linear(&sys.b().transpose()).into_signal("B^T r (sampled)").at(Stage::Solver)?;
            Ok(Synthesized {
                controller: Controller::new("synthesized", sol.gain(sys), bias),
                law: None,
                default_y0: DVector::zeros(sys.state_dim()),
                adjoint_sup: Some((r_sup, bound)),
            })
        }
    }
}

#[derive(Serialize)]
struct SimulationReport {
    command: &'static str,
    variant: Variant,
    forcing: String,
    settings: SimulationSettings,
    y0: Vec<f64>,
    empirical_cost: f64,
    closed_form_cost: Option<f64>,
    /// Sup norm of the sampled adjoint and its decay bound (evaluable forcing only).
    adjoint_sup: Option<f64>,
    adjoint_bound: Option<f64>,
}

struct SimulationRun {
    report: SimulationReport,
    trajectory: Trajectory,
    law: Option<FeedbackLaw>,
}

fn run_simulation(
    sys: &StateSpace,
    f: &Signal,
    variant: Variant,
    settings: &SimulationSettings,
    y0: Option<DVector<f64>>,
    tol: &Tolerances,
) -> Result<SimulationRun, CliError> {
    let synthesized = synthesize_controller(sys, f, variant, settings, tol)?;
    let y0 = y0.unwrap_or(synthesized.default_y0);
    let trajectory = simulate_with(sys, &synthesized.controller, f, &y0, settings, tol).at(Stage::Simulation)?;
    let empirical_cost = empirical_average_cost(&trajectory).at(Stage::Simulation)?;
    let closed_form_cost = match (&synthesized.law, f) {
        (Some(law), Signal::Trig(trig)) => Some(closed_form_cost(law, trig).at(Stage::Solver)?.j),
        _ => None,
    };
    Ok(SimulationRun {
        report: SimulationReport {
            command: "simulate",
            variant,
            forcing: f.descriptor(),
            settings: *settings,
            y0: y0.as_slice().to_vec(),
            empirical_cost,
            closed_form_cost,
            adjoint_sup: synthesized.adjoint_sup.map(|s| s.0),
            adjoint_bound: synthesized.adjoint_sup.map(|s| s.1),
        },
        trajectory,
        law: synthesized.law,
    })
}

fn simulation_text(report: &SimulationReport) -> String {
    let mut text = format!(
        "simulated t in [0, {}] with dt = {}\nempirical J = {}\n",
        report.settings.t_end, report.settings.dt, format_f64(report.empirical_cost)
    );
    if let Some(j) = report.closed_form_cost {
        let _ = writeln!(text, "closed-form J = {}", format_f64(j));
    }
    if let (Some(sup), Some(bound)) = (report.adjoint_sup, report.adjoint_bound) {
        let _ = writeln!(text, "sup |r| = {} (bound {})", format_f64(sup), format_f64(bound));
    }
    text
}

pub fn simulate(
    spec: &ProblemSpec,
    variant: Variant,
    settings: &SimulationSettings,
    tol: &Tolerances,
    sink: &Sink,
) -> Result<(), CliError> {
    let run = run_simulation(&spec.system, &spec.forcing(), variant, settings, spec.y0(), tol)?;
    if let Some(law) = &run.law {
        sink.write_json("law.json", law)?;
    }
    sink.write_trajectory(&run.trajectory)?;
    sink.finish(&run.report, &simulation_text(&run.report))
}

// ---- example ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExampleForcing {
    /// `f(t) = sin t`
    Sin,
    /// `f(t) = sin(1 / (2 + cos t + cos √2 t))`
    Aa,
}

#[derive(Serialize)]
struct ReferenceCheck {
    name: &'static str,
    value: f64,
    expected: Option<f64>,
    tolerance: Option<f64>,
    passed: bool,
}

impl ReferenceCheck {
    fn against(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            expected: Some(expected),
            tolerance: Some(tolerance),
            passed: (value - expected).abs() <= tolerance,
        }
    }

    fn condition(name: &'static str, value: f64, passed: bool) -> Self {
        Self {
            name,
            value,
            expected: None,
            tolerance: None,
            passed,
        }
    }

    fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match (self.expected, self.tolerance) {
            (Some(e), Some(t)) => format!(
                "{verdict}  {:<16} {:>24}  expected {:>24}  tol {:.0e}",
                self.name,
                format_f64(self.value),
                format_f64(e),
                t
            ),
            _ => format!("{verdict}  {:<16} {:>24}", self.name, format_f64(self.value)),
        }
    }
}

#[derive(Serialize)]
struct ExampleReport {
    command: &'static str,
    variant: Variant,
    forcing: String,
    checks: Vec<ReferenceCheck>,
    simulation: SimulationReport,
    passed: bool,
}

pub struct ExampleArgs {
    pub variant: Variant,
    pub forcing: ExampleForcing,
    pub settings: SimulationSettings,
}

/// The scalar system `A = 3, B = 4, M = 1` driven by `sin t` or by a composite
/// almost-automorphic signal, run through every stage.
pub fn example(args: &ExampleArgs, tol: &Tolerances, sink: &Sink) -> Result<(), CliError> {
    let sys = StateSpace::reference_example();
    let mut lines = Vec::new();

    let hypotheses = check_hypotheses_with(&sys, tol).at(Stage::Solver)?;
    hypotheses.require().at(Stage::Hypothesis)?;
    let gramian = controllability_gramian_with(&sys, tol).at(Stage::Solver)?;
    lines.push(format!("check: hypotheses hold, beta = {}", format_f64(gramian.beta)));

    let sol = solve_are(&sys, args.variant, tol).at(Stage::Solver)?;
    lines.push(format!("solve ({}): P = {}", args.variant, format_f64(sol.p[(0, 0)])));

    let f = match args.forcing {
        ExampleForcing::Sin => Signal::Trig(TrigPolynomial::scalar(&[(1.0, 0.0, 1.0)]).at(Stage::Input)?),
        ExampleForcing::Aa => Signal::Evaluable(
            EvaluableSignal::builtin(BuiltinKind::AaSinReciprocal, BuiltinParams::default()).at(Stage::Input)?,
        ),
    };

    let mut checks = Vec::new();
    const EXACT: f64 = 1e-12;
    match (args.variant, &f) {
        (Variant::Standard, Signal::Trig(trig)) => {
            let law = law_from_solution(&sys, sol.clone(), trig).at(Stage::Solver)?;
            let cost = closed_form_cost(&law, trig).at(Stage::Solver)?;
            let r = law.r.term_at(1.0).ok_or_else(|| CliError::new(Stage::Solver, "adjoint lost its harmonic"))?;
            checks.push(ReferenceCheck::against("P", sol.p[(0, 0)], 0.5, EXACT));
            checks.push(ReferenceCheck::against("r cos", r.cos_coeff()[0], 1.0 / 52.0, EXACT));
            checks.push(ReferenceCheck::against("r sin", r.sin_coeff()[0], 5.0 / 52.0, EXACT));
            checks.push(ReferenceCheck::against("2<r,f>", cost.cross_term, 5.0 / 52.0, EXACT));
            checks.push(ReferenceCheck::against("|B*r|^2", cost.penalty_term, 4.0 / 52.0, EXACT));
            checks.push(ReferenceCheck::against("J", cost.j, 1.0 / 52.0, EXACT));
        }
        (Variant::Degenerate, _) => {
            checks.push(ReferenceCheck::against("P", sol.p[(0, 0)], 3.0 / 8.0, EXACT));
            checks.push(ReferenceCheck::against("gain", sol.gain(&sys)[(0, 0)], 1.5, EXACT));
            checks.push(ReferenceCheck::against("closed loop", sol.closed_loop(&sys)[(0, 0)], -3.0, EXACT));
        }
        (Variant::Standard, Signal::Evaluable(_)) => {
            checks.push(ReferenceCheck::against("P", sol.p[(0, 0)], 0.5, EXACT));
        }
    }

    let run = run_simulation(&sys, &f, args.variant, &args.settings, None, tol)?;
    let report = &run.report;
    if args.variant == Variant::Standard && matches!(f, Signal::Trig(_)) {
        checks.push(ReferenceCheck::against("empirical J", report.empirical_cost, 1.0 / 52.0, 1e-3));
    } else {
        checks.push(ReferenceCheck::condition(
            "empirical J",
            report.empirical_cost,
            report.empirical_cost.is_finite() && report.empirical_cost >= 0.0,
        ));
    }
    if let (Some(sup), Some(bound)) = (report.adjoint_sup, report.adjoint_bound) {
        checks.push(ReferenceCheck::condition("sup |r|", sup, sup <= bound));
    }
    lines.push(format!(
        "simulate: t in [0, {}], dt = {}, empirical J = {}",
        args.settings.t_end,
        args.settings.dt,
        format_f64(report.empirical_cost)
    ));

    let passed = checks.iter().all(|c| c.passed);
    let mut text = lines.join("\n");
    text.push('\n');
    for check in &checks {
        text.push_str(&check.line());
        text.push('\n');
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(text, "{} of {} reference values reproduced", checks.len() - failures, checks.len());

    if let Some(law) = &run.law {
        sink.write_json("law.json", law)?;
    }
    sink.write_trajectory(&run.trajectory)?;
    let SimulationRun { report, .. } = run;
    sink.finish(
        &ExampleReport {
            command: "example",
            variant: args.variant,
            forcing: f.descriptor(),
            checks,
            simulation: report,
            passed,
        },
        &text,
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::new(Stage::Check, format!("{failures} reference value(s) out of tolerance")))
    }
}
