//! Almost-periodic and almost-automorphic vector signals.
//!
//! A [`TrigPolynomial`] is a finite sum of harmonics and carries every
//! closed-form answer in the crate. An [`EvaluableSignal`] is an arbitrary
//! bounded map `t -> R^n`; it supports only the numerical Bohr mean.
//!
//! Phasor convention, used throughout: a harmonic with cosine coefficient
//! `c` and sine coefficient `s` at angular frequency `ω` is
//! `Re(f̂ e^{iωt})` with `f̂ = c - i s`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance under which two frequencies are the same harmonic.
pub const FREQUENCY_MATCH_RTOL: f64 = 1e-9;

pub fn frequencies_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQUENCY_MATCH_RTOL * 1f64.max(a).max(b)
}

/// One harmonic `c cos(ωt) + s sin(ωt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTerm {
    omega: f64,
    cos_coeff: DVector<f64>,
    sin_coeff: DVector<f64>,
}

impl HarmonicTerm {
    pub fn new(omega: f64, cos_coeff: DVector<f64>, sin_coeff: DVector<f64>) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "harmonic frequency must be finite and non-negative, got {omega}"
            )));
        }
        if cos_coeff.len() != sin_coeff.len() {
            return Err(Error::DimensionMismatch {
                context: "harmonic sine coefficient",
                expected: cos_coeff.len(),
                found: sin_coeff.len(),
            });
        }
        if cos_coeff.iter().chain(sin_coeff.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("harmonic coefficients must be finite".into()));
        }
        if omega == 0.0 && sin_coeff.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidArgument(
                "constant term (omega = 0) cannot carry a sine coefficient".into(),
            ));
        }
        Ok(Self {
            omega,
            cos_coeff,
            sin_coeff,
        })
    }

    /// Builds the real harmonic `Re(phasor · e^{iωt})`.
    pub fn from_phasor(omega: f64, phasor: &DVector<Complex64>) -> Result<Self> {
        let cos_coeff = phasor.map(|z| z.re);
        let sin_coeff = if omega == 0.0 {
            DVector::zeros(phasor.len())
        } else {
            phasor.map(|z| -z.im)
        };
        Self::new(omega, cos_coeff, sin_coeff)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn cos_coeff(&self) -> &DVector<f64> {
        &self.cos_coeff
    }

    pub fn sin_coeff(&self) -> &DVector<f64> {
        &self.sin_coeff
    }

    pub fn dimension(&self) -> usize {
        self.cos_coeff.len()
    }

    pub fn phasor(&self) -> DVector<Complex64> {
        self.cos_coeff
            .zip_map(&self.sin_coeff, |c, s| Complex64::new(c, -s))
    }

    pub fn evaluate(&self, t: f64) -> DVector<f64> {
        let (s, c) = (self.omega * t).sin_cos();
        &self.cos_coeff * c + &self.sin_coeff * s
    }
}

/// A finite sum of harmonics with pairwise distinct frequencies, sorted by frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    dimension: usize,
    terms: Vec<HarmonicTerm>,
}

impl TrigPolynomial {
    /// Builds a polynomial, merging terms whose frequencies match.
    pub fn new(dimension: usize, terms: Vec<HarmonicTerm>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("signal dimension must be positive".into()));
        }
        let mut terms = terms;
        for term in &terms {
            if term.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    context: "harmonic term",
                    expected: dimension,
                    found: term.dimension(),
                });
            }
        }
        terms.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let mut merged: Vec<HarmonicTerm> = Vec::with_capacity(terms.len());
        for term in terms {
            match merged.last_mut() {
                Some(last) if frequencies_match(last.omega, term.omega) => {
                    last.cos_coeff += &term.cos_coeff;
                    // A zero frequency stays a pure constant.
                    if last.omega != 0.0 {
                        last.sin_coeff += &term.sin_coeff;
                    }
                }
                _ => merged.push(term),
            }
        }
        Ok(Self {
            dimension,
            terms: merged,
        })
    }

    pub fn zero(dimension: usize) -> Self {
        assert!(dimension > 0, "signal dimension must be positive");
        Self {
            dimension,
            terms: Vec::new(),
        }
    }

    /// Scalar polynomial from `(omega, cos, sin)` triples.
    pub fn scalar(harmonics: &[(f64, f64, f64)]) -> Result<Self> {
        let terms = harmonics
            .iter()
            .map(|&(w, c, s)| {
                HarmonicTerm::new(w, DVector::from_element(1, c), DVector::from_element(1, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(1, terms)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn terms(&self) -> &[HarmonicTerm] {
        &self.terms
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.omega)
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies().fold(0.0, f64::max)
    }

    /// The term at a matching frequency, if any.
    pub fn term_at(&self, omega: f64) -> Option<&HarmonicTerm> {
        self.terms.iter().find(|t| frequencies_match(t.omega, omega))
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.cos_coeff.iter().chain(t.sin_coeff.iter()).all(|&x| x == 0.0))
    }

    pub fn evaluate(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dimension);
        for term in &self.terms {
            let (s, c) = (term.omega * t).sin_cos();
            out.axpy(c, &term.cos_coeff, 1.0);
            out.axpy(s, &term.sin_coeff, 1.0);
        }
        out
    }

    /// Upper bound on `sup_t |p(t)|` from the harmonic amplitudes.
    pub fn sup_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.cos_coeff.norm_squared() + t.sin_coeff.norm_squared()).sqrt())
            .sum()
    }

    pub fn derivative(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.omega != 0.0)
            .map(|t| HarmonicTerm {
                omega: t.omega,
                cos_coeff: &t.sin_coeff * t.omega,
                sin_coeff: &t.cos_coeff * (-t.omega),
            })
            .collect();
        Self {
            dimension: self.dimension,
            terms,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| HarmonicTerm {
                omega: t.omega,
                cos_coeff: &t.cos_coeff * factor,
                sin_coeff: &t.sin_coeff * factor,
            })
            .collect();
        Self {
            dimension: self.dimension,
            terms,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dimension(other, "polynomial sum")?;
        let terms = self.terms.iter().chain(other.terms.iter()).cloned().collect();
        Self::new(self.dimension, terms)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Applies a linear map to every coefficient vector.
    pub fn map_linear(&self, matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != self.dimension {
            return Err(Error::DimensionMismatch {
                context: "linear map on signal",
                expected: self.dimension,
                found: matrix.ncols(),
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|t| HarmonicTerm {
                omega: t.omega,
                cos_coeff: matrix * &t.cos_coeff,
                sin_coeff: matrix * &t.sin_coeff,
            })
            .collect();
        Ok(Self {
            dimension: matrix.nrows(),
            terms,
        })
    }

    /// Maps each harmonic's phasor through `solve(omega, phasor)`; the output
    /// dimension is `dimension`.
    pub fn map_phasors<F>(&self, dimension: usize, mut solve: F) -> Result<Self>
    where
        F: FnMut(f64, &DVector<Complex64>) -> Result<DVector<Complex64>>,
    {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let out = solve(t.omega, &t.phasor())?;
                if out.len() != dimension {
                    return Err(Error::DimensionMismatch {
                        context: "phasor map output",
                        expected: dimension,
                        found: out.len(),
                    });
                }
                HarmonicTerm::from_phasor(t.omega, &out)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dimension, terms)
    }

    fn check_dimension(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(())
    }
}

/// The composite almost-automorphic signals shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    /// `sin(1 / (2 + cos t + cos √2 t))`
    AaSinReciprocal,
    /// `cos(1 / (cos t + cos √2 t))`
    AaCosReciprocal,
    /// `sin(1 / (sin t + sin √5 t))`
    AaSinReciprocalSqrt5,
}

impl BuiltinKind {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::AaSinReciprocal => "aa_sin_reciprocal",
            BuiltinKind::AaCosReciprocal => "aa_cos_reciprocal",
            BuiltinKind::AaSinReciprocalSqrt5 => "aa_sin_reciprocal_sqrt5",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "aa_sin_reciprocal" => Ok(BuiltinKind::AaSinReciprocal),
            "aa_cos_reciprocal" => Ok(BuiltinKind::AaCosReciprocal),
            "aa_sin_reciprocal_sqrt5" => Ok(BuiltinKind::AaSinReciprocalSqrt5),
            other => Err(Error::UnknownBuiltin(other.to_string())),
        }
    }

    /// Scalar profile. Points where the inner denominator vanishes map to 0.
    pub fn profile(self, t: f64) -> f64 {
        let (denominator, outer): (f64, fn(f64) -> f64) = match self {
            BuiltinKind::AaSinReciprocal => (2.0 + t.cos() + (SQRT_2 * t).cos(), f64::sin),
            BuiltinKind::AaCosReciprocal => (t.cos() + (SQRT_2 * t).cos(), f64::cos),
            BuiltinKind::AaSinReciprocalSqrt5 => (t.sin() + (5f64.sqrt() * t).sin(), f64::sin),
        };
        let value = outer(denominator.recip());
        if value.is_finite() {
            value
        } else {
            0.0
        }
    }
}

/// Parameters of a builtin signal: `amplitude · profile(t) · direction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "unit_direction")]
    pub direction: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn unit_direction() -> Vec<f64> {
    vec![1.0]
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            direction: unit_direction(),
        }
    }
}

type Evaluator = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A signal known only through point evaluation.
///
/// The evaluator must be total and bounded on the real line; nothing here
/// checks almost-automorphy.
#[derive(Clone)]
pub struct EvaluableSignal {
    dimension: usize,
    evaluator: Evaluator,
    descriptor: String,
    builtin: Option<(BuiltinKind, BuiltinParams)>,
}

impl EvaluableSignal {
    pub fn new<F>(dimension: usize, descriptor: impl Into<String>, evaluator: F) -> Result<Self>
    where
        F: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::InvalidArgument("signal dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            evaluator: Arc::new(evaluator),
            descriptor: descriptor.into(),
            builtin: None,
        })
    }

    pub fn builtin(kind: BuiltinKind, params: BuiltinParams) -> Result<Self> {
        if params.direction.is_empty() {
            return Err(Error::InvalidArgument("builtin direction must be non-empty".into()));
        }
        if !params.amplitude.is_finite() || params.direction.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("builtin parameters must be finite".into()));
        }
        let direction = DVector::from_vec(params.direction.clone()) * params.amplitude;
        let mut signal = Self::new(direction.len(), kind.name(), move |t| {
            &direction * kind.profile(t)
        })?;
        signal.builtin = Some((kind, params));
        Ok(signal)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn evaluate(&self, t: f64) -> DVector<f64> {
        (self.evaluator)(t)
    }
}

impl fmt::Debug for EvaluableSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluableSignal")
            .field("dimension", &self.dimension)
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

/// Either a closed-form trigonometric polynomial or an evaluable signal.
#[derive(Clone, Debug)]
pub enum Signal {
    Trig(TrigPolynomial),
    Evaluable(EvaluableSignal),
}

impl Signal {
    pub fn dimension(&self) -> usize {
        match self {
            Signal::Trig(p) => p.dimension(),
            Signal::Evaluable(e) => e.dimension(),
        }
    }

    pub fn evaluate(&self, t: f64) -> DVector<f64> {
        match self {
            Signal::Trig(p) => p.evaluate(t),
            Signal::Evaluable(e) => e.evaluate(t),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Signal::Trig(p) => format!("trig polynomial ({} harmonics)", p.terms().len()),
            Signal::Evaluable(e) => e.descriptor().to_string(),
        }
    }

    pub fn as_trig(&self) -> Result<&TrigPolynomial> {
        match self {
            Signal::Trig(p) => Ok(p),
            Signal::Evaluable(e) => Err(Error::NotTrigPolynomial(e.descriptor().to_string())),
        }
    }
}

impl From<TrigPolynomial> for Signal {
    fn from(p: TrigPolynomial) -> Self {
        Signal::Trig(p)
    }
}

impl From<EvaluableSignal> for Signal {
    fn from(e: EvaluableSignal) -> Self {
        Signal::Evaluable(e)
    }
}

// ---- JSON encoding ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    omega: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrigRepr {
    dimension: usize,
    terms: Vec<TermRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuiltinRepr {
    builtin: String,
    #[serde(default)]
    params: BuiltinParams,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SignalRepr {
    Trig(TrigRepr),
    Builtin(BuiltinRepr),
}

impl From<&TrigPolynomial> for TrigRepr {
    fn from(p: &TrigPolynomial) -> Self {
        TrigRepr {
            dimension: p.dimension,
            terms: p
                .terms
                .iter()
                .map(|t| TermRepr {
                    omega: t.omega,
                    cos: t.cos_coeff.as_slice().to_vec(),
                    sin: t.sin_coeff.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TrigRepr> for TrigPolynomial {
    type Error = Error;

    fn try_from(repr: TrigRepr) -> Result<Self> {
        let terms = repr
            .terms
            .into_iter()
            .map(|t| HarmonicTerm::new(t.omega, DVector::from_vec(t.cos), DVector::from_vec(t.sin)))
            .collect::<Result<Vec<_>>>()?;
        TrigPolynomial::new(repr.dimension, terms)
    }
}

impl Serialize for TrigPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrigRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TrigRepr::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for Signal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Signal::Trig(p) => TrigRepr::from(p).serialize(s),
            Signal::Evaluable(e) => match &e.builtin {
                Some((kind, params)) => BuiltinRepr {
                    builtin: kind.name().to_string(),
                    params: params.clone(),
                }
                .serialize(s),
                None => Err(serde::ser::Error::custom(format!(
                    "signal `{}` has no serializable form",
                    e.descriptor
                ))),
            },
        }
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let signal = match SignalRepr::deserialize(d)? {
            SignalRepr::Trig(repr) => Signal::Trig(repr.try_into().map_err(serde::de::Error::custom)?),
            SignalRepr::Builtin(repr) => {
                let kind = BuiltinKind::from_name(&repr.builtin).map_err(serde::de::Error::custom)?;
                Signal::Evaluable(
                    EvaluableSignal::builtin(kind, repr.params).map_err(serde::de::Error::custom)?,
                )
            }
        };
        Ok(signal)
    }
}

// ---- Bohr means ----

/// How a Bohr mean is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanMethod {
    /// Exact harmonic pairing; trigonometric polynomials only.
    Closed,
    /// Trapezoid quadrature of `(1/T)∫₀ᵀ` with `samples` nodes.
    Numeric { horizon: f64, samples: usize },
}

/// Exact `⟨p, q⟩_aa` by pairing matched frequencies.
pub fn bohr_inner_closed(p: &TrigPolynomial, q: &TrigPolynomial) -> Result<f64> {
    if p.dimension != q.dimension {
        return Err(Error::DimensionMismatch {
            context: "Bohr inner product",
            expected: p.dimension,
            found: q.dimension,
        });
    }
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < p.terms.len() && j < q.terms.len() {
        let (a, b) = (&p.terms[i], &q.terms[j]);
        if frequencies_match(a.omega, b.omega) {
            if a.omega == 0.0 || b.omega == 0.0 {
                total += a.cos_coeff.dot(&b.cos_coeff);
            } else {
                total += 0.5 * (a.cos_coeff.dot(&b.cos_coeff) + a.sin_coeff.dot(&b.sin_coeff));
            }
            i += 1;
            j += 1;
        } else if a.omega < b.omega {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(total)
}

/// `(1/T)∫₀ᵀ ⟨f(t), g(t)⟩ dt` by the composite trapezoid rule.
pub fn bohr_inner_numeric(f: &Signal, g: &Signal, horizon: f64, samples: usize) -> Result<f64> {
    if f.dimension() != g.dimension() {
        return Err(Error::DimensionMismatch {
            context: "Bohr inner product",
            expected: f.dimension(),
            found: g.dimension(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "averaging horizon must be positive, got {horizon}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least 2 samples, got {samples}"
        )));
    }
    let step = horizon / (samples - 1) as f64;
    let integrand = |k: usize| {
        let t = if k == samples - 1 { horizon } else { k as f64 * step };
        f.evaluate(t).dot(&g.evaluate(t))
    };
    let mut sum = 0.5 * (integrand(0) + integrand(samples - 1));
    for k in 1..samples - 1 {
        sum += integrand(k);
    }
    Ok(sum * step / horizon)
}

pub fn aa_inner(f: &Signal, g: &Signal, method: MeanMethod) -> Result<f64> {
    match method {
        MeanMethod::Closed => bohr_inner_closed(f.as_trig()?, g.as_trig()?),
        MeanMethod::Numeric { horizon, samples } => bohr_inner_numeric(f, g, horizon, samples),
    }
}

/// `|f|²_aa` through the chosen path.
pub fn aa_norm_sq(f: &Signal, method: MeanMethod) -> Result<f64> {
    aa_inner(f, f, method)
}

pub fn aa_norm_sq_closed(p: &TrigPolynomial) -> f64 {
    bohr_inner_closed(p, p).expect("same dimension")
}
