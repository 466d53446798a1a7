//! Data analysis: negative-cosine phase fits, the zero-crossing Larmor
//! estimator, and JC versus trapped-ion model comparison.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{initial_state, ExperimentError, PulseSpec, Sequencer};
use crate::hilbert::{
    check_cutoff, expectation, partial_trace_mode, sigma_x, sigma_y, sigma_z, trace_distance,
    HilbertError, Propagator,
};
use crate::models::{Model, ModelError, ModelParams};
use crate::renorm::{self, RenormError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("cosine fit needs at least 5 distinct phases, got {0}")]
    TooFewPhases(usize),
    #[error("phases span only {0:.3} rad, at least π is needed")]
    NarrowSpan(f64),
    #[error("degenerate design matrix")]
    Degenerate,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("weights must be finite and >= 0 with a positive sum")]
    InvalidWeights,
    #[error("expected phase |⟨δω̃⟩·T| = {expected:.3} rad exceeds π; unwrapping is ambiguous")]
    AmbiguousUnwrap { expected: f64 },
    #[error("times must be finite and strictly increasing")]
    UnorderedTimes,
    #[error("need at least 20 samples per period 2π/ω_hint; largest step is {step:e} s, period {period:e} s")]
    Undersampled { step: f64, period: f64 },
    #[error("only {0} zero-crossing clusters found, at least 2 are needed")]
    TooFewCrossings(usize),
    #[error("frequency hint must be positive and finite")]
    InvalidHint,
    #[error("comparison grid needs at least 2 points and a positive duration")]
    InvalidGrid,
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// P(↑)(φ) = −(C/2)cos(φ + φ̃) + 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub contrast: f64,
    /// φ̃ in (−π, π].
    pub phase: f64,
    pub residual_rms: f64,
}

impl CosineFit {
    pub fn evaluate(&self, phi: f64) -> f64 {
        0.5 - 0.5 * self.contrast * (phi + self.phase).cos()
    }
}

/// Length of the shortest arc containing every phase.
fn circular_span(phases: &[f64]) -> f64 {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(|a, b| a.total_cmp(b));
    let largest_gap = wrapped
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(
            wrapped[0] + TAU - wrapped[wrapped.len() - 1],
        ))
        .fold(0.0, f64::max);
    TAU - largest_gap
}

fn count_distinct(phases: &[f64]) -> usize {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(|a, b| a.total_cmp(b));
    wrapped.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    wrapped.len()
}

/// Least-squares fit of the negative cosine through the linearisation
/// a·cosφ + b·sinφ + 1/2, with a = −(C/2)cos φ̃ and b = (C/2)sin φ̃.
pub fn fit_negative_cosine(
    phases: &[f64],
    estimates: &[f64],
    weights: Option<&[f64]>,
) -> Result<CosineFit> {
    if phases.len() != estimates.len() {
        return Err(AnalysisError::LengthMismatch(phases.len(), estimates.len()));
    }
    let unit = vec![1.0; phases.len()];
    let w = weights.unwrap_or(&unit);
    if w.len() != phases.len() {
        return Err(AnalysisError::LengthMismatch(phases.len(), w.len()));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
        return Err(AnalysisError::InvalidWeights);
    }
    let distinct = count_distinct(phases);
    if distinct < 5 {
        return Err(AnalysisError::TooFewPhases(distinct));
    }
    let span = circular_span(phases);
    if span < PI - 1e-12 {
        return Err(AnalysisError::NarrowSpan(span));
    }

    let (mut scc, mut scs, mut sss, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&phi, &y), &wi) in phases.iter().zip(estimates).zip(w) {
        let (s, c) = phi.sin_cos();
        let r = y - 0.5;
        scc += wi * c * c;
        scs += wi * c * s;
        sss += wi * s * s;
        syc += wi * r * c;
        sys += wi * r * s;
    }
    let det = scc * sss - scs * scs;
    if !(det.abs() > 1e-12 * (scc * sss).max(f64::MIN_POSITIVE)) {
        return Err(AnalysisError::Degenerate);
    }
    let a = (syc * sss - sys * scs) / det;
    let b = (sys * scc - syc * scs) / det;
    let contrast = 2.0 * a.hypot(b);
    let mut phase = b.atan2(-a);
    if phase <= -PI {
        phase += TAU;
    }
    let fit = CosineFit {
        contrast,
        phase,
        residual_rms: 0.0,
    };
    let total_w: f64 = w.iter().sum();
    let sq: f64 = phases
        .iter()
        .zip(estimates)
        .zip(w)
        .map(|((&phi, &y), &wi)| wi * (y - fit.evaluate(phi)).powi(2))
        .sum();
    Ok(CosineFit {
        residual_rms: (sq / total_w).sqrt(),
        ..fit
    })
}

/// ⟨δω̃⟩ = φ̃/T(Δ), taking the principal value of φ̃.
///
/// Rejects parameters whose predicted |⟨δω̃⟩|·T exceeds π, where the
/// principal value no longer identifies the accumulated phase.
pub fn average_shift_from_phase(fit: &CosineFit, p: &ModelParams) -> Result<f64> {
    let t = renorm::period(p)?;
    let expected = renorm::average_shift_vacuum(p)? * t;
    if expected.abs() > PI {
        return Err(AnalysisError::AmbiguousUnwrap { expected });
    }
    Ok(fit.phase / t)
}

/// Uniformly or non-uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(AnalysisError::LengthMismatch(times.len(), values.len()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AnalysisError::UnorderedTimes);
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// ω_L samples π/(T_{i+1} − T_i) at the midpoints of consecutive crossing clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarmorEstimate {
    pub times: Vec<f64>,
    pub omega_l: Vec<f64>,
    /// Cluster medians T_i.
    pub crossings: Vec<f64>,
}

/// Sign-change times by linear interpolation.
fn raw_crossings(signal: &TimeSeries) -> Vec<f64> {
    let (t, v) = (&signal.times, &signal.values);
    let mut out = Vec::new();
    for i in 0..v.len().saturating_sub(1) {
        if v[i] == 0.0 {
            out.push(t[i]);
        } else if v[i] * v[i + 1] < 0.0 {
            out.push(t[i] + (t[i + 1] - t[i]) * v[i] / (v[i] - v[i + 1]));
        }
    }
    if v.last() == Some(&0.0) {
        out.push(t[t.len() - 1]);
    }
    out
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Larmor frequency from zero crossings; crossings closer than a quarter of
/// 2π/ω_hint are merged into one at their median.
pub fn larmor_zero_crossings(signal: &TimeSeries, omega_hint: f64) -> Result<LarmorEstimate> {
    if !(omega_hint.is_finite() && omega_hint > 0.0) {
        return Err(AnalysisError::InvalidHint);
    }
    let period = TAU / omega_hint;
    let step = signal
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    if signal.len() < 2 || step > period / 20.0 {
        return Err(AnalysisError::Undersampled { step, period });
    }
    let radius = 0.25 * period;
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for t in raw_crossings(signal) {
        match clusters.last_mut() {
            Some(c) if t - c[c.len() - 1] < radius => c.push(t),
            _ => clusters.push(vec![t]),
        }
    }
    if clusters.len() < 2 {
        return Err(AnalysisError::TooFewCrossings(clusters.len()));
    }
    let crossings: Vec<f64> = clusters.iter().map(|c| median(c)).collect();
    let (times, omega_l) = crossings
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), PI / (w[1] - w[0])))
        .unzip();
    Ok(LarmorEstimate {
        times,
        omega_l,
        crossings,
    })
}

/// ⟨σx⟩, ⟨σy⟩, ⟨σz⟩ of two models from the same initial state, their
/// differences and the trace distance of the reduced spin states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_a: Model,
    pub model_b: Model,
    pub times: Vec<f64>,
    pub a: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
    pub difference: [Vec<f64>; 3],
    pub trace_distance: Vec<f64>,
}

impl ModelComparison {
    pub fn max_trace_distance(&self) -> f64 {
        self.trace_distance.iter().copied().fold(0.0, f64::max)
    }
}

/// JC (at the mapped ω, g) against the full trapped-ion model.
pub fn compare_models(p: &ModelParams, duration: f64, grid: usize) -> Result<ModelComparison> {
    compare_models_with(p, Model::Jc, Model::TiFull, duration, grid)
}

/// Lab-frame comparison of two models, both started from the π/2-prepared
/// spin and the thermal mode.
pub fn compare_models_with(
    p: &ModelParams,
    model_a: Model,
    model_b: Model,
    duration: f64,
    grid: usize,
) -> Result<ModelComparison> {
    if grid < 2 || !(duration.is_finite() && duration > 0.0) {
        return Err(AnalysisError::InvalidGrid);
    }
    let times: Vec<f64> = (0..grid)
        .map(|k| duration * k as f64 / (grid - 1) as f64)
        .collect();
    let prepared =
        Sequencer::new(p, Model::Jc)?.run(&initial_state(p)?, &[PulseSpec::half_pi(0.0)])?;
    let prop_a = Propagator::new(&model_a.hamiltonian(p)?)?;
    let prop_b = Propagator::new(&model_b.hamiltonian(p)?)?;
    let observables = [sigma_x(), sigma_y(), sigma_z()];

    let rows = times
        .par_iter()
        .map(|&t| -> Result<Row> {
            let reduce = |prop: &Propagator| -> Result<_> {
                let rho = prepared.evolve(&prop.at(t));
                check_cutoff(&rho, p.n_max)?;
                Ok(partial_trace_mode(&rho, p.n_max)?)
            };
            let (sa, sb) = (reduce(&prop_a)?, reduce(&prop_b)?);
            let mut ea = [0.0; 3];
            let mut eb = [0.0; 3];
            for (k, obs) in observables.iter().enumerate() {
                ea[k] = expectation(obs, &sa)?;
                eb[k] = expectation(obs, &sb)?;
            }
            Ok((ea, eb, trace_distance(&sa, &sb)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let column = |f: &dyn Fn(&Row) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let a = [0, 1, 2].map(|k| column(&|r| r.0[k]));
    let b = [0, 1, 2].map(|k| column(&|r| r.1[k]));
    let difference = [0, 1, 2].map(|k| column(&|r| r.0[k] - r.1[k]));
    Ok(ModelComparison {
        model_a,
        model_b,
        times,
        a,
        b,
        difference,
        trace_distance: column(&|r| r.2),
    })
}

/// Spin expectations of both models and their trace distance at one time.
type Row = ([f64; 3], [f64; 3], f64);
