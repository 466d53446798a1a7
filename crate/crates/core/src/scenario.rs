//! Scenario files and the protocol runner behind the command-line tool.
//!
//! A scenario is a TOML document with a versioned schema. Frequencies are
//! given in Hz and converted to rad/s once, when the parameters are resolved.
//!
//! ```toml
//! schema_version = 1
//! name = "vacuum-shift"
//! model = "jc"
//!
//! [params]
//! omega_hz = 1.24e6
//! g_hz = 0.078e6
//! detuning_over_g = 0.8
//! n_max = 20
//!
//! [protocol]
//! kind = "shift_profile"
//! periods = 2.0
//! points = 2001
//! ```

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, TimeSeries};
use crate::experiments::{self, ExperimentError, Observable};
use crate::hilbert::HilbertError;
use crate::models::{thermal_mode_state, Model, ModelError, ModelParams};
use crate::renorm::{self, RenormError};
use crate::tcl::{self, TclError};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("invalid scenario: `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("numerical check failed: {0}")]
    Numeric(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

impl ScenarioError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.to_owned(),
            message: message.into(),
        }
    }

    /// True for schema and parameter problems detected before or while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Parse(_) | Self::Invalid { .. })
    }

    /// True for flagged numerical invalidity (cutoff, singularity, unwrapping).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Self::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

fn hilbert_error(e: HilbertError) -> ScenarioError {
    match e {
        HilbertError::CutoffInadequate { .. } => ScenarioError::Numeric(e.to_string()),
        other => ScenarioError::Compute(other.to_string()),
    }
}

impl From<HilbertError> for ScenarioError {
    fn from(e: HilbertError) -> Self {
        hilbert_error(e)
    }
}

impl From<ModelError> for ScenarioError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Truncation { .. } => Self::Numeric(e.to_string()),
            ModelError::InvalidParameter { name, .. } => {
                Self::invalid(&format!("params.{name}"), e.to_string())
            }
            ModelError::MissingParameter(name) => {
                Self::invalid(&format!("params.{name}"), e.to_string())
            }
            ModelError::Hilbert(h) => hilbert_error(h),
        }
    }
}

impl From<RenormError> for ScenarioError {
    fn from(e: RenormError) -> Self {
        match e {
            RenormError::ZeroDetuning { .. } | RenormError::ZeroRabiFrequency => {
                Self::invalid("params.detuning", e.to_string())
            }
            RenormError::InvalidOccupation(_) => Self::invalid("params.nbar", e.to_string()),
            RenormError::SingularTime { .. } | RenormError::SeriesNotConverged { .. } => {
                Self::Numeric(e.to_string())
            }
        }
    }
}

impl From<ExperimentError> for ScenarioError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Hilbert(h) => h.into(),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Renorm(r) => r.into(),
            other => Self::Compute(other.to_string()),
        }
    }
}

impl From<AnalysisError> for ScenarioError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Hilbert(h) => h.into(),
            AnalysisError::Model(m) => m.into(),
            AnalysisError::Renorm(r) => r.into(),
            AnalysisError::Experiment(x) => x.into(),
            AnalysisError::AmbiguousUnwrap { .. } => Self::Numeric(e.to_string()),
            other => Self::Compute(other.to_string()),
        }
    }
}

impl From<TclError> for ScenarioError {
    fn from(e: TclError) -> Self {
        match e {
            TclError::Hilbert(h) => h.into(),
            TclError::Singular { .. } => Self::Numeric(e.to_string()),
            other => Self::Compute(other.to_string()),
        }
    }
}

/// Physical parameters in Hz. JC scenarios give `omega_hz` and `g_hz`;
/// trapped-ion scenarios give `omega_star_hz`, `eta` and `omega_rabi_hz`.
/// The mode frequency comes from exactly one of `omega_m_hz` and
/// `detuning_over_g`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_star_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_over_g: Option<f64>,
    #[serde(default)]
    pub nbar: f64,
    pub n_max: usize,
}

fn require(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| ScenarioError::invalid(key, "required for this model"))
}

fn forbid(value: Option<f64>, key: &str, model: Model) -> Result<()> {
    match value {
        Some(_) => Err(ScenarioError::invalid(
            key,
            format!("not used by model `{model}`"),
        )),
        None => Ok(()),
    }
}

impl ParamsSpec {
    /// Converts to rad/s and validates.
    pub fn resolve(&self, model: Model) -> Result<ModelParams> {
        let mut p = match model {
            Model::Jc => {
                forbid(self.omega_star_hz, "params.omega_star_hz", model)?;
                forbid(self.eta, "params.eta", model)?;
                forbid(self.omega_rabi_hz, "params.omega_rabi_hz", model)?;
                let omega = TAU * require(self.omega_hz, "params.omega_hz")?;
                let g = TAU * require(self.g_hz, "params.g_hz")?;
                ModelParams::jc(omega, omega, g, self.nbar, self.n_max)
            }
            Model::TiFull | Model::TiLd | Model::TiRsb => {
                forbid(self.omega_hz, "params.omega_hz", model)?;
                forbid(self.g_hz, "params.g_hz", model)?;
                let omega_star = TAU * require(self.omega_star_hz, "params.omega_star_hz")?;
                let eta = require(self.eta, "params.eta")?;
                let omega_rabi = TAU * require(self.omega_rabi_hz, "params.omega_rabi_hz")?;
                ModelParams::trapped_ion(
                    omega_star, omega_star, eta, omega_rabi, self.nbar, self.n_max,
                )
            }
        };
        let eff = model.effective_jc(&p)?;
        p.omega_m = match (self.omega_m_hz, self.detuning_over_g) {
            (Some(f), None) => TAU * f,
            (None, Some(r)) => eff.omega + r * eff.g,
            (Some(_), Some(_)) => {
                return Err(ScenarioError::invalid(
                    "params.omega_m_hz",
                    "give either omega_m_hz or detuning_over_g, not both",
                ))
            }
            (None, None) => {
                return Err(ScenarioError::invalid(
                    "params.omega_m_hz",
                    "one of omega_m_hz or detuning_over_g is required",
                ))
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Explicit values or an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

/// Frame in which time-resolved signals are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Co-rotating at the bare spin frequency ω.
    #[default]
    Bare,
    Lab,
}

fn default_steps() -> usize {
    2000
}

fn default_against() -> Model {
    Model::TiFull
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    /// δω̃(t) from the thermal series on [0, periods·T].
    ShiftProfile { periods: f64, points: usize },
    /// Echo Ramsey scans and cosine fits for each Δ/g.
    RamseyAverageSweep {
        detuning_over_g: GridSpec,
        phases: usize,
        #[serde(default)]
        reps: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// ⟨σ⟩(t) after π/2 and coupling for t ∈ [0, periods·T].
    TimeResolved {
        periods: f64,
        points: usize,
        observables: Vec<Observable>,
        #[serde(default)]
        reps: u64,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        frame: Frame,
        #[serde(default)]
        larmor: bool,
    },
    /// Scenario model against `against` over [0, periods·T].
    CompareModels {
        periods: f64,
        points: usize,
        #[serde(default = "default_against")]
        against: Model,
    },
    /// Shift from map reconstruction and the minimal-dissipation split.
    TclExtract {
        periods: f64,
        #[serde(default = "default_steps")]
        steps_per_period: usize,
        #[serde(default)]
        frame: Frame,
    },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::ShiftProfile { .. } => "shift_profile",
            Protocol::RamseyAverageSweep { .. } => "ramsey_average_sweep",
            Protocol::TimeResolved { .. } => "time_resolved",
            Protocol::CompareModels { .. } => "compare_models",
            Protocol::TclExtract { .. } => "tcl_extract",
        }
    }

    fn sampling(&self) -> Option<(u64, Option<u64>)> {
        match self {
            Protocol::RamseyAverageSweep { reps, seed, .. }
            | Protocol::TimeResolved { reps, seed, .. } => Some((*reps, *seed)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub stem: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            stem: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub model: Model,
    pub params: ParamsSpec,
    pub protocol: Protocol,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A scenario whose parameters have been converted and checked.
#[derive(Debug, Clone)]
pub struct Validated {
    pub scenario: Scenario,
    pub params: ModelParams,
    /// Effective JC parameters used by the closed-form comparisons.
    pub effective: ModelParams,
}

fn check_grid(key: &str, periods: f64, points: usize) -> Result<()> {
    if !(periods.is_finite() && periods > 0.0) {
        return Err(ScenarioError::invalid(key, "periods must be positive"));
    }
    if points < 2 {
        return Err(ScenarioError::invalid(key, "grid needs at least 2 points"));
    }
    Ok(())
}

fn require_detuning(eff: &ModelParams, formula: &str) -> Result<()> {
    if eff.detuning() == 0.0 {
        return Err(ScenarioError::invalid(
            "params.detuning",
            format!("Δ = 0 is not allowed: {formula} requires Δ ≠ 0"),
        ));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| ScenarioError::Parse(e.message().to_owned() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Applies a seed override to sampled protocols.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            match &mut self.protocol {
                Protocol::RamseyAverageSweep { seed, .. } | Protocol::TimeResolved { seed, .. } => {
                    *seed = Some(s)
                }
                _ => {}
            }
        }
        self
    }

    pub fn validate(&self) -> Result<Validated> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(ScenarioError::invalid("name", "must not be empty"));
        }
        if self.output.formats.is_empty() {
            return Err(ScenarioError::invalid(
                "output.formats",
                "must not be empty",
            ));
        }
        let params = self.params.resolve(self.model)?;
        let effective = self.model.effective_jc(&params)?;
        if let Some((reps, seed)) = self.protocol.sampling() {
            if reps > 0 && seed.is_none() {
                return Err(ScenarioError::invalid(
                    "protocol.seed",
                    "required when reps > 0",
                ));
            }
        }
        match &self.protocol {
            Protocol::ShiftProfile { periods, points } => {
                check_grid("protocol.points", *periods, *points)?;
                renorm::period(&effective)?;
            }
            Protocol::RamseyAverageSweep {
                detuning_over_g,
                phases,
                ..
            } => {
                let grid = detuning_over_g.values();
                if grid.is_empty() {
                    return Err(ScenarioError::invalid(
                        "protocol.detuning_over_g",
                        "grid is empty",
                    ));
                }
                if grid.iter().any(|d| *d == 0.0 || !d.is_finite()) {
                    return Err(ScenarioError::invalid(
                        "protocol.detuning_over_g",
                        "Δ = 0 is not allowed: the arm duration T(Δ) and the average shift −2g²sgn(Δ)/(|Δ| + Ω₁) require Δ ≠ 0",
                    ));
                }
                if *phases < 5 {
                    return Err(ScenarioError::invalid(
                        "protocol.phases",
                        "at least 5 analysis phases are needed",
                    ));
                }
                if effective.g == 0.0 {
                    return Err(ScenarioError::invalid("params", "Δ/g grids need g > 0"));
                }
            }
            Protocol::TimeResolved {
                periods,
                points,
                observables,
                frame,
                larmor,
                ..
            } => {
                check_grid("protocol.points", *periods, *points)?;
                if observables.is_empty() {
                    return Err(ScenarioError::invalid(
                        "protocol.observables",
                        "list is empty",
                    ));
                }
                if *larmor && *frame != Frame::Lab {
                    return Err(ScenarioError::invalid(
                        "protocol.larmor",
                        "the zero-crossing estimator needs frame = \"lab\"",
                    ));
                }
                renorm::period(&effective)?;
            }
            Protocol::CompareModels {
                periods, points, ..
            } => {
                check_grid("protocol.points", *periods, *points)?;
                renorm::period(&effective)?;
            }
            Protocol::TclExtract {
                periods,
                steps_per_period,
                ..
            } => {
                check_grid("protocol.steps_per_period", *periods, *steps_per_period)?;
                require_detuning(&effective, "the closed-form shift compared against")?;
            }
        }
        Ok(Validated {
            scenario: self.clone(),
            params,
            effective,
        })
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// One output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Null,
}

impl Cell {
    fn opt(x: Option<f64>) -> Self {
        x.map_or(Cell::Null, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x}"),
            Cell::Num(_) | Cell::Null => "null".to_owned(),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Null => serde_json::Value::Null,
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Appended to the output stem; empty for the main table.
    pub suffix: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(suffix: &str, columns: Vec<&'static str>) -> Self {
        Self {
            suffix: suffix.to_owned(),
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub tables: Vec<Table>,
    pub summary: String,
}

fn linspace(end: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| end * k as f64 / (points - 1) as f64)
        .collect()
}

/// Runs a validated scenario.
pub fn run(v: &Validated) -> Result<RunOutput> {
    let (tables, summary) = match &v.scenario.protocol {
        Protocol::ShiftProfile { periods, points } => shift_profile(v, *periods, *points)?,
        Protocol::RamseyAverageSweep {
            detuning_over_g,
            phases,
            reps,
            seed,
        } => ramsey_sweep(
            v,
            &detuning_over_g.values(),
            *phases,
            *reps,
            seed.unwrap_or(0),
        )?,
        Protocol::TimeResolved {
            periods,
            points,
            observables,
            reps,
            seed,
            frame,
            larmor,
        } => time_resolved(
            v,
            *periods,
            *points,
            observables,
            *reps,
            seed.unwrap_or(0),
            *frame,
            *larmor,
        )?,
        Protocol::CompareModels {
            periods,
            points,
            against,
        } => compare(v, *periods, *points, *against)?,
        Protocol::TclExtract {
            periods,
            steps_per_period,
            frame,
        } => tcl_extract(v, *periods, *steps_per_period, *frame)?,
    };
    Ok(RunOutput {
        scenario: v.scenario.clone(),
        params: v.params,
        tables,
        summary: format!("{}: {}", v.scenario.protocol.name(), summary),
    })
}

fn shift_profile(v: &Validated, periods: f64, points: usize) -> Result<(Vec<Table>, String)> {
    let p = &v.effective;
    let t_period = renorm::period(p)?;
    let times = linspace(periods * t_period, points);
    let profile = renorm::shift_profile(&times, p)?;
    let mut table = Table::new(
        "",
        vec![
            "t_s",
            "t_over_period",
            "shift_rad_s",
            "shift_over_omega",
            "vacuum_shift_rad_s",
        ],
    );
    for (t, shift) in profile.merged() {
        let vacuum = renorm::shift_vacuum(t, p).ok();
        table.push(vec![
            Cell::Num(t),
            Cell::Num(t / t_period),
            Cell::opt(shift),
            Cell::opt(shift.map(|s| s / p.omega)),
            Cell::opt(vacuum),
        ]);
    }
    let (t_min, s_min) = profile
        .times
        .iter()
        .zip(&profile.shift)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, s)| (*t, *s))
        .unwrap_or((f64::NAN, f64::NAN));
    let summary = format!(
        "{} samples, {} singular, min shift/ω = {:.4} at t/T = {:.3}",
        points,
        profile.singular_times.len(),
        s_min / p.omega,
        t_min / t_period
    );
    Ok((vec![table], summary))
}

struct SweepPoint {
    detuning_over_g: f64,
    params: ModelParams,
    probabilities: Vec<f64>,
    records: Vec<Option<experiments::MeasurementRecord>>,
    fit: analysis::CosineFit,
    shift: f64,
}

fn ramsey_sweep(
    v: &Validated,
    grid: &[f64],
    n_phases: usize,
    reps: u64,
    seed: u64,
) -> Result<(Vec<Table>, String)> {
    let model = v.scenario.model;
    let phases: Vec<f64> = (0..n_phases)
        .map(|k| TAU * k as f64 / n_phases as f64)
        .collect();
    let g = v.effective.g;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(d_idx, &dg)| -> Result<SweepPoint> {
            let params = v.params.with_detuning(dg * g);
            let probabilities = experiments::ramsey_time_average_exact(&params, model, &phases)?;
            let records = probabilities
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(i, (&pu, &phi))| {
                    (reps > 0)
                        .then(|| {
                            let stream = ((d_idx as u64) << 32) | i as u64;
                            experiments::sample_projective(2.0 * pu - 1.0, reps, seed, stream, phi)
                        })
                        .transpose()
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let estimates: Vec<f64> = if reps > 0 {
                records.iter().flatten().map(|r| r.up_fraction()).collect()
            } else {
                probabilities.clone()
            };
            let fit = analysis::fit_negative_cosine(&phases, &estimates, None)?;
            let eff = model.effective_jc(&params)?;
            let shift = analysis::average_shift_from_phase(&fit, &eff)?;
            Ok(SweepPoint {
                detuning_over_g: dg,
                params,
                probabilities,
                records,
                fit,
                shift,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary_table = Table::new(
        "",
        vec![
            "detuning_over_g",
            "detuning_rad_s",
            "period_s",
            "fit_phase_rad",
            "fit_contrast",
            "fit_residual_rms",
            "average_shift_rad_s",
            "closed_form_average_shift_rad_s",
            "lamb_shift_rad_s",
        ],
    );
    let mut record_table = Table::new(
        "_records",
        vec![
            "detuning_over_g",
            "phase_rad",
            "p_up_exact",
            "repetitions",
            "up_counts",
            "p_up_estimate",
        ],
    );
    let mut worst: f64 = 0.0;
    for sp in &points {
        let eff = model.effective_jc(&sp.params)?;
        let closed = renorm::average_shift_vacuum(&eff)?;
        worst = worst.max(((sp.shift - closed) / closed).abs());
        summary_table.push(vec![
            Cell::Num(sp.detuning_over_g),
            Cell::Num(eff.detuning()),
            Cell::Num(renorm::period(&eff)?),
            Cell::Num(sp.fit.phase),
            Cell::Num(sp.fit.contrast),
            Cell::Num(sp.fit.residual_rms),
            Cell::Num(sp.shift),
            Cell::Num(closed),
            Cell::Num(renorm::lamb_shift(&eff)?),
        ]);
        for ((phi, pu), rec) in phases.iter().zip(&sp.probabilities).zip(&sp.records) {
            let (r, u, est) = match rec {
                Some(r) => (
                    Cell::Int(r.repetitions),
                    Cell::Int(r.up_counts),
                    Cell::Num(r.up_fraction()),
                ),
                None => (Cell::Int(0), Cell::Null, Cell::Null),
            };
            record_table.push(vec![
                Cell::Num(sp.detuning_over_g),
                Cell::Num(*phi),
                Cell::Num(*pu),
                r,
                u,
                est,
            ]);
        }
    }
    let summary = format!(
        "{} detunings × {} phases, reps {}, max |relative deviation| from the vacuum closed form {:.3e}",
        grid.len(),
        n_phases,
        reps,
        worst
    );
    Ok((vec![summary_table, record_table], summary))
}

#[allow(clippy::too_many_arguments)]
fn time_resolved(
    v: &Validated,
    periods: f64,
    points: usize,
    observables: &[Observable],
    reps: u64,
    seed: u64,
    frame: Frame,
    larmor: bool,
) -> Result<(Vec<Table>, String)> {
    let p = &v.params;
    let eff = &v.effective;
    let t_period = renorm::period(eff)?;
    let times = linspace(periods * t_period, points);
    let frame_omega = match frame {
        Frame::Bare => eff.omega,
        Frame::Lab => 0.0,
    };
    let exact: Vec<Vec<f64>> = observables
        .iter()
        .map(|&o| {
            experiments::ramsey_time_resolved_exact(p, v.scenario.model, &times, o, frame_omega)
        })
        .collect::<std::result::Result<_, _>>()?;
    let sampled = if reps > 0 {
        Some(experiments::ramsey_time_resolved(
            p,
            v.scenario.model,
            &times,
            observables,
            frame_omega,
            reps,
            seed,
        )?)
    } else {
        None
    };

    let mut table = Table::new(
        "",
        vec![
            "observable",
            "t_s",
            "t_over_period",
            "exact",
            "repetitions",
            "up_counts",
            "estimate",
        ],
    );
    let mut signals = Vec::new();
    for (k, obs) in observables.iter().enumerate() {
        let mut signal = Vec::with_capacity(points);
        for (i, &t) in times.iter().enumerate() {
            let rec = sampled.as_ref().map(|s| s[k].1[i]);
            signal.push(rec.map_or(exact[k][i], |r| r.estimate));
            table.push(vec![
                Cell::Text(obs.name().to_owned()),
                Cell::Num(t),
                Cell::Num(t / t_period),
                Cell::Num(exact[k][i]),
                Cell::Int(rec.map_or(0, |r| r.repetitions)),
                rec.map_or(Cell::Null, |r| Cell::Int(r.up_counts)),
                rec.map_or(Cell::Null, |r| Cell::Num(r.estimate)),
            ]);
        }
        signals.push(signal);
    }
    let mut tables = vec![table];
    let mut summary = format!(
        "{} observables × {} times, reps {}",
        observables.len(),
        points,
        reps
    );
    if larmor {
        let mut lt = Table::new(
            "_larmor",
            vec![
                "observable",
                "t_mid_s",
                "omega_l_rad_s",
                "shift_over_omega",
                "closed_form_shift_over_omega",
            ],
        );
        let mut peak: f64 = 0.0;
        for (obs, signal) in observables.iter().zip(signals) {
            if *obs == Observable::SigmaZ {
                continue;
            }
            let series = TimeSeries::new(times.clone(), signal).map_err(ScenarioError::from)?;
            let est = analysis::larmor_zero_crossings(&series, eff.omega)?;
            for (t, w) in est.times.iter().zip(&est.omega_l) {
                let rel = (w - eff.omega) / eff.omega;
                peak = peak.max(rel.abs());
                let closed = renorm::shift_thermal(*t, eff).ok().map(|s| s / eff.omega);
                lt.push(vec![
                    Cell::Text(obs.name().to_owned()),
                    Cell::Num(*t),
                    Cell::Num(*w),
                    Cell::Num(rel),
                    Cell::opt(closed),
                ]);
            }
        }
        let _ = write!(summary, ", max |δω_L|/ω = {peak:.4}");
        tables.push(lt);
    }
    Ok((tables, summary))
}

fn compare(
    v: &Validated,
    periods: f64,
    points: usize,
    against: Model,
) -> Result<(Vec<Table>, String)> {
    let t_period = renorm::period(&v.effective)?;
    let cmp = analysis::compare_models_with(
        &v.params,
        v.scenario.model,
        against,
        periods * t_period,
        points,
    )?;
    let mut table = Table::new(
        "",
        vec![
            "t_s",
            "a_sigma_x",
            "a_sigma_y",
            "a_sigma_z",
            "b_sigma_x",
            "b_sigma_y",
            "b_sigma_z",
            "diff_sigma_x",
            "diff_sigma_y",
            "diff_sigma_z",
            "trace_distance",
        ],
    );
    for (i, t) in cmp.times.iter().enumerate() {
        let mut row = vec![Cell::Num(*t)];
        for block in [&cmp.a, &cmp.b, &cmp.difference] {
            row.extend(block.iter().map(|col| Cell::Num(col[i])));
        }
        row.push(Cell::Num(cmp.trace_distance[i]));
        table.push(row);
    }
    let summary = format!(
        "{} vs {} over {} samples, max trace distance {:.3e}",
        cmp.model_a,
        cmp.model_b,
        points,
        cmp.max_trace_distance()
    );
    Ok((vec![table], summary))
}

fn tcl_extract(
    v: &Validated,
    periods: f64,
    steps: usize,
    frame: Frame,
) -> Result<(Vec<Table>, String)> {
    let eff = &v.effective;
    let t_period = renorm::period(eff)?;
    let dt = t_period / steps as f64;
    let len = (periods * steps as f64).round() as usize + 1;
    let frame_omega = match frame {
        Frame::Bare => eff.omega,
        Frame::Lab => 0.0,
    };
    let h = v.scenario.model.hamiltonian(&v.params)?;
    let rho_e = thermal_mode_state(&v.params)?;
    let series = tcl::MapSeries::build(&h, &rho_e, 0.0, dt, len, frame_omega)?;
    let mut table = Table::new(
        "",
        vec![
            "t_s",
            "omega_tilde_rad_s",
            "shift_rad_s",
            "closed_form_shift_rad_s",
            "rate_1",
            "rate_2",
            "rate_3",
        ],
    );
    let mut singular = 0;
    let mut worst: f64 = 0.0;
    for i in 0..series.len() {
        let t = series.time(i);
        let closed = renorm::shift_thermal(t, eff).ok();
        match tcl::frame_generator(&series, i) {
            Ok(g) => {
                let split = tcl::minimal_dissipation_split(&g);
                let omega_tilde = split.sigma_z_frequency() + frame_omega;
                let shift = omega_tilde - eff.omega;
                if let Some(c) = closed.filter(|c| c.abs() > 1e-9 * eff.g) {
                    worst = worst.max(((shift - c) / c).abs());
                }
                let mut row = vec![
                    Cell::Num(t),
                    Cell::Num(omega_tilde),
                    Cell::Num(shift),
                    Cell::opt(closed),
                ];
                row.extend(split.rates.iter().map(|r| Cell::Num(*r)));
                table.push(row);
            }
            Err(TclError::Singular { .. }) => {
                singular += 1;
                table.push(vec![
                    Cell::Num(t),
                    Cell::Null,
                    Cell::Null,
                    Cell::opt(closed),
                    Cell::Null,
                    Cell::Null,
                    Cell::Null,
                ]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let summary = format!(
        "{} samples, {} singular, max relative deviation from the series {:.3e}",
        len, singular, worst
    );
    Ok((vec![table], summary))
}

/// JSON metadata shared by every output file.
fn metadata(out: &RunOutput) -> serde_json::Value {
    json!({
        "code_version": CODE_VERSION,
        "schema_version": SCHEMA_VERSION,
        "scenario": out.scenario,
        "resolved_params_rad_s": out.params,
    })
}

/// CSV text; the first line is a `#` comment carrying the metadata.
pub fn table_csv(out: &RunOutput, table: &Table) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))
            .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("# {}\n{}", metadata(out), body)
}

/// JSON mirror of all tables with metadata.
pub fn output_json(out: &RunOutput) -> String {
    let tables: Vec<_> = out
        .tables
        .iter()
        .map(|t| {
            json!({
                "suffix": t.suffix,
                "columns": t.columns,
                "rows": t.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut doc = metadata(out);
    doc["summary"] = json!(out.summary);
    doc["tables"] = json!(tables);
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

/// Writes the requested formats into `dir` and returns the paths written.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path, e: std::io::Error| ScenarioError::Write {
        path: path.to_owned(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let stem = out
        .scenario
        .output
        .stem
        .clone()
        .unwrap_or_else(|| out.scenario.name.clone());
    let mut written = Vec::new();
    for format in &out.scenario.output.formats {
        match format {
            Format::Csv => {
                for table in &out.tables {
                    let path = dir.join(format!("{stem}{}.csv", table.suffix));
                    fs::write(&path, table_csv(out, table)).map_err(|e| io(&path, e))?;
                    written.push(path);
                }
            }
            Format::Json => {
                let path = dir.join(format!("{stem}.json"));
                fs::write(&path, output_json(out)).map_err(|e| io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Default output directory: `output.dir`, else the current directory.
pub fn output_dir(scenario: &Scenario, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_owned)
        .or_else(|| scenario.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}
