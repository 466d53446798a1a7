//! Closed-form renormalisation quantities of the Jaynes-Cummings model.
//!
//! The reduced spin coherence evolves as ρ_↑↓(t) = e^{−iωt} γ(t) ρ_↑↓(0), where
//! γ(t) is a thermal average of products of the manifold amplitudes c(n, t).
//! The emergent-Hamiltonian shift of the transition frequency is
//! δω̃(t) = −Im{γ̇(t)/γ(t)}; in the vacuum it has a closed form, periodic in
//! T(Δ) = 2π/Ω₁ with Ω₁ = √(Δ² + 4g²).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelParams;

/// |γ(t)| at or below this value marks a singular (decoherence) time.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;
/// Relative size of the next term at which the γ(t) series stops.
pub const SERIES_TOL: f64 = 1e-14;
/// Hard cap on the number of γ(t) series terms.
pub const SERIES_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenormError {
    #[error("Δ = 0 is not allowed in {formula}")]
    ZeroDetuning { formula: &'static str },
    #[error("Ω₁ = √(Δ² + 4g²) vanishes; the period T(Δ) is undefined")]
    ZeroRabiFrequency,
    #[error("singular time t = {t:e} s: |γ(t)| = {magnitude:e}")]
    SingularTime { t: f64, magnitude: f64 },
    #[error("γ(t) series did not converge within {terms} terms at t = {t:e} s")]
    SeriesNotConverged { t: f64, terms: usize },
    #[error("mean occupation must be finite and >= 0, got {0}")]
    InvalidOccupation(f64),
}

pub type Result<T> = std::result::Result<T, RenormError>;

/// Ω_n for one excitation manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiLadder {
    pub n: usize,
    pub omega_n: f64,
}

impl RabiLadder {
    /// Ω_n = √(Δ² + 4g²n).
    pub fn new(n: usize, p: &ModelParams) -> Self {
        let delta = p.detuning();
        Self {
            n,
            omega_n: (delta * delta + 4.0 * p.g * p.g * n as f64).sqrt(),
        }
    }
}

/// sin(Ωt/2)/Ω with its Ω → 0 limit t/2.
fn sin_over(omega: f64, t: f64) -> f64 {
    let x = 0.5 * omega * t;
    if x.abs() < 1e-8 {
        0.5 * t * (1.0 - x * x / 6.0)
    } else {
        (0.5 * omega * t).sin() / omega
    }
}

/// c(n, t) = e^{−iΔt/2}[cos(Ω_n t/2) + iΔ sin(Ω_n t/2)/Ω_n].
pub fn coeff_c(n: usize, t: f64, p: &ModelParams) -> Complex64 {
    if n == 0 {
        // Ω₀ = |Δ| makes the bracket e^{iΔt/2}.
        return Complex64::new(1.0, 0.0);
    }
    let delta = p.detuning();
    let omega_n = RabiLadder::new(n, p).omega_n;
    let bracket = Complex64::new((0.5 * omega_n * t).cos(), delta * sin_over(omega_n, t));
    Complex64::from_polar(1.0, -0.5 * delta * t) * bracket
}

/// ∂c(n, t)/∂t.
pub fn coeff_c_derivative(n: usize, t: f64, p: &ModelParams) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let delta = p.detuning();
    let omega_n = RabiLadder::new(n, p).omega_n;
    let half = 0.5 * omega_n * t;
    let c = coeff_c(n, t, p);
    let inner = Complex64::new(-0.5 * omega_n * half.sin(), 0.5 * delta * half.cos());
    Complex64::new(0.0, -0.5 * delta) * c + Complex64::from_polar(1.0, -0.5 * delta * t) * inner
}

/// γ(t), γ̇(t) and the number of series terms used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSeries {
    pub value: Complex64,
    pub derivative: Complex64,
    pub terms: usize,
}

/// Sums γ(t) = (1 − e^{−βω_m}) Σ_n c(n,t) c(n+1,t) e^{−βω_m n} and its
/// term-wise derivative.
///
/// Stops when the magnitude bound of the next term drops below
/// [`SERIES_TOL`] times the partial sum (floored at [`SINGULAR_THRESHOLD`],
/// below which the shift is undefined anyway).
pub fn gamma_series(t: f64, p: &ModelParams) -> Result<GammaSeries> {
    if !(p.nbar.is_finite() && p.nbar >= 0.0) {
        return Err(RenormError::InvalidOccupation(p.nbar));
    }
    let r = p.boltzmann_ratio();
    let delta_abs = p.detuning().abs();
    let omega_1 = RabiLadder::new(1, p).omega_n;

    let mut sum = Complex64::new(0.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0);
    let mut weight = 1.0;
    let mut c_n = coeff_c(0, t, p);
    let mut dc_n = coeff_c_derivative(0, t, p);
    for n in 0..SERIES_CAP {
        let c_next = coeff_c(n + 1, t, p);
        let dc_next = coeff_c_derivative(n + 1, t, p);
        sum += c_n * c_next * weight;
        dsum += (dc_n * c_next + c_n * dc_next) * weight;

        weight *= r;
        // |c| ≤ 1 and |ċ(n)| ≤ |Δ| + Ω_n/2 bound the next term.
        let omega_far = RabiLadder::new(n + 2, p).omega_n;
        let bound = weight;
        let dbound = weight * (2.0 * delta_abs + omega_far);
        let scale = sum.norm().max(SINGULAR_THRESHOLD);
        let dscale = dsum.norm().max(omega_1 * scale);
        if bound <= SERIES_TOL * scale && dbound <= SERIES_TOL * dscale {
            let norm = 1.0 - r;
            return Ok(GammaSeries {
                value: sum * norm,
                derivative: dsum * norm,
                terms: n + 1,
            });
        }
        c_n = c_next;
        dc_n = dc_next;
    }
    Err(RenormError::SeriesNotConverged {
        t,
        terms: SERIES_CAP,
    })
}

pub fn gamma_thermal(t: f64, p: &ModelParams) -> Result<Complex64> {
    gamma_series(t, p).map(|s| s.value)
}

pub fn gamma_thermal_derivative(t: f64, p: &ModelParams) -> Result<Complex64> {
    gamma_series(t, p).map(|s| s.derivative)
}

/// δω̃(t) = −Im{γ̇/γ} for a thermal initial mode state.
pub fn shift_thermal(t: f64, p: &ModelParams) -> Result<f64> {
    let s = gamma_series(t, p)?;
    let magnitude = s.value.norm();
    if magnitude <= SINGULAR_THRESHOLD {
        return Err(RenormError::SingularTime { t, magnitude });
    }
    Ok(-(s.derivative / s.value).im)
}

fn require_detuning(p: &ModelParams, formula: &'static str) -> Result<f64> {
    let delta = p.detuning();
    if delta == 0.0 {
        return Err(RenormError::ZeroDetuning { formula });
    }
    Ok(delta)
}

/// Vacuum shift −(2g²/Δ)/(1 + (Ω₁²/Δ²)cot²(Ω₁t/2)), written without the cotangent
/// so that the zeros of sin(Ω₁t/2) give the limit value 0.
pub fn shift_vacuum(t: f64, p: &ModelParams) -> Result<f64> {
    let delta = require_detuning(p, "the vacuum shift −(2g²/Δ)/(1 + (Ω₁²/Δ²)cot²(Ω₁t/2))")?;
    let omega_1 = RabiLadder::new(1, p).omega_n;
    let (s, c) = (0.5 * omega_1 * t).sin_cos();
    let s2 = s * s;
    Ok(-2.0 * p.g * p.g * delta * s2 / (delta * delta * s2 + omega_1 * omega_1 * c * c))
}

/// Period average of the vacuum shift, −2g² sgn(Δ)/(|Δ| + Ω₁).
pub fn average_shift_vacuum(p: &ModelParams) -> Result<f64> {
    let delta = require_detuning(p, "the average shift −2g²sgn(Δ)/(|Δ| + Ω₁)")?;
    let omega_1 = RabiLadder::new(1, p).omega_n;
    Ok(-2.0 * p.g * p.g * delta.signum() / (delta.abs() + omega_1))
}

/// Dispersive-limit Lamb shift −g²/Δ.
pub fn lamb_shift(p: &ModelParams) -> Result<f64> {
    let delta = require_detuning(p, "the Lamb shift −g²/Δ")?;
    Ok(-p.g * p.g / delta)
}

/// One-excitation dressed energies E_± = (ω_m + ω ± Ω₁)/2, measured from the
/// uncoupled ground state |↓,0⟩.
pub fn dressed_energies(p: &ModelParams) -> (f64, f64) {
    let omega_1 = RabiLadder::new(1, p).omega_n;
    let base = p.omega_m + p.omega;
    ((base + omega_1) / 2.0, (base - omega_1) / 2.0)
}

/// T(Δ) = 2π/Ω₁.
pub fn period(p: &ModelParams) -> Result<f64> {
    let omega_1 = RabiLadder::new(1, p).omega_n;
    if omega_1 == 0.0 {
        return Err(RenormError::ZeroRabiFrequency);
    }
    Ok(2.0 * PI / omega_1)
}

/// Sampled δω̃(t); singular samples are kept apart from the finite ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftProfile {
    pub times: Vec<f64>,
    pub shift: Vec<f64>,
    pub singular_times: Vec<f64>,
    pub params: ModelParams,
}

impl ShiftProfile {
    pub fn new(params: ModelParams) -> Self {
        Self {
            times: Vec::new(),
            shift: Vec::new(),
            singular_times: Vec::new(),
            params,
        }
    }

    pub fn push(&mut self, t: f64, shift: f64) {
        debug_assert!(shift.is_finite());
        self.times.push(t);
        self.shift.push(shift);
    }

    pub fn push_singular(&mut self, t: f64) {
        self.singular_times.push(t);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// ω̃(t) = ω + δω̃(t).
    pub fn renormalised_frequency(&self) -> Vec<f64> {
        self.shift.iter().map(|s| self.params.omega + s).collect()
    }

    /// All sample times in order, `None` marking singular samples.
    pub fn merged(&self) -> Vec<(f64, Option<f64>)> {
        let mut rows: Vec<(f64, Option<f64>)> = self
            .times
            .iter()
            .zip(&self.shift)
            .map(|(&t, &s)| (t, Some(s)))
            .chain(self.singular_times.iter().map(|&t| (t, None)))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }
}

/// Thermal shift sampled on a time grid.
pub fn shift_profile(times: &[f64], p: &ModelParams) -> Result<ShiftProfile> {
    let mut profile = ShiftProfile::new(*p);
    for &t in times {
        match shift_thermal(t, p) {
            Ok(s) => profile.push(t, s),
            Err(RenormError::SingularTime { .. }) => profile.push_singular(t),
            Err(e) => return Err(e),
        }
    }
    Ok(profile)
}
