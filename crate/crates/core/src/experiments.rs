//! Virtual Ramsey experiments: the spin-echo time-averaged sequence, the
//! time-resolved coupling sequence, and projective measurement sampling.
//!
//! Pulses are instantaneous rotations exp(−i(θ/2)(σx cosφ + σy sinφ)) on the
//! spin. The preparation π/2 pulse has φ = 0 and takes |↓⟩ to a state with
//! ⟨σy⟩ = +1. A final π/2 pulse at phase φ maps cosφ·⟨σy⟩ − sinφ·⟨σx⟩ onto
//! ⟨σz⟩, so σy is read out at φ = 0 and σx at φ = 3π/2.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{
    check_cutoff, expectation, identity, partial_trace_mode, sigma_x, sigma_y, sigma_z, tensor,
    DensityMatrix, HilbertError, OperatorMatrix, Propagator, PureState, SpinState,
};
use crate::models::{thermal_mode_state, Model, ModelError, ModelParams};
use crate::renorm::{self, RenormError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error("pulse duration must be finite and >= 0, got {0}")]
    NegativeDuration(f64),
    #[error("expectation {0} lies outside [-1, 1]")]
    InvalidExpectation(f64),
    #[error("repetitions must be positive")]
    NoRepetitions,
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Expectations this far outside [−1, 1] are clamped rather than rejected.
const EXPECTATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    HalfPi,
    Pi,
    Coupling,
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Rotation-axis phase in [0, 2π); unused for coupling and wait.
    pub phase: f64,
    /// Seconds; zero for spin pulses.
    pub duration: f64,
}

impl PulseSpec {
    pub fn half_pi(phase: f64) -> Self {
        Self {
            kind: PulseKind::HalfPi,
            phase: phase.rem_euclid(2.0 * PI),
            duration: 0.0,
        }
    }

    pub fn pi(phase: f64) -> Self {
        Self {
            kind: PulseKind::Pi,
            phase: phase.rem_euclid(2.0 * PI),
            duration: 0.0,
        }
    }

    pub fn coupling(duration: f64) -> Result<Self> {
        Self::timed(PulseKind::Coupling, duration)
    }

    pub fn wait(duration: f64) -> Result<Self> {
        Self::timed(PulseKind::Wait, duration)
    }

    fn timed(kind: PulseKind, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(ExperimentError::NegativeDuration(duration));
        }
        Ok(Self {
            kind,
            phase: 0.0,
            duration,
        })
    }
}

/// Spin observables that can be read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    SigmaX,
    SigmaY,
    SigmaZ,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::SigmaX, Observable::SigmaY, Observable::SigmaZ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::SigmaX => "sigma_x",
            Observable::SigmaY => "sigma_y",
            Observable::SigmaZ => "sigma_z",
        }
    }

    /// Analysis pulse mapping this observable onto σz, if any.
    pub fn analysis_pulse(self) -> Option<PulseSpec> {
        match self {
            Observable::SigmaX => Some(PulseSpec::half_pi(3.0 * FRAC_PI_2)),
            Observable::SigmaY => Some(PulseSpec::half_pi(0.0)),
            Observable::SigmaZ => None,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

/// Outcome of `repetitions` projective σz measurements at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Analysis phase (rad) or coupling duration (s).
    pub setting: f64,
    pub repetitions: u64,
    pub up_counts: u64,
    /// 2·up_counts/repetitions − 1.
    pub estimate: f64,
    pub seed: u64,
}

impl MeasurementRecord {
    /// Fraction of |↑⟩ outcomes.
    pub fn up_fraction(&self) -> f64 {
        self.up_counts as f64 / self.repetitions as f64
    }
}

/// Draws `reps` outcomes with P(↑) = (1 + expectation)/2 from the ChaCha8
/// stream selected by (`seed`, `stream`).
pub fn sample_projective(
    expectation: f64,
    reps: u64,
    seed: u64,
    stream: u64,
    setting: f64,
) -> Result<MeasurementRecord> {
    if reps == 0 {
        return Err(ExperimentError::NoRepetitions);
    }
    if !(expectation.abs() <= 1.0 + EXPECTATION_SLACK) {
        return Err(ExperimentError::InvalidExpectation(expectation));
    }
    let p_up = (0.5 * (1.0 + expectation)).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let up_counts = (0..reps)
        .filter(|_| ((rng.next_u64() >> 11) as f64) * f64::EPSILON / 2.0 < p_up)
        .count() as u64;
    Ok(MeasurementRecord {
        setting,
        repetitions: reps,
        up_counts,
        estimate: 2.0 * up_counts as f64 / reps as f64 - 1.0,
        seed,
    })
}

/// exp(−i(θ/2)(σx cosφ + σy sinφ)) on the spin.
pub fn spin_rotation(theta: f64, phase: f64) -> OperatorMatrix {
    let axis =
        sigma_x() * Complex64::new(phase.cos(), 0.0) + sigma_y() * Complex64::new(phase.sin(), 0.0);
    identity(2) * Complex64::new((0.5 * theta).cos(), 0.0)
        - axis * Complex64::new(0.0, (0.5 * theta).sin())
}

fn pulse_angle(kind: PulseKind) -> Option<f64> {
    match kind {
        PulseKind::HalfPi => Some(FRAC_PI_2),
        PulseKind::Pi => Some(PI),
        PulseKind::Coupling | PulseKind::Wait => None,
    }
}

/// Applies an instantaneous spin pulse to a spin or composite state.
///
/// Coupling and wait specs are not rotations and leave the state unchanged.
pub fn apply_spin_pulse(state: &DensityMatrix, pulse: &PulseSpec) -> DensityMatrix {
    let Some(theta) = pulse_angle(pulse.kind) else {
        return state.clone();
    };
    let r = spin_rotation(theta, pulse.phase);
    let u = if state.dim() == 2 {
        r
    } else {
        tensor(&r, &identity(state.dim() / 2))
    };
    state.evolve(&u)
}

/// Exact evolution of spin + mode through a pulse sequence.
pub struct Sequencer {
    n_max: usize,
    coupled: Propagator,
    free: Propagator,
}

impl Sequencer {
    pub fn new(p: &ModelParams, model: Model) -> Result<Self> {
        Ok(Self {
            n_max: p.n_max,
            coupled: Propagator::new(&model.hamiltonian(p)?)?,
            free: Propagator::new(&model.free_hamiltonian(p)?)?,
        })
    }

    /// Runs `pulses` from `state`, checking the Fock cutoff after every step.
    pub fn run(&self, state: &DensityMatrix, pulses: &[PulseSpec]) -> Result<DensityMatrix> {
        let mut rho = state.clone();
        check_cutoff(&rho, self.n_max)?;
        for pulse in pulses {
            rho = match pulse.kind {
                PulseKind::HalfPi | PulseKind::Pi => apply_spin_pulse(&rho, pulse),
                PulseKind::Coupling => rho.evolve(&self.coupled.at(pulse.duration)),
                PulseKind::Wait => rho.evolve(&self.free.at(pulse.duration)),
            };
            check_cutoff(&rho, self.n_max)?;
        }
        Ok(rho)
    }
}

/// |↓⟩ ⊗ thermal mode.
pub fn initial_state(p: &ModelParams) -> Result<DensityMatrix> {
    let down = PureState::basis(2, 1).to_density();
    Ok(down.product(&thermal_mode_state(p)?))
}

/// Durations of the two echo arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoTiming {
    pub arm: f64,
}

impl EchoTiming {
    /// Both arms last T(Δ) of the effective Jaynes-Cummings parameters.
    pub fn for_model(p: &ModelParams, model: Model) -> Result<Self> {
        let eff = model.effective_jc(p)?;
        if eff.detuning() == 0.0 {
            return Err(RenormError::ZeroDetuning {
                formula: "the echo arm duration T(Δ)",
            }
            .into());
        }
        Ok(Self {
            arm: renorm::period(&eff)?,
        })
    }

    pub fn total(&self) -> f64 {
        2.0 * self.arm
    }
}

/// π/2 → coupling arm → π → wait arm (or the arms swapped), without the
/// analysis pulse.
pub fn echo_sequence(timing: EchoTiming, coupling_first: bool) -> Result<Vec<PulseSpec>> {
    let couple = PulseSpec::coupling(timing.arm)?;
    let wait = PulseSpec::wait(timing.arm)?;
    let (first, second) = if coupling_first {
        (couple, wait)
    } else {
        (wait, couple)
    };
    Ok(vec![
        PulseSpec::half_pi(0.0),
        first,
        PulseSpec::pi(0.0),
        second,
    ])
}

/// Total duration of a sequence.
pub fn sequence_duration(pulses: &[PulseSpec]) -> f64 {
    pulses.iter().map(|p| p.duration).sum()
}

/// P(↑) after a final π/2 pulse at each analysis phase.
fn analysis_scan(spin: &SpinState, phases: &[f64]) -> Result<Vec<f64>> {
    phases
        .iter()
        .map(|&phi| {
            let rotated = apply_spin_pulse(spin, &PulseSpec::half_pi(phi));
            Ok(0.5 * (1.0 + expectation(&sigma_z(), &rotated)?))
        })
        .collect()
}

/// Reduced spin state at the end of the echo sequence, before analysis.
pub fn echo_final_spin(p: &ModelParams, model: Model, pulses: &[PulseSpec]) -> Result<SpinState> {
    let seq = Sequencer::new(p, model)?;
    let rho = seq.run(&initial_state(p)?, pulses)?;
    Ok(partial_trace_mode(&rho, p.n_max)?)
}

/// Noise-free P(↑)(φ) of the echo Ramsey sequence.
pub fn ramsey_time_average_exact(
    p: &ModelParams,
    model: Model,
    phases: &[f64],
) -> Result<Vec<f64>> {
    let timing = EchoTiming::for_model(p, model)?;
    let spin = echo_final_spin(p, model, &echo_sequence(timing, true)?)?;
    analysis_scan(&spin, phases)
}

/// Sampled echo Ramsey scan: one record per analysis phase.
pub fn ramsey_time_average(
    p: &ModelParams,
    model: Model,
    phases: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    let probabilities = ramsey_time_average_exact(p, model, phases)?;
    probabilities
        .iter()
        .zip(phases)
        .enumerate()
        .map(|(i, (&pu, &phi))| sample_projective(2.0 * pu - 1.0, reps, seed, i as u64, phi))
        .collect()
}

/// Raw integral ∫₀^T ω̃ dt = (ω + ⟨δω̃⟩)·T over one coupling arm, vacuum
/// closed form. The echo removes the ω·T part from the measured phase.
pub fn raw_phase_integral(p: &ModelParams) -> Result<f64> {
    let t = renorm::period(p)?;
    Ok((p.omega + renorm::average_shift_vacuum(p)?) * t)
}

/// Reduced spin states after π/2 and coupling for each t, in the frame
/// co-rotating at `frame_omega`.
pub fn time_resolved_states(
    p: &ModelParams,
    model: Model,
    times: &[f64],
    frame_omega: f64,
) -> Result<Vec<SpinState>> {
    let seq = Sequencer::new(p, model)?;
    let prepared = seq.run(&initial_state(p)?, &[PulseSpec::half_pi(0.0)])?;
    times
        .iter()
        .map(|&t| {
            let rho = seq.run(&prepared, &[PulseSpec::coupling(t)?])?;
            let spin = partial_trace_mode(&rho, p.n_max)?;
            Ok(spin.evolve(&frame_rotation(frame_omega * t)))
        })
        .collect()
}

/// exp(+iθσz/2): undoes a free precession by θ.
fn frame_rotation(theta: f64) -> OperatorMatrix {
    let half = Complex64::from_polar(1.0, 0.5 * theta);
    OperatorMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![half, half.conj()]))
}

/// Noise-free ⟨obs⟩(t), read out through the analysis pulse.
pub fn ramsey_time_resolved_exact(
    p: &ModelParams,
    model: Model,
    times: &[f64],
    observable: Observable,
    frame_omega: f64,
) -> Result<Vec<f64>> {
    time_resolved_states(p, model, times, frame_omega)?
        .iter()
        .map(|spin| readout(spin, observable))
        .collect()
}

fn readout(spin: &SpinState, observable: Observable) -> Result<f64> {
    let measured = match observable.analysis_pulse() {
        Some(pulse) => apply_spin_pulse(spin, &pulse),
        None => spin.clone(),
    };
    Ok(expectation(&sigma_z(), &measured)?)
}

/// Sampled time-resolved scan; observable k at time index i draws from
/// stream (k << 32) | i.
pub fn ramsey_time_resolved(
    p: &ModelParams,
    model: Model,
    times: &[f64],
    observables: &[Observable],
    frame_omega: f64,
    reps: u64,
    seed: u64,
) -> Result<Vec<(Observable, Vec<MeasurementRecord>)>> {
    let states = time_resolved_states(p, model, times, frame_omega)?;
    observables
        .iter()
        .map(|&obs| {
            let records = states
                .iter()
                .zip(times)
                .enumerate()
                .map(|(i, (spin, &t))| {
                    let stream = (obs.index() << 32) | i as u64;
                    sample_projective(readout(spin, obs)?, reps, seed, stream, t)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((obs, records))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcl::reconstruct_map;

    fn jc(delta_over_g: f64, nbar: f64) -> ModelParams {
        ModelParams::jc(16.0, 16.0 + delta_over_g, 1.0, nbar, 20)
    }

    fn spin_down() -> DensityMatrix {
        PureState::basis(2, 1).to_density()
    }

    fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        (a.matrix() - b.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn half_pi_prepares_sigma_y_eigenstate() {
        let rho = apply_spin_pulse(&spin_down(), &PulseSpec::half_pi(0.0));
        let expected = PureState::normalised(nalgebra::DVector::from_vec(vec![
            Complex64::new(0.0, -1.0),
            Complex64::new(1.0, 0.0),
        ]))
        .unwrap()
        .to_density();
        assert!(max_diff(&rho, &expected) < 1e-15);
        assert!(expectation(&sigma_z(), &rho).unwrap().abs() < 1e-15);
        assert!((expectation(&sigma_y(), &rho).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pulse_composition() {
        let rho0 = DensityMatrix::from_bloch([0.3, -0.5, 0.6]);
        for phase in [0.0, 0.4, 2.0, 5.5] {
            let two_half = apply_spin_pulse(
                &apply_spin_pulse(&rho0, &PulseSpec::half_pi(phase)),
                &PulseSpec::half_pi(phase),
            );
            let one_pi = apply_spin_pulse(&rho0, &PulseSpec::pi(phase));
            assert!(max_diff(&two_half, &one_pi) < 1e-12);
            let back = apply_spin_pulse(&one_pi, &PulseSpec::pi(phase));
            assert!(max_diff(&back, &rho0) < 1e-12);
        }
        // composite states get R ⊗ I
        let composite = rho0.product(&thermal_mode_state(&jc(0.8, 0.1)).unwrap());
        let pulsed = apply_spin_pulse(&composite, &PulseSpec::half_pi(1.0));
        let reduced = partial_trace_mode(&pulsed, 20).unwrap();
        assert!(max_diff(&reduced, &apply_spin_pulse(&rho0, &PulseSpec::half_pi(1.0))) < 1e-12);
    }

    #[test]
    fn readout_pulses_select_observables() {
        let rho = DensityMatrix::from_bloch([0.3, -0.5, 0.6]);
        assert!((readout(&rho, Observable::SigmaX).unwrap() - 0.3).abs() < 1e-14);
        assert!((readout(&rho, Observable::SigmaY).unwrap() + 0.5).abs() < 1e-14);
        assert!((readout(&rho, Observable::SigmaZ).unwrap() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn pulse_spec_validation() {
        assert!(PulseSpec::wait(-1.0).is_err());
        assert!(PulseSpec::coupling(f64::NAN).is_err());
        let p = PulseSpec::half_pi(-FRAC_PI_2);
        assert!((p.phase - 3.0 * FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_echo_gives_negative_cosine_without_phase() {
        let p = ModelParams {
            g: 0.0,
            ..jc(5.0, 0.0)
        };
        // T(Δ) with g = 0 is 2π/|Δ|
        let phases: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
        let probs = ramsey_time_average_exact(&p, Model::Jc, &phases).unwrap();
        for (phi, pu) in phases.iter().zip(probs) {
            assert!((pu - 0.5 * (1.0 - phi.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn echo_cancels_free_precession() {
        for dg in [-3.0, -0.8, 0.5, 2.0, 6.0] {
            let p = jc(dg, 0.05);
            let timing = EchoTiming::for_model(&p, Model::Jc).unwrap();
            let pulses = vec![
                PulseSpec::half_pi(0.0),
                PulseSpec::wait(timing.arm).unwrap(),
                PulseSpec::pi(0.0),
                PulseSpec::wait(timing.arm).unwrap(),
            ];
            let spin = echo_final_spin(&p, Model::Jc, &pulses).unwrap();
            let [x, y, _] = spin.bloch_vector();
            // final state points along −y: zero accumulated phase
            assert!(x.abs() < 1e-10 && (y + 1.0).abs() < 1e-10, "Δ/g = {dg}");
        }
    }

    #[test]
    fn arms_are_balanced() {
        for dg in [-6.0, -1.0, 0.8, 4.0] {
            let timing = EchoTiming::for_model(&jc(dg, 0.0), Model::Jc).unwrap();
            let a = sequence_duration(&echo_sequence(timing, true).unwrap());
            let b = sequence_duration(&echo_sequence(timing, false).unwrap());
            assert_eq!(a, b);
            assert_eq!(a, timing.total());
        }
        assert!(EchoTiming::for_model(&jc(0.0, 0.0), Model::Jc).is_err());
    }

    #[test]
    fn echo_phase_matches_average_shift() {
        let p = jc(5.0, 0.0);
        let t = renorm::period(&p).unwrap();
        let expected = renorm::average_shift_vacuum(&p).unwrap() * t;
        // P(↑) = ½ − ½cos(φ + φ̃)
        let phases = [0.0, FRAC_PI_2];
        let probs = ramsey_time_average_exact(&p, Model::Jc, &phases).unwrap();
        let (cos_term, sin_term) = (1.0 - 2.0 * probs[0], 2.0 * probs[1] - 1.0);
        let phase = sin_term.atan2(cos_term);
        assert!((phase - expected).abs() < 0.02 * expected.abs());
        assert!((raw_phase_integral(&p).unwrap() - (p.omega * t + expected)).abs() < 1e-12);
    }

    #[test]
    fn time_resolved_starts_on_sigma_y() {
        let p = jc(0.8, 0.0);
        let y =
            ramsey_time_resolved_exact(&p, Model::Jc, &[0.0], Observable::SigmaY, p.omega).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn time_resolved_envelope_dips_at_half_periods() {
        let p = jc(0.8, 0.0);
        let t_period = renorm::period(&p).unwrap();
        let times: Vec<f64> = (0..=800)
            .map(|k| 2.0 * t_period * k as f64 / 800.0)
            .collect();
        let states = time_resolved_states(&p, Model::Jc, &times, p.omega).unwrap();
        let envelope: Vec<f64> = states
            .iter()
            .map(|s| {
                let [x, y, _] = s.bloch_vector();
                x.hypot(y)
            })
            .collect();
        let argmin = |lo: usize, hi: usize| {
            (lo..hi)
                .min_by(|&a, &b| envelope[a].total_cmp(&envelope[b]))
                .unwrap()
        };
        let first = times[argmin(0, 400)] / t_period;
        let second = times[argmin(400, 801)] / t_period;
        assert!((first - 0.5).abs() < 0.01, "{first}");
        assert!((second - 1.5).abs() < 0.01, "{second}");
    }

    #[test]
    fn time_resolved_matches_reconstructed_map() {
        let p = jc(0.8, 0.08);
        let times = [0.0, 0.9, 2.4, 5.1];
        let h = Model::Jc.hamiltonian(&p).unwrap();
        let rho_e = thermal_mode_state(&p).unwrap();
        let prepared = apply_spin_pulse(&spin_down(), &PulseSpec::half_pi(0.0));
        let lab = time_resolved_states(&p, Model::Jc, &times, 0.0).unwrap();
        for (t, spin) in times.iter().zip(&lab) {
            let via_map = reconstruct_map(&h, &rho_e, *t)
                .unwrap()
                .apply(&prepared)
                .unwrap();
            assert!(max_diff(spin, &via_map) < 1e-10);
        }
    }

    #[test]
    fn cutoff_is_checked() {
        let p = ModelParams::jc(16.0, 16.8, 1.0, 2.0, 12);
        assert!(Sequencer::new(&p, Model::Jc)
            .and_then(|s| s.run(&initial_state(&p)?, &[]))
            .is_err());
    }

    #[test]
    fn sampling_edges_and_determinism() {
        let r = sample_projective(1.0, 100, 7, 0, 0.0).unwrap();
        assert_eq!(r.up_counts, 100);
        let r = sample_projective(-1.0, 100, 7, 0, 0.0).unwrap();
        assert_eq!(r.up_counts, 0);
        let a = sample_projective(0.3, 1000, 42, 5, 1.0).unwrap();
        let b = sample_projective(0.3, 1000, 42, 5, 1.0).unwrap();
        assert_eq!(a, b);
        let c = sample_projective(0.3, 1000, 42, 6, 1.0).unwrap();
        assert_ne!(a.up_counts, c.up_counts);
        assert!((a.estimate - (2.0 * a.up_counts as f64 / 1000.0 - 1.0)).abs() < 1e-15);
        assert!(sample_projective(1.5, 10, 0, 0, 0.0).is_err());
        assert!(sample_projective(0.0, 0, 0, 0, 0.0).is_err());
    }

    #[test]
    fn sampled_scan_has_binomial_spread() {
        let p = jc(5.0, 0.0);
        let phases: Vec<f64> = (0..12).map(|k| k as f64 * PI / 6.0).collect();
        let exact = ramsey_time_average_exact(&p, Model::Jc, &phases).unwrap();
        let records = ramsey_time_average(&p, Model::Jc, &phases, 100, 11).unwrap();
        for (rec, pu) in records.iter().zip(exact) {
            assert!(pu * (1.0 - pu) / 100.0 <= 0.05f64.powi(2) + 1e-15);
            assert!((rec.up_fraction() - pu).abs() < 5.0 * 0.05);
        }
    }

    #[test]
    fn sampling_converges_as_inverse_sqrt_reps() {
        let target = 0.4;
        let rms = |reps: u64| {
            let trials = 400;
            let sq: f64 = (0..trials)
                .map(|s| {
                    (sample_projective(target, reps, s, 0, 0.0).unwrap().estimate - target).powi(2)
                })
                .sum();
            (sq / trials as f64).sqrt()
        };
        let sigma = |reps: u64| ((1.0 - target * target) / reps as f64).sqrt();
        for reps in [50, 500, 5000] {
            let ratio = rms(reps) / sigma(reps);
            assert!((0.85..1.15).contains(&ratio), "reps {reps}: {ratio}");
        }
    }
}
