//! Jaynes-Cummings and trapped-ion Hamiltonians, their parameters, and the
//! mapping between the two model families.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{
    self, annihilation, creation, identity, number, sigma_minus, sigma_plus, sigma_z, tensor,
    DensityMatrix, HilbertError, OperatorMatrix,
};

/// Largest probability mass a truncated thermal state may lose.
pub const THERMAL_TRUNCATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parameter `{0}` is required by this model")]
    MissingParameter(&'static str),
    #[error("thermal state truncated at n_max = {n_max} loses {lost:e} of probability")]
    Truncation { n_max: usize, lost: f64 },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Physical parameters of the spin-mode system, frequencies in rad/s.
///
/// The thermal occupation is stored as n̄; β is derived from it. The detuning
/// Δ = ω_m − ω is always computed, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Bare spin frequency ω.
    pub omega: f64,
    /// Mode frequency ω_m.
    pub omega_m: f64,
    /// Jaynes-Cummings coupling g.
    pub g: f64,
    /// Laser-dressed pseudo-spin frequency ω* (trapped-ion models only).
    pub omega_star: Option<f64>,
    /// Lamb-Dicke parameter η (trapped-ion models only).
    pub eta: Option<f64>,
    /// Rabi frequency Ω_R (trapped-ion models only).
    pub omega_rabi: Option<f64>,
    /// Mean thermal occupation n̄ of the initial mode state.
    pub nbar: f64,
    /// Fock cutoff.
    pub n_max: usize,
}

impl ModelParams {
    pub fn jc(omega: f64, omega_m: f64, g: f64, nbar: f64, n_max: usize) -> Self {
        Self {
            omega,
            omega_m,
            g,
            omega_star: None,
            eta: None,
            omega_rabi: None,
            nbar,
            n_max,
        }
    }

    /// Trapped-ion parameters; ω and g are filled in from the mapping onto
    /// the Jaynes-Cummings family.
    pub fn trapped_ion(
        omega_star: f64,
        omega_m: f64,
        eta: f64,
        omega_rabi: f64,
        nbar: f64,
        n_max: usize,
    ) -> Self {
        Self {
            omega: omega_star.hypot(omega_rabi),
            omega_m,
            g: eta * omega_rabi / 2.0,
            omega_star: Some(omega_star),
            eta: Some(eta),
            omega_rabi: Some(omega_rabi),
            nbar,
            n_max,
        }
    }

    /// Δ = ω_m − ω.
    pub fn detuning(&self) -> f64 {
        self.omega_m - self.omega
    }

    /// Returns a copy with ω_m moved so that ω_m − ω = `delta`.
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.omega_m = self.omega + delta;
        self
    }

    /// Sets the occupation from an inverse temperature (ħ = 1, β·ω_m dimensionless).
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.nbar = 1.0 / (beta * self.omega_m).exp_m1();
        self
    }

    /// β = ln(1 + 1/n̄)/ω_m; `None` for the vacuum (β = ∞).
    pub fn beta(&self) -> Option<f64> {
        (self.nbar > 0.0).then(|| (1.0 / self.nbar).ln_1p() / self.omega_m)
    }

    /// e^{−βω_m} = n̄/(n̄ + 1).
    pub fn boltzmann_ratio(&self) -> f64 {
        self.nbar / (self.nbar + 1.0)
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("must be a positive frequency, got {v}"),
                });
            }
            Ok(())
        }
        positive("omega", self.omega)?;
        positive("omega_m", self.omega_m)?;
        if let Some(w) = self.omega_star {
            positive("omega_star", w)?;
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "g",
                reason: format!("must be >= 0, got {}", self.g),
            });
        }
        if let Some(eta) = self.eta {
            if !(0.0..1.0).contains(&eta) {
                return Err(ModelError::InvalidParameter {
                    name: "eta",
                    reason: format!("must lie in [0, 1), got {eta}"),
                });
            }
        }
        if let Some(r) = self.omega_rabi {
            if !(r.is_finite() && r >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "omega_rabi",
                    reason: format!("must be >= 0, got {r}"),
                });
            }
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "nbar",
                reason: format!("must be >= 0, got {}", self.nbar),
            });
        }
        if self.n_max < 2 {
            return Err(ModelError::InvalidParameter {
                name: "n_max",
                reason: format!("must be >= 2, got {}", self.n_max),
            });
        }
        Ok(())
    }

    fn ti_fields(&self) -> Result<(f64, f64, f64)> {
        Ok((
            self.omega_star
                .ok_or(ModelError::MissingParameter("omega_star"))?,
            self.eta.ok_or(ModelError::MissingParameter("eta"))?,
            self.omega_rabi
                .ok_or(ModelError::MissingParameter("omega_rabi"))?,
        ))
    }
}

/// Which Hamiltonian drives the spin-mode dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Jc,
    TiFull,
    TiLd,
    TiRsb,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Jc, Model::TiFull, Model::TiLd, Model::TiRsb];

    pub fn name(self) -> &'static str {
        match self {
            Model::Jc => "jc",
            Model::TiFull => "ti_full",
            Model::TiLd => "ti_ld",
            Model::TiRsb => "ti_rsb",
        }
    }

    pub fn hamiltonian(self, p: &ModelParams) -> Result<OperatorMatrix> {
        match self {
            Model::Jc => jc_hamiltonian(p),
            Model::TiFull => ti_hamiltonian_full(p),
            Model::TiLd => ti_hamiltonian_ld(p),
            Model::TiRsb => ti_hamiltonian_rsb(p),
        }
    }

    /// Jaynes-Cummings parameters that describe this model to leading order.
    pub fn effective_jc(self, p: &ModelParams) -> Result<ModelParams> {
        match self {
            Model::Jc => Ok(*p),
            Model::TiRsb => {
                let (omega_star, eta, omega_rabi) = p.ti_fields()?;
                Ok(ModelParams {
                    omega: omega_star,
                    g: eta * omega_rabi / 2.0,
                    ..*p
                })
            }
            Model::TiFull | Model::TiLd => map_ti_to_jc(p),
        }
    }

    /// Uncoupled spin + mode Hamiltonian at the effective bare spin frequency.
    pub fn free_hamiltonian(self, p: &ModelParams) -> Result<OperatorMatrix> {
        let eff = self.effective_jc(p)?;
        Ok(bare_terms(eff.omega, eff.omega_m, p.levels()))
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// (ω_s/2)σ_z ⊗ I + ω_m I ⊗ a†a.
fn bare_terms(spin_frequency: f64, omega_m: f64, levels: usize) -> OperatorMatrix {
    tensor(&sigma_z(), &identity(levels)) * cr(spin_frequency / 2.0)
        + tensor(&identity(2), &number(levels)) * cr(omega_m)
}

/// (ω/2)σ_z + ω_m a†a + g(σ₊a + σ₋a†).
pub fn jc_hamiltonian(p: &ModelParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let levels = p.levels();
    let a = annihilation(levels);
    let interaction = tensor(&sigma_plus(), &a) + tensor(&sigma_minus(), &creation(levels));
    Ok(bare_terms(p.omega, p.omega_m, levels) + interaction * cr(p.g))
}

/// (Ω_R/2)[σ₋ ⊗ C† + σ₊ ⊗ C] for a given mode operator C.
fn laser_coupling(omega_rabi: f64, coupling: &OperatorMatrix) -> OperatorMatrix {
    let plus = tensor(&sigma_plus(), coupling);
    (plus.adjoint() + plus) * cr(omega_rabi / 2.0)
}

/// Trapped-ion Hamiltonian with the full coupling C = exp[iη(a† + a)].
pub fn ti_hamiltonian_full(p: &ModelParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let (omega_star, eta, omega_rabi) = p.ti_fields()?;
    let coupling = hilbert::lamb_dicke_coupling(eta, p.n_max);
    Ok(bare_terms(omega_star, p.omega_m, p.levels()) + laser_coupling(omega_rabi, &coupling))
}

/// Trapped-ion Hamiltonian with C replaced by its first-order expansion 1 + iη(a† + a).
pub fn ti_hamiltonian_ld(p: &ModelParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let (omega_star, eta, omega_rabi) = p.ti_fields()?;
    let levels = p.levels();
    let x = annihilation(levels) + creation(levels);
    let coupling = identity(levels) + x * Complex64::new(0.0, eta);
    Ok(bare_terms(omega_star, p.omega_m, levels) + laser_coupling(omega_rabi, &coupling))
}

/// Red-sideband Hamiltonian (ω*/2)σ_z + ω_m a†a + (ηΩ_R/2)(σ₋a† + σ₊a).
pub fn ti_hamiltonian_rsb(p: &ModelParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let (omega_star, eta, omega_rabi) = p.ti_fields()?;
    let levels = p.levels();
    let interaction =
        tensor(&sigma_minus(), &creation(levels)) + tensor(&sigma_plus(), &annihilation(levels));
    Ok(bare_terms(omega_star, p.omega_m, levels) + interaction * cr(eta * omega_rabi / 2.0))
}

/// ω = √(ω*² + Ω_R²), g = ηΩ_R/2; every other field is copied.
pub fn map_ti_to_jc(p: &ModelParams) -> Result<ModelParams> {
    let (omega_star, eta, omega_rabi) = p.ti_fields()?;
    Ok(ModelParams {
        omega: omega_star.hypot(omega_rabi),
        g: eta * omega_rabi / 2.0,
        ..*p
    })
}

/// Fock-diagonal thermal state with populations ∝ (n̄/(n̄+1))^n, renormalised
/// after truncation.
pub fn thermal_mode_state(p: &ModelParams) -> Result<DensityMatrix> {
    if !(p.nbar.is_finite() && p.nbar >= 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "nbar",
            reason: format!("must be >= 0, got {}", p.nbar),
        });
    }
    let levels = p.levels();
    let r = p.boltzmann_ratio();
    let lost = r.powi(levels as i32);
    if lost > THERMAL_TRUNCATION_TOL {
        return Err(ModelError::Truncation {
            n_max: p.n_max,
            lost,
        });
    }
    let mut populations: Vec<f64> = (0..levels).map(|n| r.powi(n as i32)).collect();
    let total: f64 = populations.iter().sum();
    populations.iter_mut().for_each(|x| *x /= total);
    let diag = nalgebra::DVector::from_iterator(levels, populations.into_iter().map(cr));
    Ok(DensityMatrix::from_matrix_unchecked(
        OperatorMatrix::from_diagonal(&diag),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{hermitian_defect, Propagator};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const MHZ: f64 = 2.0 * PI * 1e6;

    fn max_entry_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
        (a - b).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    fn ti_params(eta: f64) -> ModelParams {
        ModelParams::trapped_ion(1.177 * MHZ, 1.304 * MHZ, eta, 0.39 * MHZ, 0.0, 30)
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Eigenvalues of the 2x2 block spanned by |↑,0⟩ and |↓,1⟩.
    fn one_excitation_block(h: &OperatorMatrix, levels: usize) -> Vec<f64> {
        let idx = [0, levels + 1];
        let block = OperatorMatrix::from_fn(2, 2, |i, j| h[(idx[i], idx[j])]);
        sorted(Propagator::new(&block).unwrap().eigenvalues().to_vec())
    }

    #[test]
    fn jc_decoupled_spectrum() {
        let p = ModelParams::jc(1.0, 1.3, 0.0, 0.0, 4);
        let h = jc_hamiltonian(&p).unwrap();
        let ev = sorted(Propagator::new(&h).unwrap().eigenvalues().to_vec());
        let mut expected = Vec::new();
        for s in [0.5, -0.5] {
            for n in 0..5 {
                expected.push(s * 1.0 + n as f64 * 1.3);
            }
        }
        for (a, b) in ev.iter().zip(sorted(expected)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jc_resonant_dressed_energies() {
        let g = 0.1;
        let p = ModelParams::jc(1.0, 1.0, g, 0.0, 3);
        let h = jc_hamiltonian(&p).unwrap();
        // energies measured from the ground state |↓,0⟩ (energy −ω/2)
        let ground = h[(p.levels(), p.levels())].re;
        let ev = one_excitation_block(&h, p.levels());
        let omega_1 = 2.0 * g;
        assert_relative_eq!(ev[0] - ground, (1.0 + 1.0 - omega_1) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1] - ground, (1.0 + 1.0 + omega_1) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn jc_matches_hand_expansion_at_n_max_1() {
        // basis |↑0⟩, |↑1⟩, |↓0⟩, |↓1⟩ ; n_max = 1 is below the validated
        // minimum, so build with n_max = 2 and compare the shared sub-block.
        let (w, wm, g) = (1.1, 0.9, 0.2);
        let p = ModelParams::jc(w, wm, g, 0.0, 2);
        let h = jc_hamiltonian(&p).unwrap();
        let pick = [0usize, 1, 3, 4];
        let sub = OperatorMatrix::from_fn(4, 4, |i, j| h[(pick[i], pick[j])]);
        #[rustfmt::skip]
        let expected = OperatorMatrix::from_row_slice(4, 4, &[
            cr(w / 2.0), cr(0.0),          cr(0.0),     cr(g),
            cr(0.0),     cr(w / 2.0 + wm), cr(0.0),     cr(0.0),
            cr(0.0),     cr(0.0),          cr(-w / 2.0), cr(0.0),
            cr(g),       cr(0.0),          cr(0.0),     cr(-w / 2.0 + wm),
        ]);
        assert!(max_entry_diff(&sub, &expected) < 1e-15);
    }

    #[test]
    fn jc_conserves_excitation_number() {
        let p = ModelParams::jc(1.24 * MHZ, 1.304 * MHZ, 0.078 * MHZ, 0.0, 30);
        let h = jc_hamiltonian(&p).unwrap();
        let levels = p.levels();
        let n_exc =
            tensor(&sigma_z(), &identity(levels)) * cr(0.5) + tensor(&identity(2), &number(levels));
        let comm = &h * &n_exc - &n_exc * &h;
        let scale = h.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        assert!(comm.iter().all(|z| z.norm() < 1e-10 * scale));
    }

    #[test]
    fn ti_full_breaks_excitation_number() {
        let p = ti_params(0.4);
        let h = ti_hamiltonian_full(&p).unwrap();
        let levels = p.levels();
        let n_exc =
            tensor(&sigma_z(), &identity(levels)) * cr(0.5) + tensor(&identity(2), &number(levels));
        let comm = &h * &n_exc - &n_exc * &h;
        assert!(comm.norm() > 0.0);
        assert!(hermitian_defect(&h) < 1e-10);
    }

    #[test]
    fn ti_full_at_zero_eta_is_carrier_only() {
        let p = ti_params(0.0);
        let h = ti_hamiltonian_full(&p).unwrap();
        let levels = p.levels();
        let (ws, wr) = (p.omega_star.unwrap(), p.omega_rabi.unwrap());
        let expected = bare_terms(ws, p.omega_m, levels)
            + tensor(&(sigma_minus() + sigma_plus()), &identity(levels)) * cr(wr / 2.0);
        assert!(max_entry_diff(&h, &expected) < 1e-6);
        assert!(max_entry_diff(&h, &ti_hamiltonian_ld(&p).unwrap()) < 1e-6);
    }

    #[test]
    fn ld_hamiltonian_is_first_order_expansion() {
        let p = ti_params(0.4);
        let full = ti_hamiltonian_full(&p).unwrap();
        let ld = ti_hamiltonian_ld(&p).unwrap();
        assert!(hermitian_defect(&ld) < 1e-12);
        // |e^{iθ} − 1 − iθ| ≤ θ²/2, so the truncated remainder is bounded by
        // (Ω_R/2)·η²‖X‖²/2 with X = a† + a on the padded space.
        let padded = p.levels() + hilbert::CUTOFF_PADDING;
        let x = annihilation(padded) + creation(padded);
        let x_norm = Propagator::new(&x)
            .unwrap()
            .eigenvalues()
            .iter()
            .fold(0.0_f64, |a, e| a.max(e.abs()));
        let eta = p.eta.unwrap();
        let bound = p.omega_rabi.unwrap() / 2.0 * eta * eta * x_norm * x_norm / 2.0;
        let diff = max_entry_diff(&full, &ld);
        assert!(diff > 0.0 && diff <= bound, "diff {diff:e} bound {bound:e}");

        // the LD interaction has a carrier part and sideband parts
        let levels = p.levels();
        let wr = p.omega_rabi.unwrap();
        assert_relative_eq!(ld[(0, levels)].re, wr / 2.0, max_relative = 1e-15); // ⟨↑0|H|↓0⟩
        assert!(ld[(0, levels + 1)].norm() > 0.0); // ⟨↑0|H|↓1⟩
    }

    #[test]
    fn rsb_equals_jc_under_identification() {
        let p = ti_params(0.4);
        let jc = ModelParams {
            omega: p.omega_star.unwrap(),
            g: p.eta.unwrap() * p.omega_rabi.unwrap() / 2.0,
            ..p
        };
        assert_eq!(
            ti_hamiltonian_rsb(&p).unwrap(),
            jc_hamiltonian(&jc).unwrap()
        );

        let decoupled = ti_hamiltonian_rsb(&ti_params(0.0)).unwrap();
        assert_eq!(
            decoupled,
            bare_terms(p.omega_star.unwrap(), p.omega_m, p.levels())
        );
    }

    #[test]
    fn rsb_one_excitation_eigenvalues() {
        let p = ModelParams::trapped_ion(1.0, 1.15, 0.3, 0.5, 0.0, 3);
        let h = ti_hamiltonian_rsb(&p).unwrap();
        let ground = h[(p.levels(), p.levels())].re;
        let ev = one_excitation_block(&h, p.levels());
        let (ws, eta, wr): (f64, f64, f64) = (1.0, 0.3, 0.5);
        let delta_star: f64 = p.omega_m - ws;
        let split = (delta_star.powi(2) + (eta * wr).powi(2)).sqrt();
        assert_relative_eq!(
            ev[0] - ground,
            (p.omega_m + ws - split) / 2.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            ev[1] - ground,
            (p.omega_m + ws + split) / 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn mapping_examples() {
        let p = ModelParams::trapped_ion(1.8e3 * MHZ, 1.3 * MHZ, 0.4, 0.39 * MHZ, 0.0, 30);
        let m = map_ti_to_jc(&p).unwrap();
        assert_relative_eq!(m.g, 0.078 * MHZ, max_relative = 1e-12);

        let q = ModelParams::trapped_ion(1.2 * MHZ, 1.3 * MHZ, 0.4, 0.0, 0.0, 30);
        let m = map_ti_to_jc(&q).unwrap();
        assert_eq!(m.omega, 1.2 * MHZ);
        assert_eq!(m.g, 0.0);

        let r = ModelParams::trapped_ion(1.8e3 * MHZ, 1.3 * MHZ, 0.4, 0.6 * MHZ, 0.0, 30);
        let m = map_ti_to_jc(&r).unwrap();
        let rel = m.omega / r.omega_star.unwrap() - 1.0;
        // (1 + x²)^{1/2} − 1 ≈ x²/2 with x = 0.6/1800
        assert_relative_eq!(rel, 0.5 * (0.6_f64 / 1800.0).powi(2), max_relative = 1e-6);
        assert!((rel - 5.6e-8).abs() < 0.05e-8);

        assert!(matches!(
            map_ti_to_jc(&ModelParams::jc(1.0, 1.0, 0.1, 0.0, 3)),
            Err(ModelError::MissingParameter("omega_star"))
        ));
    }

    #[test]
    fn mapped_jc_spectrum_matches_rsb() {
        let p = ModelParams::trapped_ion(1.177 * MHZ, 1.304 * MHZ, 0.4, 0.39 * MHZ, 0.0, 10);
        let mapped = map_ti_to_jc(&p).unwrap();
        let rsb = ModelParams {
            omega_star: Some(mapped.omega),
            ..p
        };
        let a = sorted(
            Propagator::new(&jc_hamiltonian(&mapped).unwrap())
                .unwrap()
                .eigenvalues()
                .to_vec(),
        );
        let b = sorted(
            Propagator::new(&ti_hamiltonian_rsb(&rsb).unwrap())
                .unwrap()
                .eigenvalues()
                .to_vec(),
        );
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn thermal_state_examples() {
        let vac = thermal_mode_state(&ModelParams::jc(1.0, 1.0, 0.1, 0.0, 5)).unwrap();
        assert_eq!(vac.matrix()[(0, 0)], cr(1.0));
        assert_eq!(vac.matrix().trace(), cr(1.0));

        let p = ModelParams::jc(1.0, 1.0, 0.1, 0.08, 30);
        let rho = thermal_mode_state(&p).unwrap();
        assert_relative_eq!(rho.matrix()[(0, 0)].re, 1.0 / 1.08, max_relative = 1e-12);
        assert_relative_eq!(
            rho.matrix()[(1, 1)].re,
            0.08 / 1.08 / 1.08,
            max_relative = 1e-12
        );
        assert!((rho.matrix()[(0, 0)].re - 0.9259).abs() < 1e-4);
        assert!((rho.matrix()[(1, 1)].re - 0.0686).abs() < 1e-4);

        for nbar in [0.0, 0.01, 0.08, 0.2] {
            let p = ModelParams::jc(1.0, 1.0, 0.1, nbar, 30);
            let rho = thermal_mode_state(&p).unwrap();
            let mean: f64 = (0..p.levels())
                .map(|n| n as f64 * rho.matrix()[(n, n)].re)
                .sum();
            assert!((mean - nbar).abs() < 1e-8);
        }

        let hot = ModelParams::jc(1.0, 1.0, 0.1, 5.0, 10);
        assert!(matches!(
            thermal_mode_state(&hot),
            Err(ModelError::Truncation { .. })
        ));
    }

    #[test]
    fn beta_roundtrip() {
        let p = ModelParams::jc(1.0, 2.0, 0.1, 0.08, 30);
        let beta = p.beta().unwrap();
        let q = ModelParams { nbar: 0.0, ..p }.with_beta(beta);
        assert_relative_eq!(q.nbar, 0.08, max_relative = 1e-12);
        assert_relative_eq!(
            p.boltzmann_ratio(),
            (-beta * p.omega_m).exp(),
            max_relative = 1e-12
        );
        assert_eq!(ModelParams { nbar: 0.0, ..p }.beta(), None);
    }

    #[test]
    fn validation() {
        let ok = ModelParams::jc(1.0, 1.1, 0.1, 0.0, 5);
        assert!(ok.validate().is_ok());
        assert_relative_eq!(ok.detuning(), 0.1, max_relative = 1e-12);
        assert!(ModelParams { omega: 0.0, ..ok }.validate().is_err());
        assert!(ModelParams { g: -1.0, ..ok }.validate().is_err());
        assert!(ModelParams {
            eta: Some(1.0),
            ..ok
        }
        .validate()
        .is_err());
        assert!(ModelParams { n_max: 1, ..ok }.validate().is_err());
        assert!(ModelParams { nbar: -0.1, ..ok }.validate().is_err());
    }
}
