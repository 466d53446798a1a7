//! Dense complex linear algebra on the spin ⊗ truncated-oscillator space.
//!
//! Conventions used throughout the crate:
//!
//! * spin basis ordering is (|↑⟩, |↓⟩), so σ_z = diag(+1, −1) and σ₊|↓⟩ = |↑⟩;
//! * Fock states are ordered |0⟩ … |n_max⟩;
//! * composite objects are spin ⊗ mode, i.e. index = spin · (n_max + 1) + n;
//! * Hamiltonians are stored as H/ħ in rad/s and times are in seconds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex square matrix acting on a spin, mode or composite space.
pub type OperatorMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for Hermiticity, scaled by max(1, largest entry).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of a density-matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Allowed deviation of a pure-state norm from one.
pub const NORM_TOL: f64 = 1e-12;
/// Largest population tolerated in the two highest retained Fock levels.
pub const CUTOFF_TOL: f64 = 1e-8;
/// Extra Fock levels used when exponentiating the Lamb-Dicke generator.
pub const CUTOFF_PADDING: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |A - A†| = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not anti-Hermitian (max |A + A†| = {defect:e})")]
    NotAntiHermitian { defect: f64 },
    #[error("density matrix trace {trace} differs from 1")]
    TraceNotOne { trace: f64 },
    #[error("density matrix has negative eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },
    #[error("state norm {norm} differs from 1")]
    NotNormalised { norm: f64 },
    #[error("imaginary part {imag:e} of an expectation value exceeds tolerance")]
    ComplexExpectation { imag: f64 },
    #[error("Fock cutoff inadequate: population {population:e} in the top two levels")]
    CutoffInadequate { population: f64 },
}

pub type Result<T> = std::result::Result<T, HilbertError>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> OperatorMatrix {
    OperatorMatrix::identity(dim, dim)
}

pub fn sigma_x() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// σ₊ = |↑⟩⟨↓|.
pub fn sigma_plus() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// σ₋ = |↓⟩⟨↑|.
pub fn sigma_minus() -> OperatorMatrix {
    OperatorMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

/// Truncated annihilation operator on `levels` Fock states.
pub fn annihilation(levels: usize) -> OperatorMatrix {
    let mut a = OperatorMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

pub fn creation(levels: usize) -> OperatorMatrix {
    annihilation(levels).adjoint()
}

pub fn number(levels: usize) -> OperatorMatrix {
    OperatorMatrix::from_diagonal(&DVector::from_fn(levels, |n, _| c(n as f64)))
}

/// Dimension of the composite spin ⊗ mode space for a given Fock cutoff.
pub fn composite_dim(n_max: usize) -> usize {
    2 * (n_max + 1)
}

/// Kronecker product, first factor outermost (spin first, mode second).
pub fn tensor(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a.kronecker(b)
}

/// Largest entrywise |A − A†|.
pub fn hermitian_defect(m: &OperatorMatrix) -> f64 {
    let n = m.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

fn max_abs(m: &OperatorMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn ensure_square(m: &OperatorMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(HilbertError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Checks Hermiticity with a tolerance scaled by the matrix magnitude.
pub fn ensure_hermitian(m: &OperatorMatrix) -> Result<()> {
    ensure_square(m)?;
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(HilbertError::NotHermitian { defect });
    }
    Ok(())
}

/// Normalised state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(DVector<Complex64>);

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(HilbertError::NotNormalised { norm });
        }
        Ok(Self(amplitudes))
    }

    /// Normalises an arbitrary nonzero vector.
    pub fn normalised(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(HilbertError::NotNormalised { norm });
        }
        Ok(Self(amplitudes / c(norm)))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(OperatorMatrix);

/// Reduced state of the two-level system.
pub type SpinState = DensityMatrix;

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(m: OperatorMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(HilbertError::NotHermitian { defect });
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(HilbertError::TraceNotOne { trace: trace.re });
        }
        let lowest = SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if lowest < -POSITIVITY_TOL {
            return Err(HilbertError::NotPositive { eigenvalue: lowest });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be a valid state (e.g. the image of a valid
    /// state under a unitary or a partial trace).
    pub fn from_matrix_unchecked(m: OperatorMatrix) -> Self {
        Self(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim) / c(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> OperatorMatrix {
        self.0
    }

    /// ρ_A ⊗ ρ_B.
    pub fn product(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(tensor(&self.0, &other.0))
    }

    /// U ρ U†.
    pub fn evolve(&self, unitary: &OperatorMatrix) -> DensityMatrix {
        DensityMatrix(unitary * &self.0 * unitary.adjoint())
    }

    /// Bloch vector (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩) of a 2×2 state.
    pub fn bloch_vector(&self) -> [f64; 3] {
        assert_eq!(self.dim(), 2, "Bloch vector requires a 2x2 state");
        let m = &self.0;
        [
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ]
    }

    /// Spin state with the given Bloch vector (|r| ≤ 1 is the caller's job).
    pub fn from_bloch(r: [f64; 3]) -> DensityMatrix {
        let m = (identity(2) + sigma_x() * c(r[0]) + sigma_y() * c(r[1]) + sigma_z() * c(r[2]))
            / c(2.0);
        DensityMatrix(m)
    }
}

/// Traces the mode out of a composite operator (not necessarily a state).
pub fn partial_trace_mode_operator(m: &OperatorMatrix, n_max: usize) -> Result<OperatorMatrix> {
    let dim = composite_dim(n_max);
    if m.nrows() != dim || m.ncols() != dim {
        return Err(HilbertError::DimensionMismatch {
            expected: dim,
            found: m.nrows(),
        });
    }
    let levels = n_max + 1;
    Ok(OperatorMatrix::from_fn(2, 2, |s, t| {
        (0..levels)
            .map(|n| m[(s * levels + n, t * levels + n)])
            .sum()
    }))
}

pub fn partial_trace_mode(rho: &DensityMatrix, n_max: usize) -> Result<SpinState> {
    partial_trace_mode_operator(&rho.0, n_max).map(DensityMatrix)
}

/// Traces the spin out of a composite state.
pub fn partial_trace_spin(rho: &DensityMatrix, n_max: usize) -> Result<DensityMatrix> {
    let dim = composite_dim(n_max);
    if rho.dim() != dim {
        return Err(HilbertError::DimensionMismatch {
            expected: dim,
            found: rho.dim(),
        });
    }
    let levels = n_max + 1;
    let m = &rho.0;
    Ok(DensityMatrix(OperatorMatrix::from_fn(
        levels,
        levels,
        |n, k| m[(n, k)] + m[(levels + n, levels + k)],
    )))
}

/// ½ Σ |eigenvalues(ρ − σ)|.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let diff = &rho.0 - &sigma.0;
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

/// Tr(obs · ρ) for a Hermitian observable.
pub fn expectation(obs: &OperatorMatrix, rho: &DensityMatrix) -> Result<f64> {
    if obs.nrows() != rho.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: rho.dim(),
            found: obs.nrows(),
        });
    }
    ensure_hermitian(obs)?;
    let value: Complex64 = (obs * &rho.0).trace();
    if value.im.abs() > 1e-10 {
        return Err(HilbertError::ComplexExpectation { imag: value.im });
    }
    Ok(value.re)
}

/// Cached eigendecomposition of a static Hermitian Hamiltonian, giving
/// U(t) = exp(−iHt) for any t without a step integrator.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: Vec<f64>,
    eigenvectors: OperatorMatrix,
}

impl Propagator {
    pub fn new(hamiltonian: &OperatorMatrix) -> Result<Self> {
        ensure_hermitian(hamiltonian)?;
        let eig = SymmetricEigen::new(hamiltonian.clone());
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().cloned().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= Complex64::from_polar(1.0, -e * t);
        }
        scaled * v.adjoint()
    }
}

/// U = exp(−iHt) by eigendecomposition.
pub fn hermitian_propagator(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    Ok(Propagator::new(h)?.at(t))
}

/// exp(G) for anti-Hermitian G, via the eigendecomposition of the Hermitian −iG.
pub fn matrix_exponential_antihermitian(g: &OperatorMatrix) -> Result<OperatorMatrix> {
    ensure_square(g)?;
    let h = g * (-I);
    let defect = hermitian_defect(&h);
    if defect > HERMITIAN_TOL * max_abs(&h).max(1.0) {
        return Err(HilbertError::NotAntiHermitian { defect });
    }
    // exp(G) = exp(i·(−iG)) = exp(−i·H·(−1)).
    Ok(Propagator::new(&h)?.at(-1.0))
}

/// Lamb-Dicke coupling operator C(η) = exp[iη(a† + a)] on n_max + 1 levels.
///
/// The exponential is taken on a space padded by [`CUTOFF_PADDING`] levels and
/// then truncated, which keeps truncation artefacts of the generator out of the
/// retained block.
pub fn lamb_dicke_coupling(eta: f64, n_max: usize) -> OperatorMatrix {
    let padded = n_max + 1 + CUTOFF_PADDING;
    let x = annihilation(padded) + creation(padded);
    let g = x * Complex64::new(0.0, eta);
    let full = matrix_exponential_antihermitian(&g).expect("iη(a†+a) is anti-Hermitian");
    full.view((0, 0), (n_max + 1, n_max + 1)).into_owned()
}

/// Population in the two highest retained Fock levels of a composite state.
pub fn fock_tail_population(rho: &DensityMatrix, n_max: usize) -> Result<f64> {
    let mode = partial_trace_spin(rho, n_max)?;
    let m = mode.matrix();
    Ok((n_max.saturating_sub(1)..=n_max)
        .map(|n| m[(n, n)].re)
        .sum())
}

/// Flags a composite state whose Fock tail is populated above [`CUTOFF_TOL`].
pub fn check_cutoff(rho: &DensityMatrix, n_max: usize) -> Result<()> {
    let population = fock_tail_population(rho, n_max)?;
    if population >= CUTOFF_TOL {
        return Err(HilbertError::CutoffInadequate { population });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn max_entry_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
        (a - b).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    fn random_hermitian(dim: usize, seed: &[f64]) -> OperatorMatrix {
        let mut k = 0;
        let mut next = || {
            k += 1;
            seed[k % seed.len()] * (k as f64 * 0.37).sin()
        };
        let mut m = OperatorMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = c(next());
            for j in (i + 1)..dim {
                let z = Complex64::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    fn random_state(dim: usize, params: &[f64]) -> DensityMatrix {
        // A = random, ρ = A A† / Tr.
        let a = OperatorMatrix::from_fn(dim, dim, |i, j| {
            let k = i * dim + j;
            Complex64::new(
                params[k % params.len()] + (k as f64).cos(),
                params[(k + 1) % params.len()] * (k as f64 * 1.3).sin(),
            )
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn tensor_identities() {
        assert_eq!(tensor(&identity(2), &identity(3)), identity(6));
        let z = tensor(&sigma_z(), &identity(2));
        let expected =
            OperatorMatrix::from_diagonal(&DVector::from_vec(vec![ONE, ONE, -ONE, -ONE]));
        assert_eq!(z, expected);
    }

    #[test]
    fn tensor_sigma_plus_annihilation() {
        // n_max = 1: basis |↑0⟩, |↑1⟩, |↓0⟩, |↓1⟩. σ₊⊗a maps |↓,1⟩ → |↑,0⟩.
        let m = tensor(&sigma_plus(), &annihilation(2));
        let mut expected = OperatorMatrix::zeros(4, 4);
        expected[(0, 3)] = ONE;
        assert_eq!(m, expected);
    }

    #[test]
    fn sigma_y_convention() {
        // σ_y|↑⟩ = +i|↓⟩
        let up = PureState::basis(2, 0);
        let out = sigma_y() * up.amplitudes();
        assert_eq!(out[0], ZERO);
        assert_eq!(out[1], I);
    }

    #[test]
    fn partial_trace_product_state() {
        let n_max = 3;
        let up = PureState::basis(2, 0).to_density();
        let vac = PureState::basis(n_max + 1, 0).to_density();
        let reduced = partial_trace_mode(&up.product(&vac), n_max).unwrap();
        assert_eq!(reduced, up);
    }

    #[test]
    fn partial_trace_bell_state() {
        let n_max = 1;
        let mut v = DVector::from_element(4, ZERO);
        v[0] = c(1.0); // |↑,0⟩
        v[3] = c(1.0); // |↓,1⟩
        let psi = PureState::normalised(v).unwrap();
        let reduced = partial_trace_mode(&psi.to_density(), n_max).unwrap();
        let half = DensityMatrix::maximally_mixed(2);
        assert!(max_entry_diff(reduced.matrix(), half.matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_wrong_dimension() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert_eq!(
            partial_trace_mode(&rho, 3),
            Err(HilbertError::DimensionMismatch {
                expected: 8,
                found: 6
            })
        );
    }

    #[test]
    fn trace_distance_examples() {
        let up = PureState::basis(2, 0).to_density();
        let down = PureState::basis(2, 1).to_density();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(trace_distance(&up, &up).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&up, &down).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&mixed, &up).unwrap(), 0.5, epsilon = 1e-15);
        assert!(trace_distance(&up, &DensityMatrix::maximally_mixed(4)).is_err());
    }

    #[test]
    fn expectation_examples() {
        let up = PureState::basis(2, 0).to_density();
        assert_abs_diff_eq!(expectation(&sigma_z(), &up).unwrap(), 1.0);

        // (|↑⟩ + i|↓⟩)/√2 is the +1 eigenvector of σ_y in this convention.
        let psi = PureState::normalised(DVector::from_vec(vec![ONE, I])).unwrap();
        assert_abs_diff_eq!(
            expectation(&sigma_y(), &psi.to_density()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(expectation(&sigma_x(), &mixed).unwrap(), 0.0);

        assert!(matches!(
            expectation(&sigma_plus(), &mixed),
            Err(HilbertError::NotHermitian { .. })
        ));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(identity(2)).is_err());
        assert!(DensityMatrix::new(sigma_plus()).is_err());
        let neg = OperatorMatrix::from_diagonal(&DVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(matches!(
            DensityMatrix::new(neg),
            Err(HilbertError::NotPositive { .. })
        ));
        assert!(PureState::new(DVector::from_vec(vec![ONE, ONE])).is_err());
    }

    #[test]
    fn propagator_examples() {
        let h = sigma_z() * c(0.5 * 3.0);
        assert!(max_entry_diff(&hermitian_propagator(&h, 0.0).unwrap(), &identity(2)) < 1e-15);
        let t = 0.7;
        let u = hermitian_propagator(&h, t).unwrap();
        let up = PureState::basis(2, 0);
        let out = &u * up.amplitudes();
        let expected = Complex64::from_polar(1.0, -3.0 * t / 2.0);
        assert!((out[0] - expected).norm() < 1e-15);
        assert!(out[1].norm() < 1e-15);
        assert!(hermitian_propagator(&sigma_plus(), 1.0).is_err());
    }

    #[test]
    fn antihermitian_exponential() {
        let levels = 31 + CUTOFF_PADDING;
        let x = annihilation(levels) + creation(levels);
        assert!(
            max_entry_diff(
                &matrix_exponential_antihermitian(&(x.clone() * c(0.0))).unwrap(),
                &identity(levels)
            ) < 1e-14
        );
        assert!(matrix_exponential_antihermitian(&x).is_err());
    }

    #[test]
    fn lamb_dicke_vacuum_overlap() {
        let eta = 0.4;
        let cpl = lamb_dicke_coupling(eta, 30);
        assert!((cpl[(0, 0)] - c((-eta * eta / 2.0).exp())).norm() < 1e-8);
        // columns of the retained block that are far from the cutoff stay normalised
        for col in 0..10 {
            let norm: f64 = cpl.column(col).norm();
            assert!((norm - 1.0).abs() < 1e-8, "column {col} norm {norm}");
        }
        assert_eq!(lamb_dicke_coupling(0.0, 5), identity(6));
    }

    #[test]
    fn cutoff_flag() {
        let n_max = 4;
        let top = PureState::basis(2 * (n_max + 1), n_max).to_density();
        assert!(matches!(
            check_cutoff(&top, n_max),
            Err(HilbertError::CutoffInadequate { .. })
        ));
        let vac = PureState::basis(2 * (n_max + 1), 0).to_density();
        assert!(check_cutoff(&vac, n_max).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn propagator_group_property(
            seed in prop::collection::vec(-2.0f64..2.0, 8),
            t1 in -3.0f64..3.0,
            t2 in -3.0f64..3.0,
        ) {
            let h = random_hermitian(6, &seed);
            let p = Propagator::new(&h).unwrap();
            let lhs = p.at(t1) * p.at(t2);
            let rhs = p.at(t1 + t2);
            prop_assert!(max_entry_diff(&lhs, &rhs) < 1e-10);
            let u = p.at(t1);
            prop_assert!(max_entry_diff(&(&u * u.adjoint()), &identity(6)) < 1e-10);
        }

        #[test]
        fn partial_trace_of_product(
            a in prop::collection::vec(-1.0f64..1.0, 5),
            b in prop::collection::vec(-1.0f64..1.0, 7),
        ) {
            let n_max = 2;
            let spin = random_state(2, &a);
            let mode = random_state(n_max + 1, &b);
            let reduced = partial_trace_mode(&spin.product(&mode), n_max).unwrap();
            prop_assert!(max_entry_diff(reduced.matrix(), spin.matrix()) < 1e-12);
            prop_assert!((reduced.matrix().trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn local_unitary_covariance(
            a in prop::collection::vec(-1.0f64..1.0, 5),
            b in prop::collection::vec(-1.0f64..1.0, 7),
            t in -2.0f64..2.0,
        ) {
            let n_max = 2;
            let spin = random_state(2, &a);
            let mode = random_state(n_max + 1, &b);
            let us = hermitian_propagator(&random_hermitian(2, &a), t).unwrap();
            let ue = hermitian_propagator(&random_hermitian(n_max + 1, &b), t).unwrap();
            let u = tensor(&us, &ue);
            let evolved = spin.product(&mode).evolve(&u);
            let reduced = partial_trace_mode(&evolved, n_max).unwrap();
            prop_assert!(max_entry_diff(reduced.matrix(), spin.evolve(&us).matrix()) < 1e-10);
            // positivity and trace survive the evolution
            prop_assert!(DensityMatrix::new(evolved.into_matrix()).is_ok());
        }

        #[test]
        fn trace_distance_contracts_under_partial_trace(
            a in prop::collection::vec(-1.0f64..1.0, 9),
            b in prop::collection::vec(-1.0f64..1.0, 11),
        ) {
            let n_max = 2;
            let rho = random_state(composite_dim(n_max), &a);
            let sigma = random_state(composite_dim(n_max), &b);
            let full = trace_distance(&rho, &sigma).unwrap();
            let reduced = trace_distance(
                &partial_trace_mode(&rho, n_max).unwrap(),
                &partial_trace_mode(&sigma, n_max).unwrap(),
            ).unwrap();
            prop_assert!(reduced <= full + 1e-10);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&full));
            let back = trace_distance(&sigma, &rho).unwrap();
            prop_assert!((back - full).abs() < 1e-12);
        }
    }
}
