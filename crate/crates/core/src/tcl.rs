//! Reduced dynamical maps, their time-local generators and the
//! minimal-dissipation split of a qubit generator.
//!
//! Maps and generators are 4×4 real Pauli transfer matrices on the basis
//! {I, σx, σy, σz}/√2; entry (i, j) is Tr(P_i Λ(P_j)).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::hilbert::{DensityMatrix, HilbertError, OperatorMatrix, Propagator};
use crate::models::ModelParams;
use crate::renorm::ShiftProfile;

/// Maps whose condition number exceeds this are treated as non-invertible.
pub const CONDITION_LIMIT: f64 = 1e8;
/// Extra grid points kept on each side of a [`MapSeries`] for the stencil.
pub const STENCIL_PADDING: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TclError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("composite dimension {composite} is not 2 × environment dimension {environment}")]
    DimensionMismatch {
        composite: usize,
        environment: usize,
    },
    #[error("dynamical map is not invertible at t = {t:e} s (condition number {condition:e})")]
    Singular { t: f64, condition: f64 },
    #[error("grid index {index} outside a series of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("time grid needs a positive step and at least one point")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, TclError>;

type Qubit = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(k: usize) -> Qubit {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match k {
        0 => Qubit::new(o, z, z, o),
        1 => Qubit::new(z, o, o, z),
        2 => Qubit::new(z, -i, i, z),
        3 => Qubit::new(o, z, z, -o),
        _ => unreachable!("qubit Pauli index"),
    }
}

/// Normalised basis element P_k = σ_k/√2 (σ_0 = I).
fn basis(k: usize) -> Qubit {
    pauli(k) * c(FRAC_1_SQRT_2, 0.0)
}

/// Pauli transfer matrix of a linear superoperator on 2×2 matrices.
pub fn transfer_matrix(superop: impl Fn(&Qubit) -> Qubit) -> Matrix4<f64> {
    let images: Vec<Qubit> = (0..4).map(|j| superop(&basis(j))).collect();
    Matrix4::from_fn(|i, j| (basis(i) * images[j]).trace().re)
}

/// Transfer matrix of a rotation of the Bloch vector about z by `angle`.
pub fn z_rotation(angle: f64) -> Matrix4<f64> {
    let (s, co) = angle.sin_cos();
    let mut r = Matrix4::identity();
    r[(1, 1)] = co;
    r[(1, 2)] = -s;
    r[(2, 1)] = s;
    r[(2, 2)] = co;
    r
}

/// Generator of [`z_rotation`]: d/dθ R(θ) at θ = 0.
fn z_rotation_generator() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(1, 2)] = -1.0;
    j[(2, 1)] = 1.0;
    j
}

/// Reduced map Λ(t) as a Pauli transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicalMap {
    pub time: f64,
    pub matrix: Matrix4<f64>,
}

impl DynamicalMap {
    pub fn identity(time: f64) -> Self {
        Self {
            time,
            matrix: Matrix4::identity(),
        }
    }

    /// Largest deviation of the first row from (1, 0, 0, 0).
    pub fn trace_defect(&self) -> f64 {
        let target = [1.0, 0.0, 0.0, 0.0];
        (0..4)
            .map(|j| (self.matrix[(0, j)] - target[j]).abs())
            .fold(0.0, f64::max)
    }

    /// Applies the map to a spin state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != 2 {
            return Err(HilbertError::DimensionMismatch {
                expected: 2,
                found: rho.dim(),
            }
            .into());
        }
        let m = rho.matrix();
        let q = Qubit::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let coords = nalgebra::Vector4::from_fn(|i, _| (basis(i) * q).trace().re);
        let out = self.matrix * coords;
        let image = (0..4).fold(Qubit::zeros(), |acc, i| acc + basis(i) * c(out[i], 0.0));
        Ok(DensityMatrix::from_matrix_unchecked(
            OperatorMatrix::from_fn(2, 2, |i, j| image[(i, j)]),
        ))
    }

    /// σ_max/σ_min of the transfer matrix.
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Λ from the composite unitary: Λ(X) = Tr_E[U (X ⊗ ρ_E) U†].
fn transfer_from_unitary(u: &OperatorMatrix, rho_e: &OperatorMatrix) -> Matrix4<f64> {
    let l = rho_e.nrows();
    // B_c = U[:, c-block] ρ_E
    let b: Vec<OperatorMatrix> = (0..2).map(|s| u.columns(s * l, l) * rho_e).collect();
    // E_cd = Tr_E[U (|c⟩⟨d| ⊗ ρ_E) U†]
    let mut e = [[Qubit::zeros(); 2]; 2];
    for (cc, bc) in b.iter().enumerate() {
        for (dd, row) in e[cc].iter_mut().enumerate() {
            for a in 0..2 {
                for bb in 0..2 {
                    let mut acc = c(0.0, 0.0);
                    for m in 0..l {
                        for k in 0..l {
                            acc += bc[(a * l + m, k)] * u[(bb * l + m, dd * l + k)].conj();
                        }
                    }
                    row[(a, bb)] = acc;
                }
            }
        }
    }
    transfer_matrix(|x| {
        let mut out = Qubit::zeros();
        for (cc, row) in e.iter().enumerate() {
            for (dd, img) in row.iter().enumerate() {
                out += img * x[(cc, dd)];
            }
        }
        out
    })
}

fn check_dims(h_dim: usize, rho_e: &DensityMatrix) -> Result<()> {
    if h_dim != 2 * rho_e.dim() {
        return Err(TclError::DimensionMismatch {
            composite: h_dim,
            environment: rho_e.dim(),
        });
    }
    Ok(())
}

/// Λ(t) for the product initial condition ρ_S ⊗ ρ_E(0).
pub fn reconstruct_map(
    h_total: &OperatorMatrix,
    rho_e0: &DensityMatrix,
    t: f64,
) -> Result<DynamicalMap> {
    check_dims(h_total.nrows(), rho_e0)?;
    let prop = Propagator::new(h_total)?;
    Ok(map_from_propagator(&prop, rho_e0, t, 0.0))
}

/// Λ(t) viewed in a frame co-rotating about z at `frame_omega`.
pub fn map_from_propagator(
    prop: &Propagator,
    rho_e0: &DensityMatrix,
    t: f64,
    frame_omega: f64,
) -> DynamicalMap {
    let lab = transfer_from_unitary(&prop.at(t), rho_e0.matrix());
    DynamicalMap {
        time: t,
        matrix: z_rotation(-frame_omega * t) * lab,
    }
}

/// Maps on the uniform grid t_k = t0 + k·dt, k = 0..len, plus
/// [`STENCIL_PADDING`] points on either side.
#[derive(Debug, Clone)]
pub struct MapSeries {
    pub t0: f64,
    pub dt: f64,
    pub frame_omega: f64,
    maps: Vec<DynamicalMap>,
}

impl MapSeries {
    pub fn build(
        h_total: &OperatorMatrix,
        rho_e0: &DensityMatrix,
        t0: f64,
        dt: f64,
        len: usize,
        frame_omega: f64,
    ) -> Result<Self> {
        if len == 0 || !(dt > 0.0) {
            return Err(TclError::EmptyGrid);
        }
        check_dims(h_total.nrows(), rho_e0)?;
        let prop = Propagator::new(h_total)?;
        let total = len + 2 * STENCIL_PADDING;
        let maps = (0..total)
            .into_par_iter()
            .map(|k| {
                let t = t0 + (k as f64 - STENCIL_PADDING as f64) * dt;
                map_from_propagator(&prop, rho_e0, t, frame_omega)
            })
            .collect();
        Ok(Self {
            t0,
            dt,
            frame_omega,
            maps,
        })
    }

    /// Number of grid points (padding excluded).
    pub fn len(&self) -> usize {
        self.maps.len() - 2 * STENCIL_PADDING
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    /// Frame map at a grid index.
    pub fn map(&self, index: usize) -> Result<&DynamicalMap> {
        self.check(index)?;
        Ok(&self.maps[index + STENCIL_PADDING])
    }

    /// Lab-frame map at a grid index.
    pub fn lab_map(&self, index: usize) -> Result<DynamicalMap> {
        let m = self.map(index)?;
        Ok(DynamicalMap {
            time: m.time,
            matrix: z_rotation(self.frame_omega * m.time) * m.matrix,
        })
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(TclError::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Time-local generator G(t) = Λ̇(t)Λ(t)⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub time: f64,
    pub matrix: Matrix4<f64>,
}

/// Generator in the series' rotating frame.
pub fn frame_generator(series: &MapSeries, index: usize) -> Result<Generator> {
    series.check(index)?;
    let k = index + STENCIL_PADDING;
    let m = |j: usize| series.maps[j].matrix;
    let centre = series.maps[k];
    let condition = centre.condition_number();
    if !(condition < CONDITION_LIMIT) {
        return Err(TclError::Singular {
            t: centre.time,
            condition,
        });
    }
    let derivative = (m(k - 2) - m(k - 1) * 8.0 + m(k + 1) * 8.0 - m(k + 2)) / (12.0 * series.dt);
    // G Λ = Λ̇  ⇔  Λᵀ Gᵀ = Λ̇ᵀ
    let gt = centre
        .matrix
        .transpose()
        .lu()
        .solve(&derivative.transpose())
        .ok_or(TclError::Singular {
            t: centre.time,
            condition,
        })?;
    Ok(Generator {
        time: centre.time,
        matrix: gt.transpose(),
    })
}

/// Lab-frame generator at a grid index.
pub fn generator(series: &MapSeries, index: usize) -> Result<Generator> {
    let g = frame_generator(series, index)?;
    let w = series.frame_omega;
    let r = z_rotation(w * g.time);
    Ok(Generator {
        time: g.time,
        matrix: r * g.matrix * r.transpose() + z_rotation_generator() * w,
    })
}

/// Canonical form −i[K, ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}) with traceless
/// K and trace-orthonormal traceless L_k.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSplit {
    pub time: f64,
    pub hamiltonian: Matrix2<Complex64>,
    pub rates: [f64; 3],
    pub jumps: [Matrix2<Complex64>; 3],
}

impl GeneratorSplit {
    /// Coefficient of σ_z/2 in K.
    pub fn sigma_z_frequency(&self) -> f64 {
        (self.hamiltonian[(0, 0)] - self.hamiltonian[(1, 1)]).re
    }

    /// Applies the generator to a 2×2 operator.
    pub fn apply(&self, rho: &Qubit) -> Qubit {
        let i = c(0.0, 1.0);
        let mut out = (self.hamiltonian * rho - rho * self.hamiltonian) * (-i);
        for (rate, l) in self.rates.iter().zip(&self.jumps) {
            let ld = l.adjoint();
            let ll = ld * l;
            out += (l * rho * ld - (ll * rho + rho * ll) * c(0.5, 0.0)) * c(*rate, 0.0);
        }
        out
    }

    /// Pauli transfer matrix rebuilt from K, rates and jumps.
    pub fn to_transfer(&self) -> Matrix4<f64> {
        transfer_matrix(|x| self.apply(x))
    }
}

/// Splits a trace-preserving qubit generator into its unique Hamiltonian
/// part and a dissipator with traceless jump operators.
///
/// With G = [[0, 0], [c, M]], the antisymmetric part of M is the rotation
/// h × r generated by K = h·σ/2. The symmetric part fixes the real part of the
/// dissipation matrix and the translation c its imaginary part.
pub fn minimal_dissipation_split(g: &Generator) -> GeneratorSplit {
    let m: Matrix3<f64> = g.matrix.fixed_view::<3, 3>(1, 1).into_owned();
    let t: Vector3<f64> = g.matrix.fixed_view::<3, 1>(1, 0).into_owned();

    let h = Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    );
    let hamiltonian = (1..4).fold(Qubit::zeros(), |acc, k| {
        acc + pauli(k) * c(0.5 * h[k - 1], 0.0)
    });

    let sym = (m + m.transpose()) * 0.5;
    let s = sym * 0.5 - Matrix3::identity() * (0.25 * sym.trace());
    // Dissipation matrix in the σ_j/√2 basis: 2S_jk − (i/2) ε_jkl c_l.
    let eps = |j: usize, k: usize| -> Vector3<f64> {
        let mut v = Vector3::zeros();
        if j != k {
            v[3 - j - k] = if (j + 1) % 3 == k { 1.0 } else { -1.0 };
        }
        v
    };
    let kossakowski = Matrix3::from_fn(|j, k| c(2.0 * s[(j, k)], -0.5 * eps(j, k).dot(&t)));

    let eig = kossakowski.symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rates = std::array::from_fn(|i| eig.eigenvalues[order[i]]);
    let jumps = std::array::from_fn(|i| {
        let u = eig.eigenvectors.column(order[i]);
        (0..3).fold(Qubit::zeros(), |acc, j| acc + basis(j + 1) * u[j])
    });
    GeneratorSplit {
        time: g.time,
        hamiltonian,
        rates,
        jumps,
    }
}

/// Coefficients of the phase-covariant master equation
/// −i[ω̃σ_z/2, ρ] + γ_z(σ_zρσ_z − ρ) + γ_+ D[σ_+] + γ_− D[σ_−].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcCoefficients {
    pub omega_tilde: f64,
    pub gamma_z: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl JcCoefficients {
    pub fn assemble(&self, time: f64) -> Generator {
        let transverse = -2.0 * self.gamma_z - 0.5 * (self.gamma_plus + self.gamma_minus);
        let mut g = Matrix4::zeros();
        g[(1, 1)] = transverse;
        g[(2, 2)] = transverse;
        g[(1, 2)] = -self.omega_tilde;
        g[(2, 1)] = self.omega_tilde;
        g[(3, 3)] = -(self.gamma_plus + self.gamma_minus);
        g[(3, 0)] = self.gamma_plus - self.gamma_minus;
        Generator { time, matrix: g }
    }

    /// Reads the coefficients back from the generator rebuilt from a split.
    pub fn from_split(split: &GeneratorSplit) -> Self {
        let g = split.to_transfer();
        let sum = -g[(3, 3)];
        let diff = g[(3, 0)];
        Self {
            omega_tilde: split.sigma_z_frequency(),
            gamma_z: -0.25 * (g[(1, 1)] + g[(2, 2)]) - 0.25 * sum,
            gamma_plus: 0.5 * (sum + diff),
            gamma_minus: 0.5 * (sum - diff),
        }
    }
}

/// ω̃(t) − ω along the grid from the σ_z coefficient of the emergent
/// Hamiltonian; non-invertible samples are recorded as singular.
pub fn larmor_frequency_exact(series: &MapSeries, params: &ModelParams) -> Result<ShiftProfile> {
    let mut profile = ShiftProfile::new(*params);
    for index in 0..series.len() {
        match frame_generator(series, index) {
            Ok(g) => {
                let split = minimal_dissipation_split(&g);
                let shift = split.sigma_z_frequency() + series.frame_omega - params.omega;
                profile.push(g.time, shift);
            }
            Err(TclError::Singular { t, .. }) => profile.push_singular(t),
            Err(e) => return Err(e),
        }
    }
    Ok(profile)
}
