//! Visible (polarization) two-photon states and the collective operations
//! that can act on them.
//!
//! Everything here works in the coupled basis `[HH, ψ⁺, VV, ψ⁻]` with
//! `|ψ±⟩ = (|H₁V₂⟩ ± |V₁H₂⟩)/√2`. The first three vectors span the
//! exchange-symmetric subspace, `ψ⁻` spans the antisymmetric one. Product
//! basis matrices use the order `[HH, HV, VH, VV]`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of `|HH⟩` in the coupled basis.
pub const HH: usize = 0;
/// Index of `|ψ⁺⟩` in the coupled basis.
pub const PSI_PLUS: usize = 1;
/// Index of `|VV⟩` in the coupled basis.
pub const VV: usize = 2;
/// Index of `|ψ⁻⟩` in the coupled basis.
pub const PSI_MINUS: usize = 3;

/// Labels of the coupled basis, in storage order.
pub const BASIS_LABELS: [&str; 4] = ["HH", "psi_plus", "VV", "psi_minus"];

/// Tolerance used when validating a [`VisibleDensityMatrix`].
pub const STATE_TOL: f64 = 1e-9;
/// Largest symmetric↔antisymmetric coherence that is silently zeroed.
pub const BLOCK_TOL: f64 = 1e-10;

const UNITARY_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.))
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.))
}

/// Columns are the coupled basis vectors written in the product basis.
pub fn coupling_matrix() -> Matrix4<C64> {
    let s = c(FRAC_1_SQRT_2, 0.0);
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        o, z, z, z,
        z, s, z, s,
        z, s, z, -s,
        z, z, o, z,
    );
    m
}

/// Similarity transform from the product basis `[HH, HV, VH, VV]` to the
/// coupled basis `[HH, ψ⁺, VV, ψ⁻]`.
pub fn product_to_coupled(m: &Matrix4<C64>) -> Matrix4<C64> {
    let cm = coupling_matrix();
    cm.adjoint() * m * cm
}

/// Inverse of [`product_to_coupled`].
pub fn coupled_to_product(m: &Matrix4<C64>) -> Matrix4<C64> {
    let cm = coupling_matrix();
    cm * m * cm.adjoint()
}

/// Largest magnitude among the symmetric↔antisymmetric coherences.
pub fn off_block_magnitude(m: &Matrix4<C64>) -> f64 {
    (0..3)
        .flat_map(|i| [m[(i, PSI_MINUS)].norm(), m[(PSI_MINUS, i)].norm()])
        .fold(0.0, f64::max)
}

fn zero_off_block(m: &mut Matrix4<C64>) {
    for i in 0..3 {
        m[(i, PSI_MINUS)] = C64::new(0.0, 0.0);
        m[(PSI_MINUS, i)] = C64::new(0.0, 0.0);
    }
}

fn max_abs(m: &Matrix4<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Two-photon polarization density matrix with no coherences between the
/// symmetric and antisymmetric subspaces.
///
/// The symmetric↔antisymmetric entries are stored as exact zeros. Instances
/// built with [`VisibleDensityMatrix::try_new`] are also positive
/// semidefinite; [`VisibleDensityMatrix::try_new_indefinite`] skips that
/// check for linear-inversion estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibleDensityMatrix {
    m: Matrix4<C64>,
}

impl VisibleDensityMatrix {
    /// Validates a coupled-basis matrix as a physical visible state.
    pub fn try_new(m: Matrix4<C64>) -> Result<Self> {
        let rho = Self::try_new_indefinite(m)?;
        let min = rho
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Like [`try_new`](Self::try_new) but without the positivity check.
    pub fn try_new_indefinite(mut m: Matrix4<C64>) -> Result<Self> {
        let herm = max_abs(&(m - m.adjoint()));
        if herm > STATE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let off = off_block_magnitude(&m);
        if off > BLOCK_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "symmetric/antisymmetric coherence {off:e}"
            )));
        }
        zero_off_block(&mut m);
        m = (m + m.adjoint()).scale(0.5);
        Ok(Self { m })
    }

    /// Builds a state from a symmetric 3×3 block and the ψ⁻ population.
    pub fn from_blocks(symmetric: &Matrix3<C64>, psi_minus: f64) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(symmetric);
        m[(PSI_MINUS, PSI_MINUS)] = C64::new(psi_minus, 0.0);
        Self::try_new(m)
    }

    pub fn from_pure(state: &PureVisibleState) -> Self {
        let v = state.amplitudes();
        let mut m = v * v.adjoint();
        zero_off_block(&mut m);
        Self {
            m: (m + m.adjoint()).scale(0.5),
        }
    }

    /// Convex combination of valid states; weights must be non-negative and
    /// sum to one.
    pub fn mixture(parts: &[(f64, &VisibleDensityMatrix)]) -> Result<Self> {
        if parts.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "negative mixture weight".into(),
            });
        }
        let m = parts
            .iter()
            .fold(Matrix4::zeros(), |acc, (w, rho)| acc + rho.m.scale(*w));
        Self::try_new(m)
    }

    /// `diag(1/4, 1/4, 1/4, 1/4)`.
    pub fn maximally_mixed() -> Self {
        Self {
            m: Matrix4::identity().scale(0.25),
        }
    }

    /// `(1 - strength) ρ + strength · I/4`.
    pub fn depolarize(&self, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidParameter {
                name: "strength",
                reason: format!("{strength} not in [0, 1]"),
            });
        }
        Ok(Self {
            m: self.m.scale(1.0 - strength) + Matrix4::identity().scale(0.25 * strength),
        })
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn population(&self, index: usize) -> f64 {
        self.m[(index, index)].re
    }

    pub fn symmetric_block(&self) -> Matrix3<C64> {
        self.m.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Eigenvalues, symmetric block first (ascending) then the ψ⁻ population.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut sym: Vec<f64> = self
            .symmetric_block()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        sym.sort_by(f64::total_cmp);
        [sym[0], sym[1], sym[2], self.population(PSI_MINUS)]
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.eigenvalues().iter().all(|&l| l >= -tol)
    }

    /// Nearest PSD state under eigenvalue clipping: negative eigenvalues of
    /// each block are set to exactly zero and the trace renormalized.
    pub fn project_psd(&self) -> Result<Self> {
        let eig = self.symmetric_block().symmetric_eigen();
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let vecs = eig.eigenvectors;
        let sym =
            vecs * Matrix3::from_diagonal(&clipped.map(|l| C64::new(l, 0.0))) * vecs.adjoint();
        let minus = self.population(PSI_MINUS).max(0.0);
        let total = clipped.sum() + minus;
        if total <= 0.0 {
            return Err(Error::InvalidDensityMatrix(
                "no positive spectral weight to renormalize".into(),
            ));
        }
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&sym.unscale(total));
        m[(PSI_MINUS, PSI_MINUS)] = C64::new(minus / total, 0.0);
        Self::try_new(m)
    }

    /// Matrix in the product basis `[HH, HV, VH, VV]`.
    pub fn to_product_basis(&self) -> Matrix4<C64> {
        coupled_to_product(&self.m)
    }

    /// `Tr[ρ B]` for a coupled-basis operator `B`.
    pub fn expectation(&self, op: &Matrix4<C64>) -> C64 {
        (self.m * op).trace()
    }
}

impl fmt::Display for VisibleDensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            write!(f, "{:>9} ", BASIS_LABELS[i])?;
            for j in 0..4 {
                let z = self.m[(i, j)];
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Normalized pure state in the coupled basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureVisibleState {
    amplitudes: Vector4<C64>,
}

impl PureVisibleState {
    pub fn try_new(amplitudes: Vector4<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// The coupled basis vector with the given index.
    pub fn basis(index: usize) -> Self {
        let mut amplitudes = Vector4::zeros();
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.amplitudes
    }

    pub fn density(&self) -> VisibleDensityMatrix {
        VisibleDensityMatrix::from_pure(self)
    }
}

/// The polarization 2-NOON state `(|HH⟩ + |VV⟩)/√2`.
pub fn noon_target() -> PureVisibleState {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    PureVisibleState {
        amplitudes: Vector4::new(s, z, s, z),
    }
}

/// Single-photon polarization unitary (Jones matrix up to global phase).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesUnitary(Matrix2<C64>);

impl JonesUnitary {
    pub fn try_new(m: Matrix2<C64>) -> Result<Self> {
        let dev = (m * m.adjoint() - Matrix2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > UNITARY_TOL {
            return Err(Error::InvalidParameter {
                name: "unitary",
                reason: format!("U U† deviates from identity by {dev:e}"),
            });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn determinant(&self) -> C64 {
        self.0.determinant()
    }
}

impl Mul for JonesUnitary {
    type Output = JonesUnitary;

    fn mul(self, rhs: JonesUnitary) -> JonesUnitary {
        JonesUnitary(self.0 * rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveplateKind {
    Half,
    Quarter,
}

impl WaveplateKind {
    fn retardance(self) -> f64 {
        match self {
            WaveplateKind::Half => std::f64::consts::PI,
            WaveplateKind::Quarter => std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Waveplate with its axis at `angle_deg`:
/// `exp[i(Γ/2)(σ_z cos 2θ − σ_x sin 2θ)]` with Γ = π (half) or π/2 (quarter).
pub fn waveplate_unitary(kind: WaveplateKind, angle_deg: f64) -> JonesUnitary {
    let two_theta = 2.0 * angle_deg.to_radians();
    // n·σ squares to the identity, so the exponential is cos + i sin (n·σ).
    let axis = pauli_z().scale(two_theta.cos()) - pauli_x().scale(two_theta.sin());
    let half = 0.5 * kind.retardance();
    let m = Matrix2::identity().scale(half.cos()) + axis * C64::new(0.0, half.sin());
    JonesUnitary(m)
}

/// Real rotation of the polarization frame by `angle_deg`.
pub fn rotation(angle_deg: f64) -> JonesUnitary {
    let (s, co) = angle_deg.to_radians().sin_cos();
    JonesUnitary(Matrix2::new(c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)))
}

/// Collective action `U ⊗ U` expressed in the coupled basis.
///
/// The result is block diagonal: a 3×3 block on `{HH, ψ⁺, VV}` and the
/// scalar `det U` on `ψ⁻`.
pub fn two_photon_unitary(u: &JonesUnitary) -> Matrix4<C64> {
    let mut m = product_to_coupled(&u.0.kronecker(&u.0));
    zero_off_block(&mut m);
    m
}

/// `(U ⊗ U) ρ (U ⊗ U)†`.
pub fn apply_unitary(rho: &VisibleDensityMatrix, u: &JonesUnitary) -> VisibleDensityMatrix {
    let w = two_photon_unitary(u);
    let mut m = w * rho.m * w.adjoint();
    zero_off_block(&mut m);
    VisibleDensityMatrix {
        m: (m + m.adjoint()).scale(0.5),
    }
}

/// Rotates the frame by `axis_deg`, then averages `(R(φ)⊗R(φ)) ρ (·)†` over a
/// zero-mean Gaussian phase φ with standard deviation `phase_stdev`, where
/// `R(φ) = diag(1, e^{iφ})`.
///
/// Under `R(φ)⊗R(φ)` the coupled basis picks up phases `0, φ, 2φ, φ`, so each
/// coherence is scaled by the Gaussian characteristic function of its phase
/// difference: `e^{-2s²}` for HH↔VV and `e^{-s²/2}` for HH↔ψ⁺ and ψ⁺↔VV.
pub fn collective_dephasing(
    rho: &VisibleDensityMatrix,
    phase_stdev: f64,
    axis_deg: f64,
) -> Result<VisibleDensityMatrix> {
    if !(phase_stdev >= 0.0) || !phase_stdev.is_finite() {
        return Err(Error::InvalidParameter {
            name: "phase_stdev",
            reason: format!("{phase_stdev} must be finite and non-negative"),
        });
    }
    let rotated = if axis_deg == 0.0 {
        rho.clone()
    } else {
        apply_unitary(rho, &rotation(axis_deg))
    };
    // Phase picked up by each coupled basis state, in units of φ.
    const ORDER: [f64; 4] = [0.0, 1.0, 2.0, 1.0];
    let var = phase_stdev * phase_stdev;
    let mut m = rotated.m;
    for i in 0..4 {
        for j in 0..4 {
            let dk = ORDER[i] - ORDER[j];
            m[(i, j)] *= (-0.5 * dk * dk * var).exp();
        }
    }
    Ok(VisibleDensityMatrix { m })
}

/// The quarter-wave plate at 45° that maps `|1_H, 1_V⟩` onto the NOON state.
pub fn noon_converter() -> JonesUnitary {
    waveplate_unitary(WaveplateKind::Quarter, 45.0)
}
