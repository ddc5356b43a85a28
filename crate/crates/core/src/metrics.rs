//! Fidelity, concurrence, populations and purity of visible states.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::polarization::{
    noon_target, pauli_y, PureVisibleState, VisibleDensityMatrix, HH, PSI_MINUS, PSI_PLUS, VV,
};

/// Diagonal of the visible density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    #[serde(rename = "p_HH")]
    pub p_hh: f64,
    pub p_psi_plus: f64,
    #[serde(rename = "p_VV")]
    pub p_vv: f64,
    pub p_psi_minus: f64,
}

impl PopulationSummary {
    pub fn total(&self) -> f64 {
        self.p_hh + self.p_psi_plus + self.p_vv + self.p_psi_minus
    }
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity(rho: &VisibleDensityMatrix, target: &PureVisibleState) -> f64 {
    let v = target.amplitudes();
    (v.adjoint() * rho.matrix() * v)[(0, 0)].re.clamp(0.0, 1.0)
}

fn psd_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = m.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    eig.eigenvectors * Matrix4::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` between two mixed states.
pub fn state_fidelity(rho: &VisibleDensityMatrix, sigma: &VisibleDensityMatrix) -> f64 {
    let s = psd_sqrt(rho.matrix());
    let inner = s * sigma.matrix() * s;
    let inner = (inner + inner.adjoint()).scale(0.5);
    let tr: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    (tr * tr).clamp(0.0, 1.0)
}

/// Wootters concurrence of the two-qubit embedding of `ρ`.
///
/// With `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`, the `λᵢ` are the square roots of the
/// eigenvalues of `ρ ρ̃`, obtained here as the eigenvalues of the Hermitian
/// `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &VisibleDensityMatrix) -> f64 {
    let p = rho.to_product_basis();
    let yy = pauli_y().kronecker(&pauli_y());
    let flipped = yy * p.conjugate() * yy;
    let s = psd_sqrt(&p);
    let r = s * flipped * s;
    let r = (r + r.adjoint()).scale(0.5);
    let mut lambdas: Vec<f64> = r
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

pub fn populations(rho: &VisibleDensityMatrix) -> PopulationSummary {
    PopulationSummary {
        p_hh: rho.population(HH),
        p_psi_plus: rho.population(PSI_PLUS),
        p_vv: rho.population(VV),
        p_psi_minus: rho.population(PSI_MINUS),
    }
}

/// `Tr[ρ²]`.
pub fn purity(rho: &VisibleDensityMatrix) -> f64 {
    let m = rho.matrix();
    (m * m).trace().re
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fidelity_noon: f64,
    pub concurrence: f64,
    pub purity: f64,
    pub populations: PopulationSummary,
}

impl MetricsReport {
    pub fn of(rho: &VisibleDensityMatrix) -> Self {
        Self {
            fidelity_noon: fidelity(rho, &noon_target()),
            concurrence: concurrence(rho),
            purity: purity(rho),
            populations: populations(rho),
        }
    }
}

/// Diagonal state with the given coupled-basis populations.
pub fn diagonal_state(p: [f64; 4]) -> crate::Result<VisibleDensityMatrix> {
    VisibleDensityMatrix::try_new(Matrix4::from_diagonal(&Vector4::from_iterator(
        p.iter().map(|&x| C64::new(x, 0.0)),
    )))
}
