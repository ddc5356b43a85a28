//! First-quantized two-photon states over polarization ⊗ hidden modes.
//!
//! A single photon lives in `C² ⊗ C^D` with single-particle index
//! `a = p·D + h` (p = 0 for H, 1 for V; h the hidden mode). A two-photon
//! amplitude vector is indexed by `a₁·2D + a₂`. Bosonic states are
//! invariant under exchange of the two particle labels.

use nalgebra::{DMatrix, DVector, Matrix4, Vector2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::polarization::{
    coupled_to_product, off_block_magnitude, product_to_coupled, VisibleDensityMatrix, BLOCK_TOL,
};

const NORM_TOL: f64 = 1e-12;
const FULL_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-9;

pub fn horizontal() -> Vector2<C64> {
    Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
}

pub fn vertical() -> Vector2<C64> {
    Vector2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
}

/// A finite orthonormal set of hidden modes (e.g. arrival-time bins).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HiddenModeBasis {
    dimension: usize,
}

impl HiddenModeBasis {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::HiddenDimension {
                required: 1,
                found: 0,
            });
        }
        Ok(Self { dimension })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The `k`-th hidden basis vector.
    pub fn mode(&self, k: usize) -> Result<DVector<C64>> {
        if k >= self.dimension {
            return Err(Error::HiddenDimension {
                required: k + 1,
                found: self.dimension,
            });
        }
        let mut v = DVector::zeros(self.dimension);
        v[k] = C64::new(1.0, 0.0);
        Ok(v)
    }
}

/// One photon: a polarization vector times a hidden-mode vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SinglePhotonMode {
    polarization: Vector2<C64>,
    hidden: DVector<C64>,
}

impl SinglePhotonMode {
    pub fn try_new(polarization: Vector2<C64>, hidden: DVector<C64>) -> Result<Self> {
        for n in [polarization.norm(), hidden.norm()] {
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized(n));
            }
        }
        if hidden.is_empty() {
            return Err(Error::HiddenDimension {
                required: 1,
                found: 0,
            });
        }
        Ok(Self {
            polarization,
            hidden,
        })
    }

    pub fn polarization(&self) -> &Vector2<C64> {
        &self.polarization
    }

    pub fn hidden(&self) -> &DVector<C64> {
        &self.hidden
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.len()
    }

    /// Single-particle vector in `C² ⊗ C^D`.
    fn ket(&self) -> DVector<C64> {
        let d = self.hidden.len();
        DVector::from_fn(2 * d, |a, _| self.polarization[a / d] * self.hidden[a % d])
    }
}

/// Exchange `(a₁, a₂) → (a₂, a₁)` of a two-particle index.
fn swapped(index: usize, n: usize) -> usize {
    (index % n) * n + index / n
}

/// Pure bosonic two-photon state over the full `(2D)²` product space.
#[derive(Clone, Debug, PartialEq)]
pub struct FullTwoPhotonState {
    hidden_dim: usize,
    amplitudes: DVector<C64>,
}

impl FullTwoPhotonState {
    /// Validates length, normalization and exchange symmetry.
    pub fn from_amplitudes(hidden_dim: usize, amplitudes: DVector<C64>) -> Result<Self> {
        let n = 2 * HiddenModeBasis::new(hidden_dim)?.dimension();
        if amplitudes.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        let asym = (0..n * n)
            .map(|i| (amplitudes[i] - amplitudes[swapped(i, n)]).norm())
            .fold(0.0, f64::max);
        if asym > FULL_TOL {
            return Err(Error::NotBosonic(asym));
        }
        Ok(Self {
            hidden_dim,
            amplitudes,
        })
    }

    /// Projects an arbitrary two-particle vector onto the exchange-symmetric
    /// subspace and normalizes it.
    pub fn project_symmetric(hidden_dim: usize, raw: &DVector<C64>) -> Result<Self> {
        let n = 2 * HiddenModeBasis::new(hidden_dim)?.dimension();
        if raw.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: raw.len(),
            });
        }
        let sym = DVector::from_fn(n * n, |i, _| raw[i] + raw[swapped(i, n)]);
        let norm = sym.norm();
        if norm < 1e-300 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            hidden_dim,
            amplitudes: sym.unscale(norm),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// Amplitude for photon 1 in `(p₁, h₁)` and photon 2 in `(p₂, h₂)`.
    pub fn amplitude(&self, p1: usize, h1: usize, p2: usize, h2: usize) -> C64 {
        let d = self.hidden_dim;
        let n = 2 * d;
        self.amplitudes[(p1 * d + h1) * n + p2 * d + h2]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Normalized `(|a⟩|b⟩ + |b⟩|a⟩)`. Identical photons give `|a⟩|a⟩`.
pub fn symmetrize(a: &SinglePhotonMode, b: &SinglePhotonMode) -> Result<FullTwoPhotonState> {
    if a.hidden_dim() != b.hidden_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.hidden_dim(),
            found: b.hidden_dim(),
        });
    }
    let (ka, kb) = (a.ket(), b.ket());
    let n = ka.len();
    let v = DVector::from_fn(n * n, |i, _| {
        let (i1, i2) = (i / n, i % n);
        ka[i1] * kb[i2] + kb[i1] * ka[i2]
    });
    let norm = v.norm();
    // |a⊗b + b⊗a|² = 2 + 2|⟨a|b⟩|² ≥ 2 for normalized inputs.
    if norm < 1.0 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(FullTwoPhotonState {
        hidden_dim: a.hidden_dim(),
        amplitudes: v.unscale(norm),
    })
}

/// `γ = exp(−delay² / (2 τ_c²))`, the overlap of two identical Gaussian
/// wavepackets separated by `delay`.
pub fn gaussian_overlap(delay: f64, coherence_time: f64) -> Result<C64> {
    if !(coherence_time > 0.0) {
        return Err(Error::InvalidParameter {
            name: "coherence_time",
            reason: format!("{coherence_time} must be positive"),
        });
    }
    let x = delay / coherence_time;
    Ok(C64::new((-0.5 * x * x).exp(), 0.0))
}

/// Two photons with the given polarizations whose hidden vectors overlap by
/// `γ(delay)`: the first in `e₀`, the second in `γ e₀ + √(1−γ²) e₁`.
pub fn mode_pair_from_delay(
    polarizations: (Vector2<C64>, Vector2<C64>),
    delay: f64,
    coherence_time: f64,
    hidden_dim: usize,
) -> Result<(SinglePhotonMode, SinglePhotonMode)> {
    let gamma = gaussian_overlap(delay, coherence_time)?.re;
    let basis = HiddenModeBasis::new(hidden_dim)?;
    let e0 = basis.mode(0)?;
    let second = if gamma >= 1.0 {
        e0.clone()
    } else {
        if hidden_dim < 2 {
            return Err(Error::HiddenDimension {
                required: 2,
                found: hidden_dim,
            });
        }
        let e1 = basis.mode(1)?;
        e0.scale(gamma) + e1.scale((1.0 - gamma * gamma).sqrt())
    };
    Ok((
        SinglePhotonMode::try_new(polarizations.0, e0)?,
        SinglePhotonMode::try_new(polarizations.1, second)?,
    ))
}

/// Mixed two-photon state `ρ = Σ_j w_j |ψ_j⟩⟨ψ_j|` over the full space.
#[derive(Clone, Debug, PartialEq)]
pub struct FullDensityMatrix {
    hidden_dim: usize,
    matrix: DMatrix<C64>,
}

impl FullDensityMatrix {
    pub fn from_pure(state: &FullTwoPhotonState) -> Self {
        let v = &state.amplitudes;
        Self {
            hidden_dim: state.hidden_dim,
            matrix: v * v.adjoint(),
        }
    }

    /// Weighted mixture of bosonic pure states; weights are normalized.
    pub fn from_mixture(parts: &[(f64, FullTwoPhotonState)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::InvalidParameter {
            name: "parts",
            reason: "empty mixture".into(),
        })?;
        let hidden_dim = first.1.hidden_dim;
        let n2 = first.1.amplitudes.len();
        let mut total = 0.0;
        let mut matrix = DMatrix::zeros(n2, n2);
        for (w, psi) in parts {
            if psi.hidden_dim != hidden_dim {
                return Err(Error::DimensionMismatch {
                    expected: hidden_dim,
                    found: psi.hidden_dim,
                });
            }
            if !(*w >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("negative weight {w}"),
                });
            }
            matrix += (&psi.amplitudes * psi.amplitudes.adjoint()).scale(*w);
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "weights sum to zero".into(),
            });
        }
        Ok(Self {
            hidden_dim,
            matrix: matrix.unscale(total),
        })
    }

    /// Validates an explicit matrix: Hermitian, unit trace, PSD and
    /// supported on the exchange-symmetric subspace.
    pub fn try_new(hidden_dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let n = 2 * HiddenModeBasis::new(hidden_dim)?.dimension();
        if matrix.nrows() != n * n || matrix.ncols() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: matrix.nrows(),
            });
        }
        let herm = (&matrix - matrix.adjoint()).camax();
        if herm > FULL_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > FULL_TOL || tr.im.abs() > FULL_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        // Support on the symmetric subspace ⇔ S ρ = ρ with S the exchange.
        let asym = (0..n * n)
            .flat_map(|i| (0..n * n).map(move |j| (i, j)))
            .map(|(i, j)| (matrix[(swapped(i, n), j)] - matrix[(i, j)]).norm())
            .fold(0.0, f64::max);
        if asym > FULL_TOL {
            return Err(Error::NotBosonic(asym));
        }
        let min = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { hidden_dim, matrix })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// `Tr_hid[ρ]` in the coupled basis, before any block cleanup.
pub fn partial_trace_hidden_raw(rho: &FullDensityMatrix) -> Matrix4<C64> {
    let d = rho.hidden_dim;
    let n = 2 * d;
    let idx = |p1: usize, h1: usize, p2: usize, h2: usize| (p1 * d + h1) * n + p2 * d + h2;
    let product = Matrix4::from_fn(|r, c| {
        let (p1, p2) = (r / 2, r % 2);
        let (q1, q2) = (c / 2, c % 2);
        let mut acc = C64::new(0.0, 0.0);
        for h1 in 0..d {
            for h2 in 0..d {
                acc += rho.matrix[(idx(p1, h1, p2, h2), idx(q1, h1, q2, h2))];
            }
        }
        acc
    });
    product_to_coupled(&product)
}

/// Visible density matrix `ρ_vis = Tr_hid[ρ]`.
///
/// Symmetric↔antisymmetric coherences must vanish for bosonic input; they
/// are checked against the block tolerance and then zeroed exactly.
pub fn partial_trace_hidden(rho: &FullDensityMatrix) -> Result<VisibleDensityMatrix> {
    let m = partial_trace_hidden_raw(rho);
    let off = off_block_magnitude(&m);
    if off > BLOCK_TOL {
        return Err(Error::NotBosonic(off));
    }
    VisibleDensityMatrix::try_new(m)
}

/// `Tr[ρ (B_vis ⊗ I_hid)]` evaluated on the full space.
///
/// `b_vis` is given in the coupled basis. The full operator is assembled
/// explicitly so this path shares no code with [`partial_trace_hidden`].
pub fn born_full(rho: &FullDensityMatrix, b_vis: &Matrix4<C64>) -> f64 {
    let d = rho.hidden_dim;
    let n = 2 * d;
    let b = coupled_to_product(b_vis);
    let op = DMatrix::from_fn(n * n, n * n, |r, c| {
        let (a1, a2) = (r / n, r % n);
        let (b1, b2) = (c / n, c % n);
        if a1 % d != b1 % d || a2 % d != b2 % d {
            return C64::new(0.0, 0.0);
        }
        b[((a1 / d) * 2 + a2 / d, (b1 / d) * 2 + b2 / d)]
    });
    (&rho.matrix * op).trace().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{PSI_MINUS, PSI_PLUS};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn mode(pol: Vector2<C64>, d: usize, k: usize) -> SinglePhotonMode {
        SinglePhotonMode::try_new(pol, HiddenModeBasis::new(d).unwrap().mode(k).unwrap()).unwrap()
    }

    fn visible(a: &SinglePhotonMode, b: &SinglePhotonMode) -> VisibleDensityMatrix {
        let psi = symmetrize(a, b).unwrap();
        partial_trace_hidden(&FullDensityMatrix::from_pure(&psi)).unwrap()
    }

    #[test]
    fn same_hidden_mode_gives_psi_plus() {
        let psi = symmetrize(&mode(horizontal(), 2, 0), &mode(vertical(), 2, 0)).unwrap();
        // (|H0 V0⟩ + |V0 H0⟩)/√2
        assert!((psi.amplitude(0, 0, 1, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((psi.amplitude(1, 0, 0, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        let rho = visible(&mode(horizontal(), 2, 0), &mode(vertical(), 2, 0));
        assert!((rho.population(PSI_PLUS) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_photons_are_a_product() {
        let a = mode(horizontal(), 3, 1);
        let psi = symmetrize(&a, &a).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        assert!((psi.amplitude(0, 1, 0, 1).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_bins_split_evenly() {
        let (a, b) = (mode(horizontal(), 2, 0), mode(vertical(), 2, 1));
        let psi = symmetrize(&a, &b).unwrap();
        // Direct expansion: (|H0⟩|V1⟩ + |V1⟩|H0⟩)/√2 has ψ± parts of equal weight.
        let s = FRAC_1_SQRT_2;
        assert!((psi.amplitude(0, 0, 1, 1).re - s).abs() < 1e-15);
        assert!((psi.amplitude(1, 1, 0, 0).re - s).abs() < 1e-15);
        let rho = visible(&a, &b);
        assert!((rho.population(PSI_PLUS) - 0.5).abs() < 1e-15);
        assert!((rho.population(PSI_MINUS) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_rejects_mismatched_hidden_dims() {
        assert!(symmetrize(&mode(horizontal(), 2, 0), &mode(vertical(), 3, 0)).is_err());
    }

    #[test]
    fn overlap_formula() {
        assert_eq!(gaussian_overlap(0.0, 1.0).unwrap().re, 1.0);
        assert!(gaussian_overlap(1e3, 1.0).unwrap().re < 1e-300);
        assert!((gaussian_overlap(2.5, 2.5).unwrap().re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gaussian_overlap(-2.5, 2.5).unwrap().re - 0.6065306597126334).abs() < 1e-15);
        assert!(gaussian_overlap(1.0, 0.0).is_err());
        assert!(gaussian_overlap(1.0, -1.0).is_err());
    }

    #[test]
    fn mode_pair_overlap_matches_gamma() {
        for delay in [0.0, 20.0, 75.0, 100.0, 250.0, 5000.0] {
            let (a, b) = mode_pair_from_delay((horizontal(), vertical()), delay, 100.0, 2).unwrap();
            let overlap = a.hidden().dotc(b.hidden());
            let gamma = gaussian_overlap(delay, 100.0).unwrap();
            assert!((overlap - gamma).norm() < 1e-12);
        }
        let (a, b) = mode_pair_from_delay((horizontal(), vertical()), 0.0, 1.0, 2).unwrap();
        assert_eq!(a.hidden(), b.hidden());
        assert!(mode_pair_from_delay((horizontal(), vertical()), 1.0, 1.0, 1).is_err());
        assert!(mode_pair_from_delay((horizontal(), vertical()), 0.0, 1.0, 1).is_ok());
    }

    #[test]
    fn psi_minus_population_follows_overlap() {
        // γ = 0.6 gives P(ψ±) = (1 ± 0.36)/2.
        let tau = 1.0;
        let delay = tau * (-2.0 * 0.6f64.ln()).sqrt();
        let (a, b) = mode_pair_from_delay((horizontal(), vertical()), delay, tau, 2).unwrap();
        let rho = visible(&a, &b);
        assert!((rho.population(PSI_PLUS) - 0.68).abs() < 1e-12);
        assert!((rho.population(PSI_MINUS) - 0.32).abs() < 1e-12);
    }

    #[test]
    fn born_full_examples() {
        let (a, b) = (mode(horizontal(), 2, 0), mode(vertical(), 2, 1));
        let rho = FullDensityMatrix::from_pure(&symmetrize(&a, &b).unwrap());
        assert!((born_full(&rho, &Matrix4::identity()) - 1.0).abs() < 1e-14);
        let mut singlet = Matrix4::zeros();
        singlet[(PSI_MINUS, PSI_MINUS)] = C64::new(1.0, 0.0);
        assert!((born_full(&rho, &singlet) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn full_matrix_validation() {
        let (a, b) = (mode(horizontal(), 2, 0), mode(vertical(), 2, 1));
        let rho = FullDensityMatrix::from_pure(&symmetrize(&a, &b).unwrap());
        assert!(FullDensityMatrix::try_new(2, rho.matrix().clone()).is_ok());

        // |H0⟩|V1⟩ alone is not exchange symmetric.
        let mut raw = DVector::zeros(16);
        raw[4 + 2 + 1] = C64::new(1.0, 0.0);
        let m = &raw * raw.adjoint();
        assert!(matches!(
            FullDensityMatrix::try_new(2, m),
            Err(Error::NotBosonic(_))
        ));
        assert!(matches!(
            FullTwoPhotonState::from_amplitudes(2, raw.clone()),
            Err(Error::NotBosonic(_))
        ));
        assert!(FullTwoPhotonState::project_symmetric(2, &raw).is_ok());
    }

    #[test]
    fn single_hidden_mode_has_no_singlet() {
        let raw = DVector::from_fn(16, |i, _| {
            C64::new((i as f64).sin(), (i as f64 * 0.7).cos())
        });
        let psi =
            FullTwoPhotonState::project_symmetric(1, &DVector::from_fn(4, |i, _| raw[i])).unwrap();
        let rho = partial_trace_hidden(&FullDensityMatrix::from_pure(&psi)).unwrap();
        assert_eq!(rho.population(PSI_MINUS), 0.0);
        assert!(psi.amplitude(0, 0, 1, 0) == psi.amplitude(1, 0, 0, 0));
    }
}
