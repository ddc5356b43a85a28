//! Waveplate-rotated coincidence projectors and Poissonian count simulation.

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{
    two_photon_unitary, waveplate_unitary, JonesUnitary, VisibleDensityMatrix, WaveplateKind, HH,
    PSI_MINUS, PSI_PLUS,
};

const PROBABILITY_TOL: f64 = 1e-9;

/// Which coincidence the detectors register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectorKind {
    /// Both photons in H: `|H₁H₂⟩⟨H₁H₂|`.
    HH,
    /// One photon in each port: `|H₁V₂⟩⟨H₁V₂| + |V₁H₂⟩⟨V₁H₂|`.
    HV,
}

impl ProjectorKind {
    /// Unrotated projector in the coupled basis.
    pub fn projector(self) -> Matrix4<C64> {
        let mut p = Matrix4::zeros();
        let one = C64::new(1.0, 0.0);
        match self {
            ProjectorKind::HH => p[(HH, HH)] = one,
            ProjectorKind::HV => {
                p[(PSI_PLUS, PSI_PLUS)] = one;
                p[(PSI_MINUS, PSI_MINUS)] = one;
            }
        }
        p
    }
}

/// Half- and quarter-waveplate angles (degrees) plus the coincidence type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    #[serde(rename = "h_deg")]
    pub h: f64,
    #[serde(rename = "q_deg")]
    pub q: f64,
    #[serde(rename = "kind")]
    pub projector_kind: ProjectorKind,
}

impl MeasurementSetting {
    pub const fn new(h: f64, q: f64, projector_kind: ProjectorKind) -> Self {
        Self {
            h,
            q,
            projector_kind,
        }
    }

    /// `U = HWP(h) · QWP(q)`.
    pub fn waveplates(&self) -> JonesUnitary {
        waveplate_unitary(WaveplateKind::Half, self.h)
            * waveplate_unitary(WaveplateKind::Quarter, self.q)
    }
}

/// Observed coincidences for one setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    #[serde(flatten)]
    pub setting: MeasurementSetting,
    pub counts: u64,
    pub exposure: f64,
}

impl CountRecord {
    pub fn try_new(setting: MeasurementSetting, counts: u64, exposure: f64) -> Result<Self> {
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(Error::InvalidParameter {
                name: "exposure",
                reason: format!("{exposure} must be positive"),
            });
        }
        Ok(Self {
            setting,
            counts,
            exposure,
        })
    }
}

/// The ten settings of the tomography design, `P_A` read as `HH` and `P_B`
/// as `HV`.
pub fn table1_settings() -> Vec<MeasurementSetting> {
    use ProjectorKind::{HH, HV};
    vec![
        MeasurementSetting::new(0.0, 0.0, HH),
        MeasurementSetting::new(22.5, 45.0, HV),
        MeasurementSetting::new(45.0, 22.5, HH),
        MeasurementSetting::new(0.0, 0.0, HV),
        MeasurementSetting::new(22.5, 0.0, HH),
        MeasurementSetting::new(11.25, 0.0, HH),
        MeasurementSetting::new(22.5, 0.0, HV),
        MeasurementSetting::new(45.0, 0.0, HH),
        MeasurementSetting::new(0.0, 22.5, HV),
        MeasurementSetting::new(22.5, 22.5, HH),
    ]
}

/// `W P W†` with `W = U ⊗ U` in the coupled basis.
pub fn detection_operator(setting: &MeasurementSetting) -> Matrix4<C64> {
    let w = two_photon_unitary(&setting.waveplates());
    let o = w * setting.projector_kind.projector() * w.adjoint();
    (o + o.adjoint()).scale(0.5)
}

/// `Tr[ρ O]` for a real-valued probability; values within 1e-9 outside
/// `[0, 1]` are clamped, anything further out is an error.
pub fn born_probability(rho: &VisibleDensityMatrix, setting: &MeasurementSetting) -> Result<f64> {
    probability_from_operator(rho, &detection_operator(setting))
}

pub(crate) fn probability_from_operator(
    rho: &VisibleDensityMatrix,
    op: &Matrix4<C64>,
) -> Result<f64> {
    let p = rho.expectation(op).re;
    if !(-PROBABILITY_TOL..=1.0 + PROBABILITY_TOL).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Draws Poisson counts with mean `flux · exposure · p` for each setting
/// (unit exposure). The generator is owned by the call, so equal seeds give
/// equal records.
pub fn simulate_counts(
    rho: &VisibleDensityMatrix,
    settings: &[MeasurementSetting],
    flux: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    let exposed: Vec<_> = settings.iter().map(|s| (*s, 1.0)).collect();
    simulate_counts_with_exposure(rho, &exposed, flux, seed)
}

pub fn simulate_counts_with_exposure(
    rho: &VisibleDensityMatrix,
    settings: &[(MeasurementSetting, f64)],
    flux: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if !(flux > 0.0) || !flux.is_finite() {
        return Err(Error::InvalidParameter {
            name: "flux",
            reason: format!("{flux} must be positive"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    settings
        .iter()
        .map(|&(setting, exposure)| {
            let mean = flux * exposure * born_probability(rho, &setting)?;
            let counts = if mean > 0.0 {
                let poisson = Poisson::new(mean).map_err(|e| Error::InvalidParameter {
                    name: "flux",
                    reason: e.to_string(),
                })?;
                poisson.sample(&mut rng) as u64
            } else {
                0
            };
            CountRecord::try_new(setting, counts, exposure)
        })
        .collect()
}

/// Counts equal to the rounded expectation, for noiseless round trips.
pub fn expected_counts(
    rho: &VisibleDensityMatrix,
    settings: &[MeasurementSetting],
    flux: f64,
) -> Result<Vec<CountRecord>> {
    settings
        .iter()
        .map(|s| {
            let p = born_probability(rho, s)?;
            CountRecord::try_new(*s, (flux * p).round() as u64, 1.0)
        })
        .collect()
}
