//! Reconstruction of the visible density matrix from coincidence counts.
//!
//! The block-structured state space has ten real parameters: the Hermitian
//! 3×3 symmetric block (3 populations, 3 complex coherences) and the ψ⁻
//! population. Three estimators are provided:
//!
//! * [`linear_reconstruct`]: least-squares inversion of the Born rule, flux
//!   absorbed into the parameters and recovered from the trace;
//! * [`mle_reconstruct`]: Poisson maximum likelihood over `ρ = T†T / Tr T†T`
//!   with a block lower-triangular `T`, so every estimate is physical;
//! * [`naive_symmetric_reconstruct`]: the linear fit restricted to the
//!   symmetric block, i.e. tomography that assumes indistinguishable photons.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    detection_operator, probability_from_operator, CountRecord, MeasurementSetting,
};
use crate::optim::Lbfgs;
use crate::polarization::{VisibleDensityMatrix, HH, PSI_MINUS, PSI_PLUS, VV};

/// Real parameters of a block-structured visible state.
pub const STATE_PARAMS: usize = 10;
/// State parameters plus the log-flux.
pub const MLE_PARAMS: usize = STATE_PARAMS + 1;

const RANK_TOL: f64 = 1e-10;

/// Off-diagonal positions of the symmetric block, in parameter order.
const COHERENCES: [(usize, usize); 3] = [(HH, PSI_PLUS), (HH, VV), (PSI_PLUS, VV)];

/// Hermitian basis element `E_k`. Order: `ρ_HH,HH`, `ρ_ψ⁺ψ⁺`, `ρ_VV,VV`,
/// then real and imaginary parts of `ρ_HH,ψ⁺`, `ρ_HH,VV`, `ρ_ψ⁺,VV`, and
/// finally `ρ_ψ⁻ψ⁻`.
pub fn basis_element(k: usize) -> Matrix4<C64> {
    let mut e = Matrix4::zeros();
    let one = C64::new(1.0, 0.0);
    match k {
        0..=2 => e[([HH, PSI_PLUS, VV][k], [HH, PSI_PLUS, VV][k])] = one,
        3..=8 => {
            let (i, j) = COHERENCES[(k - 3) / 2];
            let z = if (k - 3).is_multiple_of(2) {
                one
            } else {
                C64::new(0.0, 1.0)
            };
            e[(i, j)] = z;
            e[(j, i)] = z.conj();
        }
        9 => e[(PSI_MINUS, PSI_MINUS)] = one,
        _ => panic!("basis index {k} out of range"),
    }
    e
}

/// Matrix `Σ_k θ_k E_k`.
pub fn matrix_from_params(theta: &[f64]) -> Matrix4<C64> {
    theta
        .iter()
        .enumerate()
        .fold(Matrix4::zeros(), |acc, (k, &t)| {
            acc + basis_element(k).scale(t)
        })
}

/// Inverse of [`matrix_from_params`] for block-structured Hermitian input.
pub fn params_from_matrix(m: &Matrix4<C64>) -> [f64; STATE_PARAMS] {
    let mut theta = [0.0; STATE_PARAMS];
    theta[0] = m[(HH, HH)].re;
    theta[1] = m[(PSI_PLUS, PSI_PLUS)].re;
    theta[2] = m[(VV, VV)].re;
    for (n, &(i, j)) in COHERENCES.iter().enumerate() {
        theta[3 + 2 * n] = m[(i, j)].re;
        theta[4 + 2 * n] = m[(i, j)].im;
    }
    theta[9] = m[(PSI_MINUS, PSI_MINUS)].re;
    theta
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Linear map from state parameters to detection probabilities.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    settings: Vec<MeasurementSetting>,
    rows: DMatrix<f64>,
    rank: usize,
}

impl DesignMatrix {
    pub fn settings(&self) -> &[MeasurementSetting] {
        &self.settings
    }

    /// `rows[(s, k)] = Tr[E_k O_s]`.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_complete(&self) -> bool {
        self.rank == STATE_PARAMS
    }
}

/// Builds the design matrix. A design with at least ten settings must be
/// tomographically complete.
pub fn build_design_matrix(settings: &[MeasurementSetting]) -> Result<DesignMatrix> {
    if settings.is_empty() {
        return Err(Error::InvalidParameter {
            name: "settings",
            reason: "empty measurement design".into(),
        });
    }
    let basis: Vec<_> = (0..STATE_PARAMS).map(basis_element).collect();
    let ops: Vec<_> = settings.iter().map(detection_operator).collect();
    let rows = DMatrix::from_fn(settings.len(), STATE_PARAMS, |s, k| {
        (basis[k] * ops[s]).trace().re
    });
    let rank = numerical_rank(&rows);
    if settings.len() >= STATE_PARAMS && rank < STATE_PARAMS {
        return Err(Error::IncompleteDesign {
            rank,
            required: STATE_PARAMS,
        });
    }
    Ok(DesignMatrix {
        settings: settings.to_vec(),
        rows,
        rank,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
    Naive,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Method::Linear),
            "mle" => Ok(Method::Mle),
            "naive" => Ok(Method::Naive),
            other => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("unknown method `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// Poisson negative log-likelihood (constant terms dropped); infinite
    /// when the estimate gives zero probability to an observed outcome.
    pub nll: f64,
    pub iterations: usize,
    /// Euclidean norm of observed minus predicted counts.
    pub residual_norm: f64,
    /// Whether eigenvalue clipping was applied to a linear estimate.
    pub psd_projected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub estimate: VisibleDensityMatrix,
    pub flux_estimate: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

struct Observations {
    ops: Vec<Matrix4<C64>>,
    counts: Vec<f64>,
    exposure: Vec<f64>,
}

impl Observations {
    fn new(records: &[CountRecord]) -> Result<Self> {
        for r in records {
            if !(r.exposure > 0.0) || !r.exposure.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "exposure",
                    reason: format!("{} must be positive", r.exposure),
                });
            }
        }
        Ok(Self {
            ops: records
                .iter()
                .map(|r| detection_operator(&r.setting))
                .collect(),
            counts: records.iter().map(|r| r.counts as f64).collect(),
            exposure: records.iter().map(|r| r.exposure).collect(),
        })
    }

    fn nll(&self, rho: &Matrix4<C64>, flux: f64) -> f64 {
        let probs: Vec<f64> = self.ops.iter().map(|o| (rho * o).trace().re).collect();
        poisson_nll(&probs, &self.counts, &self.exposure, flux)
    }

    fn residual_norm(&self, rho: &Matrix4<C64>, flux: f64) -> f64 {
        self.ops
            .iter()
            .zip(&self.counts)
            .zip(&self.exposure)
            .map(|((o, c), e)| (c - flux * e * (rho * o).trace().re).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `Σ_s [μ_s − c_s ln μ_s]` with `μ_s = flux · exposure_s · p_s`.
fn poisson_nll(probs: &[f64], counts: &[f64], exposure: &[f64], flux: f64) -> f64 {
    let mut total = 0.0;
    for ((&p, &c), &e) in probs.iter().zip(counts).zip(exposure) {
        let mu = flux * e * p;
        if c > 0.0 {
            if mu <= 0.0 {
                return f64::INFINITY;
            }
            total += mu - c * mu.ln();
        } else {
            total += mu;
        }
    }
    total
}

/// Poisson negative log-likelihood of `records` under state `rho` and
/// `flux` pairs per unit exposure.
pub fn negative_log_likelihood(
    rho: &VisibleDensityMatrix,
    flux: f64,
    records: &[CountRecord],
) -> Result<f64> {
    Ok(Observations::new(records)?.nll(rho.matrix(), flux))
}

/// Least-squares fit of `counts_s ≈ exposure_s Σ_k rows[(s,k)] x_k` over the
/// given parameter columns. Returns the parameter vector (zero-padded to ten)
/// and the fitted flux.
fn least_squares(records: &[CountRecord], columns: &[usize]) -> Result<([f64; STATE_PARAMS], f64)> {
    if records.iter().all(|r| r.counts == 0) {
        return Err(Error::NoCounts);
    }
    let settings: Vec<_> = records.iter().map(|r| r.setting).collect();
    let design = build_design_matrix(&settings)?;
    let a = DMatrix::from_fn(records.len(), columns.len(), |s, k| {
        design.rows[(s, columns[k])] * records[s].exposure
    });
    let rank = numerical_rank(&a);
    if rank < columns.len() {
        return Err(Error::IncompleteDesign {
            rank,
            required: columns.len(),
        });
    }
    let b = DVector::from_iterator(records.len(), records.iter().map(|r| r.counts as f64));
    let x = a
        .svd(true, true)
        .solve(&b, RANK_TOL)
        .map_err(|e| Error::InvalidParameter {
            name: "records",
            reason: e.to_string(),
        })?;
    let mut full = [0.0; STATE_PARAMS];
    for (k, &col) in columns.iter().enumerate() {
        full[col] = x[k];
    }
    let flux = full[0] + full[1] + full[2] + full[9];
    if !(flux > 0.0) {
        return Err(Error::InvalidDensityMatrix(format!(
            "fitted trace {flux} is not positive"
        )));
    }
    full.iter_mut().for_each(|v| *v /= flux);
    Ok((full, flux))
}

fn finish(
    obs: &Observations,
    estimate: VisibleDensityMatrix,
    flux: f64,
    method: Method,
    iterations: usize,
    psd_projected: bool,
) -> TomographyResult {
    TomographyResult {
        diagnostics: Diagnostics {
            nll: obs.nll(estimate.matrix(), flux),
            iterations,
            residual_norm: obs.residual_norm(estimate.matrix(), flux),
            psd_projected,
        },
        estimate,
        flux_estimate: flux,
        method,
    }
}

/// Linear-inversion estimate. With `project_psd`, negative eigenvalues are
/// clipped to zero and the trace renormalized.
pub fn linear_reconstruct(records: &[CountRecord], project_psd: bool) -> Result<TomographyResult> {
    let obs = Observations::new(records)?;
    let columns: Vec<usize> = (0..STATE_PARAMS).collect();
    let (theta, flux) = least_squares(records, &columns)?;
    let mut estimate = VisibleDensityMatrix::try_new_indefinite(matrix_from_params(&theta))?;
    if project_psd {
        estimate = estimate.project_psd()?;
    }
    Ok(finish(&obs, estimate, flux, Method::Linear, 1, project_psd))
}

/// Linear fit that assumes indistinguishable photons: the ψ⁻ population is
/// pinned to zero and only the symmetric block is fitted.
pub fn naive_symmetric_reconstruct(records: &[CountRecord]) -> Result<TomographyResult> {
    let obs = Observations::new(records)?;
    let columns: Vec<usize> = (0..STATE_PARAMS - 1).collect();
    let (theta, flux) = least_squares(records, &columns)?;
    let estimate = VisibleDensityMatrix::try_new_indefinite(matrix_from_params(&theta))?;
    Ok(finish(&obs, estimate, flux, Method::Naive, 1, false))
}

/// `flux_estimate · p_s` for each setting.
pub fn predict_rates(
    result: &TomographyResult,
    settings: &[MeasurementSetting],
) -> Result<Vec<f64>> {
    settings
        .iter()
        .map(|s| {
            let p = probability_from_operator(&result.estimate, &detection_operator(s))?;
            Ok(result.flux_estimate * p)
        })
        .collect()
}

/// Complex entries of the lower-triangular `T`, in parameter order after the
/// three real diagonals.
const LOWER: [(usize, usize); 3] = [(PSI_PLUS, HH), (VV, HH), (VV, PSI_PLUS)];

/// Block lower-triangular `T` from the first ten MLE parameters.
pub fn cholesky_factor(params: &[f64]) -> Matrix4<C64> {
    let mut t = Matrix4::zeros();
    for k in 0..3 {
        t[(k, k)] = C64::new(params[k], 0.0);
    }
    for (n, &(i, j)) in LOWER.iter().enumerate() {
        t[(i, j)] = C64::new(params[3 + 2 * n], params[4 + 2 * n]);
    }
    t[(PSI_MINUS, PSI_MINUS)] = C64::new(params[9], 0.0);
    t
}

/// `T†T / Tr(T†T)`.
pub fn state_from_factor(t: &Matrix4<C64>) -> Matrix4<C64> {
    let m = t.adjoint() * t;
    let tr = m.trace().re;
    m.unscale(tr)
}

/// Parameters of a `T` with `T†T ∝ ρ`. `ρ` must be positive definite on
/// each block; callers mix in a little of the identity first.
pub fn factor_params(rho: &VisibleDensityMatrix) -> Result<[f64; STATE_PARAMS]> {
    // ρ = T†T with T lower ⇔ JρJ = C C† with C = J T† J lower, J the reversal.
    let sym = rho.symmetric_block();
    let j = nalgebra::Matrix3::new(0., 0., 1., 0., 1., 0., 1., 0., 0.).map(|x| C64::new(x, 0.0));
    let chol = (j * sym * j).cholesky().ok_or_else(|| {
        Error::InvalidDensityMatrix("symmetric block is not positive definite".into())
    })?;
    let c = chol.l();
    let t3 = (j * c * j).adjoint();
    let mut params = [0.0; STATE_PARAMS];
    for k in 0..3 {
        params[k] = t3[(k, k)].re;
    }
    for (n, &(i, jj)) in LOWER.iter().enumerate() {
        params[3 + 2 * n] = t3[(i, jj)].re;
        params[4 + 2 * n] = t3[(i, jj)].im;
    }
    params[9] = rho.population(PSI_MINUS).max(0.0).sqrt();
    Ok(params)
}

/// Poisson negative log-likelihood as a smooth function of the eleven MLE
/// parameters: ten entries of `T` and `ln flux`.
pub struct PoissonNll {
    obs: Observations,
}

impl PoissonNll {
    pub fn new(records: &[CountRecord]) -> Result<Self> {
        Ok(Self {
            obs: Observations::new(records)?,
        })
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let rho = state_from_factor(&cholesky_factor(params));
        self.obs.nll(&rho, params[STATE_PARAMS].exp())
    }

    /// Value with the analytic gradient written into `grad`.
    pub fn value_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let t = cholesky_factor(params);
        let flux = params[STATE_PARAMS].exp();
        let tau: f64 = t.iter().map(|z| z.norm_sqr()).sum();
        grad.iter_mut().for_each(|g| *g = 0.0);

        let mut total = 0.0;
        for ((op, &c), &e) in self
            .obs
            .ops
            .iter()
            .zip(&self.obs.counts)
            .zip(&self.obs.exposure)
        {
            // Tr[T†T O] = Σ_ij T_ij (O T†)_ji
            let k = op * t.adjoint();
            let a: f64 = (t * op * t.adjoint()).trace().re;
            let p = a / tau;
            let mu = flux * e * p;
            let weight = if c > 0.0 {
                if mu <= 0.0 {
                    grad.iter_mut().for_each(|g| *g = f64::NAN);
                    return f64::INFINITY;
                }
                total += mu - c * mu.ln();
                flux * e - c / p
            } else {
                total += mu;
                flux * e
            };
            grad[STATE_PARAMS] += mu - c;

            // ∂p/∂θ = (∂A/∂θ − p ∂τ/∂θ) / τ
            let mut add = |idx: usize, da: f64, dtau: f64| {
                grad[idx] += weight * (da - p * dtau) / tau;
            };
            for d in 0..3 {
                add(d, 2.0 * k[(d, d)].re, 2.0 * t[(d, d)].re);
            }
            for (n, &(i, j)) in LOWER.iter().enumerate() {
                add(3 + 2 * n, 2.0 * k[(j, i)].re, 2.0 * t[(i, j)].re);
                add(4 + 2 * n, -2.0 * k[(j, i)].im, 2.0 * t[(i, j)].im);
            }
            let s = PSI_MINUS;
            add(9, 2.0 * k[(s, s)].re, 2.0 * t[(s, s)].re);
        }
        total
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Converged once an iteration improves the NLL by less than this.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            tolerance: 1e-10,
        }
    }
}

/// Maximum-likelihood estimate with default options.
pub fn mle_reconstruct(
    records: &[CountRecord],
    init: Option<&VisibleDensityMatrix>,
) -> Result<TomographyResult> {
    mle_reconstruct_with(records, init, MleOptions::default())
}

/// Maximum-likelihood estimate. Without `init`, starts from the
/// PSD-projected linear estimate, or the maximally mixed state if the
/// linear solve fails.
pub fn mle_reconstruct_with(
    records: &[CountRecord],
    init: Option<&VisibleDensityMatrix>,
    options: MleOptions,
) -> Result<TomographyResult> {
    let nll = PoissonNll::new(records)?;
    if records.iter().all(|r| r.counts == 0) {
        return Err(Error::NoCounts);
    }
    let start = match init {
        Some(rho) => rho.clone(),
        None => linear_reconstruct(records, true)
            .map(|r| r.estimate)
            .unwrap_or_else(|_| VisibleDensityMatrix::maximally_mixed()),
    };
    // Pull the start off the boundary so the factorization exists.
    let start = start.depolarize(1e-3)?;
    let mut x0 = factor_params(&start)?.to_vec();

    // Flux that maximizes the likelihood for the starting state.
    let counts: f64 = records.iter().map(|r| r.counts as f64).sum();
    let expected: f64 = nll
        .obs
        .ops
        .iter()
        .zip(&nll.obs.exposure)
        .map(|(o, e)| e * start.expectation(o).re)
        .sum();
    x0.push((counts / expected.max(f64::MIN_POSITIVE)).ln());

    let optimizer = Lbfgs {
        memory: 12,
        max_iterations: options.max_iterations,
        tolerance: options.tolerance,
    };
    let min = optimizer.minimize(|x, g| nll.value_and_gradient(x, g), x0);

    let rho = state_from_factor(&cholesky_factor(&min.x));
    let estimate = VisibleDensityMatrix::try_new(rho)?;
    let result = finish(
        &nll.obs,
        estimate,
        min.x[STATE_PARAMS].exp(),
        Method::Mle,
        min.iterations,
        false,
    );
    if !min.converged {
        return Err(Error::NotConverged {
            iterations: min.iterations,
            nll: min.value,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Dispatches to the estimator for `method`.
pub fn reconstruct(records: &[CountRecord], method: Method) -> Result<TomographyResult> {
    match method {
        Method::Linear => linear_reconstruct(records, false),
        Method::Mle => mle_reconstruct(records, None),
        Method::Naive => naive_symmetric_reconstruct(records),
    }
}
