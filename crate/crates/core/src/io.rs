//! JSON file formats and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::CountRecord;
use crate::polarization::{VisibleDensityMatrix, BASIS_LABELS};
use crate::tomography::{Method, TomographyResult};

type Grid = [[f64; 4]; 4];

fn split(m: &Matrix4<C64>) -> (Grid, Grid) {
    let mut re = [[0.0; 4]; 4];
    let mut im = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            re[i][j] = m[(i, j)].re;
            im[i][j] = m[(i, j)].im;
        }
    }
    (re, im)
}

fn basis_labels() -> Vec<String> {
    BASIS_LABELS.iter().map(|s| s.to_string()).collect()
}

/// A visible density matrix on disk: `{"basis": [...], "re": [[...]], "im": [[...]]}`.
///
/// Reading ignores extra keys, so result files parse as matrices too.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub basis: Vec<String>,
    pub re: Grid,
    pub im: Grid,
}

impl MatrixFile {
    pub fn from_state(rho: &VisibleDensityMatrix) -> Self {
        let (re, im) = split(rho.matrix());
        Self {
            basis: basis_labels(),
            re,
            im,
        }
    }

    /// Hermitian, unit-trace and block structured; positivity is not
    /// required so unprojected linear estimates load too.
    pub fn to_state(&self) -> Result<VisibleDensityMatrix> {
        if self.basis != basis_labels() {
            return Err(Error::InvalidDensityMatrix(format!(
                "basis {:?} does not match {:?}",
                self.basis, BASIS_LABELS
            )));
        }
        let m = Matrix4::from_fn(|i, j| C64::new(self.re[i][j], self.im[i][j]));
        VisibleDensityMatrix::try_new_indefinite(m)
    }
}

/// Reconstruction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub basis: Vec<String>,
    pub re: Grid,
    pub im: Grid,
    pub flux: f64,
    pub method: Method,
    /// `null` when the likelihood is infinite.
    pub nll: Option<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub psd_projected: bool,
}

impl From<&TomographyResult> for ResultFile {
    fn from(r: &TomographyResult) -> Self {
        let (re, im) = split(r.estimate.matrix());
        Self {
            basis: basis_labels(),
            re,
            im,
            flux: r.flux_estimate,
            method: r.method,
            nll: r.diagnostics.nll.is_finite().then_some(r.diagnostics.nll),
            iterations: r.diagnostics.iterations,
            residual_norm: r.diagnostics.residual_norm,
            psd_projected: r.diagnostics.psd_projected,
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter {
            name: "out",
            reason: format!("{} is not a file path", path.display()),
        })?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let written = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(())
    })();
    if let Err(e) = written.and_then(|_| fs::rename(&tmp, path).map_err(Error::from)) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_records(path: &Path) -> Result<Vec<CountRecord>> {
    let records: Vec<CountRecord> = serde_json::from_slice(&fs::read(path)?)?;
    for r in &records {
        CountRecord::try_new(r.setting, r.counts, r.exposure)?;
    }
    Ok(records)
}

pub fn read_matrix(path: &Path) -> Result<VisibleDensityMatrix> {
    let file: MatrixFile = serde_json::from_slice(&fs::read(path)?)?;
    file.to_state()
}
