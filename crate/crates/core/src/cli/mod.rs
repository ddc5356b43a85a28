//! Scenario preparation, delay sweeps and the figure pipeline behind the
//! `hiddenqutrit` binary.

pub mod config;

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    gaussian_overlap, horizontal, mode_pair_from_delay, partial_trace_hidden, symmetrize, vertical,
    FullDensityMatrix,
};
use crate::io::{write_atomic, write_json, MatrixFile, ResultFile};
use crate::measurement::{simulate_counts, table1_settings, CountRecord};
use crate::metrics::MetricsReport;
use crate::polarization::{
    apply_unitary, collective_dephasing, noon_converter, VisibleDensityMatrix, BASIS_LABELS,
    PSI_MINUS, PSI_PLUS,
};
use crate::tomography::{reconstruct, Method, TomographyResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    HvOverlapped,
    HvDelayed,
    HvPartial,
    NoonIndistinguishable,
    NoonDistinguishable,
    NoonNaiveComparison,
    NoonDephased,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::HvOverlapped,
        ScenarioName::HvDelayed,
        ScenarioName::HvPartial,
        ScenarioName::NoonIndistinguishable,
        ScenarioName::NoonDistinguishable,
        ScenarioName::NoonNaiveComparison,
        ScenarioName::NoonDephased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::HvOverlapped => "hv_overlapped",
            ScenarioName::HvDelayed => "hv_delayed",
            ScenarioName::HvPartial => "hv_partial",
            ScenarioName::NoonIndistinguishable => "noon_indistinguishable",
            ScenarioName::NoonDistinguishable => "noon_distinguishable",
            ScenarioName::NoonNaiveComparison => "noon_naive_comparison",
            ScenarioName::NoonDephased => "noon_dephased",
        }
    }

    /// Figure panel label, `fig2a` … `fig2g`.
    pub fn figure(self) -> &'static str {
        match self {
            ScenarioName::HvOverlapped => "fig2a",
            ScenarioName::HvDelayed => "fig2b",
            ScenarioName::HvPartial => "fig2c",
            ScenarioName::NoonIndistinguishable => "fig2d",
            ScenarioName::NoonDistinguishable => "fig2e",
            ScenarioName::NoonNaiveComparison => "fig2f",
            ScenarioName::NoonDephased => "fig2g",
        }
    }

    /// Offset added to the master seed. The naive comparison reuses the
    /// distinguishable-NOON counts.
    pub fn seed_offset(self) -> u64 {
        match self {
            ScenarioName::NoonNaiveComparison => ScenarioName::NoonDistinguishable.seed_offset(),
            other => ScenarioName::ALL
                .iter()
                .position(|s| *s == other)
                .unwrap_or(0) as u64,
        }
    }

    pub fn method(self) -> Method {
        match self {
            ScenarioName::NoonNaiveComparison => Method::Naive,
            _ => Method::Mle,
        }
    }

    fn is_noon(self) -> bool {
        matches!(
            self,
            ScenarioName::NoonIndistinguishable
                | ScenarioName::NoonDistinguishable
                | ScenarioName::NoonNaiveComparison
                | ScenarioName::NoonDephased
        )
    }

    fn default_delay(self, coherence_time: f64) -> f64 {
        match self {
            ScenarioName::HvOverlapped
            | ScenarioName::NoonIndistinguishable
            | ScenarioName::NoonDephased => 0.0,
            ScenarioName::HvDelayed
            | ScenarioName::NoonDistinguishable
            | ScenarioName::NoonNaiveComparison => config::SEPARATED_DELAY * coherence_time,
            ScenarioName::HvPartial => config::partial_delay(coherence_time),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioParams {
    /// Overrides the scenario's own delay when set.
    pub delay: Option<f64>,
    pub coherence_time: f64,
    pub dephasing_stdev: f64,
    pub rotation_angle: f64,
    pub flux: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            delay: None,
            coherence_time: config::COHERENCE_TIME,
            dephasing_stdev: config::DEPHASING_STDEV,
            rotation_angle: config::ROTATION_ANGLE_DEG,
            flux: config::FLUX,
            seed: config::SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn new(name: ScenarioName, params: ScenarioParams) -> Self {
        Self { name, params }
    }

    pub fn delay(&self) -> f64 {
        self.params
            .delay
            .unwrap_or_else(|| self.name.default_delay(self.params.coherence_time))
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        let checks: [(&'static str, f64, bool); 4] = [
            ("coherence_time", p.coherence_time, p.coherence_time > 0.0),
            ("flux", p.flux, p.flux > 0.0),
            (
                "dephasing_stdev",
                p.dephasing_stdev,
                p.dephasing_stdev >= 0.0,
            ),
            ("delay", self.delay(), self.delay().is_finite()),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} out of range"),
                });
            }
        }
        Ok(())
    }
}

/// Ground-truth visible state of a scenario.
///
/// H and V photons separated by the scenario delay are symmetrized over two
/// hidden modes and traced down; NOON scenarios then pass through the
/// quarter-wave plate at 45°, and the dephased one through the collective
/// dephasing channel.
pub fn prepare(scenario: &Scenario) -> Result<VisibleDensityMatrix> {
    scenario.validate()?;
    let p = &scenario.params;
    let (a, b) = mode_pair_from_delay(
        (horizontal(), vertical()),
        scenario.delay(),
        p.coherence_time,
        config::HIDDEN_DIM,
    )?;
    let full = FullDensityMatrix::from_pure(&symmetrize(&a, &b)?);
    let mut rho = partial_trace_hidden(&full)?;
    if scenario.name.is_noon() {
        rho = apply_unitary(&rho, &noon_converter());
    }
    if scenario.name == ScenarioName::NoonDephased {
        rho = collective_dephasing(&rho, p.dephasing_stdev, p.rotation_angle)?;
    }
    Ok(rho)
}

/// Table-1 counts for the scenario at its flux, seeded by the master seed
/// plus the scenario offset.
pub fn simulate_scenario(scenario: &Scenario) -> Result<Vec<CountRecord>> {
    let rho = prepare(scenario)?;
    simulate_counts(
        &rho,
        &table1_settings(),
        scenario.params.flux,
        scenario
            .params
            .seed
            .wrapping_add(scenario.name.seed_offset()),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub delay: f64,
    pub gamma: f64,
    pub p_psi_plus: f64,
    pub p_psi_minus: f64,
}

/// Populations of the delayed H/V pair on an evenly spaced delay grid from
/// `from` to `to` inclusive.
pub fn sweep_delay(from: f64, to: f64, steps: usize, coherence_time: f64) -> Result<Vec<SweepRow>> {
    if steps == 0 || !(to >= from) || !from.is_finite() || !to.is_finite() {
        return Err(Error::InvalidParameter {
            name: "range",
            reason: format!("need finite from ≤ to and steps ≥ 1, got {from}..{to} in {steps}"),
        });
    }
    (0..steps)
        .map(|k| {
            let delay = if steps == 1 {
                from
            } else {
                from + (to - from) * k as f64 / (steps - 1) as f64
            };
            let params = ScenarioParams {
                delay: Some(delay),
                coherence_time,
                ..ScenarioParams::default()
            };
            let rho = prepare(&Scenario::new(ScenarioName::HvPartial, params))?;
            Ok(SweepRow {
                delay,
                gamma: gaussian_overlap(delay, coherence_time)?.re,
                p_psi_plus: rho.population(PSI_PLUS),
                p_psi_minus: rho.population(PSI_MINUS),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delay,gamma,p_psi_plus,p_psi_minus\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?}",
            r.delay, r.gamma, r.p_psi_plus, r.p_psi_minus
        );
    }
    out
}

/// Long-format CSV of truth and estimate entries; symmetric↔antisymmetric
/// cells are written as `NA`.
pub fn figure_csv(truth: &VisibleDensityMatrix, estimate: &VisibleDensityMatrix) -> String {
    let mut out = String::from("row,col,truth_re,truth_im,estimate_re,estimate_im\n");
    for i in 0..4 {
        for j in 0..4 {
            let (r, c) = (BASIS_LABELS[i], BASIS_LABELS[j]);
            if (i == PSI_MINUS) != (j == PSI_MINUS) {
                let _ = writeln!(out, "{r},{c},NA,NA,NA,NA");
            } else {
                let (t, e) = (truth.entry(i, j), estimate.entry(i, j));
                let _ = writeln!(out, "{r},{c},{:?},{:?},{:?},{:?}", t.re, t.im, e.re, e.im);
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FigureReport {
    pub figure: String,
    pub scenario: String,
    pub delay: f64,
    pub flux: f64,
    pub seed: u64,
    pub truth: MatrixFile,
    pub truth_metrics: MetricsReport,
    pub estimate: ResultFile,
    pub estimate_metrics: MetricsReport,
    pub counts: Vec<CountRecord>,
}

pub struct FigureOutput {
    pub name: ScenarioName,
    pub truth: VisibleDensityMatrix,
    pub result: TomographyResult,
    pub report: FigureReport,
}

/// Runs one scenario end to end: truth, simulated counts, reconstruction.
pub fn run_figure(scenario: &Scenario) -> Result<FigureOutput> {
    let truth = prepare(scenario)?;
    let counts = simulate_scenario(scenario)?;
    let result = reconstruct(&counts, scenario.name.method())?;
    let report = FigureReport {
        figure: scenario.name.figure().into(),
        scenario: scenario.name.as_str().into(),
        delay: scenario.delay(),
        flux: scenario.params.flux,
        seed: scenario
            .params
            .seed
            .wrapping_add(scenario.name.seed_offset()),
        truth: MatrixFile::from_state(&truth),
        truth_metrics: MetricsReport::of(&truth),
        estimate: ResultFile::from(&result),
        estimate_metrics: MetricsReport::of(&result.estimate),
        counts,
    };
    Ok(FigureOutput {
        name: scenario.name,
        truth,
        result,
        report,
    })
}

/// Writes `fig2a.json`/`fig2a.csv` … `fig2g.json`/`fig2g.csv` into `out_dir`.
pub fn paper_figures(out_dir: &Path, params: ScenarioParams) -> Result<Vec<FigureOutput>> {
    std::fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::with_capacity(ScenarioName::ALL.len());
    for name in ScenarioName::ALL {
        let fig = run_figure(&Scenario::new(
            name,
            ScenarioParams {
                delay: None,
                ..params
            },
        ))?;
        write_json(
            &out_dir.join(format!("{}.json", name.figure())),
            &fig.report,
        )?;
        write_atomic(
            &out_dir.join(format!("{}.csv", name.figure())),
            figure_csv(&fig.truth, &fig.result.estimate).as_bytes(),
        )?;
        outputs.push(fig);
    }
    Ok(outputs)
}
