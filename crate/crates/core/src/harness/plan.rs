//! Versioned experiment-plan schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, ScenarioConfig, SourceSpec};
use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, HermitianMatrix};
use crate::reduction::DrtMethod;
use crate::uncertainty::{Ellipsoid, SphereSet, UncertaintySet};

pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Sample-covariance MVDR steered to the nominal ASV.
    Mvdr,
    /// Robust Capon: element space without a reducer, generic RDRCB with one.
    Robust,
    /// Single-EVD robust solver; requires the CG reducer.
    RobustFast,
}

/// Uncertainty set around the nominal ASV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SetSpec {
    /// `|a - a_bar|^2 <= eps`.
    Sphere { eps: f64 },
    /// `sum_m |a_m - a_bar_m|^2 / eps_m <= 1`, one entry per element.
    Diagonal { eps: Vec<f64> },
}

impl SetSpec {
    pub fn build(&self, center: &ComplexVector) -> Result<UncertaintySet> {
        match self {
            SetSpec::Sphere { eps } => Ok(SphereSet::new(center.clone(), *eps)?.into()),
            SetSpec::Diagonal { eps } => {
                if eps.len() != center.len() {
                    return Err(Error::Config(format!(
                        "diagonal set has {} entries for {} elements",
                        eps.len(),
                        center.len()
                    )));
                }
                if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                    return Err(Error::Config("diagonal set entries must be positive".into()));
                }
                let inv: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
                Ok(Ellipsoid::new(center.clone(), HermitianMatrix::from_real_diagonal(&inv))?.into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub label: String,
    pub solver: SolverKind,
    #[serde(default)]
    pub drt: Option<DrtMethod>,
    /// Reduced dimension; ignored without a reducer.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub set: Option<SetSpec>,
}

impl MethodSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        let ctx = |msg: &str| Error::Config(format!("method '{}': {msg}", self.label));
        if self.label.is_empty() || self.label.contains([',', '"', '\n']) {
            return Err(ctx("label must be non-empty and free of commas, quotes and newlines"));
        }
        match (self.drt, self.n) {
            (Some(_), Some(n)) if n >= 1 && n <= m => {}
            (Some(_), _) => return Err(ctx("a reducer needs 1 <= n <= M")),
            (None, Some(_)) => return Err(ctx("n given without a reducer")),
            (None, None) => {}
        }
        match (self.solver, &self.set) {
            (SolverKind::Mvdr, Some(_)) => return Err(ctx("MVDR takes no uncertainty set")),
            (SolverKind::Robust | SolverKind::RobustFast, None) => {
                return Err(ctx("robust solvers need an uncertainty set"))
            }
            _ => {}
        }
        if self.solver == SolverKind::RobustFast && self.drt != Some(DrtMethod::ConjugateGradient) {
            return Err(ctx("robust-fast requires the cg reducer"));
        }
        if let Some(SetSpec::Diagonal { eps }) = &self.set {
            if eps.len() != m {
                return Err(ctx("diagonal set length must equal the element count"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub version: u32,
    pub scenario: ScenarioConfig,
    pub snr_grid_db: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    /// Use the true covariance instead of a sample estimate.
    #[serde(default)]
    pub use_exact_covariance: bool,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PLAN_VERSION {
            return Err(Error::Config(format!(
                "unsupported plan version {} (expected {PLAN_VERSION})",
                self.version
            )));
        }
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be non-empty and finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("SNR grid must be strictly increasing".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        let m = self.scenario.geometry.len();
        for (i, method) in self.methods.iter().enumerate() {
            method.validate(m)?;
            if self.methods[..i].iter().any(|o| o.label == method.label) {
                return Err(Error::Config(format!("duplicate method label '{}'", method.label)));
            }
        }
        Ok(())
    }
}

/// Desk-scale default: 8 x 5 half-wavelength planar array, two 20 dB
/// interferers, `K = 2M`, `N = 5`. These values are chosen for this tool and
/// do not reproduce any published configuration.
pub fn desk_plan() -> ExperimentPlan {
    let geometry = ArrayGeometry::planar(8, 5, 0.5).expect("valid planar array");
    let m = geometry.len();
    let deg = std::f64::consts::PI / 180.0;
    let mut soi = SourceSpec::new(1.0, 0.0, 0.0);
    soi.arbitrary_error = DESK_SIGMA_E;
    let interferers = vec![
        SourceSpec::new(100.0, 30.0 * deg, 10.0 * deg),
        SourceSpec::new(100.0, -45.0 * deg, -20.0 * deg),
    ];
    let set = SetSpec::Sphere { eps: DESK_EPS };
    let n = 5;
    let methods = vec![
        MethodSpec {
            label: "CG-RDRCB".into(),
            solver: SolverKind::RobustFast,
            drt: Some(DrtMethod::ConjugateGradient),
            n: Some(n),
            set: Some(set.clone()),
        },
        MethodSpec {
            label: "O-Krylov-RDRCB".into(),
            solver: SolverKind::Robust,
            drt: Some(DrtMethod::PorOrthogonal),
            n: Some(n),
            set: Some(set.clone()),
        },
        MethodSpec {
            label: "PoR-NO-RDRCB".into(),
            solver: SolverKind::Robust,
            drt: Some(DrtMethod::PorNonOrthogonal),
            n: Some(n),
            set: Some(set),
        },
        MethodSpec {
            label: "CG-MVDR".into(),
            solver: SolverKind::Mvdr,
            drt: Some(DrtMethod::ConjugateGradient),
            n: Some(n),
            set: None,
        },
    ];
    ExperimentPlan {
        version: PLAN_VERSION,
        scenario: ScenarioConfig {
            geometry,
            soi,
            interferers,
            sensor_noise_power: 1.0,
            iso_noise_power: 1.0,
            snapshots: 2 * m,
            seed: 2024,
            diagonal_loading: 0.0,
        },
        snr_grid_db: (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect(),
        methods,
        trials: 200,
        use_exact_covariance: false,
        outputs: OutputSpec::default(),
    }
}

pub const DESK_SIGMA_E: f64 = 1.0;
pub const DESK_EPS: f64 = 2.0;
