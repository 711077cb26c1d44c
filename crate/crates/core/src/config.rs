//! Experiment configuration.
//!
//! The configuration is a single serializable document. [`ExperimentConfig::validate`]
//! checks every invariant of the types it builds and reports the first
//! violation by constraint name.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{HeatProblem, NoiseModel, SolverOptions};
use crate::measures::PriorSpec;
use crate::montecarlo::{RateSettings, SourceCondition, MAX_SMALLBALL_DIM, MIN_SAMPLES};
use crate::spectral::{CoeffVec, SpectralBasis};

/// A coefficient vector given either as one value repeated over the
/// truncation or as an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Constant(f64),
    Explicit(Vec<f64>),
}

impl CoeffSpec {
    pub fn expand(&self, n: usize, field: &str) -> Result<CoeffVec> {
        match self {
            CoeffSpec::Constant(v) => CoeffVec::new(vec![*v; n]),
            CoeffSpec::Explicit(v) if v.len() == n => CoeffVec::new(v.clone()),
            CoeffSpec::Explicit(v) => Err(Error::constraint(
                &format!("len({field}) = truncation"),
                format!("{} entries, truncation {n}", v.len()),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub b_grid: Vec<f64>,
    pub c: f64,
    pub rho: f64,
    pub w: CoeffSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Truth used to synthesize data.
    #[serde(default)]
    pub u_dagger: Option<CoeffSpec>,
    /// Largest accepted closed-form/numeric deviation.
    #[serde(default = "default_check_tol")]
    pub check_tol: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_check_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledCenter {
    pub label: String,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallBallConfig {
    /// Observed data; ignored when `prior_only` is set.
    #[serde(default)]
    pub y: Option<Vec<f64>>,
    /// The first center is the reference every ratio is taken against.
    pub centers: Vec<LabeledCenter>,
    pub eps_grid: Vec<f64>,
    pub samples: usize,
    /// Drop the likelihood so ball masses are prior masses.
    #[serde(default)]
    pub prior_only: bool,
}

/// A shift of the noise law for the Kakutani diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftSpec {
    Explicit { label: String, a: Vec<f64> },
    /// `a_k = scale · λ_k^power`.
    VariancePower { label: String, scale: f64, power: f64 },
}

impl ShiftSpec {
    pub fn label(&self) -> &str {
        match self {
            ShiftSpec::Explicit { label, .. } | ShiftSpec::VariancePower { label, .. } => label,
        }
    }

    pub fn coefficients(&self, variances: &[f64]) -> Result<CoeffVec> {
        match self {
            ShiftSpec::Explicit { a, .. } => CoeffSpec::Explicit(a.clone()).expand(variances.len(), "a"),
            ShiftSpec::VariancePower { scale, power, .. } => {
                CoeffVec::new(variances.iter().map(|l| scale * l.powf(*power)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default)]
    pub shifts: Vec<ShiftSpec>,
    /// Truncations for the partial sums; defaults to `1..=truncation`.
    #[serde(default)]
    pub grid: Option<Vec<usize>>,
    #[serde(default)]
    pub witness_ns: Vec<usize>,
    /// Upper limit for `Σ |κ_k| / √λ_k`; no limit when absent.
    #[serde(default)]
    pub linear_threshold: Option<f64>,
}

impl DiagnoseConfig {
    pub fn grid_or_default(&self, n: usize) -> Vec<usize> {
        self.grid.clone().unwrap_or_else(|| (1..=n).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SpectralBasis,
    pub prior: PriorSpec,
    pub noise: NoiseModel,
    pub truncation: usize,
    pub seed: u64,
    pub replicates: usize,
    #[serde(default)]
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub smallball: Option<SmallBallConfig>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseConfig>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::constraint(&format!("{name} > 0"), format!("{name} = {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.prior.validate(&self.spec)?;
        self.noise.validate(&self.spec)?;
        let n = self.truncation;
        if n == 0 {
            return Err(Error::constraint("truncation >= 1", "truncation = 0"));
        }
        if let Some(max) = self.spec.max_truncation() {
            if n > max {
                return Err(Error::constraint(
                    "truncation <= len(alpha)",
                    format!("truncation {n}, {max} eigenvalues listed"),
                ));
            }
        }
        if self.replicates < 2 {
            return Err(Error::constraint("replicates >= 2", format!("replicates = {}", self.replicates)));
        }
        if let Some(rate) = &self.rate {
            self.rate_settings_for(rate)?;
            self.source_for(rate)?;
            if rate.c < rate.rho / SQRT_2 {
                return Err(Error::constraint(
                    "C >= rho/sqrt(2)",
                    format!("C = {}, rho/sqrt(2) = {}", rate.c, rate.rho / SQRT_2),
                ));
            }
        }
        if let Some(map) = &self.map {
            check_positive("check_tol", map.check_tol)?;
            check_positive("solver.tol", map.solver.tol)?;
            if map.solver.max_iter == 0 {
                return Err(Error::constraint("solver.max_iter >= 1", "max_iter = 0"));
            }
            if let Some(u) = &map.u_dagger {
                u.expand(n, "u_dagger")?;
            }
        }
        if let Some(sb) = &self.smallball {
            if n > MAX_SMALLBALL_DIM {
                return Err(Error::constraint(
                    "n <= 5",
                    format!("small-ball experiments are limited to truncation 5, got {n}"),
                ));
            }
            if sb.centers.is_empty() {
                return Err(Error::constraint("centers non-empty", "no ball centers given"));
            }
            for c in &sb.centers {
                CoeffSpec::Explicit(c.coeffs.clone()).expand(n, "center")?;
            }
            if sb.eps_grid.is_empty() {
                return Err(Error::constraint("eps_grid non-empty", "no radii given"));
            }
            for &eps in &sb.eps_grid {
                check_positive("eps", eps)?;
            }
            if sb.samples < MIN_SAMPLES {
                return Err(Error::constraint("n_samples >= 1000", format!("samples = {}", sb.samples)));
            }
            if !sb.prior_only {
                match &sb.y {
                    Some(y) => {
                        CoeffSpec::Explicit(y.clone()).expand(n, "y")?;
                    }
                    None => return Err(Error::constraint("y present", "smallball needs y unless prior_only")),
                }
            }
        }
        if let Some(diag) = &self.diagnose {
            let grid = diag.grid_or_default(n);
            if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::constraint("grid strictly increasing from 1", format!("grid = {grid:?}")));
            }
            if *grid.last().unwrap() > n {
                return Err(Error::constraint("grid <= truncation", format!("grid reaches {}", grid.last().unwrap())));
            }
            if diag.witness_ns.contains(&0) {
                return Err(Error::constraint("witness n >= 1", "witness index 0"));
            }
            if diag.witness_ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::constraint(
                    "witness_ns strictly increasing",
                    format!("witness_ns = {:?}", diag.witness_ns),
                ));
            }
            if let (Some(max), Some(&w)) = (self.spec.max_truncation(), diag.witness_ns.iter().max()) {
                if w > max {
                    return Err(Error::constraint("truncation <= len(alpha)", format!("witness n = {w}")));
                }
            }
            let lam = self.noise.variances(&self.spec, n)?;
            for shift in &diag.shifts {
                shift.coefficients(&lam)?;
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<HeatProblem> {
        HeatProblem::new(self.spec.clone(), self.prior, self.noise, self.truncation)
    }

    fn rate_settings_for(&self, rate: &RateConfig) -> Result<RateSettings> {
        let grid = &rate.b_grid;
        if grid.is_empty() {
            return Err(Error::constraint("b_grid non-empty", "no noise levels given"));
        }
        for &b in grid {
            check_positive("b", b)?;
        }
        if grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::constraint("b_grid strictly decreasing", format!("b_grid = {grid:?}")));
        }
        check_positive("C", rate.c)?;
        Ok(RateSettings {
            b_grid: grid.clone(),
            c: rate.c,
        })
    }

    fn source_for(&self, rate: &RateConfig) -> Result<SourceCondition> {
        SourceCondition::new(rate.w.expand(self.truncation, "w")?, rate.rho)
    }

    fn rate_section(&self) -> Result<&RateConfig> {
        self.rate
            .as_ref()
            .ok_or_else(|| Error::constraint("rate section present", "config has no `rate` section"))
    }

    pub fn rate_settings(&self) -> Result<RateSettings> {
        self.rate_settings_for(self.rate_section()?)
    }

    pub fn source(&self) -> Result<SourceCondition> {
        self.source_for(self.rate_section()?)
    }
}
