//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sis_atlas::curves::ScanOptions;
use sis_atlas::dynamics::RunOptions;
use sis_atlas::perturbation::{build_model, stabilize_eps};
use sis_atlas::spectral::EigenOptions;
use sis_atlas::{AtlasError, CoefficientSet, Field, Grid, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub coefficients: CoefficientConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
    #[serde(default)]
    pub profiles: Option<ProfilesConfig>,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub appendix: Option<AppendixConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DomainConfig {
    pub length: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    BetaSquared,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "kebab-case",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
pub enum CoefficientConfig {
    Constant {
        beta_value: f64,
        gamma_value: f64,
    },
    CosinePerturbation {
        k: f64,
        m: usize,
        #[serde(rename = "cM")]
        c_m: f64,
        /// Absent: halve from `epsStartFraction · ε_{k,h}` until the gap
        /// signs settle.
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        eps_start_fraction: Option<f64>,
        gamma_rule: GammaRule,
        /// Constant γ for the explicit rule.
        #[serde(default)]
        gamma_value: Option<f64>,
    },
    Table {
        /// CSV with header `x,beta,gamma`; relative paths resolve against
        /// the config file's directory.
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "dI")]
    pub d_i: f64,
    #[serde(default, rename = "dS")]
    pub d_s: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub total_mass: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EigenConfig {
    pub max_iter: usize,
    pub rq_tol: f64,
    pub vec_tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let d = EigenOptions::default();
        EigenConfig {
            max_iter: d.max_iter,
            rq_tol: d.rq_tol,
            vec_tol: d.vec_tol,
        }
    }
}

impl EigenConfig {
    pub fn options(&self) -> EigenOptions {
        EigenOptions {
            max_iter: self.max_iter,
            rq_tol: self.rq_tol,
            vec_tol: self.vec_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ScanConfig {
    pub points_per_decade: usize,
    pub offset_min: f64,
    pub offset_max: f64,
    pub offset_limit: f64,
    pub tail_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let d = ScanOptions::default();
        ScanConfig {
            points_per_decade: d.points_per_decade,
            offset_min: d.offset_min,
            offset_max: d.offset_max,
            offset_limit: d.offset_limit,
            tail_tol: d.tail_tol,
        }
    }
}

impl ScanConfig {
    pub fn options(&self) -> Result<ScanOptions> {
        let ok = self.points_per_decade > 0
            && self.offset_min > 0.0
            && self.offset_max > self.offset_min
            && self.offset_limit >= self.offset_max
            && self.tail_tol > 0.0;
        if !ok {
            return Err(AtlasError::config("scan needs 0 < offsetMin < offsetMax <= offsetLimit, pointsPerDecade > 0, tailTol > 0"));
        }
        Ok(ScanOptions {
            points_per_decade: self.points_per_decade,
            offset_min: self.offset_min,
            offset_max: self.offset_max,
            offset_limit: self.offset_limit,
            tail_tol: self.tail_tol,
            check_refinement: true,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Extra `R0` values whose root counts go to `counts.csv`.
    #[serde(default)]
    pub r0_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProfilesConfig {
    /// Strictly decreasing `d_S` sequence for the scaling check.
    #[serde(default, rename = "dSValues")]
    pub d_s_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "kebab-case",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
pub enum InitialData {
    /// `I ≡ fraction · N/|Ω|`, `S ≡ N/|Ω| − I`.
    SmallInfection { fraction: f64 },
    /// Classified root `index` (default: the maximal one), with `S` scaled by
    /// `1 − perturbation` and the removed mass moved to `I`.
    NearRoot {
        #[serde(default)]
        index: Option<usize>,
        #[serde(default)]
        perturbation: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_max: f64,
    pub dt0: f64,
    #[serde(default)]
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub stagnation_tol: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    pub initial_data: InitialData,
}

impl SimulationConfig {
    pub fn options(&self) -> RunOptions {
        let d = RunOptions::default();
        RunOptions {
            t_max: self.t_max,
            stagnation_tol: self.stagnation_tol.unwrap_or(d.stagnation_tol),
            dt_max: self.dt_max.unwrap_or(d.dt_max),
            growth: d.growth,
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AppendixConfig {
    pub eps_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Trajectory snapshot stride in accepted steps.
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("atlas-out"),
            stride: 100,
        }
    }
}

/// Parsed configuration plus the directory relative paths resolve against.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AtlasError::config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| AtlasError::config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model.r0.is_some() && self.model.total_mass.is_some() {
            return Err(AtlasError::config(
                "model: give exactly one of r0 and totalMass",
            ));
        }
        if self.output.stride == 0 {
            return Err(AtlasError::config("output.stride must be positive"));
        }
        self.scan.options()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.length, self.domain.nodes)
    }

    /// Builds the coefficient set, with `d_S` applied when configured.
    pub fn coefficients(&self, base: &Path) -> Result<CoefficientSet> {
        let grid = self.grid()?;
        let d_i = self.model.d_i;
        let c = match &self.coefficients {
            CoefficientConfig::Constant {
                beta_value,
                gamma_value,
            } => CoefficientSet::constant(grid, *beta_value, *gamma_value, d_i)?,
            CoefficientConfig::CosinePerturbation {
                k,
                m,
                c_m,
                eps,
                eps_start_fraction,
                gamma_rule,
                gamma_value,
            } => {
                let eps = match eps {
                    Some(e) => *e,
                    None => {
                        stabilize_eps(*k, *m, *c_m, d_i, &grid, eps_start_fraction.unwrap_or(0.1))?
                            .eps
                    }
                };
                let model = build_model(*k, *m, *c_m, eps, d_i, &grid)?;
                match (gamma_rule, gamma_value) {
                    (GammaRule::BetaSquared, None) => model.coeffs,
                    (GammaRule::Explicit, Some(g)) => CoefficientSet::new(
                        grid.clone(),
                        model.coeffs.beta,
                        grid.constant(*g),
                        d_i,
                    )?,
                    (GammaRule::BetaSquared, Some(_)) => {
                        return Err(AtlasError::config(
                            "gammaValue is only used with gammaRule = explicit",
                        ))
                    }
                    (GammaRule::Explicit, None) => {
                        return Err(AtlasError::config("gammaRule = explicit needs gammaValue"))
                    }
                }
            }
            CoefficientConfig::Table { path } => {
                let (beta, gamma) = read_table(&base.join(path), &grid)?;
                CoefficientSet::new(grid, beta, gamma, d_i)?
            }
        };
        match self.model.d_s {
            Some(d_s) if !(d_s > 0.0) => Err(AtlasError::config(format!(
                "dS must be positive, got {d_s}"
            ))),
            Some(d_s) => c.with_d_s(d_s),
            None => Ok(c),
        }
    }

    /// `R0` from `r0` or from `totalMass = R0 l* |Ω|`.
    pub fn r0(&self, l_star: f64) -> Result<f64> {
        match (self.model.r0, self.model.total_mass) {
            (Some(r0), None) if r0 > 0.0 => Ok(r0),
            (None, Some(n)) if n > 0.0 => Ok(n / (l_star * self.domain.length)),
            (None, None) => Err(AtlasError::config(
                "this command needs model.r0 or model.totalMass",
            )),
            _ => Err(AtlasError::config(
                "model.r0 / model.totalMass must be positive",
            )),
        }
    }

    pub fn d_s(&self) -> Result<f64> {
        self.model
            .d_s
            .ok_or_else(|| AtlasError::config("this command needs model.dS"))
    }
}

#[derive(Deserialize)]
struct TableRow {
    x: f64,
    beta: f64,
    gamma: f64,
}

/// Reads `x,beta,gamma` rows and interpolates them linearly onto the grid.
fn read_table(path: &Path, grid: &Grid) -> Result<(Field, Field)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| AtlasError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (k, r) in reader.deserialize::<TableRow>().enumerate() {
        let r = r.map_err(|e| AtlasError::config(format!("{}: {e}", path.display())))?;
        if !(r.beta > 0.0 && r.gamma > 0.0) {
            return Err(AtlasError::config(format!(
                "{} row {}: beta and gamma must be positive",
                path.display(),
                k + 2
            )));
        }
        rows.push(r);
    }
    if rows.len() < 2 || rows.windows(2).any(|w| !(w[1].x > w[0].x)) {
        return Err(AtlasError::config(
            "table needs at least two rows with strictly increasing x",
        ));
    }
    let (x0, x1) = (rows[0].x, rows[rows.len() - 1].x);
    let tol = 1e-12 * grid.length().max(1.0);
    if x0 > tol || x1 < grid.length() - tol {
        return Err(AtlasError::config(format!(
            "table covers [{x0}, {x1}], not the domain [0, {}]",
            grid.length()
        )));
    }
    let interp = |x: f64, pick: fn(&TableRow) -> f64| {
        let j = rows.partition_point(|r| r.x <= x).clamp(1, rows.len() - 1);
        let (a, b) = (&rows[j - 1], &rows[j]);
        let t = ((x - a.x) / (b.x - a.x)).clamp(0.0, 1.0);
        (1.0 - t) * pick(a) + t * pick(b)
    };
    Ok((
        grid.sample(|x| interp(x, |r| r.beta)),
        grid.sample(|x| interp(x, |r| r.gamma)),
    ))
}
