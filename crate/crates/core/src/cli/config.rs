//! Case configuration files (TOML). Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::Scheme;
use crate::error::{Error, Result};
use crate::fields::Spe10Components;
use crate::msrsb::{DEFAULT_MAX_SWEEPS, DEFAULT_OMEGA, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub grid: GridConfig,
    pub permeability: PermeabilityConfig,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub coarsening: CoarseningConfig,
    #[serde(default = "default_restriction")]
    pub restriction: RestrictionChoice,
    #[serde(default)]
    pub repair: RepairConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_scheme() -> Scheme {
    Scheme::Tpfa
}

fn default_restriction() -> RestrictionChoice {
    RestrictionChoice::Cv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Domain size per axis, meters.
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Fraction of the shortest cell edge, in `[0, 0.5)`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PermeabilityConfig {
    /// Isotropic constant value.
    Homogeneous { value: f64 },
    /// Constant 2-D tensor.
    Tensor { xx: f64, xy: f64, yy: f64 },
    /// `R(θ) diag(k1, k2) R(θ)ᵀ`, θ in degrees.
    Rotated { theta: f64, k1: f64, k2: f64 },
    /// Lognormal values; `correlation` is a smoothing half-width in cells,
    /// 0 for independent cells.
    Lognormal {
        seed: u64,
        #[serde(default)]
        mu: f64,
        sigma: f64,
        #[serde(default)]
        correlation: usize,
    },
    /// SPE10 permeability file; `layers` is 1-based and inclusive.
    Spe10 {
        path: PathBuf,
        layers: [usize; 2],
        #[serde(default)]
        components: Spe10Components,
    },
}

/// Dirichlet pressure per side; unset sides are no-flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub bottom: Option<f64>,
    pub top: Option<f64>,
    pub front: Option<f64>,
    pub back: Option<f64>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            left: Some(1.0),
            right: Some(0.0),
            bottom: None,
            top: None,
            front: None,
            back: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseningConfig {
    pub ratio: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictionChoice {
    Cv,
    Galerkin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RepairMode {
    #[default]
    Off,
    Coarse,
    Fine,
    Both,
}

impl RepairMode {
    pub fn coarse(self) -> bool {
        matches!(self, RepairMode::Coarse | RepairMode::Both)
    }

    pub fn fine(self) -> bool {
        matches!(self, RepairMode::Fine | RepairMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairConfig {
    #[serde(default)]
    pub mode: RepairMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Permit fine repair on a TPFA system.
    #[serde(default)]
    pub allow_fine_with_tpfa: bool,
}

fn default_epsilon() -> f64 {
    crate::monotone::DEFAULT_EPSILON
}

fn default_weight() -> f64 {
    crate::monotone::DEFAULT_WEIGHT
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            mode: RepairMode::Off,
            epsilon: default_epsilon(),
            weight: default_weight(),
            allow_fine_with_tpfa: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_basis_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

fn default_basis_tol() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_sweeps() -> usize {
    DEFAULT_MAX_SWEEPS
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            omega: DEFAULT_OMEGA,
            tol: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolveConfig {
    #[default]
    OneStep,
    Iterative {
        #[serde(default = "default_solve_tol")]
        tol: f64,
        #[serde(default = "default_cycles")]
        max_cycles: usize,
        #[serde(default = "default_smoothing")]
        smoothing_steps: usize,
        #[serde(default)]
        finalize_cv: bool,
    },
}

fn default_solve_tol() -> f64 {
    1e-8
}

fn default_cycles() -> usize {
    300
}

fn default_smoothing() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Solve the fine system directly for error norms.
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Band-storage budget (entries) for the direct solve.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn yes() -> bool {
    true
}

fn default_budget() -> usize {
    crate::linalg::DEFAULT_BAND_BUDGET
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; nothing is written when unset.
    pub dir: Option<PathBuf>,
    /// Basis columns written by `export-basis`; defaults to the middle block.
    #[serde(default)]
    pub basis_columns: Vec<usize>,
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: CaseConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(e))))?;
        // relative data paths are taken from the config's directory
        if let PermeabilityConfig::Spe10 { path: data, .. } = &mut config.permeability {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(config)
    }

    pub fn dim(&self) -> usize {
        self.grid.cells.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(dim == 2 || dim == 3) || self.grid.extent.len() != dim {
            return Err(Error::Config(format!(
                "grid needs 2 or 3 matching extent and cells entries, got {} and {}",
                self.grid.extent.len(),
                dim
            )));
        }
        if self.coarsening.ratio.len() != dim {
            return Err(Error::Config(format!(
                "coarsening ratio has {} entries for a {dim}-D grid",
                self.coarsening.ratio.len()
            )));
        }
        if self.grid.perturbation.is_some() && dim != 2 {
            return Err(Error::Config(
                "node perturbation requires a 2-D grid".into(),
            ));
        }
        if self.scheme == Scheme::MpfaO && dim != 2 {
            return Err(Error::Config("scheme mpfa-o requires a 2-D grid".into()));
        }
        if self.repair.mode.fine()
            && self.scheme != Scheme::MpfaO
            && !self.repair.allow_fine_with_tpfa
        {
            return Err(Error::Config(
                "fine repair requires scheme mpfa-o or repair.allow_fine_with_tpfa = true".into(),
            ));
        }
        match &self.permeability {
            PermeabilityConfig::Tensor { .. } | PermeabilityConfig::Rotated { .. } if dim != 2 => {
                return Err(Error::Config("full tensors are 2-D only".into()));
            }
            PermeabilityConfig::Spe10 { layers, .. } => {
                let count = layers[1].saturating_sub(layers[0]) + 1;
                if (dim == 2 && count != 1) || (dim == 3 && self.grid.cells[2] != count) {
                    return Err(Error::Config(format!(
                        "SPE10 layers {}..={} do not match the grid",
                        layers[0], layers[1]
                    )));
                }
            }
            _ => {}
        }
        if dim == 2 && (self.boundary.front.is_some() || self.boundary.back.is_some()) {
            return Err(Error::Config(
                "front/back boundaries exist only in 3-D".into(),
            ));
        }
        Ok(())
    }

    /// Replaces every random seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(p) = &mut self.grid.perturbation {
            p.seed = seed;
        }
        if let PermeabilityConfig::Lognormal { seed: s, .. } = &mut self.permeability {
            *s = seed;
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
