//! Run configuration: a TOML file with every key optional.

use std::path::{Path, PathBuf};

use eddy_mlmc::mlmc::{MlmcConfig, N_MIN};
use eddy_mlmc::{MeshConfig, ModelParams, ParameterDistributions, Problem, UniformParam};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Highest mesh level accepted from a configuration.
pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Wire radius (m).
    pub r0: f64,
    /// Outer radius of the tube, carrying the Dirichlet condition (m).
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Material {
    /// Tube conductivity (S/m).
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Excitation {
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dist {
    pub r1_nominal: f64,
    pub r1_halfwidth: f64,
    pub i0_nominal: f64,
    pub i0_halfwidth: f64,
    pub mu3_nominal: f64,
    pub mu3_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rng {
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    /// Finest level of the `screen` command.
    pub levels: usize,
    pub n_warm: usize,
    /// Relative tolerances of the `compare` command.
    pub eps: Vec<f64>,
    pub quad_order: usize,
    pub out_dir: PathBuf,
    /// Finest level of the MLMC warm-up.
    pub l_start: usize,
    pub l_max: usize,
    /// Largest plain MC run `compare` will actually perform.
    pub mc_sample_cap: usize,
    /// Write one `solves.csv` row per FEM solve.
    pub solve_log: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub material: Material,
    pub excitation: Excitation,
    pub dist: Dist,
    pub rng: Rng,
    pub mesh: MeshConfig,
    pub experiment: Experiment,
}

impl Default for Geometry {
    fn default() -> Self {
        let p = ModelParams::default();
        Geometry { r0: p.r0, r2: p.r2 }
    }
}

impl Default for Material {
    fn default() -> Self {
        Material { sigma: ModelParams::default().sigma }
    }
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation { frequency_hz: 50.0 }
    }
}

impl Default for Dist {
    fn default() -> Self {
        let d = ParameterDistributions::default();
        Dist {
            r1_nominal: d.r1.nominal,
            r1_halfwidth: d.r1.half_width,
            i0_nominal: d.current.nominal,
            i0_halfwidth: d.current.half_width,
            mu3_nominal: d.mu_tube.nominal,
            mu3_halfwidth: d.mu_tube.half_width,
        }
    }
}

impl Default for Rng {
    fn default() -> Self {
        Rng { master_seed: 1 }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        let m = MlmcConfig::default();
        Experiment {
            levels: 4,
            n_warm: m.n_warm,
            eps: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            quad_order: 8,
            out_dir: PathBuf::from("out"),
            l_start: m.l_start,
            l_max: m.l_max,
            mc_sample_cap: 2000,
            solve_log: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("configuration error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Recover the configuration echoed into the comment header of an output CSV.
    pub fn from_csv_header(csv: &str) -> Result<Self, CliError> {
        let toml: String = csv
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            });
        Self::from_toml_str(&toml)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    pub fn fixed_params(&self) -> ModelParams {
        ModelParams {
            r0: self.geometry.r0,
            r1: self.dist.r1_nominal,
            r2: self.geometry.r2,
            sigma: self.material.sigma,
            current: self.dist.i0_nominal,
            mu_tube: self.dist.mu3_nominal,
            ..ModelParams::default()
        }
        .with_frequency(self.excitation.frequency_hz)
    }

    pub fn distributions(&self) -> ParameterDistributions {
        let d = &self.dist;
        ParameterDistributions {
            r1: UniformParam::new(d.r1_nominal, d.r1_halfwidth),
            current: UniformParam::new(d.i0_nominal, d.i0_halfwidth),
            mu_tube: UniformParam::new(d.mu3_nominal, d.mu3_halfwidth),
        }
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Ok(Problem::new(self.fixed_params(), self.distributions(), self.mesh)?)
    }

    pub fn mlmc(&self) -> MlmcConfig {
        MlmcConfig {
            l_start: self.experiment.l_start,
            l_max: self.experiment.l_max,
            n_warm: self.experiment.n_warm,
            n_min: N_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(format!("configuration error: {msg}")));
        if !(self.excitation.frequency_hz > 0.0 && self.excitation.frequency_hz.is_finite()) {
            return bad(format!("excitation.frequency_hz must be positive, got {}", self.excitation.frequency_hz));
        }
        if self.rng.master_seed > i64::MAX as u64 {
            return bad("rng.master_seed must fit in a signed 64-bit TOML integer".into());
        }
        let fixed = self.fixed_params();
        fixed.validate()?;
        self.problem()?;
        self.mlmc().validate()?;
        let e = &self.experiment;
        if e.levels > MAX_LEVEL || e.l_max > MAX_LEVEL {
            return bad(format!("levels and l_max must not exceed {MAX_LEVEL}"));
        }
        if e.eps.is_empty() {
            return bad("experiment.eps must list at least one tolerance".into());
        }
        if let Some(eps) = e.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("experiment.eps entries must be positive, got {eps}"));
        }
        if e.quad_order < 4 {
            return bad(format!("experiment.quad_order must be at least 4, got {}", e.quad_order));
        }
        Ok(())
    }
}
