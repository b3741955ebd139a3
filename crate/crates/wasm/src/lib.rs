//! Browser bindings for the `www/` demo: solve and draw one configuration,
//! run a small variance screening, and size an MLMC run from it.
//!
//! Every export is a thin wrapper over a plain Rust function so the logic is
//! testable on native targets.

use eddy_mlmc::fem::{assemble, energy, solve};
use eddy_mlmc::mesh::build_mesh;
use eddy_mlmc::mlmc::{allocate_samples, screening, FemSampler, LevelStats, N_MIN};
use eddy_mlmc::oracle::{radial_energy, RadialGrid};
use eddy_mlmc::{LevelSpec, MeshConfig, ModelParams, ParameterDistributions, Problem, Region};
use wasm_bindgen::prelude::*;

/// Finest level the demo will solve on; level 4 already has 40705 DoF.
pub const MAX_FIELD_LEVEL: usize = 4;
/// Finest level the in-browser screening will visit.
pub const MAX_SCREEN_LEVEL: usize = 3;
/// Radial cells for the reference energy shown next to the FEM value.
const REFERENCE_CELLS: usize = 20_000;

/// One solved configuration, ready to draw.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct FieldView {
    level: usize,
    n_dof: usize,
    energy: f64,
    reference: f64,
    residual: f64,
    nodes: Vec<f64>,
    triangles: Vec<u32>,
    regions: Vec<u8>,
    magnitude: Vec<f64>,
}

#[wasm_bindgen]
impl FieldView {
    #[wasm_bindgen(getter)]
    pub fn level(&self) -> usize {
        self.level
    }
    #[wasm_bindgen(getter)]
    pub fn n_dof(&self) -> usize {
        self.n_dof
    }
    /// FEM magnetic energy per unit length (J/m).
    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.energy
    }
    /// Axisymmetric 1D reference energy for the same parameters (J/m).
    #[wasm_bindgen(getter)]
    pub fn reference(&self) -> f64 {
        self.reference
    }
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }
    /// Node coordinates `x0, y0, x1, y1, ...`.
    pub fn nodes(&self) -> Vec<f64> {
        self.nodes.clone()
    }
    /// Node triples, one per triangle.
    pub fn triangles(&self) -> Vec<u32> {
        self.triangles.clone()
    }
    /// Region per triangle: 0 wire, 1 air, 2 tube.
    pub fn regions(&self) -> Vec<u8> {
        self.regions.clone()
    }
    /// `|A_z|` per node (Wb/m).
    pub fn magnitude(&self) -> Vec<f64> {
        self.magnitude.clone()
    }
}

/// Solve one parameter set on one level.
pub fn compute_field(level: usize, r1: f64, current: f64, mu_tube: f64, sigma: f64, hz: f64) -> Result<FieldView, String> {
    if level > MAX_FIELD_LEVEL {
        return Err(format!("level must not exceed {MAX_FIELD_LEVEL}"));
    }
    if !(hz > 0.0 && hz.is_finite()) {
        return Err(format!("frequency must be positive, got {hz}"));
    }
    let p = ModelParams { r1, current, mu_tube, sigma, ..ModelParams::default() }.with_frequency(hz);
    p.validate().map_err(|e| e.to_string())?;
    let mesh = build_mesh(&p, &LevelSpec::new(level)).map_err(|e| e.to_string())?;
    let sys = assemble(&mesh, &p).map_err(|e| e.to_string())?;
    let sol = solve(&mesh, &sys).map_err(|e| e.to_string())?;
    let grid = RadialGrid::new(&p, REFERENCE_CELLS).map_err(|e| e.to_string())?;
    let reference = radial_energy(&p, &grid).map_err(|e| e.to_string())?;
    Ok(FieldView {
        level,
        n_dof: mesh.dof_count,
        energy: energy(&sol, &p),
        reference,
        residual: sol.relative_residual,
        nodes: mesh.nodes.iter().flat_map(|n| [n[0], n[1]]).collect(),
        triangles: mesh.triangles.iter().flat_map(|t| t.nodes.map(|i| i as u32)).collect(),
        regions: mesh
            .triangles
            .iter()
            .map(|t| match t.region {
                Region::Wire => 0,
                Region::Air => 1,
                Region::Tube => 2,
            })
            .collect(),
        magnitude: sol.values.iter().map(|v| v.norm()).collect(),
    })
}

#[wasm_bindgen]
pub fn solve_field(level: usize, r1: f64, current: f64, mu_tube: f64, sigma: f64, hz: f64) -> Result<FieldView, JsError> {
    compute_field(level, r1, current, mu_tube, sigma, hz).map_err(|e| JsError::new(&e))
}

/// Per-level screening moments under the default input distributions.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Screening {
    stats: Vec<LevelStats>,
}

/// Predicted MLMC sample counts and costs for one tolerance.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    samples: Vec<f64>,
    cost_mlmc: f64,
    cost_mc: f64,
    level0_cost: f64,
}

#[wasm_bindgen]
impl Allocation {
    /// `N_l` per level.
    pub fn samples(&self) -> Vec<f64> {
        self.samples.clone()
    }
    /// `sum_l N_l C_l` in DoF units.
    #[wasm_bindgen(getter)]
    pub fn cost_mlmc(&self) -> f64 {
        self.cost_mlmc
    }
    /// Plain MC on the finest screened level at the same tolerance.
    #[wasm_bindgen(getter)]
    pub fn cost_mc(&self) -> f64 {
        self.cost_mc
    }
    /// Share of the MLMC cost spent on level 0.
    #[wasm_bindgen(getter)]
    pub fn level0_share(&self) -> f64 {
        self.samples.first().map_or(0.0, |n| n * self.level0_cost) / self.cost_mlmc
    }
}

#[wasm_bindgen]
impl Screening {
    /// Rows `level, n_dof, mean_w, var_w, mean_diff, var_diff`, flattened.
    pub fn rows(&self) -> Vec<f64> {
        self.stats
            .iter()
            .flat_map(|s| [s.level as f64, s.n_dof as f64, s.mean_w, s.var_w, s.mean_diff, s.var_diff])
            .collect()
    }

    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> usize {
        self.stats.len()
    }

    /// Sample counts for relative tolerance `eps`.
    pub fn allocate(&self, eps: f64) -> Result<Allocation, JsError> {
        self.allocation(eps).map_err(|e| JsError::new(&e))
    }
}

impl Screening {
    pub fn stats(&self) -> &[LevelStats] {
        &self.stats
    }

    pub fn allocation(&self, eps: f64) -> Result<Allocation, String> {
        let finest = self.stats.last().ok_or("empty screening")?;
        let eps_abs = eps * finest.mean_w.abs();
        let v: Vec<f64> = self.stats.iter().map(|s| s.var_diff).collect();
        let c: Vec<f64> = self.stats.iter().map(|s| s.cost_per_sample).collect();
        let n = allocate_samples(&v, &c, eps_abs, N_MIN).map_err(|e| e.to_string())?;
        let cost_mlmc = n.iter().zip(&c).map(|(&n, c)| n as f64 * c).sum();
        let n_mc = (2.0 * finest.var_w / (eps_abs * eps_abs)).ceil().max(1.0);
        Ok(Allocation {
            samples: n.iter().map(|&n| n as f64).collect(),
            cost_mlmc,
            cost_mc: n_mc * finest.n_dof as f64,
            level0_cost: c[0],
        })
    }
}

pub fn compute_screening(max_level: usize, n: usize, seed: u64) -> Result<Screening, String> {
    if max_level > MAX_SCREEN_LEVEL {
        return Err(format!("screening level must not exceed {MAX_SCREEN_LEVEL}"));
    }
    let problem = Problem::new(ModelParams::default(), ParameterDistributions::default(), MeshConfig::default())
        .map_err(|e| e.to_string())?;
    let stats = screening(&FemSampler::new(&problem, seed), max_level, n).map_err(|e| e.to_string())?;
    Ok(Screening { stats })
}

/// `seed` arrives as a JS number; integers up to 2^53 are exact.
#[wasm_bindgen]
pub fn screen(max_level: usize, n: usize, seed: f64) -> Result<Screening, JsError> {
    if !(seed >= 0.0 && seed.fract() == 0.0 && seed <= 9_007_199_254_740_992.0) {
        return Err(JsError::new("seed must be a non-negative integer"));
    }
    compute_screening(max_level, n, seed as u64).map_err(|e| JsError::new(&e))
}
