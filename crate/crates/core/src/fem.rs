//! P1 finite elements for the 2D time-harmonic eddy-current equation.
//!
//! With `A = (0, 0, A_z)` the curl-curl equation reduces to the scalar problem
//!
//! ```text
//! int (1/mu) grad A_z . grad v  +  j omega int sigma A_z v  =  int J_z v
//! ```
//!
//! with `A_z = 0` on `r = r2`. Element matrices are exact for straight
//! triangles: constant gradients for the stiffness, `area/12 (1 + delta_ij)`
//! for the mass, `area/3` for the constant-source load.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{build_mesh, LevelSpec, Mesh, MeshConfig, Region};
use crate::model::{ModelParams, ParamSample, ParameterDistributions};
use crate::sparse::{self, CsrMatrix, SymbolicLdl};
use crate::MU0;

/// Relative residual every accepted solution must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ComplexSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Complex64>,
    /// Unknown index of each mesh node, `None` for Dirichlet nodes.
    pub dof_of_node: Vec<Option<usize>>,
    pub node_of_dof: Vec<usize>,
    /// Prescribed nodal values (zero except on Dirichlet nodes).
    pub dirichlet_values: Vec<Complex64>,
}

/// Gradients of the three barycentric functions and the area.
fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let inv = 1.0 / area2;
    let g = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (g, 0.5 * area2)
}

/// Assemble with homogeneous Dirichlet data on the outer circle.
pub fn assemble(mesh: &Mesh, params: &ModelParams) -> Result<ComplexSystem> {
    assemble_with_boundary(mesh, params, |_| Complex64::default())
}

/// Assemble with Dirichlet data `g` on the outer circle, lifted into the right-hand side.
pub fn assemble_with_boundary(
    mesh: &Mesh,
    params: &ModelParams,
    g: impl Fn([f64; 2]) -> Complex64,
) -> Result<ComplexSystem> {
    params.validate()?;
    if mesh.radii != [params.r0, params.r1, params.r2] {
        return Err(Error::Assembly(format!(
            "mesh was built for radii {:?}, parameters have [{}, {}, {}]",
            mesh.radii, params.r0, params.r1, params.r2
        )));
    }

    let n_nodes = mesh.nodes.len();
    let mut dof_of_node = vec![None; n_nodes];
    let mut dirichlet_values = vec![Complex64::default(); n_nodes];
    for &b in &mesh.boundary_nodes {
        dirichlet_values[b] = g(mesh.nodes[b]);
    }
    let mut is_dirichlet = vec![false; n_nodes];
    for &b in &mesh.boundary_nodes {
        is_dirichlet[b] = true;
    }
    let mut node_of_dof = Vec::with_capacity(mesh.dof_count);
    for node in 0..n_nodes {
        if !is_dirichlet[node] {
            dof_of_node[node] = Some(node_of_dof.len());
            node_of_dof.push(node);
        }
    }
    let n = node_of_dof.len();

    let source = params.source_density();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    let mut rhs = vec![Complex64::default(); n];
    for tri in &mesh.triangles {
        let p = tri.nodes.map(|i| mesh.nodes[i]);
        let (grad, area) = p1_gradients(p);
        if !(area > 0.0) {
            return Err(Error::Assembly(format!("triangle {:?} has non-positive area", tri.nodes)));
        }
        let nu = 1.0 / (MU0 * tri.region.relative_mu(params));
        let mass = params.omega * tri.region.sigma(params) * area / 12.0;
        let load = if tri.region == Region::Wire { source * area / 3.0 } else { 0.0 };
        for a in 0..3 {
            let Some(row) = dof_of_node[tri.nodes[a]] else { continue };
            rhs[row] += load;
            for b in 0..3 {
                let stiff = nu * area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                let m = if a == b { 2.0 * mass } else { mass };
                let entry = Complex64::new(stiff, m);
                match dof_of_node[tri.nodes[b]] {
                    Some(col) => triplets.push((row, col, entry)),
                    None => rhs[row] -= entry * dirichlet_values[tri.nodes[b]],
                }
            }
        }
    }

    Ok(ComplexSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
        dof_of_node,
        node_of_dof,
        dirichlet_values,
    })
}

/// Nodal solution on all mesh nodes.
#[derive(Debug, Clone)]
pub struct Solution<'m> {
    pub mesh: &'m Mesh,
    pub values: Vec<Complex64>,
    pub relative_residual: f64,
    /// Componentwise backward error, present when the residual target sits
    /// below the rounding floor and the solve was accepted on this measure.
    pub backward_error: Option<f64>,
}

pub fn solve<'m>(mesh: &'m Mesh, sys: &ComplexSystem) -> Result<Solution<'m>> {
    let symbolic = SymbolicLdl::analyze(&sys.matrix);
    solve_with(&symbolic, mesh, sys)
}

/// Solve reusing a symbolic analysis of the same sparsity pattern.
pub fn solve_with<'m>(symbolic: &SymbolicLdl, mesh: &'m Mesh, sys: &ComplexSystem) -> Result<Solution<'m>> {
    if sys.dof_of_node.len() != mesh.nodes.len() {
        return Err(Error::Assembly("system does not belong to this mesh".into()));
    }
    let report = sparse::solve_refined_with(symbolic, &sys.matrix, &sys.rhs, RESIDUAL_TOL)?;
    let mut values = sys.dirichlet_values.clone();
    for (dof, &node) in sys.node_of_dof.iter().enumerate() {
        values[node] = report.x[dof];
    }
    Ok(Solution { mesh, values, relative_residual: report.relative_residual, backward_error: report.backward_error })
}

/// Magnetic energy per unit length `sum_e area_e |grad A_z|^2 / (2 mu_e)` in J/m.
pub fn energy(sol: &Solution<'_>, params: &ModelParams) -> f64 {
    let mesh = sol.mesh;
    let mut w = 0.0;
    for tri in &mesh.triangles {
        let p = tri.nodes.map(|i| mesh.nodes[i]);
        let (grad, area) = p1_gradients(p);
        let mut gx = Complex64::default();
        let mut gy = Complex64::default();
        for a in 0..3 {
            let v = sol.values[tri.nodes[a]];
            gx += v * grad[a][0];
            gy += v * grad[a][1];
        }
        let mu = MU0 * tri.region.relative_mu(params);
        w += area * (gx.norm_sqr() + gy.norm_sqr()) / (2.0 * mu);
    }
    w
}

/// One row of the per-solve debug log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRecord {
    pub sample_index: u64,
    pub level: usize,
    pub n_dof: usize,
    pub relative_residual: f64,
    pub energy: f64,
}

impl SolveRecord {
    pub const CSV_HEADER: &'static str = "sample_id,level,n_dof,residual,w";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e}",
            self.sample_index, self.level, self.n_dof, self.relative_residual, self.energy
        )
    }
}

const MAX_CACHED_LEVELS: usize = 16;

/// Fixed model data plus the mesh family: everything needed to turn a
/// [`ParamSample`] and a level into an energy.
///
/// Symbolic factorizations are cached per level; the mesh topology of a level
/// does not depend on the sample.
#[derive(Debug, Clone)]
pub struct Problem {
    pub fixed: ModelParams,
    pub dists: ParameterDistributions,
    pub mesh: MeshConfig,
    symbolic: Vec<OnceLock<SymbolicLdl>>,
}

impl Problem {
    pub fn new(fixed: ModelParams, dists: ParameterDistributions, mesh: MeshConfig) -> Result<Self> {
        dists.validate(&fixed)?;
        mesh.validate()?;
        fixed.nominal(&dists).validate()?;
        Ok(Problem {
            fixed,
            dists,
            mesh,
            symbolic: (0..MAX_CACHED_LEVELS).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn level_spec(&self, level: usize) -> LevelSpec {
        self.mesh.level(level)
    }

    pub fn dof_count(&self, level: usize) -> usize {
        self.level_spec(level).dof_count()
    }

    pub fn nominal_params(&self) -> ModelParams {
        self.fixed.nominal(&self.dists)
    }

    pub fn draw(&self, master_seed: u64, sample_index: u64) -> ParamSample {
        self.dists.draw(master_seed, sample_index)
    }

    /// Solve one parameter set on one mesh level.
    pub fn solve_params(&self, params: &ModelParams, spec: &LevelSpec) -> Result<(f64, f64)> {
        let mesh = build_mesh(params, spec)?;
        let sys = assemble(&mesh, params)?;
        let cached = (spec.base == self.mesh)
            .then(|| self.symbolic.get(spec.level))
            .flatten()
            .map(|cell| cell.get_or_init(|| SymbolicLdl::analyze(&sys.matrix)));
        let sol = match cached {
            Some(symbolic) => solve_with(symbolic, &mesh, &sys)?,
            None => solve(&mesh, &sys)?,
        };
        Ok((energy(&sol, params), sol.relative_residual))
    }

    pub fn evaluate_detailed(&self, s: &ParamSample, level: usize) -> Result<SolveRecord> {
        let params = self.fixed.apply_sample(s)?;
        let spec = self.level_spec(level);
        let (w, residual) = self.solve_params(&params, &spec)?;
        Ok(SolveRecord {
            sample_index: s.sample_index,
            level,
            n_dof: spec.dof_count(),
            relative_residual: residual,
            energy: w,
        })
    }

    /// `W_l(theta)`: apply the sample, mesh level `l`, assemble, solve, integrate the energy.
    pub fn evaluate_qoi(&self, s: &ParamSample, level: usize) -> Result<f64> {
        let params = self.fixed.apply_sample(s)?;
        Ok(self.solve_params(&params, &self.level_spec(level))?.0)
    }

    /// `(W_l, W_{l-1})` for the same sample.
    pub fn evaluate_pair(&self, s: &ParamSample, level: usize) -> Result<(f64, f64)> {
        if level == 0 {
            return Err(Error::config("evaluate_pair needs level >= 1"));
        }
        self.evaluate_pair_with(s, &self.level_spec(level), &self.level_spec(level - 1))
    }

    /// Coupled evaluation on two explicit mesh specifications.
    pub fn evaluate_pair_with(&self, s: &ParamSample, fine: &LevelSpec, coarse: &LevelSpec) -> Result<(f64, f64)> {
        let params = self.fixed.apply_sample(s)?;
        let w_fine = self.solve_params(&params, fine)?.0;
        let w_coarse = self.solve_params(&params, coarse)?.0;
        Ok((w_fine, w_coarse))
    }
}
